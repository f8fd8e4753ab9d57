use std::io;
use std::net::{SocketAddr, UdpSocket};

use super::PACKET_LEN;

/// Loopback datagram transport used in live mode.
///
/// Foot units send through `tx`, the controller drains `rx`. Both ends are
/// non-blocking.
#[derive(Debug)]
pub struct UdpLink {
    tx: UdpSocket,
    rx: UdpSocket,
    target: SocketAddr,
}

impl UdpLink {
    /// Binds the receiving end on `127.0.0.1:port` (0 picks a free port).
    pub fn bind(port: u16) -> io::Result<Self> {
        let rx = UdpSocket::bind(("127.0.0.1", port))?;
        rx.set_nonblocking(true)?;
        let tx = UdpSocket::bind(("127.0.0.1", 0))?;
        tx.set_nonblocking(true)?;
        let target = rx.local_addr()?;
        Ok(Self { tx, rx, target })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.target
    }

    pub fn send(&self, bytes: &[u8]) -> io::Result<()> {
        self.tx.send_to(bytes, self.target).map(|_| ())
    }

    /// Drains every datagram currently queued on the socket.
    pub fn drain(&self) -> io::Result<Vec<Vec<u8>>> {
        let mut out = Vec::new();
        let mut buf = [0u8; 2 * PACKET_LEN];
        loop {
            match self.rx.recv_from(&mut buf) {
                Ok((n, _)) => out.push(buf[..n].to_vec()),
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => return Ok(out),
                Err(e) => return Err(e),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::time::{Duration, Instant};

    #[test]
    fn loopback_round_trip() {
        let link = UdpLink::bind(0).unwrap();
        link.send(b"hello").unwrap();
        let deadline = Instant::now() + Duration::from_secs(2);
        loop {
            let got = link.drain().unwrap();
            if !got.is_empty() {
                assert_eq!(got, vec![b"hello".to_vec()]);
                break;
            }
            assert!(Instant::now() < deadline, "datagram never arrived");
            std::thread::sleep(Duration::from_millis(1));
        }
    }
}
