//! Foot unit to controller link: packet codec, an emulated lossy channel, and
//! the receiver-side freshness policy.

mod channel;
mod codec;
mod receiver;
mod udp;

pub use channel::{Channel, ChannelModel, Delivery};
pub use codec::{
    decode, encode, CodecError, TelemetryPacket, PACKET_LEN, PACKET_MAGIC, PACKET_VERSION,
};
pub use receiver::{
    Freshness, Receiver, ReceiverError, ReceiverPoll, DEFAULT_STALENESS_TIMEOUT_MS,
};
pub use udp::UdpLink;

/// Foot units transmit one packet per period.
pub const SAMPLE_PERIOD_MS: u64 = 50;

/// Returns true when `seq` is newer than `last` under 16-bit serial number
/// arithmetic (window of 32768).
pub fn seq_is_newer(seq: u16, last: u16) -> bool {
    let diff = seq.wrapping_sub(last);
    diff != 0 && diff < 0x8000
}
