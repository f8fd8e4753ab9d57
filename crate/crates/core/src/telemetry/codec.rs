use thiserror::Error;

use crate::calibration::CELLS_PER_FOOT;
use crate::cop::{Foot, FootCopSample};

pub const PACKET_MAGIC: [u8; 2] = *b"CP";
pub const PACKET_VERSION: u8 = 1;
/// Fixed packet size including the trailing CRC.
///
/// ```text
/// off len field
///   0   2 magic "CP"
///   2   1 version
///   3   1 foot id (0 left, 1 right)
///   4   2 seq            u16
///   6   4 timestamp_ms   u32
///  10  16 per-cell mass  4 x i32 centigrams
///  26   2 x_cop          i16 milli-units
///  28   2 y_cop          i16 milli-units
///  30   4 f_total        i32 centigrams
///  34   2 crc16          CCITT-FALSE over bytes 0..34
/// ```
/// All multi-byte fields are little-endian.
pub const PACKET_LEN: usize = 36;
const BODY_LEN: usize = PACKET_LEN - 2;

const PACKET_CRC: crc::Crc<u16> = crc::Crc::<u16>::new(&crc::CRC_16_IBM_3740);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("{field} out of range for the wire format")]
    RangeOverflow { field: &'static str },
    #[error("packet truncated: {0} bytes")]
    Truncated(usize),
    #[error("packet has {0} trailing bytes")]
    TrailingBytes(usize),
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 2]),
    #[error("unsupported version {0}")]
    BadVersion(u8),
    #[error("crc mismatch: computed {computed:#06x}, packet {stored:#06x}")]
    BadCrc { computed: u16, stored: u16 },
    #[error("unknown foot id {0}")]
    UnknownFoot(u8),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TelemetryPacket {
    pub seq: u16,
    pub sample: FootCopSample,
}

fn centigrams(field: &'static str, grams: f64) -> Result<i32, CodecError> {
    let cg = (grams * 100.0).round();
    if !cg.is_finite() || cg < f64::from(i32::MIN) || cg > f64::from(i32::MAX) {
        return Err(CodecError::RangeOverflow { field });
    }
    Ok(cg as i32)
}

fn milli(field: &'static str, value: f64) -> Result<i16, CodecError> {
    let m = (value * 1000.0).round();
    if !m.is_finite() || m.abs() > 1000.0 {
        return Err(CodecError::RangeOverflow { field });
    }
    Ok(m as i16)
}

pub fn encode(packet: &TelemetryPacket) -> Result<[u8; PACKET_LEN], CodecError> {
    let s = &packet.sample;
    let mut out = [0u8; PACKET_LEN];
    out[0..2].copy_from_slice(&PACKET_MAGIC);
    out[2] = PACKET_VERSION;
    out[3] = s.foot.index() as u8;
    out[4..6].copy_from_slice(&packet.seq.to_le_bytes());
    out[6..10].copy_from_slice(&s.timestamp_ms.to_le_bytes());
    for (i, m) in s.per_cell.iter().enumerate() {
        let at = 10 + 4 * i;
        out[at..at + 4].copy_from_slice(&centigrams("per_cell", *m)?.to_le_bytes());
    }
    out[26..28].copy_from_slice(&milli("x_cop", s.x_cop)?.to_le_bytes());
    out[28..30].copy_from_slice(&milli("y_cop", s.y_cop)?.to_le_bytes());
    out[30..34].copy_from_slice(&centigrams("f_total", s.f_total)?.to_le_bytes());
    let crc = PACKET_CRC.checksum(&out[..BODY_LEN]);
    out[BODY_LEN..].copy_from_slice(&crc.to_le_bytes());
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<TelemetryPacket, CodecError> {
    if bytes.len() < PACKET_LEN {
        return Err(CodecError::Truncated(bytes.len()));
    }
    if bytes.len() > PACKET_LEN {
        return Err(CodecError::TrailingBytes(bytes.len() - PACKET_LEN));
    }
    if bytes[0..2] != PACKET_MAGIC {
        return Err(CodecError::BadMagic([bytes[0], bytes[1]]));
    }
    if bytes[2] != PACKET_VERSION {
        return Err(CodecError::BadVersion(bytes[2]));
    }
    let computed = PACKET_CRC.checksum(&bytes[..BODY_LEN]);
    let stored = u16::from_le_bytes([bytes[BODY_LEN], bytes[BODY_LEN + 1]]);
    if computed != stored {
        return Err(CodecError::BadCrc { computed, stored });
    }
    let foot = Foot::from_index(bytes[3]).ok_or(CodecError::UnknownFoot(bytes[3]))?;
    let i32_at = |at: usize| i32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"));
    let i16_at = |at: usize| i16::from_le_bytes([bytes[at], bytes[at + 1]]);
    let mut per_cell = [0.0; CELLS_PER_FOOT];
    for (i, m) in per_cell.iter_mut().enumerate() {
        *m = f64::from(i32_at(10 + 4 * i)) / 100.0;
    }
    Ok(TelemetryPacket {
        seq: u16::from_le_bytes([bytes[4], bytes[5]]),
        sample: FootCopSample {
            foot,
            timestamp_ms: u32::from_le_bytes(bytes[6..10].try_into().expect("4 bytes")),
            per_cell,
            x_cop: f64::from(i16_at(26)) / 1000.0,
            y_cop: f64::from(i16_at(28)) / 1000.0,
            f_total: f64::from(i32_at(30)) / 100.0,
        },
    })
}
