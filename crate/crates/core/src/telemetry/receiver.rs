use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{seq_is_newer, TelemetryPacket};
use crate::cop::{Foot, FootCopSample};

/// Five missed samples at the 50 ms period.
pub const DEFAULT_STALENESS_TIMEOUT_MS: u64 = 250;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Freshness {
    Fresh,
    Stale,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ReceiverError {
    #[error("no packet received yet from the {0:?} foot")]
    NoDataYet(Foot),
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Slot {
    sample: FootCopSample,
    seq: u16,
    arrival_ms: u64,
}

/// Latest-sample slot per foot plus staleness tracking.
#[derive(Debug, Clone)]
pub struct Receiver {
    timeout_ms: u64,
    slots: [Option<Slot>; 2],
    discarded: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceiverPoll {
    pub left: (FootCopSample, Freshness),
    pub right: (FootCopSample, Freshness),
}

impl ReceiverPoll {
    pub fn all_fresh(&self) -> bool {
        self.left.1 == Freshness::Fresh && self.right.1 == Freshness::Fresh
    }
}

impl Default for Receiver {
    fn default() -> Self {
        Self::new(DEFAULT_STALENESS_TIMEOUT_MS)
    }
}

impl Receiver {
    pub fn new(timeout_ms: u64) -> Self {
        Self {
            timeout_ms,
            slots: [None, None],
            discarded: 0,
        }
    }

    pub fn timeout_ms(&self) -> u64 {
        self.timeout_ms
    }

    /// Stores the packet unless its sequence number is not newer than the last
    /// accepted one for that foot. Returns whether it was accepted.
    pub fn accept(&mut self, packet: &TelemetryPacket, arrival_ms: u64) -> bool {
        let slot = &mut self.slots[packet.sample.foot.index()];
        if let Some(prev) = slot {
            if !seq_is_newer(packet.seq, prev.seq) {
                self.discarded += 1;
                return false;
            }
        }
        *slot = Some(Slot {
            sample: packet.sample,
            seq: packet.seq,
            arrival_ms,
        });
        true
    }

    pub fn last_seq(&self, foot: Foot) -> Option<u16> {
        self.slots[foot.index()].map(|s| s.seq)
    }

    pub fn discarded(&self) -> u64 {
        self.discarded
    }

    pub fn poll_foot(
        &self,
        foot: Foot,
        now_ms: u64,
    ) -> Result<(FootCopSample, Freshness), ReceiverError> {
        let slot = self.slots[foot.index()].ok_or(ReceiverError::NoDataYet(foot))?;
        let age = now_ms.saturating_sub(slot.arrival_ms);
        let freshness = if age > self.timeout_ms {
            Freshness::Stale
        } else {
            Freshness::Fresh
        };
        Ok((slot.sample, freshness))
    }

    pub fn poll(&self, now_ms: u64) -> Result<ReceiverPoll, ReceiverError> {
        Ok(ReceiverPoll {
            left: self.poll_foot(Foot::Left, now_ms)?,
            right: self.poll_foot(Foot::Right, now_ms)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn packet(foot: Foot, seq: u16, f: f64) -> TelemetryPacket {
        let mut sample = FootCopSample::unloaded(foot, 0);
        sample.f_total = f;
        TelemetryPacket { seq, sample }
    }

    #[test]
    fn no_data_yet() {
        let r = Receiver::default();
        assert_eq!(r.poll(0), Err(ReceiverError::NoDataYet(Foot::Left)));
        let mut r = Receiver::default();
        r.accept(&packet(Foot::Left, 0, 1.0), 0);
        assert_eq!(r.poll(0), Err(ReceiverError::NoDataYet(Foot::Right)));
    }

    #[test]
    fn freshness_follows_timeout() {
        let mut r = Receiver::default();
        r.accept(&packet(Foot::Left, 0, 1.0), 0);
        r.accept(&packet(Foot::Right, 0, 1.0), 0);
        assert_eq!(r.poll(100).unwrap().left.1, Freshness::Fresh);
        assert_eq!(r.poll(250).unwrap().left.1, Freshness::Fresh);
        assert_eq!(r.poll(300).unwrap().left.1, Freshness::Stale);
    }

    #[test]
    fn old_sequence_is_discarded() {
        let mut r = Receiver::default();
        assert!(r.accept(&packet(Foot::Left, 10, 1.0), 0));
        assert!(!r.accept(&packet(Foot::Left, 9, 2.0), 5));
        assert!(!r.accept(&packet(Foot::Left, 10, 3.0), 5));
        let (s, _) = r.poll_foot(Foot::Left, 5).unwrap();
        assert_eq!(s.f_total, 1.0);
        assert_eq!(r.discarded(), 2);
    }

    #[test]
    fn sequence_wraps() {
        let mut r = Receiver::default();
        assert!(r.accept(&packet(Foot::Right, u16::MAX, 1.0), 0));
        assert!(r.accept(&packet(Foot::Right, 0, 2.0), 50));
        assert_eq!(r.last_seq(Foot::Right), Some(0));
    }
}
