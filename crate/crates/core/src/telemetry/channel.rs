use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Lossy datagram link parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub loss_prob: f64,
    pub latency_base_ms: u64,
    /// Extra latency drawn uniformly from `0..=latency_jitter_ms`.
    pub latency_jitter_ms: u64,
    /// Allow a later packet to overtake an earlier one.
    pub reorder: bool,
    pub seed: u64,
}

impl Default for ChannelModel {
    fn default() -> Self {
        Self {
            loss_prob: 0.0,
            latency_base_ms: 4,
            latency_jitter_ms: 4,
            reorder: false,
            seed: 0,
        }
    }
}

impl ChannelModel {
    pub fn ideal() -> Self {
        Self {
            loss_prob: 0.0,
            latency_base_ms: 0,
            latency_jitter_ms: 0,
            reorder: false,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delivery {
    pub submitted_at_ms: u64,
    pub delivered_at_ms: u64,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone)]
struct InFlight {
    deliver_at: u64,
    order: u64,
    submitted_at: u64,
    bytes: Vec<u8>,
}

/// In-process emulation of the wireless link, driven by the simulation clock.
#[derive(Debug, Clone)]
pub struct Channel {
    model: ChannelModel,
    rng: ChaCha8Rng,
    in_flight: Vec<InFlight>,
    next_order: u64,
    last_deliver_at: u64,
    submitted: u64,
    dropped: u64,
    outage: bool,
}

impl Channel {
    pub fn new(model: ChannelModel) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(model.seed),
            model,
            in_flight: Vec::new(),
            next_order: 0,
            last_deliver_at: 0,
            submitted: 0,
            dropped: 0,
            outage: false,
        }
    }

    pub fn model(&self) -> &ChannelModel {
        &self.model
    }

    /// Hands a datagram to the link at `now_ms`.
    pub fn submit(&mut self, bytes: Vec<u8>, now_ms: u64) {
        // always draw both values so the random stream does not depend on outcomes
        let lost = self.rng.random::<f64>() < self.model.loss_prob;
        let jitter = if self.model.latency_jitter_ms > 0 {
            self.rng.random_range(0..=self.model.latency_jitter_ms)
        } else {
            let _ = self.rng.random::<u64>();
            0
        };
        self.submitted += 1;
        if lost || self.outage {
            self.dropped += 1;
            return;
        }
        let mut deliver_at = now_ms + self.model.latency_base_ms + jitter;
        if !self.model.reorder {
            deliver_at = deliver_at.max(self.last_deliver_at);
            self.last_deliver_at = deliver_at;
        }
        self.in_flight.push(InFlight {
            deliver_at,
            order: self.next_order,
            submitted_at: now_ms,
            bytes,
        });
        self.next_order += 1;
    }

    /// Releases every datagram due at or before `now_ms`, in delivery order.
    pub fn step(&mut self, now_ms: u64) -> Vec<Delivery> {
        let (mut due, later): (Vec<_>, Vec<_>) = std::mem::take(&mut self.in_flight)
            .into_iter()
            .partition(|p| p.deliver_at <= now_ms);
        self.in_flight = later;
        due.sort_by_key(|p| (p.deliver_at, p.order));
        due.into_iter()
            .map(|p| Delivery {
                submitted_at_ms: p.submitted_at,
                delivered_at_ms: p.deliver_at,
                bytes: p.bytes,
            })
            .collect()
    }

    /// While set, every submitted datagram is lost.
    pub fn set_outage(&mut self, outage: bool) {
        self.outage = outage;
    }

    pub fn submitted(&self) -> u64 {
        self.submitted
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    pub fn in_flight(&self) -> usize {
        self.in_flight.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ideal_link_delivers_everything_in_order() {
        let mut ch = Channel::new(ChannelModel::ideal());
        for i in 0..10u8 {
            ch.submit(vec![i], 100);
        }
        let got = ch.step(100);
        assert_eq!(got.len(), 10);
        assert!(got
            .iter()
            .enumerate()
            .all(|(i, d)| d.bytes == vec![i as u8]));
    }

    #[test]
    fn total_loss() {
        let mut ch = Channel::new(ChannelModel {
            loss_prob: 1.0,
            ..ChannelModel::ideal()
        });
        for i in 0..100u8 {
            ch.submit(vec![i], u64::from(i));
        }
        assert!(ch.step(1_000).is_empty());
        assert_eq!(ch.dropped(), 100);
    }

    #[test]
    fn latency_holds_packets_back() {
        let mut ch = Channel::new(ChannelModel {
            latency_base_ms: 10,
            latency_jitter_ms: 0,
            ..ChannelModel::ideal()
        });
        ch.submit(vec![1], 0);
        assert!(ch.step(9).is_empty());
        let got = ch.step(10);
        assert_eq!(got[0].delivered_at_ms, 10);
    }

    #[test]
    fn fifo_without_reorder() {
        let mut ch = Channel::new(ChannelModel {
            latency_base_ms: 0,
            latency_jitter_ms: 40,
            seed: 9,
            ..ChannelModel::ideal()
        });
        for i in 0..200u64 {
            ch.submit(i.to_le_bytes().to_vec(), i);
        }
        let got = ch.step(10_000);
        let order: Vec<u64> = got
            .iter()
            .map(|d| u64::from_le_bytes(d.bytes.clone().try_into().unwrap()))
            .collect();
        assert!(order.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn reorder_can_overtake() {
        let mut ch = Channel::new(ChannelModel {
            latency_base_ms: 0,
            latency_jitter_ms: 40,
            reorder: true,
            seed: 9,
            ..ChannelModel::ideal()
        });
        for i in 0..200u64 {
            ch.submit(i.to_le_bytes().to_vec(), i);
        }
        let got = ch.step(10_000);
        assert_eq!(got.len(), 200);
        let order: Vec<u64> = got
            .iter()
            .map(|d| u64::from_le_bytes(d.bytes.clone().try_into().unwrap()))
            .collect();
        assert!(order.windows(2).any(|w| w[0] > w[1]));
    }
}
