use rand::Rng;

use super::{MacProtocol, SlotPlan};
use crate::harness::sim::SlotResult;
use crate::rng::{streams, SimRng};

/// Each sender transmits independently with probability `q` per slot.
#[derive(Debug, Clone)]
pub struct SlottedAloha {
    pub q: f64,
    rngs: Vec<SimRng>,
    seqs: Vec<u32>,
}

impl SlottedAloha {
    pub fn new(n_senders: usize, q: f64, seed: u64) -> Self {
        assert!((0.0..=1.0).contains(&q), "transmit probability {q} outside [0, 1]");
        Self {
            q,
            rngs: (0..n_senders).map(|i| SimRng::new(seed, streams::BASELINE + i as u64)).collect(),
            seqs: vec![0; n_senders],
        }
    }

    pub fn decide(&mut self, node: usize) -> bool {
        self.rngs[node].random_bool(self.q)
    }
}

impl MacProtocol for SlottedAloha {
    fn name(&self) -> &'static str {
        "aloha"
    }

    fn n_senders(&self) -> usize {
        self.seqs.len()
    }

    fn plan(&mut self, slot: u64, _slot_end: f64) -> SlotPlan {
        let actions: Vec<bool> = (0..self.seqs.len()).map(|i| self.decide(i)).collect();
        SlotPlan::data(slot, &actions, &mut self.seqs)
    }

    fn observe(&mut self, _res: &SlotResult) {}
}
