use super::{MacProtocol, SlotPlan};
use crate::harness::sim::SlotResult;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameSchedule {
    pub frame_len: usize,
    /// Slot within the frame owned by each sender.
    pub assignments: Vec<usize>,
    pub backoff_offset: usize,
}

impl FrameSchedule {
    pub fn round_robin(n_senders: usize) -> Self {
        Self { frame_len: n_senders, assignments: (0..n_senders).collect(), backoff_offset: 0 }
    }

    pub fn is_bijection(&self) -> bool {
        let mut seen = vec![false; self.frame_len];
        self.assignments.len() == self.frame_len
            && self.assignments.iter().all(|&a| a < self.frame_len && !std::mem::replace(&mut seen[a], true))
    }
}

#[derive(Debug, Clone)]
pub struct Tdma {
    pub schedule: FrameSchedule,
    seqs: Vec<u32>,
}

impl Tdma {
    pub fn new(n_senders: usize) -> Self {
        Self { schedule: FrameSchedule::round_robin(n_senders), seqs: vec![0; n_senders] }
    }

    pub fn decide(&self, node: usize, slot: u64) -> bool {
        let s = &self.schedule;
        (slot as usize + s.frame_len - s.backoff_offset % s.frame_len) % s.frame_len == s.assignments[node]
    }
}

impl MacProtocol for Tdma {
    fn name(&self) -> &'static str {
        "tdma"
    }

    fn n_senders(&self) -> usize {
        self.seqs.len()
    }

    fn plan(&mut self, slot: u64, _slot_end: f64) -> SlotPlan {
        let actions: Vec<bool> = (0..self.seqs.len()).map(|i| self.decide(i, slot)).collect();
        SlotPlan::data(slot, &actions, &mut self.seqs)
    }

    fn observe(&mut self, _res: &SlotResult) {}
}
