use rand::Rng;

use super::{acked, MacProtocol, SlotPlan};
use crate::harness::sim::SlotResult;
use crate::rng::{streams, SimRng};

/// One sender's slot-selection learner.
#[derive(Debug, Clone)]
pub struct UwAlohaQNode {
    pub q: Vec<f64>,
    /// Absolute slot at which the current frame starts.
    pub frame_start: u64,
    pub chosen: usize,
    pub frames_done: usize,
    seq: u32,
    in_flight: Option<u32>,
    rng: SimRng,
}

/// Frame-based ALOHA with a per-sender Q-table over slots of the frame.
///
/// Each sender transmits once per frame in the slot picked epsilon-greedily
/// from its table, updates that entry towards +1 or -1 after the slot, and
/// after a failure starts its next frame a uniform `[0, frame_len)` slots
/// late.
#[derive(Debug, Clone)]
pub struct UwAlohaQ {
    pub frame_len: usize,
    pub alpha: f64,
    pub explore_frames: usize,
    pub nodes: Vec<UwAlohaQNode>,
}

impl UwAlohaQ {
    pub fn new(n_senders: usize, frame_len: usize, alpha: f64, explore_frames: usize, seed: u64) -> Self {
        assert!(frame_len > 0);
        let mut nodes: Vec<UwAlohaQNode> = (0..n_senders)
            .map(|i| UwAlohaQNode {
                q: vec![0.0; frame_len],
                frame_start: 0,
                chosen: 0,
                frames_done: 0,
                seq: 0,
                in_flight: None,
                rng: SimRng::new(seed, streams::BASELINE + i as u64),
            })
            .collect();
        let mut p = Self { frame_len, alpha, explore_frames, nodes: Vec::new() };
        for n in nodes.iter_mut() {
            n.chosen = choose(n, frame_len, p.epsilon(0));
        }
        p.nodes = nodes;
        p
    }

    pub fn epsilon(&self, frames_done: usize) -> f64 {
        if self.explore_frames == 0 {
            0.0
        } else {
            (1.0 - frames_done as f64 / self.explore_frames as f64).max(0.0)
        }
    }

    /// Applies the outcome of the frame's transmission and schedules the
    /// next frame.
    pub fn update(&mut self, node: usize, success: bool) {
        let frame_len = self.frame_len;
        let eps = self.epsilon(self.nodes[node].frames_done + 1);
        let n = &mut self.nodes[node];
        let r = if success { 1.0 } else { -1.0 };
        n.q[n.chosen] += self.alpha * (r - n.q[n.chosen]);
        let backoff = if success { 0 } else { n.rng.random_range(0..frame_len) as u64 };
        n.frame_start += frame_len as u64 + backoff;
        n.frames_done += 1;
        n.chosen = choose(n, frame_len, eps);
    }
}

/// Epsilon-greedy slot choice with random tie-breaking.
fn choose(node: &mut UwAlohaQNode, frame_len: usize, eps: f64) -> usize {
    if node.rng.random::<f64>() < eps {
        return node.rng.random_range(0..frame_len);
    }
    let best = node.q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<usize> = (0..frame_len).filter(|&s| node.q[s] == best).collect();
    ties[node.rng.random_range(0..ties.len())]
}

impl MacProtocol for UwAlohaQ {
    fn name(&self) -> &'static str {
        "uwalohaq"
    }

    fn n_senders(&self) -> usize {
        self.nodes.len()
    }

    fn plan(&mut self, slot: u64, _slot_end: f64) -> SlotPlan {
        let actions: Vec<bool> = self.nodes.iter().map(|n| slot == n.frame_start + n.chosen as u64).collect();
        let mut seqs: Vec<u32> = self.nodes.iter().map(|n| n.seq).collect();
        let plan = SlotPlan::data(slot, &actions, &mut seqs);
        for (n, (s, tx)) in self.nodes.iter_mut().zip(seqs.into_iter().zip(&plan.data_tx)) {
            n.seq = s;
            n.in_flight = *tx;
        }
        plan
    }

    fn observe(&mut self, res: &SlotResult) {
        for i in 0..self.nodes.len() {
            if let Some(seq) = self.nodes[i].in_flight.take() {
                let ok = acked(res, i, seq);
                self.update(i, ok);
            }
        }
    }
}
