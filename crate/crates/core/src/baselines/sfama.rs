use rand::Rng;

use super::{MacProtocol, SlotPlan};
use crate::harness::sim::{data_frame, rts_frame, SinkReply, SlotResult};
use crate::rng::{streams, SimRng};
use crate::types::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfamaState {
    Idle,
    RtsSent,
    /// CTS received; data goes out in the next slot.
    Granted,
    DataSent,
}

/// Slotted RTS/CTS handshake with saturated senders.
///
/// Even slots carry RTS frames and the sink's CTS, odd slots carry the
/// granted sender's data and the sink's ACK, so one handshake spans two
/// slots. A sender whose RTS is not granted backs off a uniform
/// `[1, n_senders]` slots.
#[derive(Debug, Clone)]
pub struct Sfama {
    pub states: Vec<SfamaState>,
    /// First slot at which each sender may contend again.
    pub backoff_until: Vec<u64>,
    rngs: Vec<SimRng>,
    rts_seq: Vec<u32>,
    data_seq: Vec<u32>,
}

impl Sfama {
    pub fn new(n_senders: usize, seed: u64) -> Self {
        Self {
            states: vec![SfamaState::Idle; n_senders],
            backoff_until: vec![0; n_senders],
            rngs: (0..n_senders).map(|i| SimRng::new(seed, streams::BASELINE + i as u64)).collect(),
            rts_seq: vec![0; n_senders],
            data_seq: vec![0; n_senders],
        }
    }

    pub fn is_control_slot(slot: u64) -> bool {
        slot.is_multiple_of(2)
    }
}

impl MacProtocol for Sfama {
    fn name(&self) -> &'static str {
        "sfama"
    }

    fn n_senders(&self) -> usize {
        self.states.len()
    }

    fn plan(&mut self, slot: u64, _slot_end: f64) -> SlotPlan {
        let n = self.states.len();
        let mut frames = Vec::new();
        let mut data_tx = vec![None; n];
        if Self::is_control_slot(slot) {
            for i in 0..n {
                if self.states[i] == SfamaState::Idle && slot >= self.backoff_until[i] {
                    self.rts_seq[i] += 1;
                    frames.push(rts_frame(i, slot, self.rts_seq[i]));
                    self.states[i] = SfamaState::RtsSent;
                }
            }
            SlotPlan { frames, reply: SinkReply::Cts, data_tx }
        } else {
            for i in 0..n {
                if self.states[i] == SfamaState::Granted {
                    self.data_seq[i] += 1;
                    frames.push(data_frame(i, slot, self.data_seq[i]));
                    data_tx[i] = Some(self.data_seq[i]);
                    self.states[i] = SfamaState::DataSent;
                }
            }
            SlotPlan { frames, reply: SinkReply::AggAck, data_tx }
        }
    }

    fn observe(&mut self, res: &SlotResult) {
        for i in 0..self.states.len() {
            match self.states[i] {
                SfamaState::RtsSent => {
                    if res.grants_heard[i] == Some(NodeId::sender(i)) {
                        self.states[i] = SfamaState::Granted;
                    } else {
                        let b = self.rngs[i].random_range(1..=self.states.len() as u64);
                        self.backoff_until[i] = res.slot + 1 + b;
                        self.states[i] = SfamaState::Idle;
                    }
                }
                // Success or not, the reservation is over.
                SfamaState::DataSent => self.states[i] = SfamaState::Idle,
                SfamaState::Idle | SfamaState::Granted => {}
            }
        }
    }
}
