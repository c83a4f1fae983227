//! Comparison protocols sharing the slotted channel with the learned one.

mod aloha;
mod sfama;
mod tdma;
mod uwalohaq;

pub use aloha::SlottedAloha;
pub use sfama::{Sfama, SfamaState};
pub use tdma::{FrameSchedule, Tdma};
pub use uwalohaq::{UwAlohaQ, UwAlohaQNode};

use crate::channel::Frame;
use crate::harness::sim::{data_frame, SinkReply, SlotResult};

/// Frames to send at the start of a slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotPlan {
    pub frames: Vec<Frame>,
    pub reply: SinkReply,
    /// Per sender: sequence number of its data frame this slot.
    pub data_tx: Vec<Option<u32>>,
}

impl SlotPlan {
    /// A data slot in which the senders flagged in `actions` transmit.
    pub fn data(slot: u64, actions: &[bool], seqs: &mut [u32]) -> Self {
        let mut frames = Vec::new();
        let mut data_tx = vec![None; actions.len()];
        for (i, &a) in actions.iter().enumerate() {
            if a {
                seqs[i] = seqs[i].wrapping_add(1);
                frames.push(data_frame(i, slot, seqs[i]));
                data_tx[i] = Some(seqs[i]);
            }
        }
        Self { frames, reply: SinkReply::AggAck, data_tx }
    }
}

/// A MAC protocol driven one slot at a time.
pub trait MacProtocol {
    fn name(&self) -> &'static str;
    fn n_senders(&self) -> usize;
    fn plan(&mut self, slot: u64, slot_end: f64) -> SlotPlan;
    fn observe(&mut self, res: &SlotResult);
    fn is_silent(&self, _node: usize) -> bool {
        false
    }
}

/// True when sender `i` got its own ACK for `seq` in this slot.
pub(crate) fn acked(res: &SlotResult, i: usize, seq: u32) -> bool {
    res.inputs[i]
        .ack
        .as_ref()
        .filter(|a| a.slot_index == res.slot)
        .and_then(|a| a.find(crate::types::NodeId::sender(i)))
        .is_some_and(|c| c.seq == seq as u16)
}
