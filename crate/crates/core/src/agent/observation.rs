use std::collections::VecDeque;

use serde::Serialize;

/// What one sender saw during one slot.
///
/// Bitmaps are indexed by sender id. `overheard` never has the owner's bit
/// set; `ack_bitmap` is zero when no aggregated ACK arrived.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct SlotObservation {
    pub own_action: u8,
    pub overheard: u64,
    pub ack_bitmap: u64,
    pub own_ack: bool,
    /// Queue position reported with the own ACK, scaled by `n_senders - 1`.
    pub phi_norm: f64,
    pub n_concurrent: u32,
}

impl SlotObservation {
    /// Features per slot: own action, overheard bits of the `n - 1` other
    /// senders, `n` ACK bits, own ACK, scaled queue position and the
    /// concurrent-sender count scaled by `n`.
    pub fn width(n_senders: usize) -> usize {
        2 * n_senders + 3
    }

    pub fn phi_norm(phi: usize, n_senders: usize) -> f64 {
        if n_senders <= 1 {
            0.0
        } else {
            phi as f64 / (n_senders - 1) as f64
        }
    }

    pub fn encode_into(&self, me: usize, n_senders: usize, out: &mut Vec<f64>) {
        out.push(self.own_action as f64);
        for j in (0..n_senders).filter(|&j| j != me) {
            out.push(((self.overheard >> j) & 1) as f64);
        }
        for j in 0..n_senders {
            out.push(((self.ack_bitmap >> j) & 1) as f64);
        }
        out.push(self.own_ack as u8 as f64);
        out.push(self.phi_norm);
        out.push(self.n_concurrent as f64 / n_senders as f64);
    }

    /// Joint action vector as seen by sender `me`: its own action plus
    /// every sender known to have transmitted.
    pub fn joint_actions(&self, me: usize) -> u64 {
        let own = if self.own_action == 1 { 1u64 << me } else { 0 };
        own | self.overheard | self.ack_bitmap
    }
}

/// The last `M` slot observations, oldest first, zero-padded at start.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationWindow {
    slots: VecDeque<SlotObservation>,
    m: usize,
}

impl ObservationWindow {
    pub fn new(m: usize) -> Self {
        Self { slots: std::iter::repeat_n(SlotObservation::default(), m).collect(), m }
    }

    pub fn reset(&mut self) {
        *self = Self::new(self.m);
    }

    pub fn push(&mut self, obs: SlotObservation) {
        self.slots.pop_front();
        self.slots.push_back(obs);
    }

    pub fn latest(&self) -> &SlotObservation {
        self.slots.back().expect("window is never empty")
    }

    pub fn dim(&self, n_senders: usize) -> usize {
        self.m * SlotObservation::width(n_senders)
    }

    pub fn stacked(&self, me: usize, n_senders: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim(n_senders));
        for s in &self.slots {
            s.encode_into(me, n_senders, &mut out);
        }
        out
    }
}
