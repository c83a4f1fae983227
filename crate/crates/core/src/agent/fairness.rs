//! Fairness penalty, order correction and reward.

use std::collections::VecDeque;

/// Reward constants of one sender.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardParams {
    pub r_s: f64,
    pub r_p: f64,
    pub p_base: f64,
    pub w_order: f64,
}

/// Consecutive-action counter and the recent per-step penalties.
#[derive(Debug, Clone, PartialEq)]
pub struct FairnessState {
    h: usize,
    last_action: Option<u8>,
    history: VecDeque<f64>,
    capacity: usize,
    running: f64,
}

impl FairnessState {
    /// `capacity` is the run length preallocated for; longer runs grow the
    /// history.
    pub fn new(capacity: usize) -> Self {
        Self { h: 0, last_action: None, history: VecDeque::with_capacity(capacity), capacity: capacity.max(1), running: 0.0 }
    }

    pub fn reset(&mut self) {
        *self = Self::new(self.capacity);
    }

    pub fn h(&self) -> usize {
        self.h
    }

    /// Single-step penalty: `p` when transmitting, `p / max(1, N)` when
    /// idle, where `N` counts the senders confirmed in this slot.
    pub fn step_penalty(action: u8, n_concurrent: u32, p_base: f64) -> f64 {
        if action == 1 {
            p_base
        } else {
            p_base / n_concurrent.max(1) as f64
        }
    }

    /// Records this slot's action and returns the cumulative penalty over
    /// the current run of identical actions (including this slot).
    pub fn step(&mut self, action: u8, n_concurrent: u32, p_base: f64) -> f64 {
        let f = Self::step_penalty(action, n_concurrent, p_base);
        let repeat = self.last_action == Some(action);
        self.h = if repeat { self.h + 1 } else { 0 };
        self.last_action = Some(action);
        if !repeat {
            self.history.clear();
        }
        self.history.push_back(f);
        self.running = if repeat { self.running + f } else { f };

        let f_total = self.from_history();
        debug_assert_eq!(f_total, self.running, "history sum diverged from running sum");
        f_total
    }

    /// Sum of the last `h + 1` penalties, oldest first.
    pub fn from_history(&self) -> f64 {
        let run = (self.h + 1).min(self.history.len());
        self.history.iter().skip(self.history.len() - run).fold(0.0, |acc, f| acc + f)
    }

    pub fn running(&self) -> f64 {
        self.running
    }
}

/// `1 - w * phi` for an acknowledged transmission, 1 otherwise.
pub fn order_correction(action: u8, ack_received: bool, phi: usize, w_order: f64) -> f64 {
    if action == 1 && ack_received {
        1.0 - w_order * phi as f64
    } else {
        1.0
    }
}

pub fn reward(action: u8, ack_received: bool, f_total: f64, c: f64, params: &RewardParams) -> f64 {
    match (action, ack_received) {
        (1, true) => c * (params.r_s - f_total),
        (1, false) => params.r_p - f_total,
        _ => -f_total,
    }
}
