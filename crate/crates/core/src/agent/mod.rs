//! Per-sender logic of the learned access protocol.

mod completion;
mod fairness;
mod observation;

pub use completion::{complete_observation, lex_key, ConvergenceHistogram, Tally};
pub use fairness::{order_correction, reward, FairnessState, RewardParams};
pub use observation::{ObservationWindow, SlotObservation};

use rand::Rng;
use serde::Serialize;

use crate::config::LearningConfig;
use crate::dqn::{greedy_action, DqnLearner, Experience, NonFiniteLoss};
use crate::rng::{streams, SimRng};
use crate::sink::AggregatedAck;
use crate::types::NodeId;

/// What reached one sender cleanly during one slot.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NodeSlotInput {
    /// Senders whose data frame was cleanly overheard.
    pub overheard: u64,
    pub ack: Option<AggregatedAck>,
    /// Any clean frame from the sink, including ACKs for other slots.
    pub sink_frame_heard: bool,
}

/// A decision awaiting its reward.
#[derive(Debug, Clone, PartialEq)]
pub struct PendingExperience {
    pub slot_index: u64,
    pub seq: u32,
    pub stacked_obs_before: Vec<f64>,
    pub action: u8,
    pub reward: Option<f64>,
    /// End of the slot in seconds; no ACK after this counts as a failure.
    pub deadline: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SilenceState {
    pub failures: u32,
    pub silent: bool,
    pub entered_slot: Option<u64>,
}

/// Per-slot agent log line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentLogRecord {
    pub node: usize,
    pub slot: u64,
    pub action: u8,
    #[serde(rename = "F")]
    pub f: Option<f64>,
    #[serde(rename = "C")]
    pub c: Option<f64>,
    pub reward: Option<f64>,
    pub silence: bool,
    pub own_ack: bool,
    /// Bits added by observation completion.
    pub completed_overheard: u64,
    pub completed_ack: u64,
}

/// How `ingest_slot_end` treats the slot.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IngestOptions {
    pub complete: bool,
    pub record_histogram: bool,
    pub terminal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotOutcome {
    pub log: AgentLogRecord,
    pub experience: Option<Experience>,
    /// The observation as pushed into the window.
    pub observation: SlotObservation,
}

#[derive(Debug, Clone)]
pub struct EamacAgent {
    pub id: usize,
    n_senders: usize,
    pub learner: DqnLearner,
    window: ObservationWindow,
    fairness: FairnessState,
    params: RewardParams,
    silence_threshold: u32,
    pub silence: SilenceState,
    pending: Option<PendingExperience>,
    pub histogram: ConvergenceHistogram,
    policy_rng: SimRng,
    data_seq: u32,
}

impl EamacAgent {
    pub fn new(id: usize, n_senders: usize, lrn: &LearningConfig, seed: u64) -> Self {
        let window = ObservationWindow::new(lrn.window_m);
        let learner = DqnLearner::new(window.dim(n_senders), lrn, seed, id);
        Self::with_learner(id, n_senders, lrn, seed, learner)
    }

    pub fn with_learner(id: usize, n_senders: usize, lrn: &LearningConfig, seed: u64, learner: DqnLearner) -> Self {
        let window = ObservationWindow::new(lrn.window_m);
        assert_eq!(learner.online.input_dim(), window.dim(n_senders), "network arity does not match the observation");
        Self {
            id,
            n_senders,
            learner,
            window,
            fairness: FairnessState::new(lrn.max_steps),
            params: RewardParams { r_s: lrn.r_s, r_p: lrn.r_p, p_base: lrn.p_base, w_order: lrn.w_order(n_senders) },
            silence_threshold: lrn.silence_threshold,
            silence: SilenceState::default(),
            pending: None,
            histogram: ConvergenceHistogram::new(n_senders),
            policy_rng: SimRng::new(seed, streams::POLICY + id as u64),
            data_seq: 0,
        }
    }

    pub fn node(&self) -> NodeId {
        NodeId::sender(self.id)
    }

    /// Clears the window, fairness and silence state for a new episode.
    pub fn reset_episode(&mut self) {
        self.window.reset();
        self.fairness.reset();
        self.silence = SilenceState::default();
        self.pending = None;
    }

    pub fn window(&self) -> &ObservationWindow {
        &self.window
    }

    pub fn fairness(&self) -> &FairnessState {
        &self.fairness
    }

    pub fn stacked_observation(&self) -> Vec<f64> {
        self.window.stacked(self.id, self.n_senders)
    }

    /// Epsilon-greedy choice on the current window.
    pub fn policy(&mut self, obs: &[f64], epsilon: f64) -> u8 {
        if epsilon > 0.0 && self.policy_rng.random::<f64>() < epsilon {
            self.policy_rng.random_range(0..2u8)
        } else {
            greedy_action(&self.learner.q_values(obs)) as u8
        }
    }

    /// Chooses this slot's action. A silent node stays idle and records
    /// nothing to learn from. Returns the data sequence number when the
    /// node transmits.
    pub fn decide(&mut self, slot: u64, slot_end: f64, epsilon: f64) -> (u8, Option<u32>) {
        if self.silence.silent {
            return (0, None);
        }
        let obs = self.stacked_observation();
        let action = self.policy(&obs, epsilon);
        let seq = if action == 1 {
            self.data_seq = self.data_seq.wrapping_add(1);
            Some(self.data_seq)
        } else {
            None
        };
        self.pending = Some(PendingExperience {
            slot_index: slot,
            seq: seq.unwrap_or(0),
            stacked_obs_before: obs,
            action,
            reward: None,
            deadline: slot_end,
        });
        (action, seq)
    }

    /// Closes the slot: builds the observation from what arrived, settles
    /// the pending decision, updates silence, and slides the window.
    pub fn ingest_slot_end(&mut self, slot: u64, input: &NodeSlotInput, opts: IngestOptions) -> SlotOutcome {
        let pending = self.pending.take().filter(|p| p.slot_index == slot);
        let action = pending.as_ref().map_or(0, |p| p.action);
        let me = NodeId::sender(self.id);

        let ack = input.ack.as_ref().filter(|a| a.slot_index == slot);
        let ack_bitmap = ack.map_or(0, AggregatedAck::bitmap);
        let own = match (&pending, ack) {
            (Some(p), Some(a)) if p.action == 1 => a.find(me).filter(|c| c.seq == p.seq as u16),
            _ => None,
        };
        let raw = SlotObservation {
            own_action: action,
            overheard: input.overheard & !(1u64 << self.id),
            ack_bitmap,
            own_ack: own.is_some(),
            phi_norm: own.map_or(0.0, |c| SlotObservation::phi_norm(c.phi as usize, self.n_senders)),
            n_concurrent: ack_bitmap.count_ones(),
        };
        let previous = self.window.latest().joint_actions(self.id);
        let obs = if opts.complete { complete_observation(&raw, self.id, &self.histogram, Some(previous)) } else { raw };
        if opts.record_histogram && pending.is_some() {
            let joint = raw.joint_actions(self.id);
            self.histogram.record_after(previous, joint, joint & !raw.ack_bitmap != 0);
        }

        let was_silent = self.silence.silent;
        if was_silent {
            if input.sink_frame_heard && self.silence.entered_slot.is_some_and(|s| s < slot) {
                self.silence = SilenceState::default();
            }
        } else if action == 1 {
            if raw.own_ack {
                self.silence.failures = 0;
            } else {
                self.silence.failures += 1;
                if self.silence.failures >= self.silence_threshold {
                    self.silence.silent = true;
                    self.silence.entered_slot = Some(slot);
                }
            }
        }

        let mut log = AgentLogRecord {
            node: self.id,
            slot,
            action,
            f: None,
            c: None,
            reward: None,
            silence: was_silent,
            own_ack: raw.own_ack,
            completed_overheard: obs.overheard & !raw.overheard,
            completed_ack: obs.ack_bitmap & !raw.ack_bitmap,
        };
        self.window.push(obs);

        let experience = pending.map(|mut p| {
            let f = self.fairness.step(action, raw.n_concurrent, self.params.p_base);
            let phi = own.map_or(0, |c| c.phi as usize);
            let c = order_correction(action, raw.own_ack, phi, self.params.w_order);
            let r = reward(action, raw.own_ack, f, c, &self.params);
            p.reward = Some(r);
            log.f = Some(f);
            log.c = Some(c);
            log.reward = Some(r);
            Experience {
                obs: p.stacked_obs_before.iter().map(|&v| v as f32).collect(),
                action,
                reward: r,
                next_obs: self.stacked_observation().iter().map(|&v| v as f32).collect(),
                terminal: opts.terminal,
            }
        });
        SlotOutcome { log, experience, observation: obs }
    }

    pub fn learn(&mut self, e: Experience) -> Result<Option<f64>, NonFiniteLoss> {
        self.learner.remember(e);
        self.learner.train()
    }
}
