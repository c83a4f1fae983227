//! Training loop and evaluation wrapper for the learned protocol.

use super::sim::{data_frame, SinkReply, SlotResult, SlotSim};
use crate::agent::{AgentLogRecord, EamacAgent, IngestOptions};
use crate::baselines::{MacProtocol, SlotPlan};
use crate::config::{ExperimentConfig, LearningConfig, NetworkConfig};
use crate::error::{Error, Result};

/// Result of a training run.
#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub agents: Vec<EamacAgent>,
    /// Sum of all senders' rewards per episode.
    pub episode_rewards: Vec<f64>,
}

/// First episode whose joint actions enter the convergence histograms.
pub fn convergence_start(episodes: usize, fraction: f64) -> usize {
    let k = (episodes as f64 * fraction).ceil() as usize;
    episodes - k.min(episodes)
}

/// Trains one agent per sender. `cfg` carries the topology and the channel
/// seed; the training channel is lossless when `exp.train_lossless` is set.
/// `progress` is called after every episode with its index and sum reward.
pub fn train(
    cfg: &NetworkConfig,
    lrn: &LearningConfig,
    exp: &ExperimentConfig,
    seed: u64,
    mut progress: impl FnMut(usize, f64),
) -> Result<TrainOutput> {
    let n = cfg.n_senders;
    let mut agents: Vec<EamacAgent> = (0..n).map(|i| EamacAgent::new(i, n, lrn, seed)).collect();
    let chan_cfg = if exp.train_lossless { cfg.lossless() } else { cfg.clone() };
    let mut sim = SlotSim::new(&NetworkConfig { seed, ..chan_cfg });
    let conv_start = convergence_start(lrn.episodes, exp.convergence_fraction);
    let mut episode_rewards = Vec::with_capacity(lrn.episodes);
    let mut step_count = 0usize;

    for ep in 0..lrn.episodes {
        let eps = lrn.epsilon_schedule.at(ep, lrn.episodes);
        for a in agents.iter_mut() {
            a.reset_episode();
        }
        sim.reset_sink();
        let mut sum = 0.0;
        for _ in 0..lrn.max_steps {
            let slot = sim.next_slot();
            let end = sim.slot_end(slot);
            let seqs: Vec<Option<u32>> = agents.iter_mut().map(|a| a.decide(slot, end, eps).1).collect();
            let plan = plan_from(slot, &seqs);
            let res = sim.run_slot(plan.frames, plan.reply);
            let opts = IngestOptions { complete: false, record_histogram: ep >= conv_start, terminal: false };
            step_count += 1;
            let train_now = step_count.is_multiple_of(lrn.train_interval);
            for (i, a) in agents.iter_mut().enumerate() {
                let out = a.ingest_slot_end(slot, &res.inputs[i], opts);
                let Some(e) = out.experience else { continue };
                if !e.reward.is_finite() {
                    return Err(non_finite("reward", ep, slot, i));
                }
                sum += e.reward;
                if train_now {
                    a.learn(e).map_err(|_| non_finite("loss", ep, slot, i))?;
                } else {
                    a.learner.remember(e);
                }
            }
        }
        episode_rewards.push(sum);
        progress(ep, sum);
    }
    Ok(TrainOutput { agents, episode_rewards })
}

fn non_finite(what: &'static str, episode: usize, slot: u64, node: usize) -> Error {
    Error::NonFinite { what, episode, slot, node }
}

fn plan_from(slot: u64, seqs: &[Option<u32>]) -> SlotPlan {
    SlotPlan {
        frames: seqs.iter().enumerate().filter_map(|(i, s)| s.map(|s| data_frame(i, slot, s))).collect(),
        reply: SinkReply::AggAck,
        data_tx: seqs.to_vec(),
    }
}

/// Greedy execution of trained agents.
#[derive(Debug, Clone)]
pub struct EamacPolicy {
    pub agents: Vec<EamacAgent>,
    pub completion: bool,
    pub logs: Vec<AgentLogRecord>,
}

impl EamacPolicy {
    pub fn new(mut agents: Vec<EamacAgent>, completion: bool) -> Self {
        for a in agents.iter_mut() {
            a.reset_episode();
        }
        Self { agents, completion, logs: Vec::new() }
    }
}

impl MacProtocol for EamacPolicy {
    fn name(&self) -> &'static str {
        "eamac"
    }

    fn n_senders(&self) -> usize {
        self.agents.len()
    }

    fn plan(&mut self, slot: u64, slot_end: f64) -> SlotPlan {
        let seqs: Vec<Option<u32>> = self.agents.iter_mut().map(|a| a.decide(slot, slot_end, 0.0).1).collect();
        plan_from(slot, &seqs)
    }

    fn observe(&mut self, res: &SlotResult) {
        let opts = IngestOptions { complete: self.completion, ..Default::default() };
        for (i, a) in self.agents.iter_mut().enumerate() {
            let out = a.ingest_slot_end(res.slot, &res.inputs[i], opts);
            self.logs.push(out.log);
        }
    }

    fn is_silent(&self, node: usize) -> bool {
        self.agents[node].silence.silent
    }
}
