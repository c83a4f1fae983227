//! Small deep Q-learning engine: dense network, replay buffer, target
//! network and temporal-difference updates.

mod checkpoint;
mod network;
mod optim;
mod replay;

use ndarray::Array2;
use thiserror::Error;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use network::{Dense, Gradients, QNetwork};
pub use optim::Optimizer;
pub use replay::{Experience, ReplayBuffer};

use crate::config::LearningConfig;
use crate::rng::{streams, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("non-finite TD loss {loss} after {steps} gradient steps")]
pub struct NonFiniteLoss {
    pub loss: f64,
    pub steps: u64,
}

/// Index of the larger Q-value; ties go to the lower action.
pub fn greedy_action(q: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in q.iter().enumerate().skip(1) {
        if v > q[best] {
            best = i;
        }
    }
    best
}

/// One gradient step on the mean squared TD error of `batch`.
///
/// Targets are `r + gamma * max_a' Q_target(o', a')`, or `r` for terminal
/// transitions. Returns the loss before the step.
pub fn train_step(
    net: &mut QNetwork,
    target_net: &QNetwork,
    optimizer: &mut Optimizer,
    batch: &[&Experience],
    gamma: f64,
    lr: f64,
) -> Result<f64, NonFiniteLoss> {
    let dim = net.input_dim();
    let rows = batch.len();
    let mut x = Array2::<f64>::zeros((rows, dim));
    let mut x_next = Array2::<f64>::zeros((rows, dim));
    for (b, e) in batch.iter().enumerate() {
        assert_eq!(e.obs.len(), dim, "observation dimension mismatch");
        for (dst, &src) in x.row_mut(b).iter_mut().zip(&e.obs) {
            *dst = src as f64;
        }
        for (dst, &src) in x_next.row_mut(b).iter_mut().zip(&e.next_obs) {
            *dst = src as f64;
        }
    }
    let q_next = if gamma > 0.0 { Some(target_net.forward_batch(x_next.view())) } else { None };
    let targets: Vec<f64> = batch
        .iter()
        .enumerate()
        .map(|(b, e)| match (&q_next, e.terminal) {
            (Some(q), false) => e.reward + gamma * q.row(b).iter().copied().fold(f64::NEG_INFINITY, f64::max),
            _ => e.reward,
        })
        .collect();
    let actions: Vec<usize> = batch.iter().map(|e| e.action as usize).collect();
    let (loss, grads) = net.loss_and_gradients(x.view(), &actions, &targets);
    if !loss.is_finite() || !grads.is_finite() {
        return Err(NonFiniteLoss { loss, steps: optimizer.steps });
    }
    optimizer.apply(net, &grads, lr);
    Ok(loss)
}

/// A node's online network, target network, optimizer and replay memory.
#[derive(Debug, Clone)]
pub struct DqnLearner {
    pub online: QNetwork,
    pub target: QNetwork,
    pub optimizer: Optimizer,
    pub replay: ReplayBuffer,
    pub rng: SimRng,
    pub grad_steps: u64,
    gamma: f64,
    lr: f64,
    batch_size: usize,
    sync_period: u64,
}

impl DqnLearner {
    /// Online and target networks start from distinct seeded draws; the
    /// first target sync happens after `target_sync_period` gradient steps.
    pub fn new(input_dim: usize, lrn: &LearningConfig, seed: u64, node: usize) -> Self {
        let mut init = SimRng::new(seed, streams::NET_INIT + 2 * node as u64);
        let online = QNetwork::new(input_dim, &lrn.hidden_sizes, 2, &mut init);
        let mut init_t = SimRng::new(seed, streams::NET_INIT + 2 * node as u64 + 1);
        let target = QNetwork::new(input_dim, &lrn.hidden_sizes, 2, &mut init_t);
        let optimizer = Optimizer::new(lrn.optimizer, online.param_count());
        Self {
            online,
            target,
            optimizer,
            replay: ReplayBuffer::new(lrn.replay_capacity),
            rng: SimRng::new(seed, streams::REPLAY + node as u64),
            grad_steps: 0,
            gamma: lrn.gamma,
            lr: lrn.learning_rate,
            batch_size: lrn.batch_size,
            sync_period: lrn.target_sync_period,
        }
    }

    pub fn q_values(&self, obs: &[f64]) -> Vec<f64> {
        self.online.forward(obs)
    }

    pub fn remember(&mut self, e: Experience) {
        self.replay.push(e);
    }

    /// Takes one gradient step once the buffer holds a full batch, syncing
    /// the target network every `target_sync_period` steps.
    pub fn train(&mut self) -> Result<Option<f64>, NonFiniteLoss> {
        if self.replay.len() < self.batch_size {
            return Ok(None);
        }
        let idx = self.replay.sample_indices(self.batch_size, &mut self.rng);
        let batch: Vec<&Experience> = idx.iter().map(|&i| self.replay.get(i)).collect();
        let loss = train_step(&mut self.online, &self.target, &mut self.optimizer, &batch, self.gamma, self.lr)?;
        self.grad_steps += 1;
        if self.grad_steps.is_multiple_of(self.sync_period) {
            self.sync_target();
        }
        Ok(Some(loss))
    }

    pub fn sync_target(&mut self) {
        self.target.copy_from(&self.online);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::OptimizerKind;
    use rand::Rng;

    fn random_exp(dim: usize, rng: &mut SimRng) -> Experience {
        Experience {
            obs: (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
            action: rng.random_range(0..2),
            reward: rng.random_range(-1.0..1.0),
            next_obs: (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
            terminal: rng.random_bool(0.1),
        }
    }

    #[test]
    fn myopic_target_is_reward() {
        // With gamma = 0 the loss is exactly (Q(o, a) - r)^2.
        let mut rng = SimRng::new(4, 4);
        let mut net = QNetwork::new(3, &[4, 4, 4], 2, &mut rng);
        let target = net.clone();
        let e = Experience { obs: vec![0.5, -0.25, 1.0], action: 1, reward: 0.75, next_obs: vec![1.0, 1.0, 1.0], terminal: false };
        let q = net.forward(&[0.5, -0.25, 1.0])[1];
        let mut opt = Optimizer::new(OptimizerKind::Sgd, net.param_count());
        let loss = train_step(&mut net, &target, &mut opt, &[&e], 0.0, 0.01).unwrap();
        assert_eq!(loss, (q - 0.75) * (q - 0.75));
    }

    #[test]
    fn zero_learning_rate_leaves_parameters_untouched() {
        let mut rng = SimRng::new(5, 5);
        let mut net = QNetwork::new(6, &[8, 8, 4], 2, &mut rng);
        let before = net.clone();
        let target = net.clone();
        let batch: Vec<Experience> = (0..16).map(|_| random_exp(6, &mut rng)).collect();
        let refs: Vec<&Experience> = batch.iter().collect();
        let mut opt = Optimizer::new(OptimizerKind::Sgd, net.param_count());
        train_step(&mut net, &target, &mut opt, &refs, 0.9, 0.0).unwrap();
        assert_eq!(net, before);
    }

    #[test]
    fn overfits_a_single_experience() {
        let mut rng = SimRng::new(6, 6);
        let mut net = QNetwork::new(4, &[8, 8, 4], 2, &mut rng);
        let target = net.clone();
        let e = Experience { obs: vec![0.2, -0.4, 0.6, 1.0], action: 0, reward: 1.5, next_obs: vec![0.0; 4], terminal: true };
        let mut opt = Optimizer::new(OptimizerKind::Sgd, net.param_count());
        let mut losses = Vec::new();
        for _ in 0..300 {
            losses.push(train_step(&mut net, &target, &mut opt, &[&e], 0.9, 0.01).unwrap());
        }
        // Non-increasing after a short warmup, and driven close to zero.
        assert!(losses[20..].windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(*losses.last().unwrap() < 1e-6 * losses[0].max(1.0), "final {}", losses.last().unwrap());
    }

    #[test]
    fn sync_makes_target_identical() {
        let lrn = LearningConfig { hidden_sizes: vec![8, 8, 8], ..Default::default() };
        let mut l = DqnLearner::new(5, &lrn, 3, 0);
        let x = [0.3, -0.2, 0.9, 0.0, 1.0];
        assert_ne!(l.online.forward(&x), l.target.forward(&x));
        l.sync_target();
        assert_eq!(l.online.forward(&x), l.target.forward(&x));
        assert_eq!(l.online.max_param_distance(&l.target), 0.0);
    }

    #[test]
    fn periodic_sync_resets_distance() {
        let lrn = LearningConfig {
            hidden_sizes: vec![8, 8, 8],
            batch_size: 8,
            target_sync_period: 5,
            learning_rate: 1e-2,
            ..Default::default()
        };
        let mut l = DqnLearner::new(4, &lrn, 8, 1);
        let mut rng = SimRng::new(8, 100);
        for _ in 0..8 {
            l.remember(random_exp(4, &mut rng));
        }
        for step in 1..=20u64 {
            l.train().unwrap();
            let d = l.online.max_param_distance(&l.target);
            if step % 5 == 0 {
                assert_eq!(d, 0.0, "step {step}");
            } else {
                assert!(d > 0.0, "step {step}");
            }
        }
    }

    #[test]
    fn no_training_before_warmup() {
        let lrn = LearningConfig { hidden_sizes: vec![4, 4, 4], batch_size: 4, ..Default::default() };
        let mut l = DqnLearner::new(3, &lrn, 1, 0);
        let mut rng = SimRng::new(1, 2);
        for _ in 0..3 {
            l.remember(random_exp(3, &mut rng));
            assert_eq!(l.train().unwrap(), None);
        }
        l.remember(random_exp(3, &mut rng));
        assert!(l.train().unwrap().is_some());
    }

    #[test]
    fn greedy_ties_prefer_idle() {
        assert_eq!(greedy_action(&[0.3, 0.7]), 1);
        assert_eq!(greedy_action(&[0.5, 0.5]), 0);
        assert_eq!(greedy_action(&[0.3 + 10.0, 0.7 + 10.0]), 1);
    }

    #[test]
    fn non_finite_loss_is_reported() {
        let mut net = QNetwork::zeros(2, &[2, 2, 2], 2);
        let target = net.clone();
        let e = Experience { obs: vec![1.0, 1.0], action: 0, reward: f64::NAN, next_obs: vec![0.0, 0.0], terminal: true };
        let mut opt = Optimizer::new(OptimizerKind::Sgd, net.param_count());
        assert!(train_step(&mut net, &target, &mut opt, &[&e], 0.9, 0.1).is_err());
    }
}
