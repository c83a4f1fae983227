//! Binary checkpoint of a [`DqnLearner`].
//!
//! Layout (little-endian):
//!
//! ```text
//! magic "UWQN" | version u16 | layer count u32 | (outputs u32, inputs u32) per layer
//! online parameters f64* | target parameters f64*
//! optimizer kind u8 | optimizer steps u64 | first-moment len u64, f64* | second-moment len u64, f64*
//! rng seed [u8; 32] | rng stream u64 | rng word position u128 | gradient steps u64
//! ```
//!
//! Parameters are written layer by layer, weights (row-major) then bias.
//! The replay buffer is not part of the checkpoint.

use ndarray::{Array1, Array2};

use super::{Dense, DqnLearner, Optimizer, QNetwork, ReplayBuffer};
use crate::config::{LearningConfig, OptimizerKind};
use crate::error::{Error, Result};
use crate::rng::{RngState, SimRng};

const MAGIC: &[u8; 4] = b"UWQN";
pub const CHECKPOINT_VERSION: u16 = 1;

fn put_params(out: &mut Vec<u8>, net: &QNetwork) {
    for v in net.params() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn save_checkpoint(learner: &DqnLearner) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    let layers = &learner.online.layers;
    out.extend_from_slice(&(layers.len() as u32).to_le_bytes());
    for l in layers {
        out.extend_from_slice(&(l.outputs() as u32).to_le_bytes());
        out.extend_from_slice(&(l.inputs() as u32).to_le_bytes());
    }
    put_params(&mut out, &learner.online);
    put_params(&mut out, &learner.target);

    let opt = &learner.optimizer;
    out.push(match opt.kind {
        OptimizerKind::Sgd => 0,
        OptimizerKind::Momentum => 1,
        OptimizerKind::Adam => 2,
    });
    out.extend_from_slice(&opt.steps.to_le_bytes());
    for moments in [&opt.first, &opt.second] {
        out.extend_from_slice(&(moments.len() as u64).to_le_bytes());
        for v in moments.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }

    let rng = learner.rng.state();
    out.extend_from_slice(&rng.seed);
    out.extend_from_slice(&rng.stream_id.to_le_bytes());
    out.extend_from_slice(&rng.word_pos.to_le_bytes());
    out.extend_from_slice(&learner.grad_steps.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn network(&mut self, shapes: &[(usize, usize)]) -> Result<QNetwork> {
        let mut layers = Vec::with_capacity(shapes.len());
        for &(o, i) in shapes {
            let w: Vec<f64> = (0..o * i).map(|_| self.f64()).collect::<Result<_>>()?;
            let b: Vec<f64> = (0..o).map(|_| self.f64()).collect::<Result<_>>()?;
            layers.push(Dense {
                weights: Array2::from_shape_vec((o, i), w).expect("shape matches"),
                bias: Array1::from_vec(b),
            });
        }
        Ok(QNetwork { layers })
    }
}

/// Restores a learner saved by [`save_checkpoint`]. Hyperparameters and
/// an empty replay buffer come from `lrn`.
pub fn load_checkpoint(bytes: &[u8], lrn: &LearningConfig) -> Result<DqnLearner> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = u16::from_le_bytes(r.array()?);
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let n_layers = r.u32()? as usize;
    if n_layers == 0 || n_layers > 64 {
        return Err(Error::Checkpoint(format!("implausible layer count {n_layers}")));
    }
    let shapes: Vec<(usize, usize)> =
        (0..n_layers).map(|_| Ok((r.u32()? as usize, r.u32()? as usize))).collect::<Result<_>>()?;
    if shapes.windows(2).any(|w| w[0].0 != w[1].1) {
        return Err(Error::Checkpoint("inconsistent layer shapes".into()));
    }
    let online = r.network(&shapes)?;
    let target = r.network(&shapes)?;

    let kind = match r.take(1)?[0] {
        0 => OptimizerKind::Sgd,
        1 => OptimizerKind::Momentum,
        2 => OptimizerKind::Adam,
        k => return Err(Error::Checkpoint(format!("unknown optimizer {k}"))),
    };
    let steps = r.u64()?;
    let mut moments = [Vec::new(), Vec::new()];
    for m in moments.iter_mut() {
        let len = r.u64()? as usize;
        if len > bytes.len() {
            return Err(Error::Checkpoint("moment length exceeds file".into()));
        }
        *m = (0..len).map(|_| r.f64()).collect::<Result<_>>()?;
    }
    let [first, second] = moments;
    let optimizer = Optimizer { kind, steps, first, second };

    let seed = r.array::<32>()?;
    let stream_id = r.u64()?;
    let word_pos = u128::from_le_bytes(r.array()?);
    let grad_steps = r.u64()?;
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }

    Ok(DqnLearner {
        online,
        target,
        optimizer,
        replay: ReplayBuffer::new(lrn.replay_capacity),
        rng: SimRng::from_state(RngState { seed, stream_id, word_pos }),
        grad_steps,
        gamma: lrn.gamma,
        lr: lrn.learning_rate,
        batch_size: lrn.batch_size,
        sync_period: lrn.target_sync_period,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dqn::Experience;

    #[test]
    fn round_trip_is_bit_exact() {
        let lrn = LearningConfig {
            hidden_sizes: vec![6, 5, 4],
            batch_size: 4,
            optimizer: OptimizerKind::Adam,
            learning_rate: 1e-3,
            ..Default::default()
        };
        let mut l = DqnLearner::new(3, &lrn, 77, 2);
        for k in 0..6 {
            let x = k as f32 / 6.0;
            l.remember(Experience { obs: vec![x, -x, 1.0], action: (k % 2) as u8, reward: x as f64, next_obs: vec![x; 3], terminal: false });
        }
        for _ in 0..3 {
            l.train().unwrap();
        }
        let bytes = save_checkpoint(&l);
        let back = load_checkpoint(&bytes, &lrn).unwrap();
        assert_eq!(back.online, l.online);
        assert_eq!(back.target, l.target);
        assert_eq!(back.optimizer, l.optimizer);
        assert_eq!(back.rng, l.rng);
        assert_eq!(back.grad_steps, l.grad_steps);
        assert_eq!(save_checkpoint(&back), bytes);
    }

    #[test]
    fn corrupt_blobs_are_rejected() {
        let lrn = LearningConfig { hidden_sizes: vec![2, 2, 2], ..Default::default() };
        let bytes = save_checkpoint(&DqnLearner::new(2, &lrn, 1, 0));
        assert!(load_checkpoint(&bytes[..bytes.len() - 1], &lrn).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(load_checkpoint(&bad, &lrn).is_err());
        let mut longer = bytes.clone();
        longer.push(0);
        assert!(load_checkpoint(&longer, &lrn).is_err());
    }
}
