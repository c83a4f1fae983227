use crate::config::OptimizerKind;

use super::network::{Gradients, QNetwork};

const MOMENTUM: f64 = 0.9;
const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// First-order optimizer with flat per-parameter state.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub steps: u64,
    /// Momentum velocity or Adam first moment.
    pub first: Vec<f64>,
    /// Adam second moment.
    pub second: Vec<f64>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, params: usize) -> Self {
        let (first, second) = match kind {
            OptimizerKind::Sgd => (Vec::new(), Vec::new()),
            OptimizerKind::Momentum => (vec![0.0; params], Vec::new()),
            OptimizerKind::Adam => (vec![0.0; params], vec![0.0; params]),
        };
        Self { kind, steps: 0, first, second }
    }

    pub fn apply(&mut self, net: &mut QNetwork, grads: &Gradients, lr: f64) {
        self.steps += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in net.params_mut().zip(grads.values()) {
                    *p -= lr * g;
                }
            }
            OptimizerKind::Momentum => {
                for ((p, g), v) in net.params_mut().zip(grads.values()).zip(self.first.iter_mut()) {
                    *v = MOMENTUM * *v + g;
                    *p -= lr * *v;
                }
            }
            OptimizerKind::Adam => {
                let t = self.steps as i32;
                let c1 = 1.0 - ADAM_BETA1.powi(t);
                let c2 = 1.0 - ADAM_BETA2.powi(t);
                for (((p, g), m), v) in
                    net.params_mut().zip(grads.values()).zip(self.first.iter_mut()).zip(self.second.iter_mut())
                {
                    *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                    *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
                }
            }
        }
    }
}
