use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use crate::rng::SimRng;

/// Fully connected layer computing `x W^T + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// Shape `(outputs, inputs)`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }
}

/// Dense feedforward network with rectified hidden layers and a linear
/// output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    pub layers: Vec<Dense>,
}

/// Parameter gradients, shaped like the network's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl QNetwork {
    /// Fan-in scaled uniform initialization: every parameter of a layer with
    /// `k` inputs is drawn from `U(-1/sqrt(k), 1/sqrt(k))`.
    pub fn new(input: usize, hidden: &[usize], outputs: usize, rng: &mut SimRng) -> Self {
        let sizes = Self::sizes(input, hidden, outputs);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                let weights = Array2::from_shape_simple_fn((fan_out, fan_in), || rng.random_range(-bound..bound));
                let bias = Array1::from_shape_simple_fn(fan_out, || rng.random_range(-bound..bound));
                Dense { weights, bias }
            })
            .collect();
        Self { layers }
    }

    pub fn zeros(input: usize, hidden: &[usize], outputs: usize) -> Self {
        let sizes = Self::sizes(input, hidden, outputs);
        let layers = sizes
            .windows(2)
            .map(|w| Dense { weights: Array2::zeros((w[1], w[0])), bias: Array1::zeros(w[1]) })
            .collect();
        Self { layers }
    }

    fn sizes(input: usize, hidden: &[usize], outputs: usize) -> Vec<usize> {
        std::iter::once(input).chain(hidden.iter().copied()).chain(std::iter::once(outputs)).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("at least one layer").outputs()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Q-values for a single observation.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.input_dim(), "input dimension mismatch");
        let mut h = x.to_vec();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z: Vec<f64> = layer
                .weights
                .outer_iter()
                .zip(layer.bias.iter())
                .map(|(row, b)| row.iter().zip(&h).map(|(w, x)| w * x).sum::<f64>() + b)
                .collect();
            if i < last {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            h = z;
        }
        h
    }

    /// Q-values for a batch laid out as `(examples, features)`.
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Array2<f64> {
        self.activations(x).pop().expect("output layer")
    }

    // Layer outputs after activation; element 0 is the input itself.
    fn activations(&self, x: ArrayView2<f64>) -> Vec<Array2<f64>> {
        assert_eq!(x.ncols(), self.input_dim(), "input dimension mismatch");
        let last = self.layers.len() - 1;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_owned());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = acts[i].dot(&layer.weights.t());
            z += &layer.bias;
            if i < last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            acts.push(z);
        }
        acts
    }

    /// Mean squared error between `Q(x_b, a_b)` and `targets_b`, and its
    /// gradient with respect to every parameter.
    pub fn loss_and_gradients(&self, x: ArrayView2<f64>, actions: &[usize], targets: &[f64]) -> (f64, Gradients) {
        let batch = x.nrows();
        assert_eq!(actions.len(), batch);
        assert_eq!(targets.len(), batch);
        let acts = self.activations(x);
        let out = acts.last().expect("output layer");

        let mut delta = Array2::<f64>::zeros(out.raw_dim());
        let mut loss = 0.0;
        for b in 0..batch {
            let err = out[[b, actions[b]]] - targets[b];
            loss += err * err;
            delta[[b, actions[b]]] = 2.0 * err / batch as f64;
        }
        loss /= batch as f64;

        let mut grads: Vec<Dense> = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let input = &acts[i];
            let weights = delta.t().dot(input);
            let bias = delta.sum_axis(Axis(0));
            grads.push(Dense { weights, bias });
            if i > 0 {
                let mut back = delta.dot(&layer.weights);
                // ReLU derivative, taken as 0 at the kink.
                back.zip_mut_with(input, |d, &h| {
                    if h <= 0.0 {
                        *d = 0.0
                    }
                });
                delta = back;
            }
        }
        grads.reverse();
        (loss, Gradients { layers: grads })
    }

    pub fn copy_from(&mut self, other: &QNetwork) {
        self.layers.clone_from(&other.layers);
    }

    /// Largest absolute parameter difference to `other`.
    pub fn max_param_distance(&self, other: &QNetwork) -> f64 {
        self.layers
            .iter()
            .zip(&other.layers)
            .flat_map(|(a, b)| {
                a.weights
                    .iter()
                    .zip(b.weights.iter())
                    .chain(a.bias.iter().zip(b.bias.iter()))
                    .map(|(x, y)| (x - y).abs())
            })
            .fold(0.0, f64::max)
    }

    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(l.bias.iter()))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }
}

impl Gradients {
    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(l.bias.iter()))
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn zero_network_outputs_zero() {
        let net = QNetwork::zeros(5, &[4, 3, 2], 2);
        assert_eq!(net.forward(&[1.0, -2.0, 3.0, 0.5, 9.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn hand_computed_toy_chain() {
        // 2 -> 2 (ReLU) -> 2 linear.
        let net = QNetwork {
            layers: vec![
                Dense { weights: array![[1.0, 2.0], [-1.0, 0.5]], bias: array![0.5, -0.25] },
                Dense { weights: array![[2.0, -1.0], [0.0, 3.0]], bias: array![0.1, 0.2] },
            ],
        };
        // Hidden: [1*1 + 2*2 + 0.5, -1 + 1 - 0.25] = [5.5, -0.25] -> ReLU [5.5, 0].
        // Output: [2*5.5 + 0.1, 0 + 0.2] = [11.1, 0.2].
        let q = net.forward(&[1.0, 2.0]);
        assert_eq!(q, vec![11.0 + 0.1, 0.2]);
        let qb = net.forward_batch(array![[1.0, 2.0]].view());
        assert_eq!(qb.row(0).to_vec(), q);
    }

    #[test]
    fn seeded_init_is_deterministic() {
        let a = QNetwork::new(6, &[8, 8, 4], 2, &mut SimRng::new(3, 9));
        let b = QNetwork::new(6, &[8, 8, 4], 2, &mut SimRng::new(3, 9));
        assert_eq!(a, b);
        let x = [0.1, 0.2, -0.3, 0.4, 0.0, 1.0];
        assert_eq!(a.forward(&x), b.forward(&x));
        assert_eq!(a.param_count(), 6 * 8 + 8 + 8 * 8 + 8 + 8 * 4 + 4 + 4 * 2 + 2);
    }

    #[test]
    #[should_panic(expected = "dimension mismatch")]
    fn wrong_input_length_panics() {
        QNetwork::zeros(3, &[2, 2, 2], 2).forward(&[1.0]);
    }
}
