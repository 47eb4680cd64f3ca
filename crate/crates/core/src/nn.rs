//! Small dense networks with manual backpropagation.
//!
//! All arithmetic is in f64 so that analytic gradients can be checked
//! against central finite differences tightly. Parameters live in one
//! flat buffer per network, laid out layer by layer as a row-major
//! weight matrix followed by the bias vector.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NnError {
    #[error("input length {got} does not match expected dimension {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => libm::tanh(x),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative expressed in terms of the post-activation value.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Shape of an actor-critic policy network pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub n_actions: usize,
    pub activation: Activation,
}

impl MlpSpec {
    pub fn new(input_dim: usize, hidden: Vec<usize>, n_actions: usize) -> MlpSpec {
        MlpSpec {
            input_dim,
            hidden,
            n_actions,
            activation: Activation::Tanh,
        }
    }

    /// Layer sizes of the actor network (logit head).
    pub fn actor_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim];
        dims.extend_from_slice(&self.hidden);
        dims.push(self.n_actions);
        dims
    }

    /// Layer sizes of the critic network (scalar value head).
    pub fn critic_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim];
        dims.extend_from_slice(&self.hidden);
        dims.push(1);
        dims
    }
}

/// A fully connected network. The final layer is linear; hidden layers
/// use the configured activation.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    dims: Vec<usize>,
    activation: Activation,
    params: Vec<f64>,
}

/// Forward-pass intermediates needed by [`Mlp::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input followed by each layer's post-activation output.
    layer_outputs: Vec<Vec<f64>>,
}

impl Mlp {
    pub fn zeros(dims: Vec<usize>, activation: Activation) -> Mlp {
        assert!(dims.len() >= 2, "network needs at least one layer");
        let n = Self::param_count(&dims);
        Mlp {
            dims,
            activation,
            params: vec![0.0; n],
        }
    }

    pub fn random(dims: Vec<usize>, activation: Activation, rng: &mut impl Rng) -> Mlp {
        let mut net = Mlp::zeros(dims, activation);
        let mut offset = 0;
        for l in 0..net.dims.len() - 1 {
            let (fan_in, fan_out) = (net.dims[l], net.dims[l + 1]);
            let scale = libm::sqrt(1.0 / fan_in as f64);
            for w in &mut net.params[offset..offset + fan_in * fan_out] {
                *w = (rng.random::<f64>() * 2.0 - 1.0) * scale;
            }
            // Biases start at zero.
            offset += fan_in * fan_out + fan_out;
        }
        net
    }

    fn param_count(dims: &[usize]) -> usize {
        dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NnError> {
        Ok(self.forward_cached(input)?.0)
    }

    pub fn forward_cached(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardCache), NnError> {
        if input.len() != self.input_dim() {
            return Err(NnError::ShapeMismatch {
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        let n_layers = self.dims.len() - 1;
        let mut outputs: Vec<Vec<f64>> = Vec::with_capacity(n_layers + 1);
        outputs.push(input.to_vec());
        let mut offset = 0;
        for l in 0..n_layers {
            let (m, n) = (self.dims[l], self.dims[l + 1]);
            let x = &outputs[l];
            let weights = &self.params[offset..offset + m * n];
            let biases = &self.params[offset + m * n..offset + m * n + n];
            let mut y = vec![0.0; n];
            for (i, yi) in y.iter_mut().enumerate() {
                let row = &weights[i * m..(i + 1) * m];
                let mut acc = biases[i];
                for (w, xj) in row.iter().zip(x.iter()) {
                    acc += w * xj;
                }
                *yi = if l + 1 == n_layers {
                    acc
                } else {
                    self.activation.apply(acc)
                };
            }
            outputs.push(y);
            offset += m * n + n;
        }
        let out = outputs.last().unwrap().clone();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(NnError::NonFinite("forward pass"));
        }
        Ok((out, ForwardCache { layer_outputs: outputs }))
    }

    /// Backpropagate `grad_output` through the cached forward pass.
    /// Parameter gradients are accumulated into `grad_params` (same
    /// layout as `params`); the gradient w.r.t. the input is returned.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        grad_output: &[f64],
        grad_params: &mut [f64],
    ) -> Vec<f64> {
        assert_eq!(grad_params.len(), self.params.len());
        assert_eq!(grad_output.len(), self.output_dim());
        let n_layers = self.dims.len() - 1;
        // Offsets of each layer's parameter block.
        let mut offsets = Vec::with_capacity(n_layers);
        let mut offset = 0;
        for l in 0..n_layers {
            offsets.push(offset);
            offset += self.dims[l] * self.dims[l + 1] + self.dims[l + 1];
        }
        let mut grad = grad_output.to_vec();
        for l in (0..n_layers).rev() {
            let (m, n) = (self.dims[l], self.dims[l + 1]);
            let x = &cache.layer_outputs[l];
            let y = &cache.layer_outputs[l + 1];
            // Hidden layers: fold the activation derivative into grad.
            if l + 1 != n_layers {
                for (g, yi) in grad.iter_mut().zip(y.iter()) {
                    *g *= self.activation.derivative_from_output(*yi);
                }
            }
            let base = offsets[l];
            let weights = &self.params[base..base + m * n];
            let (gw, gb) = grad_params[base..base + m * n + n].split_at_mut(m * n);
            let mut grad_in = vec![0.0; m];
            for i in 0..n {
                let gi = grad[i];
                gb[i] += gi;
                let row = &weights[i * m..(i + 1) * m];
                let grow = &mut gw[i * m..(i + 1) * m];
                for j in 0..m {
                    grow[j] += gi * x[j];
                    grad_in[j] += gi * row[j];
                }
            }
            grad = grad_in;
        }
        grad
    }

    /// Plain SGD step: `params -= lr * grad`.
    pub fn apply_gradient(&mut self, grad: &[f64], lr: f64) {
        for (p, g) in self.params.iter_mut().zip(grad.iter()) {
            *p -= lr * g;
        }
    }
}

/// Numerically stable log-softmax.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_sum: f64 = libm::log(logits.iter().map(|&z| libm::exp(z - max)).sum::<f64>());
    logits.iter().map(|&z| z - max - log_sum).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    log_softmax(logits).iter().map(|&lp| libm::exp(lp)).collect()
}
