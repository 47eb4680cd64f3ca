//! Intrinsic curiosity module: a learned feature encoder with forward
//! and inverse dynamics models. The intrinsic reward is the forward
//! model's prediction error in feature space, so it is large exactly
//! where the outcome of an action is still uncertain.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::nn::{log_softmax, softmax, Activation, Mlp, NnError};

/// ICM hyperparameters.
///
/// `eta` scales the intrinsic reward (0 disables curiosity without
/// changing anything else about a run); `beta` balances the forward
/// and inverse losses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcmHyper {
    pub feature_dim: usize,
    pub eta: f64,
    pub beta: f64,
    pub lr: f64,
}

impl Default for IcmHyper {
    fn default() -> Self {
        IcmHyper {
            feature_dim: 32,
            eta: 1.0,
            beta: 0.2,
            lr: 1e-3,
        }
    }
}

/// Encoder, forward-model and inverse-model weights.
#[derive(Debug, Clone, PartialEq)]
pub struct IcmParams {
    pub obs_dim: usize,
    pub n_actions: usize,
    pub feature_dim: usize,
    pub encoder: Mlp,
    pub forward_model: Mlp,
    pub inverse_model: Mlp,
    pub version: u32,
}

const ICM_HIDDEN: usize = 64;

impl IcmParams {
    pub fn new(obs_dim: usize, n_actions: usize, feature_dim: usize, rng: &mut impl Rng) -> Self {
        let act = Activation::Tanh;
        IcmParams {
            obs_dim,
            n_actions,
            feature_dim,
            encoder: Mlp::random(vec![obs_dim, ICM_HIDDEN, feature_dim], act, rng),
            forward_model: Mlp::random(
                vec![feature_dim + n_actions, ICM_HIDDEN, feature_dim],
                act,
                rng,
            ),
            inverse_model: Mlp::random(vec![2 * feature_dim, ICM_HIDDEN, n_actions], act, rng),
            version: 0,
        }
    }

    /// All-zero weights with the same shapes as [`IcmParams::new`];
    /// used when deserializing.
    pub fn zeros(obs_dim: usize, n_actions: usize, feature_dim: usize) -> Self {
        let act = Activation::Tanh;
        IcmParams {
            obs_dim,
            n_actions,
            feature_dim,
            encoder: Mlp::zeros(vec![obs_dim, ICM_HIDDEN, feature_dim], act),
            forward_model: Mlp::zeros(vec![feature_dim + n_actions, ICM_HIDDEN, feature_dim], act),
            inverse_model: Mlp::zeros(vec![2 * feature_dim, ICM_HIDDEN, n_actions], act),
            version: 0,
        }
    }

    pub fn encode(&self, obs: &[f64]) -> Result<Vec<f64>, NnError> {
        self.encoder.forward(obs)
    }

    fn forward_input(&self, features: &[f64], action: usize) -> Vec<f64> {
        let mut input = Vec::with_capacity(self.feature_dim + self.n_actions);
        input.extend_from_slice(features);
        let mut one_hot = vec![0.0; self.n_actions];
        one_hot[action] = 1.0;
        input.extend_from_slice(&one_hot);
        input
    }
}

/// Intrinsic reward: (eta / 2) * || f(phi(s), a) - phi(s') ||^2.
pub fn icm_intrinsic_reward(
    params: &IcmParams,
    state: &[f64],
    action: usize,
    next_state: &[f64],
    hyper: &IcmHyper,
) -> Result<f64, NnError> {
    if hyper.eta == 0.0 {
        return Ok(0.0);
    }
    let phi_s = params.encode(state)?;
    let phi_next = params.encode(next_state)?;
    let predicted = params
        .forward_model
        .forward(&params.forward_input(&phi_s, action))?;
    let err: f64 = predicted
        .iter()
        .zip(phi_next.iter())
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(hyper.eta / 2.0 * err)
}

/// Loss components reported by [`icm_update`] and [`icm_loss_grad`].
#[derive(Debug, Clone, Copy, Default)]
pub struct IcmLosses {
    pub forward_loss: f64,
    pub inverse_loss: f64,
    pub total: f64,
}

/// Gradient buffers matching the three networks.
pub struct IcmGrads {
    pub encoder: Vec<f64>,
    pub forward_model: Vec<f64>,
    pub inverse_model: Vec<f64>,
}

/// Mean ICM loss over a batch of (s, a, s') transitions and its full
/// analytic gradient:
///
/// loss = (1 - beta) * inverse cross-entropy + beta * (1/2) forward MSE
pub fn icm_loss_grad(
    params: &IcmParams,
    states: &[Vec<f64>],
    actions: &[usize],
    next_states: &[Vec<f64>],
    hyper: &IcmHyper,
) -> Result<(IcmLosses, IcmGrads), NnError> {
    assert_eq!(states.len(), actions.len());
    assert_eq!(states.len(), next_states.len());
    let n = states.len();
    assert!(n > 0, "empty ICM batch");

    let mut grads = IcmGrads {
        encoder: vec![0.0; params.encoder.n_params()],
        forward_model: vec![0.0; params.forward_model.n_params()],
        inverse_model: vec![0.0; params.inverse_model.n_params()],
    };
    let mut losses = IcmLosses::default();

    for i in 0..n {
        let (phi_s, cache_s) = params.encoder.forward_cached(&states[i])?;
        let (phi_next, cache_next) = params.encoder.forward_cached(&next_states[i])?;

        // Forward model on [phi(s); one-hot(a)].
        let fwd_in = params.forward_input(&phi_s, actions[i]);
        let (predicted, cache_fwd) = params.forward_model.forward_cached(&fwd_in)?;
        let err: Vec<f64> = predicted
            .iter()
            .zip(phi_next.iter())
            .map(|(p, t)| p - t)
            .collect();
        let forward_loss = 0.5 * err.iter().map(|e| e * e).sum::<f64>();

        // Inverse model on [phi(s); phi(s')].
        let mut inv_in = Vec::with_capacity(2 * params.feature_dim);
        inv_in.extend_from_slice(&phi_s);
        inv_in.extend_from_slice(&phi_next);
        let (logits, cache_inv) = params.inverse_model.forward_cached(&inv_in)?;
        let log_probs = log_softmax(&logits);
        let probs = softmax(&logits);
        let inverse_loss = -log_probs[actions[i]];

        losses.forward_loss += forward_loss;
        losses.inverse_loss += inverse_loss;

        // Backward: forward-model branch, weighted by beta.
        let grad_pred: Vec<f64> = err.iter().map(|e| hyper.beta * e).collect();
        let grad_fwd_in =
            params
                .forward_model
                .backward(&cache_fwd, &grad_pred, &mut grads.forward_model);
        let mut grad_phi_s: Vec<f64> = grad_fwd_in[..params.feature_dim].to_vec();
        // d(forward loss)/d(phi_next) = -beta * err.
        let mut grad_phi_next: Vec<f64> = err.iter().map(|e| -hyper.beta * e).collect();

        // Backward: inverse-model branch, weighted by (1 - beta).
        let mut grad_logits = vec![0.0; logits.len()];
        for (j, g) in grad_logits.iter_mut().enumerate() {
            let indicator = if j == actions[i] { 1.0 } else { 0.0 };
            *g = (1.0 - hyper.beta) * (probs[j] - indicator);
        }
        let grad_inv_in =
            params
                .inverse_model
                .backward(&cache_inv, &grad_logits, &mut grads.inverse_model);
        for j in 0..params.feature_dim {
            grad_phi_s[j] += grad_inv_in[j];
            grad_phi_next[j] += grad_inv_in[params.feature_dim + j];
        }

        params.encoder.backward(&cache_s, &grad_phi_s, &mut grads.encoder);
        params
            .encoder
            .backward(&cache_next, &grad_phi_next, &mut grads.encoder);
    }

    let scale = 1.0 / n as f64;
    losses.forward_loss *= scale;
    losses.inverse_loss *= scale;
    losses.total = hyper.beta * losses.forward_loss + (1.0 - hyper.beta) * losses.inverse_loss;
    for buf in [
        &mut grads.encoder,
        &mut grads.forward_model,
        &mut grads.inverse_model,
    ] {
        for g in buf.iter_mut() {
            *g *= scale;
        }
        if buf.iter().any(|g| !g.is_finite()) {
            return Err(NnError::NonFinite("icm gradients"));
        }
    }
    Ok((losses, grads))
}

/// One SGD step on the combined ICM loss.
pub fn icm_update(
    params: &mut IcmParams,
    states: &[Vec<f64>],
    actions: &[usize],
    next_states: &[Vec<f64>],
    hyper: &IcmHyper,
) -> Result<IcmLosses, NnError> {
    let (losses, grads) = icm_loss_grad(params, states, actions, next_states, hyper)?;
    params.encoder.apply_gradient(&grads.encoder, hyper.lr);
    params
        .forward_model
        .apply_gradient(&grads.forward_model, hyper.lr);
    params
        .inverse_model
        .apply_gradient(&grads.inverse_model, hyper.lr);
    params.version += 1;
    Ok(losses)
}
