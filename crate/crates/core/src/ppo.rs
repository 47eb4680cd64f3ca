//! PPO with a clipped surrogate objective, GAE, and categorical policies.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::nn::{log_softmax, softmax, Mlp, MlpSpec, NnError};

/// PPO hyperparameters. The optimizer is plain SGD with a fixed step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpoHyper {
    pub gamma: f64,
    pub lam: f64,
    pub clip_eps: f64,
    pub lr: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub entropy_coef: f64,
    pub value_coef: f64,
}

impl Default for PpoHyper {
    fn default() -> Self {
        PpoHyper {
            gamma: 0.99,
            lam: 0.95,
            clip_eps: 0.2,
            lr: 3e-4,
            epochs: 4,
            minibatch: 128,
            entropy_coef: 0.01,
            value_coef: 0.5,
        }
    }
}

/// Actor and critic parameters (two independent networks sharing a
/// spec), plus a version counter bumped on every update.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub spec: MlpSpec,
    pub actor: Mlp,
    pub critic: Mlp,
    pub version: u32,
}

impl PolicyParams {
    pub fn new(spec: MlpSpec, rng: &mut impl Rng) -> PolicyParams {
        let actor = Mlp::random(spec.actor_dims(), spec.activation, rng);
        let critic = Mlp::random(spec.critic_dims(), spec.activation, rng);
        PolicyParams {
            spec,
            actor,
            critic,
            version: 0,
        }
    }

    pub fn zeros(spec: MlpSpec) -> PolicyParams {
        let actor = Mlp::zeros(spec.actor_dims(), spec.activation);
        let critic = Mlp::zeros(spec.critic_dims(), spec.activation);
        PolicyParams {
            spec,
            actor,
            critic,
            version: 0,
        }
    }

    /// Greedy action: argmax of the logits, lowest index on ties.
    pub fn greedy_action(&self, input: &[f64]) -> Result<usize, NnError> {
        let (logits, _) = mlp_forward(self, input)?;
        let mut best = 0;
        for (i, &z) in logits.iter().enumerate() {
            if z > logits[best] {
                best = i;
            }
        }
        Ok(best)
    }
}

/// Evaluate both heads: action logits from the actor, state value from
/// the critic.
pub fn mlp_forward(params: &PolicyParams, input: &[f64]) -> Result<(Vec<f64>, f64), NnError> {
    let logits = params.actor.forward(input)?;
    let value = params.critic.forward(input)?[0];
    Ok((logits, value))
}

/// Sample from the categorical distribution softmax(logits); returns
/// the action and its log-probability.
pub fn sample_action(logits: &[f64], rng: &mut impl Rng) -> Result<(usize, f64), NnError> {
    if logits.iter().any(|z| z.is_nan()) {
        return Err(NnError::NonFinite("logits"));
    }
    let log_probs = log_softmax(logits);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut action = log_probs.len() - 1;
    for (i, lp) in log_probs.iter().enumerate() {
        acc += libm::exp(*lp);
        if u < acc {
            action = i;
            break;
        }
    }
    Ok((action, log_probs[action]))
}

/// Rollout storage for one PPO update.
#[derive(Debug, Clone, Default)]
pub struct Batch {
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<usize>,
    pub old_logprobs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn push(
        &mut self,
        state: Vec<f64>,
        action: usize,
        logprob: f64,
        reward: f64,
        value: f64,
        done: bool,
    ) {
        self.states.push(state);
        self.actions.push(action);
        self.old_logprobs.push(logprob);
        self.rewards.push(reward);
        self.values.push(value);
        self.dones.push(done);
    }

    /// Fill advantages and returns via GAE.
    pub fn finish(&mut self, bootstrap_value: f64, gamma: f64, lam: f64) {
        let (adv, ret) = gae(
            &self.rewards,
            &self.values,
            &self.dones,
            bootstrap_value,
            gamma,
            lam,
        );
        self.advantages = adv;
        self.returns = ret;
    }
}

/// Generalized advantage estimation.
///
/// delta_t = r_t + gamma * V_{t+1} * (1 - done_t) - V_t
/// A_t     = delta_t + gamma * lam * (1 - done_t) * A_{t+1}
/// returns = advantages + values
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap_value: f64,
    gamma: f64,
    lam: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    assert_eq!(values.len(), n);
    assert_eq!(dones.len(), n);
    let mut advantages = vec![0.0; n];
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let not_done = if dones[t] { 0.0 } else { 1.0 };
        let next_value = if t + 1 < n { values[t + 1] } else { bootstrap_value };
        let delta = rewards[t] + gamma * next_value * not_done - values[t];
        next_adv = delta + gamma * lam * not_done * next_adv;
        advantages[t] = next_adv;
    }
    let returns = advantages
        .iter()
        .zip(values.iter())
        .map(|(a, v)| a + v)
        .collect();
    (advantages, returns)
}

/// Shift and scale to mean 0, std 1 (guarded against zero variance).
pub fn normalize_advantages(advantages: &[f64]) -> Vec<f64> {
    let n = advantages.len() as f64;
    let mean: f64 = advantages.iter().sum::<f64>() / n;
    let var: f64 = advantages.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    let std = libm::sqrt(var).max(1e-8);
    advantages.iter().map(|a| (a - mean) / std).collect()
}

/// Full-batch PPO loss and its gradient w.r.t. actor and critic
/// parameters, without applying an update. `advantages` must already be
/// normalized if the caller wants the training-time objective.
///
/// This is the same per-sample computation `ppo_update` performs on
/// minibatches; it exists so the objective can be finite-difference
/// checked as a pure function of the parameters.
pub fn ppo_loss_grad(
    params: &PolicyParams,
    batch: &Batch,
    advantages: &[f64],
    hyper: &PpoHyper,
) -> Result<(f64, Vec<f64>, Vec<f64>), NnError> {
    let mut actor_grad = vec![0.0; params.actor.n_params()];
    let mut critic_grad = vec![0.0; params.critic.n_params()];
    let mut loss = 0.0;
    for i in 0..batch.len() {
        let sample = sample_loss_grad(
            params,
            batch,
            advantages[i],
            i,
            hyper,
            &mut actor_grad,
            &mut critic_grad,
        )?;
        loss += sample.loss;
    }
    let scale = 1.0 / batch.len() as f64;
    loss *= scale;
    actor_grad.iter_mut().for_each(|g| *g *= scale);
    critic_grad.iter_mut().for_each(|g| *g *= scale);
    Ok((loss, actor_grad, critic_grad))
}

struct SampleStats {
    loss: f64,
    surrogate: f64,
    value_err: f64,
    entropy: f64,
    logprob: f64,
    ratio: f64,
}

fn sample_loss_grad(
    params: &PolicyParams,
    batch: &Batch,
    adv: f64,
    i: usize,
    hyper: &PpoHyper,
    actor_grad: &mut [f64],
    critic_grad: &mut [f64],
) -> Result<SampleStats, NnError> {
    let state = &batch.states[i];
    let action = batch.actions[i];

    let (logits, cache) = params.actor.forward_cached(state)?;
    let log_probs = log_softmax(&logits);
    let probs = softmax(&logits);
    let lp = log_probs[action];
    let ratio = libm::exp(lp - batch.old_logprobs[i]);

    let clipped = ratio.clamp(1.0 - hyper.clip_eps, 1.0 + hyper.clip_eps);
    let surrogate = (ratio * adv).min(clipped * adv);
    // The surrogate gradient is live only while the unclipped branch
    // attains the min; otherwise clipping zeroes it exactly.
    let active = ratio * adv <= clipped * adv;

    let entropy: f64 = -probs
        .iter()
        .zip(log_probs.iter())
        .map(|(p, l)| p * l)
        .sum::<f64>();

    let mut grad_logits = vec![0.0; logits.len()];
    if active {
        let coef = -adv * ratio;
        for (j, g) in grad_logits.iter_mut().enumerate() {
            let indicator = if j == action { 1.0 } else { 0.0 };
            *g += coef * (indicator - probs[j]);
        }
    }
    for (j, g) in grad_logits.iter_mut().enumerate() {
        *g += hyper.entropy_coef * probs[j] * (log_probs[j] + entropy);
    }
    params.actor.backward(&cache, &grad_logits, actor_grad);

    let (value_out, vcache) = params.critic.forward_cached(state)?;
    let value = value_out[0];
    let value_err = value - batch.returns[i];
    params
        .critic
        .backward(&vcache, &[2.0 * hyper.value_coef * value_err], critic_grad);

    let loss = -surrogate - hyper.entropy_coef * entropy + hyper.value_coef * value_err * value_err;
    Ok(SampleStats {
        loss,
        surrogate,
        value_err,
        entropy,
        logprob: lp,
        ratio,
    })
}

/// Diagnostics from one PPO update.
#[derive(Debug, Clone, Copy, Default)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
}

/// One PPO update: `epochs` passes of shuffled minibatches of SGD on
/// the clipped surrogate, squared-error value loss, and entropy bonus.
/// Advantages are normalized (mean 0, std 1) across the batch first.
pub fn ppo_update(
    params: &mut PolicyParams,
    batch: &Batch,
    hyper: &PpoHyper,
    rng: &mut impl Rng,
) -> Result<UpdateStats, NnError> {
    assert!(!batch.is_empty(), "cannot update from an empty batch");
    assert_eq!(batch.advantages.len(), batch.len(), "batch not finished");
    let n = batch.len();
    let advantages = normalize_advantages(&batch.advantages);

    let mut indices: Vec<usize> = (0..n).collect();
    let mut stats = UpdateStats::default();
    let mut stat_samples = 0usize;

    let mut actor_grad = vec![0.0; params.actor.n_params()];
    let mut critic_grad = vec![0.0; params.critic.n_params()];

    for _ in 0..hyper.epochs {
        shuffle(&mut indices, rng);
        for chunk in indices.chunks(hyper.minibatch.max(1)) {
            actor_grad.iter_mut().for_each(|g| *g = 0.0);
            critic_grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in chunk {
                let sample = sample_loss_grad(
                    params,
                    batch,
                    advantages[i],
                    i,
                    hyper,
                    &mut actor_grad,
                    &mut critic_grad,
                )?;
                stats.policy_loss += -sample.surrogate;
                stats.value_loss += hyper.value_coef * sample.value_err * sample.value_err;
                stats.entropy += sample.entropy;
                stats.approx_kl += batch.old_logprobs[i] - sample.logprob;
                if (sample.ratio - 1.0).abs() > hyper.clip_eps {
                    stats.clip_fraction += 1.0;
                }
                stat_samples += 1;
            }
            let scale = 1.0 / chunk.len() as f64;
            for g in actor_grad.iter_mut() {
                *g *= scale;
            }
            for g in critic_grad.iter_mut() {
                *g *= scale;
            }
            if actor_grad.iter().chain(critic_grad.iter()).any(|g| !g.is_finite()) {
                return Err(NnError::NonFinite("ppo gradients"));
            }
            params.actor.apply_gradient(&actor_grad, hyper.lr);
            params.critic.apply_gradient(&critic_grad, hyper.lr);
        }
    }

    let denom = stat_samples.max(1) as f64;
    stats.policy_loss /= denom;
    stats.value_loss /= denom;
    stats.entropy /= denom;
    stats.approx_kl /= denom;
    stats.clip_fraction /= denom;
    params.version += 1;
    Ok(stats)
}

/// Fisher-Yates shuffle driven by the caller's generator.
fn shuffle(indices: &mut [usize], rng: &mut impl Rng) {
    for i in (1..indices.len()).rev() {
        let j = rng.random_range(0..=i);
        indices.swap(i, j);
    }
}
