//! Numerical checks for the actor-critic stack: hand-computed GAE
//! values, categorical sampling statistics, the clipped-surrogate
//! gradient structure, and finite-difference oracles for the PPO and
//! ICM objectives.

use netdef_core::icm::{icm_intrinsic_reward, icm_loss_grad, icm_update, IcmHyper, IcmParams};
use netdef_core::nn::{log_softmax, softmax, Activation, Mlp, MlpSpec};
use netdef_core::ppo::{
    gae, mlp_forward, normalize_advantages, ppo_loss_grad, ppo_update, sample_action, Batch,
    PolicyParams, PpoHyper,
};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// --- forward pass -----------------------------------------------------------

#[test]
fn zero_weights_give_zero_outputs() {
    let spec = MlpSpec::new(4, vec![8], 3);
    let params = PolicyParams::zeros(spec);
    let (logits, value) = mlp_forward(&params, &[0.3, -0.2, 1.0, 0.5]).unwrap();
    assert_eq!(logits, vec![0.0; 3]);
    assert_eq!(value, 0.0);
}

#[test]
fn forward_is_deterministic() {
    let spec = MlpSpec::new(5, vec![16, 16], 7);
    let params = PolicyParams::new(spec, &mut rng(1));
    let input: Vec<f64> = (0..5).map(|i| i as f64 / 3.0).collect();
    let a = mlp_forward(&params, &input).unwrap();
    let b = mlp_forward(&params, &input).unwrap();
    assert_eq!(a, b);
}

#[test]
fn single_linear_layer_matches_hand_computation() {
    // One linear layer, 2 -> 2: y = W x + b.
    let mut net = Mlp::zeros(vec![2, 2], Activation::Tanh);
    net.params_mut().copy_from_slice(&[
        1.0, 2.0, // row 0
        -0.5, 0.25, // row 1
        0.1, -0.1, // biases
    ]);
    let y = net.forward(&[2.0, -1.0]).unwrap();
    assert!((y[0] - (1.0 * 2.0 + 2.0 * -1.0 + 0.1)).abs() < 1e-12);
    assert!((y[1] - (-0.5 * 2.0 + 0.25 * -1.0 - 0.1)).abs() < 1e-12);
}

#[test]
fn forward_rejects_wrong_input_size() {
    let spec = MlpSpec::new(4, vec![8], 3);
    let params = PolicyParams::zeros(spec);
    assert!(mlp_forward(&params, &[1.0, 2.0]).is_err());
}

#[test]
fn softmax_normalizes() {
    let logits = [1.5, -2.0, 0.3, 9.0];
    let lp = log_softmax(&logits);
    assert!(lp.iter().all(|&l| l <= 0.0));
    let total: f64 = lp.iter().map(|l| l.exp()).sum();
    assert!((total - 1.0).abs() < 1e-9);
}

// --- sampling ---------------------------------------------------------------

#[test]
fn uniform_logits_sample_uniformly() {
    let mut r = rng(42);
    let mut counts = [0usize; 2];
    for _ in 0..10_000 {
        let (a, lp) = sample_action(&[0.0, 0.0], &mut r).unwrap();
        counts[a] += 1;
        assert!((lp - 0.5f64.ln()).abs() < 1e-12);
    }
    // Chi-squared at 1 dof, alpha ~ 1e-3: |n0 - 5000| < ~165.
    assert!((counts[0] as f64 - 5000.0).abs() < 165.0, "counts {counts:?}");
}

#[test]
fn extreme_logits_dominate() {
    let mut r = rng(7);
    let n = 10_000;
    let hits = (0..n)
        .filter(|_| sample_action(&[20.0, -20.0], &mut r).unwrap().0 == 0)
        .count();
    assert!(hits as f64 / n as f64 > 0.999);
}

#[test]
fn sampling_is_reproducible() {
    let logits = [0.5, -0.3, 1.2];
    let seq = |seed| -> Vec<usize> {
        let mut r = rng(seed);
        (0..100).map(|_| sample_action(&logits, &mut r).unwrap().0).collect()
    };
    assert_eq!(seq(9), seq(9));
}

#[test]
fn nan_logits_rejected() {
    assert!(sample_action(&[f64::NAN, 0.0], &mut rng(0)).is_err());
}

// --- GAE --------------------------------------------------------------------

#[test]
fn gae_single_step_identity() {
    let (adv, ret) = gae(&[1.0], &[0.0], &[false], 0.0, 1.0, 1.0);
    assert_eq!(adv, vec![1.0]);
    assert_eq!(ret, vec![1.0]);
}

#[test]
fn gae_lambda_zero_is_one_step_td() {
    let rewards = [1.0, -0.5, 2.0];
    let values = [0.3, 0.7, -0.2];
    let (adv, _) = gae(&rewards, &values, &[false, false, false], 0.4, 0.9, 0.0);
    for t in 0..3 {
        let next_v = if t + 1 < 3 { values[t + 1] } else { 0.4 };
        let delta = rewards[t] + 0.9 * next_v - values[t];
        assert!((adv[t] - delta).abs() < 1e-12);
    }
}

#[test]
fn gae_hand_unrolled() {
    let (adv, ret) = gae(
        &[1.0, 1.0, 1.0],
        &[0.0, 0.0, 0.0],
        &[false, false, false],
        0.0,
        0.9,
        1.0,
    );
    assert!((adv[0] - 2.71).abs() < 1e-12);
    assert!((adv[1] - 1.9).abs() < 1e-12);
    assert!((adv[2] - 1.0).abs() < 1e-12);
    assert_eq!(adv, ret);
}

#[test]
fn gae_undiscounted_is_reward_to_go_minus_value() {
    // With lambda = gamma = 1 and no terminations, A_t must equal
    // sum_{k>=t} r_k + bootstrap - V_t exactly.
    let mut r = rng(3);
    let rewards: Vec<f64> = (0..20).map(|_| r.random::<f64>() - 0.5).collect();
    let values: Vec<f64> = (0..20).map(|_| r.random::<f64>() - 0.5).collect();
    let bootstrap = 0.37;
    let dones = vec![false; 20];
    let (adv, _) = gae(&rewards, &values, &dones, bootstrap, 1.0, 1.0);
    for t in 0..20 {
        let to_go: f64 = rewards[t..].iter().sum::<f64>() + bootstrap;
        assert!((adv[t] - (to_go - values[t])).abs() < 1e-9);
    }
}

#[test]
fn gae_stops_at_episode_boundaries() {
    let (adv, _) = gae(
        &[1.0, 5.0],
        &[0.0, 0.0],
        &[true, false],
        9.0,
        1.0,
        1.0,
    );
    // done at t=0 must block both bootstrap and advantage flow.
    assert!((adv[0] - 1.0).abs() < 1e-12);
    assert!((adv[1] - 14.0).abs() < 1e-12);
}

// --- PPO --------------------------------------------------------------------

fn tiny_batch(params: &PolicyParams, n: usize, seed: u64) -> Batch {
    let mut r = rng(seed);
    let dim = params.spec.input_dim;
    let mut batch = Batch::default();
    for i in 0..n {
        let state: Vec<f64> = (0..dim).map(|_| r.random::<f64>() - 0.5).collect();
        let (logits, value) = mlp_forward(params, &state).unwrap();
        let (action, lp) = sample_action(&logits, &mut r).unwrap();
        let reward = r.random::<f64>() - 0.5;
        batch.push(state, action, lp, reward, value, i == n - 1);
    }
    batch.finish(0.0, 0.99, 0.95);
    batch
}

#[test]
fn zero_advantages_leave_logits_unchanged() {
    let spec = MlpSpec::new(6, vec![8], 4);
    let mut params = PolicyParams::new(spec, &mut rng(11));
    let mut batch = tiny_batch(&params, 16, 12);
    batch.advantages = vec![0.0; batch.len()];
    let hyper = PpoHyper {
        entropy_coef: 0.0,
        ..PpoHyper::default()
    };
    let before = params.actor.clone();
    ppo_update(&mut params, &batch, &hyper, &mut rng(13)).unwrap();
    assert_eq!(params.actor, before);
}

#[test]
fn ppo_gradient_matches_finite_differences() {
    // Full objective (clipped surrogate + entropy + value loss) on a
    // tiny network, against central differences.
    for seed in 0..5 {
        let spec = MlpSpec::new(3, vec![5], 4);
        let mut r = rng(100 + seed);
        let params = PolicyParams::new(spec, &mut r);
        let batch = tiny_batch(&params, 8, 200 + seed);
        let advantages = normalize_advantages(&batch.advantages);
        let hyper = PpoHyper::default();

        let (_, actor_grad, critic_grad) =
            ppo_loss_grad(&params, &batch, &advantages, &hyper).unwrap();

        let eps = 1e-6;
        let check = |which: &str, idx: usize, analytic: f64| {
            let mut perturbed = params.clone();
            let buf = if which == "actor" {
                perturbed.actor.params_mut()
            } else {
                perturbed.critic.params_mut()
            };
            let orig = buf[idx];
            buf[idx] = orig + eps;
            let plus = ppo_loss_grad(&perturbed, &batch, &advantages, &hyper).unwrap().0;
            let buf = if which == "actor" {
                perturbed.actor.params_mut()
            } else {
                perturbed.critic.params_mut()
            };
            buf[idx] = orig - eps;
            let minus = ppo_loss_grad(&perturbed, &batch, &advantages, &hyper).unwrap().0;
            let numeric = (plus - minus) / (2.0 * eps);
            let denom = analytic.abs().max(numeric.abs()).max(1e-6);
            assert!(
                (analytic - numeric).abs() / denom < 1e-3,
                "{which}[{idx}]: analytic {analytic} vs numeric {numeric}"
            );
        };
        for idx in (0..actor_grad.len()).step_by(7) {
            check("actor", idx, actor_grad[idx]);
        }
        for idx in (0..critic_grad.len()).step_by(5) {
            check("critic", idx, critic_grad[idx]);
        }
    }
}

#[test]
fn clipped_samples_have_zero_policy_gradient() {
    let spec = MlpSpec::new(2, vec![4], 3);
    let params = PolicyParams::new(spec, &mut rng(21));
    let hyper = PpoHyper {
        entropy_coef: 0.0,
        value_coef: 0.0,
        ..PpoHyper::default()
    };
    let state = vec![0.4, -0.9];
    let (logits, value) = mlp_forward(&params, &state).unwrap();
    let lp = log_softmax(&logits);

    // Positive advantage with ratio far above 1 + eps: old logprob much
    // smaller than the current one forces ratio >> 1.
    let mut batch = Batch::default();
    batch.push(state.clone(), 0, lp[0] - 1.0, 0.0, value, true);
    batch.finish(0.0, 1.0, 1.0);
    batch.returns = vec![value];
    let (_, actor_grad, _) = ppo_loss_grad(&params, &batch, &[1.0], &hyper).unwrap();
    assert!(actor_grad.iter().all(|g| *g == 0.0), "ratio above clip, A > 0");

    // Negative advantage with ratio far below 1 - eps.
    let mut batch = Batch::default();
    batch.push(state.clone(), 0, lp[0] + 1.0, 0.0, value, true);
    batch.finish(0.0, 1.0, 1.0);
    batch.returns = vec![value];
    let (_, actor_grad, _) = ppo_loss_grad(&params, &batch, &[-1.0], &hyper).unwrap();
    assert!(actor_grad.iter().all(|g| *g == 0.0), "ratio below clip, A < 0");
}

#[test]
fn fresh_batch_gradient_is_vanilla_policy_gradient() {
    // At ratio = 1 the surrogate reduces to lp * A; check the analytic
    // actor gradient against finite differences of that simpler form.
    let spec = MlpSpec::new(3, vec![5], 4);
    let params = PolicyParams::new(spec, &mut rng(33));
    let hyper = PpoHyper {
        entropy_coef: 0.0,
        value_coef: 0.0,
        ..PpoHyper::default()
    };
    let batch = tiny_batch(&params, 6, 34);
    let advantages = normalize_advantages(&batch.advantages);
    let (_, actor_grad, _) = ppo_loss_grad(&params, &batch, &advantages, &hyper).unwrap();

    let pg_loss = |p: &PolicyParams| -> f64 {
        let mut total = 0.0;
        for i in 0..batch.len() {
            let (logits, _) = mlp_forward(p, &batch.states[i]).unwrap();
            let lp = log_softmax(&logits);
            total += -lp[batch.actions[i]] * advantages[i];
        }
        total / batch.len() as f64
    };
    let eps = 1e-6;
    for idx in (0..actor_grad.len()).step_by(9) {
        let mut perturbed = params.clone();
        perturbed.actor.params_mut()[idx] += eps;
        let plus = pg_loss(&perturbed);
        perturbed.actor.params_mut()[idx] -= 2.0 * eps;
        let minus = pg_loss(&perturbed);
        let numeric = (plus - minus) / (2.0 * eps);
        let denom = actor_grad[idx].abs().max(numeric.abs()).max(1e-6);
        assert!(
            (actor_grad[idx] - numeric).abs() / denom < 1e-3,
            "[{idx}]: {} vs {}",
            actor_grad[idx],
            numeric
        );
    }
}

#[test]
fn bandit_update_raises_advantaged_arm() {
    let spec = MlpSpec::new(1, vec![4], 2);
    let mut params = PolicyParams::new(spec, &mut rng(55));
    let state = vec![1.0];
    let (logits, value) = mlp_forward(&params, &state).unwrap();
    let lp = log_softmax(&logits);
    let p0_before = softmax(&logits)[0];

    let mut batch = Batch::default();
    batch.push(state.clone(), 0, lp[0], 1.0, value, false);
    batch.push(state.clone(), 1, lp[1], -1.0, value, true);
    batch.advantages = vec![1.0, -1.0];
    batch.returns = vec![1.0, -1.0];
    batch.values = vec![value, value];

    let hyper = PpoHyper {
        lr: 0.05,
        epochs: 1,
        minibatch: 2,
        entropy_coef: 0.0,
        ..PpoHyper::default()
    };
    ppo_update(&mut params, &batch, &hyper, &mut rng(56)).unwrap();
    let (logits_after, _) = mlp_forward(&params, &state).unwrap();
    let p0_after = softmax(&logits_after)[0];
    assert!(p0_after > p0_before, "{p0_after} vs {p0_before}");
}

// --- ICM --------------------------------------------------------------------

#[test]
fn intrinsic_reward_zero_when_prediction_exact() {
    // All-zero weights: features are identically zero, so the forward
    // prediction matches trivially.
    let mut params = IcmParams::new(4, 3, 2, &mut rng(1));
    for net in [
        &mut params.encoder,
        &mut params.forward_model,
        &mut params.inverse_model,
    ] {
        net.params_mut().iter_mut().for_each(|w| *w = 0.0);
    }
    let hyper = IcmHyper {
        feature_dim: 2,
        ..IcmHyper::default()
    };
    let r = icm_intrinsic_reward(&params, &[1.0, 0.0, 0.0, 1.0], 1, &[0.0; 4], &hyper).unwrap();
    assert_eq!(r, 0.0);
}

#[test]
fn intrinsic_reward_hand_value() {
    // Zero everywhere except the forward model's output biases (1, 1):
    // prediction error is (1, 1), so r = eta/2 * 2 = 1.
    let mut params = IcmParams::new(4, 3, 2, &mut rng(2));
    for net in [
        &mut params.encoder,
        &mut params.forward_model,
        &mut params.inverse_model,
    ] {
        net.params_mut().iter_mut().for_each(|w| *w = 0.0);
    }
    let n = params.forward_model.n_params();
    params.forward_model.params_mut()[n - 2..].copy_from_slice(&[1.0, 1.0]);
    let hyper = IcmHyper {
        feature_dim: 2,
        eta: 1.0,
        ..IcmHyper::default()
    };
    let r = icm_intrinsic_reward(&params, &[0.0; 4], 0, &[0.0; 4], &hyper).unwrap();
    assert!((r - 1.0).abs() < 1e-12);
}

#[test]
fn eta_zero_disables_intrinsic_reward() {
    let params = IcmParams::new(4, 3, 2, &mut rng(3));
    let hyper = IcmHyper {
        feature_dim: 2,
        eta: 0.0,
        ..IcmHyper::default()
    };
    let r = icm_intrinsic_reward(&params, &[1.0; 4], 2, &[0.5; 4], &hyper).unwrap();
    assert_eq!(r, 0.0);
}

#[test]
fn intrinsic_reward_non_negative() {
    let mut r = rng(4);
    let params = IcmParams::new(6, 4, 3, &mut r);
    let hyper = IcmHyper {
        feature_dim: 3,
        ..IcmHyper::default()
    };
    for _ in 0..50 {
        let s: Vec<f64> = (0..6).map(|_| r.random::<f64>()).collect();
        let s2: Vec<f64> = (0..6).map(|_| r.random::<f64>()).collect();
        let a = (r.random::<f64>() * 4.0) as usize;
        let reward = icm_intrinsic_reward(&params, &s, a.min(3), &s2, &hyper).unwrap();
        assert!(reward >= 0.0);
    }
}

#[test]
fn beta_one_removes_inverse_gradient() {
    let params = IcmParams::new(4, 3, 2, &mut rng(5));
    let hyper = IcmHyper {
        feature_dim: 2,
        beta: 1.0,
        ..IcmHyper::default()
    };
    let states = vec![vec![1.0, 0.0, 0.0, 0.0]];
    let next = vec![vec![0.0, 1.0, 0.0, 0.0]];
    let (_, grads) = icm_loss_grad(&params, &states, &[1], &next, &hyper).unwrap();
    assert!(grads.inverse_model.iter().all(|g| *g == 0.0));
}

#[test]
fn icm_memorizes_single_deterministic_transition() {
    let mut params = IcmParams::new(4, 3, 2, &mut rng(6));
    let hyper = IcmHyper {
        feature_dim: 2,
        lr: 0.1,
        ..IcmHyper::default()
    };
    let states = vec![vec![1.0, 0.0, 1.0, 0.0]];
    let next = vec![vec![0.0, 1.0, 0.0, 1.0]];
    let initial =
        icm_intrinsic_reward(&params, &states[0], 2, &next[0], &hyper).unwrap();
    for _ in 0..2000 {
        icm_update(&mut params, &states, &[2], &next, &hyper).unwrap();
    }
    let after = icm_intrinsic_reward(&params, &states[0], 2, &next[0], &hyper).unwrap();
    assert!(after < initial * 1e-2, "initial {initial}, after {after}");
    assert!(after < 1e-4);
}

#[test]
fn icm_gradient_matches_finite_differences() {
    for seed in 0..5 {
        let mut r = rng(700 + seed);
        let params = IcmParams::new(3, 2, 2, &mut r);
        let hyper = IcmHyper {
            feature_dim: 2,
            ..IcmHyper::default()
        };
        let states: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..3).map(|_| r.random::<f64>() - 0.5).collect())
            .collect();
        let next: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..3).map(|_| r.random::<f64>() - 0.5).collect())
            .collect();
        let actions = vec![0, 1, 1, 0];

        let (_, grads) = icm_loss_grad(&params, &states, &actions, &next, &hyper).unwrap();
        let loss_of = |p: &IcmParams| {
            icm_loss_grad(p, &states, &actions, &next, &hyper).unwrap().0.total
        };

        let eps = 1e-6;
        let nets: [(&str, &[f64]); 3] = [
            ("encoder", &grads.encoder),
            ("forward", &grads.forward_model),
            ("inverse", &grads.inverse_model),
        ];
        for (name, grad) in nets {
            for idx in (0..grad.len()).step_by(11) {
                let mut perturbed = params.clone();
                let buf = match name {
                    "encoder" => perturbed.encoder.params_mut(),
                    "forward" => perturbed.forward_model.params_mut(),
                    _ => perturbed.inverse_model.params_mut(),
                };
                let orig = buf[idx];
                buf[idx] = orig + eps;
                let plus = loss_of(&perturbed);
                let buf = match name {
                    "encoder" => perturbed.encoder.params_mut(),
                    "forward" => perturbed.forward_model.params_mut(),
                    _ => perturbed.inverse_model.params_mut(),
                };
                buf[idx] = orig - eps;
                let minus = loss_of(&perturbed);
                let numeric = (plus - minus) / (2.0 * eps);
                let denom = grad[idx].abs().max(numeric.abs()).max(1e-6);
                assert!(
                    (grad[idx] - numeric).abs() / denom < 1e-3,
                    "{name}[{idx}]: analytic {} vs numeric {}",
                    grad[idx],
                    numeric
                );
            }
        }
    }
}
