//! Controller/sub-agent wiring, the reference controllers, and the
//! evaluation protocol, including frozen sleeping-defender scores.

use netdef_core::adversaries::RedAgentKind;
use netdef_core::eval::{
    ablation_grid, challenge_grid, evaluate, mean_and_std, policy_by_name, run_episode,
    BaselineHierarchical, HierarchicalGreedy, Scenario, SleepPolicy,
};
use netdef_core::hierarchy::{
    baseline_controller_act, hierarchical_act, train_controller, train_sub_agent, ActMode,
    BaselineKind, ControllerInput, HierarchicalPolicy, SubAgentRegistry, BLINE_DEFENCE,
    CONTROLLER_INPUT_DIM, MEANDER_DEFENCE,
};
use netdef_core::icm::IcmHyper;
use netdef_core::netsim::{
    BlueAction, HostId, Observation, SimConfig, NUM_BLUE_ACTIONS, OBS_BITS,
};
use netdef_core::nn::MlpSpec;
use netdef_core::ppo::{PolicyParams, PpoHyper};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic dynamics for frozen-score oracles.
fn sure_config() -> SimConfig {
    SimConfig {
        p_exploit_success: 1.0,
        p_restore_fail: 0.0,
        ..SimConfig::default()
    }
}

fn sub_agent_spec() -> MlpSpec {
    MlpSpec::new(OBS_BITS, vec![64, 64], NUM_BLUE_ACTIONS)
}

/// An all-zero sub-agent whose greedy action is forced to `action` by a
/// single output bias.
fn forced_policy(action: usize) -> PolicyParams {
    let mut params = PolicyParams::zeros(sub_agent_spec());
    let n = params.actor.n_params();
    params.actor.params_mut()[n - NUM_BLUE_ACTIONS + action] = 1.0;
    params
}

fn two_agent_registry() -> SubAgentRegistry {
    let mut registry = SubAgentRegistry::new();
    // Distinct forced actions so tests can tell the specialists apart.
    registry
        .push(BLINE_DEFENCE, forced_policy(BlueAction::Analyse(HostId::USER1).to_index()))
        .unwrap();
    registry
        .push(MEANDER_DEFENCE, forced_policy(BlueAction::Decoy(HostId::USER2).to_index()))
        .unwrap();
    registry
}

// --- controller input -------------------------------------------------------

#[test]
fn fingerprint_accumulates_or_of_observations() {
    let mut a = Observation::zeros();
    a.set_nibble(HostId::USER0, 1, 0);
    let mut b = Observation::zeros();
    b.set_nibble(HostId::USER3, 2, 3);

    let mut input = ControllerInput::reset();
    input.absorb(&a);
    input.absorb(&b);
    // Current is the latest observation only.
    assert_eq!(input.current, b);
    // The fingerprint keeps the earlier scan bit.
    assert_eq!(input.fingerprint.activity(HostId::USER0), 1);
    assert_eq!(input.fingerprint.activity(HostId::USER3), 2);
    assert_eq!(input.fingerprint.compromise(HostId::USER3), 3);

    let features = input.to_features();
    assert_eq!(features.len(), CONTROLLER_INPUT_DIM);
    assert!(features.iter().all(|f| *f == 0.0 || *f == 1.0));
}

// --- registry ---------------------------------------------------------------

#[test]
fn registry_rejects_duplicates_and_bad_specs() {
    let mut registry = SubAgentRegistry::new();
    registry
        .push(BLINE_DEFENCE, PolicyParams::zeros(sub_agent_spec()))
        .unwrap();
    assert!(registry
        .push(BLINE_DEFENCE, PolicyParams::zeros(sub_agent_spec()))
        .is_err());

    let wrong_input = MlpSpec::new(10, vec![8], NUM_BLUE_ACTIONS);
    assert!(registry.push("bad-input", PolicyParams::zeros(wrong_input)).is_err());
    let wrong_actions = MlpSpec::new(OBS_BITS, vec![8], 7);
    assert!(registry
        .push("bad-actions", PolicyParams::zeros(wrong_actions))
        .is_err());

    assert_eq!(registry.len(), 1);
    assert_eq!(registry.index_of(BLINE_DEFENCE), Some(0));
    assert_eq!(registry.index_of("missing"), None);
}

// --- two-level action selection ---------------------------------------------

#[test]
fn controller_choice_selects_the_sub_agents_action() {
    let registry = two_agent_registry();
    let controller_spec = MlpSpec::new(CONTROLLER_INPUT_DIM, vec![8], registry.len());

    // Zero controller: ties broken toward index 0.
    let policy = HierarchicalPolicy {
        controller: PolicyParams::zeros(controller_spec.clone()),
        registry: registry.clone(),
    };
    let input = ControllerInput::reset();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (index, action) = hierarchical_act(&policy, &input, ActMode::Greedy, &mut rng).unwrap();
    assert_eq!(index, 0);
    assert_eq!(action, BlueAction::Analyse(HostId::USER1));

    // Bias the controller toward index 1: the other specialist acts.
    let mut controller = PolicyParams::zeros(controller_spec);
    let n = controller.actor.n_params();
    controller.actor.params_mut()[n - 1] = 1.0;
    let policy = HierarchicalPolicy {
        controller,
        registry,
    };
    let (index, action) = hierarchical_act(&policy, &input, ActMode::Greedy, &mut rng).unwrap();
    assert_eq!(index, 1);
    assert_eq!(action, BlueAction::Decoy(HostId::USER2));
}

#[test]
fn perfect_baseline_looks_up_the_matching_specialist() {
    let registry = two_agent_registry();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pick = |adversary, rng: &mut ChaCha8Rng| {
        baseline_controller_act(BaselineKind::Perfect, adversary, &registry, rng)
    };
    assert_eq!(pick(RedAgentKind::Bline, &mut rng), 0);
    assert_eq!(pick(RedAgentKind::Meander, &mut rng), 1);
    assert_eq!(pick(RedAgentKind::Sleep, &mut rng), 0);

    // The lookup is by name, not position.
    let mut reversed = SubAgentRegistry::new();
    reversed
        .push(MEANDER_DEFENCE, PolicyParams::zeros(sub_agent_spec()))
        .unwrap();
    reversed
        .push(BLINE_DEFENCE, PolicyParams::zeros(sub_agent_spec()))
        .unwrap();
    let pick = |adversary, rng: &mut ChaCha8Rng| {
        baseline_controller_act(BaselineKind::Perfect, adversary, &reversed, rng)
    };
    assert_eq!(pick(RedAgentKind::Bline, &mut rng), 1);
    assert_eq!(pick(RedAgentKind::Meander, &mut rng), 0);
}

#[test]
fn chance_baseline_is_uniform() {
    let registry = two_agent_registry();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 10_000;
    let zeros = (0..n)
        .filter(|_| {
            baseline_controller_act(BaselineKind::Chance, RedAgentKind::Bline, &registry, &mut rng)
                == 0
        })
        .count();
    let freq = zeros as f64 / n as f64;
    assert!((freq - 0.5).abs() < 0.02, "frequency {freq}");
}

// --- episode oracles --------------------------------------------------------

#[test]
fn sleep_vs_sleep_scores_zero() {
    let record =
        run_episode(&mut SleepPolicy, RedAgentKind::Sleep, &sure_config(), 30, 0).unwrap();
    assert_eq!(record.score, 0.0);
    assert_eq!(record.steps.len(), 30);
    assert!(record.steps.iter().all(|s| s.reward == 0.0));
}

#[test]
fn frozen_sleeping_defender_scores() {
    // Deterministic dynamics; frozen from a hand-checked oracle run.
    let cases = [
        (RedAgentKind::Bline, 30, -261.9),
        (RedAgentKind::Bline, 50, -523.9),
        (RedAgentKind::Bline, 100, -1178.9),
        (RedAgentKind::Meander, 30, -24.3),
        (RedAgentKind::Meander, 50, -229.3),
        (RedAgentKind::Meander, 100, -959.3),
    ];
    for (adversary, horizon, expected) in cases {
        let record =
            run_episode(&mut SleepPolicy, adversary, &sure_config(), horizon, 7).unwrap();
        assert!(
            (record.score - expected).abs() < 1e-9,
            "{adversary:?} h={horizon}: {} vs {expected}",
            record.score
        );
    }
}

#[test]
fn longer_horizons_cost_strictly_more() {
    for adversary in [RedAgentKind::Bline, RedAgentKind::Meander] {
        let score = |h| {
            run_episode(&mut SleepPolicy, adversary, &sure_config(), h, 3)
                .unwrap()
                .score
        };
        let (s30, s50, s100) = (score(30), score(50), score(100));
        assert!(s30 > s50 && s50 > s100, "{adversary:?}: {s30} {s50} {s100}");
    }
}

#[test]
fn episode_records_are_seed_deterministic() {
    let config = SimConfig::default();
    let a = run_episode(&mut SleepPolicy, RedAgentKind::Meander, &config, 50, 9).unwrap();
    let b = run_episode(&mut SleepPolicy, RedAgentKind::Meander, &config, 50, 9).unwrap();
    assert_eq!(a, b);
    let c = run_episode(&mut SleepPolicy, RedAgentKind::Meander, &config, 50, 10).unwrap();
    assert_eq!(c.seed, 10);
}

// --- evaluation protocol ----------------------------------------------------

#[test]
fn challenge_grid_shape() {
    let grid = challenge_grid(1000);
    assert_eq!(grid.len(), 9);
    for adversary in [RedAgentKind::Bline, RedAgentKind::Meander, RedAgentKind::Sleep] {
        for horizon in [30, 50, 100] {
            assert!(grid
                .iter()
                .any(|s| s.adversary == adversary && s.horizon == horizon && s.episodes == 1000));
        }
    }
}

#[test]
fn mean_and_std_hand_values() {
    let (mean, std) = mean_and_std(&[1.0, 2.0, 3.0, 4.0]);
    assert!((mean - 2.5).abs() < 1e-12);
    assert!((std - 1.25f64.sqrt()).abs() < 1e-12);
    assert_eq!(mean_and_std(&[]), (0.0, 0.0));
}

#[test]
fn evaluate_is_reproducible_and_aggregates_correctly() {
    let scenarios = [
        Scenario {
            adversary: RedAgentKind::Bline,
            horizon: 30,
            episodes: 5,
        },
        Scenario {
            adversary: RedAgentKind::Meander,
            horizon: 30,
            episodes: 5,
        },
    ];
    let config = SimConfig::default();

    let mut seen = Vec::new();
    let mut sink = |s: &Scenario, r: &netdef_core::eval::EpisodeRecord| {
        seen.push((s.adversary, r.seed, r.score));
    };
    let a = evaluate(&mut SleepPolicy, &scenarios, &config, 100, Some(&mut sink)).unwrap();
    let b = evaluate(&mut SleepPolicy, &scenarios, &config, 100, None).unwrap();
    assert_eq!(a, b);

    // Sink sees every episode, in seed order per scenario.
    assert_eq!(seen.len(), 10);
    assert_eq!(
        seen.iter().map(|(_, seed, _)| *seed).collect::<Vec<_>>(),
        vec![100, 101, 102, 103, 104, 100, 101, 102, 103, 104]
    );

    // Per-row means and the final score are plain arithmetic over the
    // recorded episode scores.
    for row in &a.rows {
        let expected = row.scores.iter().sum::<f64>() / row.scores.len() as f64;
        assert!((row.mean - expected).abs() < 1e-12);
    }
    let expected_final = a.rows.iter().map(|r| r.mean).sum::<f64>() / a.rows.len() as f64;
    assert!((a.final_score() - expected_final).abs() < 1e-12);

    // A different base seed changes the sampled episodes.
    let c = evaluate(&mut SleepPolicy, &scenarios, &config, 7, None).unwrap();
    assert_ne!(a.rows[0].scores, c.rows[0].scores);
}

#[test]
fn hierarchical_greedy_logs_selections() {
    let registry = two_agent_registry();
    let controller_spec = MlpSpec::new(CONTROLLER_INPUT_DIM, vec![8], registry.len());
    let policy = HierarchicalPolicy {
        controller: PolicyParams::zeros(controller_spec),
        registry,
    };
    let mut blue = HierarchicalGreedy::new(policy);
    let record =
        run_episode(&mut blue, RedAgentKind::Bline, &sure_config(), 30, 0).unwrap();
    assert_eq!(blue.selections.len(), 30);
    // Zero controller always picks index 0, whose forced action is
    // Analyse(User1).
    assert!(blue.selections.iter().all(|&i| i == 0));
    assert!(record
        .steps
        .iter()
        .all(|s| s.blue == BlueAction::Analyse(HostId::USER1)));
}

#[test]
fn baseline_policies_are_seed_deterministic() {
    let registry = two_agent_registry();
    for kind in [BaselineKind::Perfect, BaselineKind::Chance] {
        let mut policy = BaselineHierarchical::new(kind, registry.clone());
        let a = run_episode(&mut policy, RedAgentKind::Meander, &SimConfig::default(), 50, 4)
            .unwrap();
        let b = run_episode(&mut policy, RedAgentKind::Meander, &SimConfig::default(), 50, 4)
            .unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn policy_by_name_covers_all_ablation_rows() {
    let registry = two_agent_registry();
    let controller_spec = MlpSpec::new(CONTROLLER_INPUT_DIM, vec![8], registry.len());
    let policy = HierarchicalPolicy {
        controller: PolicyParams::zeros(controller_spec),
        registry,
    };
    for name in [
        BLINE_DEFENCE,
        MEANDER_DEFENCE,
        "Hierarchical",
        "Hierarchical-perfect",
        "Hierarchical-chance",
    ] {
        let mut blue = policy_by_name(name, &policy).unwrap_or_else(|| panic!("missing {name}"));
        blue.reset(RedAgentKind::Bline, 0);
        let _ = blue.act(&Observation::zeros());
    }
    assert!(policy_by_name("nonsense", &policy).is_none());
}

#[test]
fn ablation_grid_reports_every_row_and_check() {
    let registry = two_agent_registry();
    let controller_spec = MlpSpec::new(CONTROLLER_INPUT_DIM, vec![8], registry.len());
    let policy = HierarchicalPolicy {
        controller: PolicyParams::zeros(controller_spec),
        registry,
    };
    let report = ablation_grid(&policy, &SimConfig::default(), 3, 30, 0).unwrap();
    for name in [
        BLINE_DEFENCE,
        MEANDER_DEFENCE,
        "Hierarchical",
        "Hierarchical-perfect",
        "Hierarchical-chance",
    ] {
        let row = report.row(name).unwrap_or_else(|| panic!("missing {name}"));
        assert!((row.average - (row.vs_bline + row.vs_meander) / 2.0).abs() < 1e-12);
    }
    let check_names: Vec<&str> = report.checks.iter().map(|c| c.name.as_str()).collect();
    assert_eq!(
        check_names,
        vec![
            "specialists-specialize",
            "hierarchy-beats-specialists",
            "chance-clearly-worse",
            "close-to-perfect"
        ]
    );
}

// --- training smoke tests ---------------------------------------------------

#[test]
fn train_sub_agent_respects_budget_and_is_deterministic() {
    let sim = SimConfig {
        horizon: 20,
        ..SimConfig::default()
    };
    let ppo = PpoHyper::default();
    let icm = IcmHyper::default();
    let budget = 200;

    let (params_a, log_a) =
        train_sub_agent(RedAgentKind::Bline, &sim, &ppo, &icm, budget, 42).unwrap();
    let (params_b, log_b) =
        train_sub_agent(RedAgentKind::Bline, &sim, &ppo, &icm, budget, 42).unwrap();
    assert_eq!(params_a, params_b);
    assert_eq!(log_a, log_b);

    assert!(log_a.episodes > 0);
    assert!(log_a.env_steps >= budget);
    // Budget overshoot is bounded by one episode batch.
    assert!(log_a.env_steps < budget + 16 * sim.horizon as usize);
    assert!(params_a.actor.params().iter().all(|p| p.is_finite()));
    assert!(params_a.critic.params().iter().all(|p| p.is_finite()));

    let (params_c, _) =
        train_sub_agent(RedAgentKind::Bline, &sim, &ppo, &icm, budget, 43).unwrap();
    assert_ne!(params_a, params_c);
}

#[test]
fn train_controller_smoke() {
    let sim = SimConfig {
        horizon: 20,
        ..SimConfig::default()
    };
    let registry = two_agent_registry();
    let (policy, log) = train_controller(
        registry,
        &[RedAgentKind::Bline, RedAgentKind::Meander],
        &sim,
        &PpoHyper::default(),
        200,
        1,
    )
    .unwrap();
    assert!(log.episodes > 0);
    assert_eq!(policy.registry.len(), 2);
    assert_eq!(policy.controller.spec.input_dim, CONTROLLER_INPUT_DIM);
    assert!(policy.controller.actor.params().iter().all(|p| p.is_finite()));

    // The learned policy is usable end to end.
    let mut blue = HierarchicalGreedy::new(policy);
    let record = run_episode(&mut blue, RedAgentKind::Bline, &sim, 20, 0).unwrap();
    assert_eq!(record.steps.len(), 20);
}

#[test]
fn train_rejects_empty_budget() {
    let sim = SimConfig::default();
    assert!(train_sub_agent(
        RedAgentKind::Bline,
        &sim,
        &PpoHyper::default(),
        &IcmHyper::default(),
        0,
        0
    )
    .is_err());
    assert!(train_controller(
        two_agent_registry(),
        &[RedAgentKind::Bline],
        &sim,
        &PpoHyper::default(),
        0,
        0
    )
    .is_err());
    assert!(train_controller(
        SubAgentRegistry::new(),
        &[RedAgentKind::Bline],
        &sim,
        &PpoHyper::default(),
        100,
        0
    )
    .is_err());
}

#[test]
fn sampled_hierarchical_act_is_rng_driven() {
    let registry = two_agent_registry();
    let controller_spec = MlpSpec::new(CONTROLLER_INPUT_DIM, vec![8], registry.len());
    let policy = HierarchicalPolicy {
        controller: PolicyParams::zeros(controller_spec),
        registry,
    };
    let input = ControllerInput::reset();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut seen = [false; 2];
    for _ in 0..100 {
        let (index, _) = hierarchical_act(&policy, &input, ActMode::Sample, &mut rng).unwrap();
        seen[index] = true;
    }
    // Uniform logits: both specialists get sampled.
    assert!(seen[0] && seen[1]);
    // And the stream is reproducible.
    let mut r1 = ChaCha8Rng::seed_from_u64(6);
    let mut r2 = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..20 {
        let a = hierarchical_act(&policy, &input, ActMode::Sample, &mut r1).unwrap();
        let b = hierarchical_act(&policy, &input, ActMode::Sample, &mut r2).unwrap();
        assert_eq!(a, b);
    }
    let _ = rng.random::<u64>();
}
