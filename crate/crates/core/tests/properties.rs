//! Randomized invariants over the simulation: observation encoding,
//! determinism, reward bounds, and the compromise/cleanup rules.

use netdef_core::netsim::{
    build_network, AccessLevel, BlueAction, HostId, RedAction, SimConfig, Subnet,
    NUM_BLUE_ACTIONS, NUM_HOSTS, OBS_BITS,
};
use proptest::prelude::*;

fn host_strategy() -> impl Strategy<Value = HostId> {
    (0..NUM_HOSTS).prop_map(|i| HostId::new(i).unwrap())
}

fn blue_strategy() -> impl Strategy<Value = BlueAction> {
    (0..NUM_BLUE_ACTIONS).prop_map(|i| BlueAction::from_index(i).unwrap())
}

fn red_strategy() -> impl Strategy<Value = RedAction> {
    prop_oneof![
        Just(RedAction::Sleep),
        prop_oneof![
            Just(Subnet::User),
            Just(Subnet::Enterprise),
            Just(Subnet::Operational)
        ]
        .prop_map(RedAction::DiscoverHosts),
        host_strategy().prop_map(RedAction::ScanServices),
        host_strategy().prop_map(RedAction::Exploit),
        host_strategy().prop_map(RedAction::Escalate),
        Just(RedAction::Impact),
    ]
}

fn config_strategy() -> impl Strategy<Value = SimConfig> {
    (0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0, any::<u64>()).prop_map(
        |(pe, pr, pde, pds, seed)| SimConfig {
            p_exploit_success: pe,
            p_restore_fail: pr,
            p_detect_exploit: pde,
            p_detect_scan: pds,
            horizon: 40,
            seed,
        },
    )
}

/// Worst single-step penalty: every host at admin (9 user hosts at 0.1,
/// 4 servers at 1.0) plus an impact and a restore attempt.
const REWARD_FLOOR: f64 = -(0.9 + 4.0 + 10.0 + 1.0);

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn observations_stay_well_formed(
        config in config_strategy(),
        actions in proptest::collection::vec((blue_strategy(), red_strategy()), 1..40),
    ) {
        let mut state = build_network(config).unwrap();
        for (blue, red) in actions {
            let (obs, _) = state.step(blue, red).unwrap();
            prop_assert_eq!(obs.len(), OBS_BITS);
            for i in 0..OBS_BITS {
                prop_assert!(obs.bit(i) <= 1);
            }
            for h in HostId::all() {
                // Activity is a three-valued field: none / scan / exploit.
                prop_assert!(obs.activity(h) <= 2);
                prop_assert!(obs.compromise(h) <= 3);
            }
        }
    }

    #[test]
    fn identical_seeds_give_identical_trajectories(
        config in config_strategy(),
        actions in proptest::collection::vec((blue_strategy(), red_strategy()), 1..40),
    ) {
        let mut a = build_network(config).unwrap();
        let mut b = build_network(config).unwrap();
        for (blue, red) in actions {
            let (obs_a, ev_a) = a.step(blue, red).unwrap();
            let (obs_b, ev_b) = b.step(blue, red).unwrap();
            prop_assert_eq!(obs_a.to_bit_string(), obs_b.to_bit_string());
            prop_assert_eq!(ev_a, ev_b);
        }
    }

    #[test]
    fn rewards_are_bounded(
        config in config_strategy(),
        actions in proptest::collection::vec((blue_strategy(), red_strategy()), 1..40),
    ) {
        let mut state = build_network(config).unwrap();
        for (blue, red) in actions {
            let (_, events) = state.step(blue, red).unwrap();
            prop_assert!(events.reward <= 0.0, "reward {}", events.reward);
            prop_assert!(events.reward >= REWARD_FLOOR, "reward {}", events.reward);
        }
    }

    #[test]
    fn foothold_survives_any_defence(
        config in config_strategy(),
        actions in proptest::collection::vec((blue_strategy(), red_strategy()), 1..40),
    ) {
        let mut state = build_network(config).unwrap();
        for (blue, red) in actions {
            state.step(blue, red).unwrap();
            prop_assert!(state.host(HostId::USER0).red_access >= AccessLevel::User);
            prop_assert!(state.host(HostId::USER0).known_to_red);
        }
    }

    #[test]
    fn red_knowledge_is_monotone(
        config in config_strategy(),
        actions in proptest::collection::vec((blue_strategy(), red_strategy()), 1..40),
    ) {
        let mut state = build_network(config).unwrap();
        let mut known = [false; NUM_HOSTS];
        for (blue, red) in actions {
            state.step(blue, red).unwrap();
            for h in HostId::all() {
                let now = state.host(h).known_to_red;
                prop_assert!(now || !known[h.index()], "{:?} forgotten", h);
                known[h.index()] = now;
            }
        }
    }

    #[test]
    fn only_restore_revokes_admin(
        config in config_strategy(),
        actions in proptest::collection::vec((blue_strategy(), red_strategy()), 1..40),
    ) {
        let mut state = build_network(config).unwrap();
        for (blue, red) in actions {
            let admin_before: Vec<bool> = HostId::all()
                .map(|h| state.host(h).red_access == AccessLevel::Admin)
                .collect();
            state.step(blue, red).unwrap();
            for h in HostId::all() {
                if admin_before[h.index()] && blue != BlueAction::Restore(h) {
                    prop_assert_eq!(
                        state.host(h).red_access,
                        AccessLevel::Admin,
                        "admin on {:?} lost to {:?}",
                        h,
                        blue
                    );
                }
            }
        }
    }

    #[test]
    fn step_counter_and_horizon(
        config in config_strategy(),
    ) {
        let mut state = build_network(config).unwrap();
        for expected in 0..config.horizon {
            prop_assert!(!state.is_done());
            prop_assert_eq!(state.step, expected);
            state.step(BlueAction::Sleep, RedAction::Sleep).unwrap();
        }
        prop_assert!(state.is_done());
        prop_assert!(state.step(BlueAction::Sleep, RedAction::Sleep).is_err());
    }

    #[test]
    fn blue_action_indices_round_trip(index in 0..NUM_BLUE_ACTIONS) {
        let action = BlueAction::from_index(index).unwrap();
        prop_assert_eq!(action.to_index(), index);
    }
}

#[test]
fn out_of_range_blue_index_rejected() {
    assert!(BlueAction::from_index(NUM_BLUE_ACTIONS).is_err());
}
