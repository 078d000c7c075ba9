mod common;

use crossflow::reward::{individual_delay, total_squared_delay, RewardState};
use proptest::prelude::*;

const V_MAX: f64 = 13.89;

#[test]
fn reward_fuzz_stays_in_unit_interval() {
    let (lo, hi, monotone) = common::reward_fuzz(100_000, 3);
    assert!(lo >= 0.0 && hi <= 1.0, "{lo} {hi}");
    assert!(monotone);
}

#[test]
fn splitting_a_stop_into_two_half_speeds_costs_more() {
    let one_stopped = total_squared_delay([0.0], V_MAX);
    let two_half = total_squared_delay([V_MAX / 2.0, V_MAX / 2.0], V_MAX);
    // same summed linear delay
    assert_eq!(individual_delay(0.0, V_MAX), 2.0 * individual_delay(V_MAX / 2.0, V_MAX));
    assert_eq!((one_stopped, two_half), (1.0, 1.5));
    assert!(two_half > one_stopped);
}

proptest! {
    #![proptest_config(common::cases(256))]

    #[test]
    fn tsd_is_permutation_invariant_and_additive(
        a in prop::collection::vec(0.0f64..=V_MAX, 0..30),
        b in prop::collection::vec(0.0f64..=V_MAX, 0..30),
    ) {
        let joint: Vec<f64> = a.iter().chain(&b).copied().collect();
        let mut rev = joint.clone();
        rev.reverse();
        let sum = total_squared_delay(a.iter().copied(), V_MAX) + total_squared_delay(b.iter().copied(), V_MAX);
        prop_assert!((total_squared_delay(joint.iter().copied(), V_MAX) - sum).abs() < 1e-9);
        prop_assert!((total_squared_delay(rev, V_MAX) - sum).abs() < 1e-9);
    }

    #[test]
    fn reward_is_one_only_at_free_flow(tsds in prop::collection::vec(0.0f64..100.0, 1..50)) {
        let mut s = RewardState::new();
        for t in tsds {
            let r = s.reward(t);
            prop_assert!((0.0..=1.0).contains(&r));
            prop_assert_eq!(r == 1.0, t == 0.0);
            prop_assert!(s.tsd_max >= 1.0);
        }
    }
}
