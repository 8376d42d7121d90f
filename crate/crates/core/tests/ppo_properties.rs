mod common;

use common::gae_brute;
use corridor_atsc::ppo::gae;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn gae_equals_explicit_double_sum(
        steps in proptest::collection::vec((-10f64..10.0, -10f64..10.0, proptest::bool::weighted(0.15)), 1..=16),
        boot in -10f64..10.0,
        gamma in 0.0f64..0.999,
        lambda in 0.0f64..0.999,
    ) {
        let r: Vec<f64> = steps.iter().map(|s| s.0).collect();
        let v: Vec<f64> = steps.iter().map(|s| s.1).collect();
        let d: Vec<bool> = steps.iter().map(|s| s.2).collect();
        let (adv, ret) = gae(&r, &v, boot, &d, gamma, lambda).unwrap();
        let want = gae_brute(&r, &v, boot, &d, gamma, lambda);
        for t in 0..r.len() {
            prop_assert!((adv[t] - want[t]).abs() <= 1e-9 * want[t].abs().max(1.0));
            prop_assert!((ret[t] - (want[t] + v[t])).abs() <= 1e-9 * ret[t].abs().max(1.0));
        }
    }
}
