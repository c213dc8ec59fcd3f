mod common;

use genattr::{one_vs_rest_score, pair_score};
use proptest::prelude::*;

fn loss() -> impl Strategy<Value = f64> {
    prop_oneof![
        1 => Just(0.0),
        1 => Just(1e-3),
        1 => Just(f64::MIN_POSITIVE),
        6 => (-12.0f64..2.0).prop_map(|e| 10f64.powf(e)),
    ]
}

proptest! {
    #![proptest_config(common::proptest_config(2000))]

    #[test]
    fn score_algebra_holds(losses in prop::collection::vec(loss(), 2..7)) {
        if let Err(e) = common::check_score_algebra(&losses) {
            return Err(TestCaseError::fail(e));
        }
    }

    #[test]
    fn pair_score_is_bounded_and_antisymmetric(a in loss(), b in loss()) {
        let s = pair_score(a, b);
        prop_assert!((-1.0..=1.0).contains(&s));
        prop_assert_eq!(s, -pair_score(b, a));
    }

    #[test]
    fn appending_a_worse_generator_keeps_the_best_score(
        losses in prop::collection::vec(loss(), 2..6),
        extra in 1.0f64..100.0,
    ) {
        let worst = losses.iter().cloned().fold(0.0, f64::max);
        let best = (0..losses.len()).fold(0, |b, i| if losses[i] < losses[b] { i } else { b });
        let mut more = losses.clone();
        more.push(worst * extra + 1.0);
        prop_assert_eq!(one_vs_rest_score(&losses, best).unwrap(), one_vs_rest_score(&more, best).unwrap());
    }
}

#[test]
fn boundary_cases() {
    common::check_score_boundaries().unwrap();
}

#[test]
fn three_generator_report_has_three_scores() {
    let losses = [0.002, 0.01, 0.03];
    let s: Vec<f64> = (0..3).map(|i| one_vs_rest_score(&losses, i).unwrap()).collect();
    assert!((s[0] - 2.0 / 3.0).abs() < 1e-15);
    assert!((s[1] + 2.0 / 3.0).abs() < 1e-15);
    assert!((s[2] + 14.0 / 16.0).abs() < 1e-15);
}
