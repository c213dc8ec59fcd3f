mod common;

use genattr::eval::{auc, roc, RocCurve};
use proptest::prelude::*;

fn score_set() -> impl Strategy<Value = Vec<(f64, bool)>> {
    let coarse = (-5i32..=5).prop_map(|k| k as f64 / 5.0);
    let fine = -1.0f64..1.0;
    prop::collection::vec((prop_oneof![coarse, fine], any::<bool>()), 2..200).prop_map(|mut v| {
        v[0].1 = true;
        v[1].1 = false;
        v
    })
}

proptest! {
    #![proptest_config(common::proptest_config(300))]

    #[test]
    fn trapezoid_equals_pair_counting(scores in score_set()) {
        let curve = roc(&scores).unwrap();
        let expect = common::pair_count_auc(&scores);
        prop_assert!((auc(&curve) - expect).abs() < 1e-12);
        prop_assert!((curve.auc - expect).abs() < 1e-12);
    }

    #[test]
    fn curve_is_monotone_from_origin_to_corner(scores in score_set()) {
        let curve = roc(&scores).unwrap();
        prop_assert_eq!(curve.points.first().copied(), Some((0.0, 0.0)));
        prop_assert_eq!(curve.points.last().copied(), Some((1.0, 1.0)));
        for w in curve.points.windows(2) {
            prop_assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
        }
    }

    #[test]
    fn tsv_round_trip(scores in score_set()) {
        let curve = roc(&scores).unwrap();
        let back = RocCurve::from_tsv(&curve.to_tsv()).unwrap();
        prop_assert_eq!(back.points, curve.points);
        prop_assert_eq!(back.auc, curve.auc);
    }
}

#[test]
fn pinned_five_score_example() {
    let scores = [(0.9, true), (0.4, false), (0.6, true), (0.1, false), (0.4, true)];
    let curve = roc(&scores).unwrap();
    assert!((curve.auc - 5.5 / 6.0).abs() < 1e-15);
}

#[test]
fn chance_and_perfect() {
    let all_same: Vec<_> = (0..10).map(|i| (0.3, i % 2 == 0)).collect();
    assert_eq!(roc(&all_same).unwrap().auc, 0.5);
    let perfect: Vec<_> = (0..10).map(|i| if i % 2 == 0 { (1.0, true) } else { (-1.0, false) }).collect();
    assert_eq!(roc(&perfect).unwrap().auc, 1.0);
}
