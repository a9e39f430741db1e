use asymcouple_core::measure::{compose, inverse_density_bound, overlap_lower_bound, PRUNE_THRESHOLD};
use asymcouple_core::{DiscreteKernel, DiscreteMeasure};
use proptest::prelude::*;

type M = DiscreteMeasure<u8>;

fn measure() -> impl Strategy<Value = M> {
    prop::collection::vec((0u8..10, 0.0f64..1.0), 0..8).prop_map(DiscreteMeasure::from_pairs)
}

fn dyadic_measure() -> impl Strategy<Value = M> {
    prop::collection::vec((0u8..10, 1u32..1024), 0..8)
        .prop_map(|v| DiscreteMeasure::from_pairs(v.into_iter().map(|(p, k)| (p, k as f64 / 1024.0))))
}

fn probability() -> impl Strategy<Value = M> {
    prop::collection::vec(0.01f64..1.0, 10).prop_map(|w| {
        let s: f64 = w.iter().sum();
        DiscreteMeasure::from_pairs(w.into_iter().enumerate().map(|(i, x)| (i as u8, x / s)))
    })
}

fn subset() -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0u8..10, 0..10)
}

fn pointwise_le(a: &M, b: &M) -> bool {
    a.le_with_tol(b, 1e-12)
}

proptest! {
    #[test]
    fn decomposition_is_exact_on_dyadic_weights(mu in dyadic_measure(), nu in dyadic_measure()) {
        let back = mu.meet(&nu).add(&mu.subtract(&nu));
        for (p, w) in mu.iter() {
            prop_assert_eq!(back.weight(p), w);
        }
        prop_assert_eq!(back.len(), mu.len());
    }

    #[test]
    fn decomposition_within_one_rounding(mu in measure(), nu in measure()) {
        let back = mu.meet(&nu).add(&mu.subtract(&nu));
        for (p, w) in mu.iter() {
            prop_assert!((back.weight(p) - w).abs() <= f64::EPSILON * w + PRUNE_THRESHOLD);
        }
    }

    #[test]
    fn pushforward_inequalities(mu in measure(), nu in measure(), k in 1u8..5) {
        let f = |p: &u8| Some(p % k);
        let fm = mu.pushforward(f).unwrap();
        let fn_ = nu.pushforward(f).unwrap();
        prop_assert!(pointwise_le(&mu.meet(&nu).pushforward(f).unwrap(), &fm.meet(&fn_)));
        prop_assert!(pointwise_le(&fm.subtract(&fn_), &mu.subtract(&nu).pushforward(f).unwrap()));
        prop_assert!((fm.mass() - mu.mass()).abs() < 1e-12);
    }

    #[test]
    fn pushforward_injective_equalities(mu in measure(), nu in measure()) {
        let f = |p: &u8| Some(3 * *p as u16 + 1);
        let fm = mu.pushforward(f).unwrap();
        let fn_ = nu.pushforward(f).unwrap();
        prop_assert!(mu.meet(&nu).pushforward(f).unwrap().approx_eq(&fm.meet(&fn_), 1e-15));
        prop_assert!(mu.subtract(&nu).pushforward(f).unwrap().approx_eq(&fm.subtract(&fn_), 1e-15));
    }

    #[test]
    fn overlap_bounds_hold(mu1 in probability(), mu2 in probability(), a in subset()) {
        let (lhs, rhs) = overlap_lower_bound(&mu1, &mu2, &a).unwrap();
        prop_assert!(lhs >= rhs - 1e-12, "{} < {}", lhs, rhs);
        let (lhs, rhs, _) = inverse_density_bound(&mu1, &mu2, &a).unwrap();
        prop_assert!(lhs >= rhs - 1e-12, "{} < {}", lhs, rhs);
    }

    #[test]
    fn compose_preserves_mass(rows in prop::collection::vec(probability(), 10), y in 0u8..10) {
        let q = DiscreteKernel::new(rows.iter().cloned().enumerate().map(|(i, m)| (i as u8, m))).unwrap();
        let r = DiscreteKernel::new(rows.into_iter().rev().enumerate().map(|(i, m)| (i as u8, m))).unwrap();
        let c = compose(&r, &q, &y).unwrap();
        prop_assert!((c.mass() - 1.0).abs() < 1e-12);
    }
}
