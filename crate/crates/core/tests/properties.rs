//! Property tests for the structural invariants: net packing/covering on
//! arbitrary PSD covariances, level-set nesting, and the closed-form
//! helpers' monotonicity and symmetry.

use levelset_lab::estimators::{analytic_g_pair, expected_excess, gaussian_upper_tail};
use levelset_lab::field_models::model_from_dense;
use levelset_lab::level_sets::extract_level_set;
use levelset_lab::sampler::{FieldSample, RngStream};
use levelset_lab::valleys::{build_epsilon_net, mixture_coefficient, verify_net, SweepOrder};
use nalgebra::DMatrix;
use proptest::prelude::*;

/// Random PSD covariance with strictly positive variances, via Σ = A·Aᵀ + εI.
fn psd_covariance(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    proptest::collection::vec(-1.0f64..1.0, n * n).prop_map(move |data| {
        let a = DMatrix::from_row_slice(n, n, &data);
        &a * a.transpose() + DMatrix::<f64>::identity(n, n) * 0.05
    })
}

proptest! {
    #[test]
    fn greedy_net_always_verifies(cov in psd_covariance(8), eps in 0.05f64..0.95) {
        let model = model_from_dense(cov).unwrap();
        let pool: Vec<usize> = (0..8).collect();
        let net = build_epsilon_net(&model, &pool, eps, SweepOrder::IndexAscending).unwrap();
        prop_assert!(verify_net(&model, &net));
        prop_assert!(!net.centers.is_empty());
    }

    #[test]
    fn net_respects_value_ordering(cov in psd_covariance(8), eps in 0.05f64..0.95,
                                   values in proptest::collection::vec(-3.0f64..3.0, 8)) {
        let model = model_from_dense(cov).unwrap();
        let pool: Vec<usize> = (0..8).collect();
        let net = build_epsilon_net(&model, &pool, eps, SweepOrder::ValueDescending(&values)).unwrap();
        prop_assert!(verify_net(&model, &net));
        // the sweep's first accepted center is the pool's best value
        let best = (0..8).max_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap().then(b.cmp(&a))).unwrap();
        prop_assert_eq!(net.centers[0], best);
    }

    #[test]
    fn level_sets_nest_in_alpha(values in proptest::collection::vec(-5.0f64..5.0, 32),
                                a1 in 0.01f64..0.99, a2 in 0.01f64..0.99, g_v in 0.1f64..10.0) {
        let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
        let sample = FieldSample::from_parts(values, RngStream::new(0, 0), 0);
        let big = extract_level_set(&sample, lo, g_v).unwrap();
        let small = extract_level_set(&sample, hi, g_v).unwrap();
        for i in small.indices() {
            prop_assert!(big.indices().contains(i));
        }
    }

    #[test]
    fn mixture_gain_never_exceeds_one(t in 0.0f64..=1.0, alpha in 0.0f64..=1.0) {
        let h = mixture_coefficient(t, alpha).unwrap();
        prop_assert!(h <= 1.0 + 1e-12);
        let at_diag = mixture_coefficient(alpha, alpha).unwrap();
        prop_assert!((at_diag - 1.0).abs() < 1e-12);
    }

    #[test]
    fn expected_excess_decreases_in_threshold(sd in 0.1f64..5.0, a in 0.0f64..5.0, step in 0.01f64..2.0) {
        let lower = expected_excess(sd, a);
        let higher = expected_excess(sd, a + step);
        // strictly decreasing until both tails underflow to zero
        prop_assert!(higher < lower || lower == 0.0);
        prop_assert!(higher >= 0.0);
    }

    #[test]
    fn pair_oracle_is_symmetric(vu in 0.1f64..4.0, vv in 0.1f64..4.0, corr in -0.99f64..0.99) {
        let cov = corr * (vu * vv).sqrt();
        let a = analytic_g_pair(vu, vv, cov).unwrap();
        let b = analytic_g_pair(vv, vu, cov).unwrap();
        prop_assert!((a - b).abs() < 1e-14);
        prop_assert!(a >= 0.0);
    }

    #[test]
    fn upper_tail_is_a_probability_and_monotone(x in -8.0f64..8.0, dx in 0.001f64..3.0) {
        let q = gaussian_upper_tail(x);
        prop_assert!(q > 0.0 && q < 1.0);
        prop_assert!(gaussian_upper_tail(x + dx) <= q);
    }
}
