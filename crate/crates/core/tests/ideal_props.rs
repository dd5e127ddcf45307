//! Property tests for the ideal-utility machinery: curve shape, budget
//! tightness, the duration-one reduction, and the sigma lower bound.

mod common;

use common::*;
use dmmf::ideal::{ideal_multi, ideal_single, sigma_of_beta, verify_concavity};
use dmmf::rng;
use dmmf::value_model::{DemandAtom, DemandDistribution, ValueDistribution};
use proptest::prelude::*;

fn curve(dist: &ValueDistribution) -> Vec<(f64, f64)> {
    (0..=20)
        .map(|i| {
            let b = i as f64 / 20.0;
            (b, ideal_single(dist, b).value)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    /// v* is non-decreasing and concave in beta, caps at E[V], and the optimal
    /// policy's request rate equals beta exactly.
    #[test]
    fn ideal_single_curve_shape(seed in 0u64..1_000_000) {
        let mut rng = rng::stream(seed, &[31]);
        let dist = random_value_distribution(&mut rng);
        let pts = curve(&dist);
        let report = verify_concavity(&pts);
        prop_assert!(report.worst_concavity_violation <= 1e-9);
        prop_assert!(report.worst_monotonicity_violation <= 1e-12);
        prop_assert!((pts.last().unwrap().1 - dist.mean()).abs() <= 1e-9);
        for i in [1usize, 7, 13, 20] {
            let (beta, _) = pts[i];
            let rate = ideal_single(&dist, beta).policy.expected_request_rate(&dist);
            prop_assert!((rate - beta).abs() <= 1e-9, "beta {beta} rate {rate}");
        }
    }

    /// The reusable program collapses to the single-round one on duration-1
    /// supports, and its curve stays concave and monotone.
    #[test]
    fn ideal_multi_reduction_and_shape(seed in 0u64..1_000_000) {
        let mut rng = rng::stream(seed, &[32]);
        let n = 1 + pick(&mut rng, 4) as usize;
        let probs = random_probs(&mut rng, n);
        let atoms: Vec<(f64, f64)> = probs
            .iter()
            .map(|&p| (uniform(&mut rng, 0.0, 2.0), p))
            .collect();
        let vd = ValueDistribution::discrete(atoms.clone()).unwrap();
        let dd = DemandDistribution::new(
            atoms
                .iter()
                .map(|&(v, p)| DemandAtom { value: v, duration: 1, prob: p })
                .collect(),
            1,
        )
        .unwrap();
        for i in 1..=4 {
            let beta = i as f64 / 4.0;
            let s = ideal_single(&vd, beta).value;
            let m = ideal_multi(&dd, beta).unwrap().value;
            prop_assert!((s - m).abs() <= 1e-9, "beta {beta}: {s} vs {m}");
        }
        let demand = random_demand_distribution(&mut rng, 4);
        let pts: Vec<(f64, f64)> = (1..=20)
            .map(|i| {
                let b = i as f64 / 20.0;
                (b, ideal_multi(&demand, b).unwrap().value)
            })
            .collect();
        let report = verify_concavity(&pts);
        prop_assert!(report.worst_concavity_violation <= 1e-9);
        prop_assert!(report.worst_monotonicity_violation <= 1e-9);
        // Per-round value never exceeds the best single demand's rate.
        let cap = demand
            .support
            .iter()
            .map(|a| a.value)
            .fold(0.0f64, f64::max);
        prop_assert!(pts.last().unwrap().1 <= cap + 1e-9);
    }

    /// sigma(beta) always dominates the smallest stationary mass.
    #[test]
    fn sigma_dominates_min_pi(seed in 0u64..1_000_000, tenths in 1u32..=10) {
        let mut rng = rng::stream(seed, &[33]);
        let model = random_value_model(&mut rng);
        let beta = tenths as f64 / 10.0;
        let sigma = sigma_of_beta(&model, beta).unwrap();
        prop_assert!(sigma <= 1.0 + 1e-12);
        prop_assert!(
            sigma >= model.profile().min_pi - 1e-12,
            "sigma {sigma} < min_pi {}",
            model.profile().min_pi
        );
    }
}
