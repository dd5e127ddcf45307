//! Beta-ideal utility: the most per-round value an uncontested agent can earn
//! while holding the item at most a `beta` fraction of rounds.
//!
//! For single-round demands the optimum requests exactly the top-`beta` quantile
//! mass of the value law, with the boundary atom randomized so the budget binds.
//! For reusable (value, duration) demands the renewal-reward program is solved
//! as a small LP over request frequencies and converted back to request
//! probabilities. A brute-force grid oracle on the ratio objective is provided
//! as an independent cross-check.

use crate::lp::{solve_lp, LinearProgram, LpError, LpStatus};
use crate::value_model::{
    steady_state_mixture, DemandDistribution, MarkovValueModel, Mixture, ValueDistribution,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IdealError {
    #[error("oracle supports at most {max} support points, got {got}")]
    OracleSupportTooLarge { got: usize, max: usize },
    #[error("oracle grid step {0} is below the 1e-3 minimum")]
    OracleStepTooSmall(f64),
    #[error("derivative undefined: distribution has atoms")]
    DerivativeUndefined,
    #[error("sigma undefined at beta = 0")]
    SigmaUndefined,
    #[error("operation requires a single-round value law")]
    RequiresValueLaw,
    #[error("ideal-utility LP failed: {0}")]
    Lp(#[from] LpError),
    #[error("ideal-utility LP reported {0:?} (expected optimal)")]
    LpNotOptimal(LpStatus),
}

/// A randomized request rule.
#[derive(Debug, Clone, PartialEq)]
pub enum RequestPolicy {
    /// Request with probability 1 above `threshold`, `atom_prob` at it, 0 below.
    SingleRound { threshold: f64, atom_prob: f64, beta: f64 },
    /// Per-support-point request probabilities, indexed like the demand support.
    MultiRound { request_probs: Vec<f64>, beta: f64 },
}

impl RequestPolicy {
    pub fn never(beta: f64) -> Self {
        RequestPolicy::SingleRound { threshold: f64::INFINITY, atom_prob: 0.0, beta }
    }

    pub fn beta(&self) -> f64 {
        match self {
            RequestPolicy::SingleRound { beta, .. } => *beta,
            RequestPolicy::MultiRound { beta, .. } => *beta,
        }
    }

    /// Request probability for a sampled value (single-round form).
    pub fn request_prob(&self, value: f64) -> f64 {
        match self {
            RequestPolicy::SingleRound { threshold, atom_prob, .. } => {
                if value > *threshold {
                    1.0
                } else if value == *threshold {
                    *atom_prob
                } else {
                    0.0
                }
            }
            RequestPolicy::MultiRound { .. } => 0.0,
        }
    }

    /// Request probability for the j-th demand-support point (multi-round form).
    pub fn request_prob_atom(&self, j: usize) -> f64 {
        match self {
            RequestPolicy::MultiRound { request_probs, .. } => request_probs[j],
            RequestPolicy::SingleRound { .. } => 0.0,
        }
    }

    /// `E[rho(V)]` under `dist`.
    pub fn expected_request_rate(&self, dist: &ValueDistribution) -> f64 {
        match self {
            RequestPolicy::SingleRound { threshold, atom_prob, .. } => {
                dist.mass_above(*threshold) + atom_prob * dist.mass_at(*threshold)
            }
            RequestPolicy::MultiRound { .. } => 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IdealUtilityResult {
    /// `v*(beta)`: optimal expected per-round utility.
    pub value: f64,
    pub policy: RequestPolicy,
    pub beta: f64,
}

/// Single-round ideal utility: expected value of the top-`beta` quantile mass,
/// boundary atom fractionally included so the request budget binds exactly.
pub fn ideal_single(dist: &ValueDistribution, beta: f64) -> IdealUtilityResult {
    let beta = beta.clamp(0.0, 1.0);
    if beta == 0.0 {
        return IdealUtilityResult { value: 0.0, policy: RequestPolicy::never(0.0), beta };
    }
    match dist {
        ValueDistribution::Discrete { atoms } => ideal_single_discrete(atoms, beta),
        ValueDistribution::Bernoulli { p } => {
            let atoms = [(0.0, 1.0 - p), (1.0, *p)];
            ideal_single_discrete(&atoms, beta)
        }
        ValueDistribution::Uniform { lo, hi } => {
            let tau = hi - beta * (hi - lo);
            let value = (hi * hi - tau * tau) / (2.0 * (hi - lo));
            IdealUtilityResult {
                value,
                policy: RequestPolicy::SingleRound { threshold: tau, atom_prob: 1.0, beta },
                beta,
            }
        }
        ValueDistribution::BoundedDensity { lo, hi, heights, .. } => {
            let tau = dist.quantile(1.0 - beta);
            let w = (hi - lo) / heights.len() as f64;
            let mut value = 0.0;
            for (i, &h) in heights.iter().enumerate() {
                let a = lo + i as f64 * w;
                let b = a + w;
                let from = a.max(tau);
                if from < b {
                    value += h * 0.5 * (b * b - from * from);
                }
            }
            IdealUtilityResult {
                value,
                policy: RequestPolicy::SingleRound { threshold: tau, atom_prob: 1.0, beta },
                beta,
            }
        }
    }
}

fn ideal_single_discrete(atoms: &[(f64, f64)], beta: f64) -> IdealUtilityResult {
    // Fill request mass from the highest value down; the atom where the budget
    // runs out becomes the randomized boundary. Ties in value are already
    // merged by construction, so each atom is a distinct value level.
    let mut remaining = beta;
    let mut value = 0.0;
    let mut threshold = f64::INFINITY;
    let mut atom_prob = 0.0;
    for &(v, p) in atoms.iter().rev() {
        if p <= 0.0 {
            continue;
        }
        if remaining >= p {
            value += v * p;
            remaining -= p;
            threshold = v;
            atom_prob = 1.0;
            if remaining == 0.0 {
                break;
            }
        } else {
            value += v * remaining;
            threshold = v;
            atom_prob = remaining / p;
            break;
        }
    }
    IdealUtilityResult {
        value,
        policy: RequestPolicy::SingleRound { threshold, atom_prob, beta },
        beta,
    }
}

/// Reusable-demand ideal utility via the frequency LP.
///
/// Variables are per-type request frequencies `f_j`; the objective is
/// `sum v_j k_j f_j` under the occupancy budget `sum k_j f_j <= beta` and the
/// consistency caps `0 <= f_j <= p_j (1 - sum (k_j' - 1) f_j')`. Frequencies
/// convert back to request probabilities by dividing out the idle-adjusted mass.
pub fn ideal_multi(dist: &DemandDistribution, beta: f64) -> Result<IdealUtilityResult, IdealError> {
    let m = dist.support.len();
    if beta <= 0.0 {
        // v*(0) = 0 with the never-request policy, by convention.
        return Ok(IdealUtilityResult {
            value: 0.0,
            policy: RequestPolicy::MultiRound { request_probs: vec![0.0; m], beta: 0.0 },
            beta: 0.0,
        });
    }
    let beta = beta.min(1.0);
    let objective: Vec<f64> = dist
        .support
        .iter()
        .map(|a| a.value * a.duration as f64)
        .collect();
    let mut rows = Vec::with_capacity(m + 1);
    let mut rhs = Vec::with_capacity(m + 1);
    rows.push(dist.support.iter().map(|a| a.duration as f64).collect::<Vec<_>>());
    rhs.push(beta);
    for (j, a) in dist.support.iter().enumerate() {
        // f_j + p_j * sum (k_j' - 1) f_j' <= p_j
        let mut row: Vec<f64> = dist
            .support
            .iter()
            .map(|b| a.prob * (b.duration as f64 - 1.0))
            .collect();
        row[j] += 1.0;
        rows.push(row);
        rhs.push(a.prob);
    }
    let solution = solve_lp(&LinearProgram::new(objective, rows, rhs))?;
    if solution.status != LpStatus::Optimal {
        return Err(IdealError::LpNotOptimal(solution.status));
    }
    let f = &solution.x;
    let idle_adjusted: f64 =
        1.0 - dist
            .support
            .iter()
            .zip(f)
            .map(|(a, fj)| (a.duration as f64 - 1.0) * fj)
            .sum::<f64>();
    let request_probs: Vec<f64> = dist
        .support
        .iter()
        .zip(f)
        .map(|(a, fj)| {
            if *fj <= 0.0 {
                0.0
            } else {
                let rho = fj / (a.prob * idle_adjusted);
                debug_assert!(rho <= 1.0 + 1e-6, "recovered rho {rho} above 1");
                rho.clamp(0.0, 1.0)
            }
        })
        .collect();
    Ok(IdealUtilityResult {
        value: solution.objective_value,
        policy: RequestPolicy::MultiRound { request_probs, beta },
        beta,
    })
}

/// Exhaustive grid oracle for the reusable ideal-utility program.
///
/// Evaluates the ratio objective directly on every grid point
/// `rho_j in {0, step, ..., 1}` and returns the best feasible objective. Kept
/// deliberately independent of the LP path.
pub fn oracle_multi(
    dist: &DemandDistribution,
    beta: f64,
    grid_step: f64,
) -> Result<f64, IdealError> {
    let m = dist.support.len();
    if m > 4 {
        return Err(IdealError::OracleSupportTooLarge { got: m, max: 4 });
    }
    if grid_step < 1e-3 - 1e-12 {
        return Err(IdealError::OracleStepTooSmall(grid_step));
    }
    let steps = (1.0 / grid_step).round() as usize;
    let grid: Vec<f64> = (0..=steps).map(|i| (i as f64 * grid_step).min(1.0)).collect();
    let p: Vec<f64> = dist.support.iter().map(|a| a.prob).collect();
    let k: Vec<f64> = dist.support.iter().map(|a| a.duration as f64).collect();
    let vk: Vec<f64> = dist.support.iter().map(|a| a.value * a.duration as f64).collect();
    let mut best = 0.0f64;
    // Outer dimensions by recursion, innermost as a flat loop.
    fn walk(
        j: usize,
        e_rho: f64,
        e_krho: f64,
        e_vkrho: f64,
        grid: &[f64],
        p: &[f64],
        k: &[f64],
        vk: &[f64],
        beta: f64,
        best: &mut f64,
    ) {
        if j + 1 == p.len() {
            let dr = p[j];
            let dk = p[j] * k[j];
            let dv = p[j] * vk[j];
            for &rho in grid {
                let er = e_rho + dr * rho;
                let ek = e_krho + dk * rho;
                let ev = e_vkrho + dv * rho;
                let denom = 1.0 - er + ek;
                if ek <= beta * denom + 1e-12 {
                    let obj = ev / denom;
                    if obj > *best {
                        *best = obj;
                    }
                }
            }
        } else {
            for &rho in grid {
                walk(
                    j + 1,
                    e_rho + p[j] * rho,
                    e_krho + p[j] * k[j] * rho,
                    e_vkrho + p[j] * vk[j] * rho,
                    grid,
                    p,
                    k,
                    vk,
                    beta,
                    best,
                );
            }
        }
    }
    walk(0, 0.0, 0.0, 0.0, &grid, &p, &k, &vk, beta, &mut best);
    Ok(best)
}

/// Worst concavity / monotonicity violations of a `(beta, v)` curve.
#[derive(Debug, Clone, Copy)]
pub struct ConcavityReport {
    /// Max over interior triples of `(v(a)+v(c))/2 - v((a+c)/2)`; concave
    /// curves keep this at or below zero up to tolerance.
    pub worst_concavity_violation: f64,
    /// Max over adjacent pairs of `v(a) - v(b)` for `a < b`; non-decreasing
    /// curves keep this at or below zero.
    pub worst_monotonicity_violation: f64,
}

/// Midpoint-concavity and monotonicity check on a curve sampled over a strictly
/// increasing beta grid.
pub fn verify_concavity(curve: &[(f64, f64)]) -> ConcavityReport {
    let mut worst_conc = f64::NEG_INFINITY;
    let mut worst_mono = f64::NEG_INFINITY;
    if curve.len() < 2 {
        return ConcavityReport {
            worst_concavity_violation: 0.0,
            worst_monotonicity_violation: 0.0,
        };
    }
    for w in curve.windows(2) {
        worst_mono = worst_mono.max(w[0].1 - w[1].1);
    }
    for w in curve.windows(3) {
        let (a, va) = w[0];
        let (c, vc) = w[2];
        let mid = 0.5 * (a + c);
        let v_mid = interpolate(curve, mid);
        worst_conc = worst_conc.max(0.5 * (va + vc) - v_mid);
    }
    ConcavityReport {
        worst_concavity_violation: if worst_conc.is_finite() { worst_conc } else { 0.0 },
        worst_monotonicity_violation: if worst_mono.is_finite() { worst_mono } else { 0.0 },
    }
}

fn interpolate(curve: &[(f64, f64)], x: f64) -> f64 {
    for w in curve.windows(2) {
        let (x0, y0) = w[0];
        let (x1, y1) = w[1];
        if x >= x0 && x <= x1 {
            if x1 == x0 {
                return y0;
            }
            return y0 + (y1 - y0) * (x - x0) / (x1 - x0);
        }
    }
    curve.last().map(|p| p.1).unwrap_or(0.0)
}

/// Analytic vs central-difference derivative of `v*` at `beta`.
///
/// The analytic form is the inverse CDF at the top-`beta` quantile; only
/// defined for atomless laws.
pub fn derivative_check(
    dist: &ValueDistribution,
    beta: f64,
) -> Result<(f64, f64), IdealError> {
    if !dist.is_atomless() {
        return Err(IdealError::DerivativeUndefined);
    }
    let analytic = dist.quantile(1.0 - beta);
    let h = 1e-5;
    let hi = ideal_single(dist, beta + h).value;
    let lo = ideal_single(dist, beta - h).value;
    let finite_difference = (hi - lo) / (2.0 * h);
    Ok((analytic, finite_difference))
}

/// Ratio of average to maximum per-state request probability under the optimal
/// policy for the steady-state mixture. Drives the state-independent guarantee;
/// always at least `min_s pi(s)`.
pub fn sigma_of_beta(model: &MarkovValueModel, beta: f64) -> Result<f64, IdealError> {
    if beta <= 0.0 {
        return Err(IdealError::SigmaUndefined);
    }
    let mixture = match steady_state_mixture(model).map_err(|_| IdealError::RequiresValueLaw)? {
        Mixture::Values(v) => v,
        Mixture::Demands(_) => return Err(IdealError::RequiresValueLaw),
    };
    let policy = ideal_single(&mixture, beta).policy;
    let average = policy.expected_request_rate(&mixture);
    let per_state = match model.per_state() {
        crate::value_model::StateLaw::Values(dists) => dists,
        crate::value_model::StateLaw::Demands(_) => return Err(IdealError::RequiresValueLaw),
    };
    let max_rate = per_state
        .iter()
        .map(|d| policy.expected_request_rate(d))
        .fold(0.0, f64::max);
    debug_assert!(max_rate > 0.0, "positive beta implies a positive request rate somewhere");
    Ok(average / max_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value_model::{DemandAtom, InitialState, StateLaw};

    /// Independent numeric oracle for continuous laws: midpoint integration of
    /// `E[V 1{V >= tau}]` with `tau` found by bisection on the CDF.
    fn numeric_top_beta(dist: &ValueDistribution, beta: f64, panels: usize) -> f64 {
        let (lo, hi) = match dist {
            ValueDistribution::Uniform { lo, hi } => (*lo, *hi),
            ValueDistribution::BoundedDensity { lo, hi, .. } => (*lo, *hi),
            _ => panic!("continuous only"),
        };
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if 1.0 - dist.cdf(mid) > beta {
                a = mid;
            } else {
                b = mid;
            }
        }
        let tau = 0.5 * (a + b);
        let w = (hi - tau) / panels as f64;
        (0..panels)
            .map(|i| {
                let x = tau + (i as f64 + 0.5) * w;
                let density = (dist.cdf(x + 1e-7) - dist.cdf(x - 1e-7)) / 2e-7;
                x * density * w
            })
            .sum()
    }

    #[test]
    fn bernoulli_curve_is_min() {
        for p in [0.1, 0.3, 0.9] {
            let d = ValueDistribution::bernoulli(p).unwrap();
            for i in 0..=20 {
                let beta = i as f64 / 20.0;
                let r = ideal_single(&d, beta);
                assert!(
                    (r.value - p.min(beta)).abs() < 1e-12,
                    "p={p} beta={beta} got {}",
                    r.value
                );
            }
        }
    }

    #[test]
    fn beta_zero_never_requests() {
        let d = ValueDistribution::uniform(0.0, 1.0).unwrap();
        let r = ideal_single(&d, 0.0);
        assert_eq!(r.value, 0.0);
        assert_eq!(r.policy.request_prob(0.7), 0.0);
    }

    #[test]
    fn uniform_closed_form_and_numeric_oracle() {
        let d = ValueDistribution::uniform(0.0, 1.0).unwrap();
        let r = ideal_single(&d, 0.5);
        assert!((r.value - 0.375).abs() < 1e-12);
        let oracle = numeric_top_beta(&d, 0.5, 50_000);
        assert!((r.value - oracle).abs() < 1e-6);
        // Full-curve check against beta - beta^2/2.
        for i in 1..20 {
            let beta = i as f64 / 20.0;
            let v = ideal_single(&d, beta).value;
            assert!((v - (beta - beta * beta / 2.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn budget_binds_exactly() {
        let d = ValueDistribution::bernoulli(0.3).unwrap();
        for beta in [0.1, 0.3, 0.5, 0.9, 1.0] {
            let r = ideal_single(&d, beta);
            let rate = r.policy.expected_request_rate(&d);
            assert!((rate - beta).abs() < 1e-12, "beta={beta} rate={rate}");
        }
        let disc =
            ValueDistribution::discrete(vec![(0.0, 0.5), (0.5, 0.2), (1.0, 0.3)]).unwrap();
        for i in 1..=10 {
            let beta = i as f64 / 10.0;
            let r = ideal_single(&disc, beta);
            let rate = r.policy.expected_request_rate(&disc);
            assert!((rate - beta).abs() < 1e-12);
        }
    }

    #[test]
    fn largest_threshold_on_exact_boundary() {
        let d = ValueDistribution::bernoulli(0.3).unwrap();
        let r = ideal_single(&d, 0.3);
        match r.policy {
            RequestPolicy::SingleRound { threshold, atom_prob, .. } => {
                assert_eq!(threshold, 1.0);
                assert!((atom_prob - 1.0).abs() < 1e-12);
            }
            _ => panic!(),
        }
    }

    #[test]
    fn value_never_exceeds_mean() {
        let d = ValueDistribution::discrete(vec![(0.2, 0.25), (0.7, 0.5), (3.0, 0.25)]).unwrap();
        for i in 0..=10 {
            let beta = i as f64 / 10.0;
            let v = ideal_single(&d, beta).value;
            assert!(v <= d.mean() + 1e-12);
        }
        assert!((ideal_single(&d, 1.0).value - d.mean()).abs() < 1e-12);
    }

    #[test]
    fn multi_single_point_duration_one() {
        // {(v=1, k=1) w.p. p, else 0}: value is min{p, beta}.
        for (p, beta) in [(0.4, 0.25), (0.4, 0.6), (0.8, 1.0)] {
            let d = DemandDistribution::new(
                vec![
                    DemandAtom { value: 1.0, duration: 1, prob: p },
                    DemandAtom { value: 0.0, duration: 1, prob: 1.0 - p },
                ],
                1,
            )
            .unwrap();
            let r = ideal_multi(&d, beta).unwrap();
            assert!((r.value - p.min(beta)).abs() < 1e-9, "p={p} beta={beta} got {}", r.value);
        }
    }

    #[test]
    fn multi_two_round_demand() {
        let d = DemandDistribution::new(
            vec![DemandAtom { value: 1.0, duration: 2, prob: 1.0 }],
            2,
        )
        .unwrap();
        let full = ideal_multi(&d, 1.0).unwrap();
        assert!((full.value - 1.0).abs() < 1e-9);
        let half = ideal_multi(&d, 0.5).unwrap();
        assert!((half.value - 0.5).abs() < 1e-9);
        // Occupancy 2 rho / (1 + rho) = 1/2 forces rho = 1/3.
        match half.policy {
            RequestPolicy::MultiRound { request_probs, .. } => {
                assert!((request_probs[0] - 1.0 / 3.0).abs() < 1e-9);
            }
            _ => panic!(),
        }
    }

    #[test]
    fn multi_matches_single_on_duration_one() {
        let atoms = vec![(0.0, 0.3), (0.5, 0.4), (2.0, 0.3)];
        let vd = ValueDistribution::discrete(atoms.clone()).unwrap();
        let dd = DemandDistribution::new(
            atoms
                .iter()
                .map(|&(v, p)| DemandAtom { value: v, duration: 1, prob: p })
                .collect(),
            1,
        )
        .unwrap();
        for i in 1..=10 {
            let beta = i as f64 / 10.0;
            let s = ideal_single(&vd, beta).value;
            let m = ideal_multi(&dd, beta).unwrap().value;
            assert!((s - m).abs() < 1e-9, "beta={beta}: single {s} vs multi {m}");
        }
    }

    #[test]
    fn oracle_examples() {
        let unit = DemandDistribution::new(
            vec![DemandAtom { value: 1.0, duration: 1, prob: 1.0 }],
            1,
        )
        .unwrap();
        let v = oracle_multi(&unit, 0.4, 0.01).unwrap();
        assert!((v - 0.40).abs() < 1e-9);
        let two = DemandDistribution::new(
            vec![DemandAtom { value: 1.0, duration: 2, prob: 1.0 }],
            2,
        )
        .unwrap();
        let v = oracle_multi(&two, 1.0, 0.01).unwrap();
        assert!((v - 1.0).abs() < 1e-9);
        let v = oracle_multi(&two, 0.0, 0.01).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn oracle_rejects_large_support_and_fine_grids() {
        let atoms: Vec<DemandAtom> = (0..5)
            .map(|i| DemandAtom { value: i as f64, duration: 1, prob: 0.2 })
            .collect();
        let d = DemandDistribution::new(atoms, 1).unwrap();
        assert!(matches!(
            oracle_multi(&d, 0.5, 0.01),
            Err(IdealError::OracleSupportTooLarge { .. })
        ));
        let small = DemandDistribution::new(
            vec![DemandAtom { value: 1.0, duration: 1, prob: 1.0 }],
            1,
        )
        .unwrap();
        assert!(matches!(
            oracle_multi(&small, 0.5, 1e-4),
            Err(IdealError::OracleStepTooSmall(_))
        ));
    }

    #[test]
    fn concavity_of_known_curves() {
        // min{0.3, beta} is piecewise-linear concave.
        let curve: Vec<(f64, f64)> =
            (0..=20).map(|i| (i as f64 * 0.05, (i as f64 * 0.05f64).min(0.3))).collect();
        let rep = verify_concavity(&curve);
        assert!(rep.worst_concavity_violation <= 1e-12);
        assert!(rep.worst_monotonicity_violation <= 1e-12);
        // beta - beta^2/2 has second differences ~ -(d beta)^2.
        let curve: Vec<(f64, f64)> = (0..=20)
            .map(|i| {
                let b = i as f64 * 0.05;
                (b, b - b * b / 2.0)
            })
            .collect();
        let rep = verify_concavity(&curve);
        assert!(rep.worst_concavity_violation <= 1e-12);
        assert!(rep.worst_concavity_violation < -0.4 * 0.05 * 0.05 * 0.05);
        // Constant curve.
        let curve: Vec<(f64, f64)> = (0..=10).map(|i| (i as f64 * 0.1, 2.0)).collect();
        let rep = verify_concavity(&curve);
        assert!(rep.worst_concavity_violation.abs() <= 1e-12);
        // A convex curve must be flagged.
        let curve: Vec<(f64, f64)> = (0..=10)
            .map(|i| {
                let b = i as f64 * 0.1;
                (b, b * b)
            })
            .collect();
        assert!(verify_concavity(&curve).worst_concavity_violation > 1e-4);
    }

    #[test]
    fn derivative_examples() {
        let u01 = ValueDistribution::uniform(0.0, 1.0).unwrap();
        let (a, fd) = derivative_check(&u01, 0.5).unwrap();
        assert!((a - 0.5).abs() < 1e-12);
        assert!((a - fd).abs() <= 1e-3 * (1.0 + a.abs()));
        let (a, _) = derivative_check(&u01, 1e-9).unwrap();
        assert!((a - 1.0).abs() < 1e-6);
        let u24 = ValueDistribution::uniform(2.0, 4.0).unwrap();
        let (a, fd) = derivative_check(&u24, 0.25).unwrap();
        assert!((a - 3.5).abs() < 1e-12);
        assert!((a - fd).abs() <= 1e-3 * (1.0 + a.abs()));
        assert!(matches!(
            derivative_check(&ValueDistribution::bernoulli(0.5).unwrap(), 0.5),
            Err(IdealError::DerivativeUndefined)
        ));
    }

    #[test]
    fn sigma_examples() {
        // Identical distributions in every state: sigma = 1.
        let shared = ValueDistribution::uniform(0.0, 1.0).unwrap();
        let m = MarkovValueModel::new(
            vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            StateLaw::Values(vec![shared.clone(), shared]),
            InitialState::Stationary,
        )
        .unwrap();
        assert!((sigma_of_beta(&m, 0.5).unwrap() - 1.0).abs() < 1e-12);

        // pi = (0.25, 0.75), state 0 worth 1, state 1 worth 0, beta = 0.2:
        // the optimum requests only V = 1, so sigma = pi(0).
        let m = MarkovValueModel::new(
            vec![vec![0.625, 0.375], vec![0.125, 0.875]],
            StateLaw::Values(vec![
                ValueDistribution::discrete(vec![(1.0, 1.0)]).unwrap(),
                ValueDistribution::discrete(vec![(0.0, 1.0)]).unwrap(),
            ]),
            InitialState::Stationary,
        )
        .unwrap();
        let sigma = sigma_of_beta(&m, 0.2).unwrap();
        assert!((sigma - 0.25).abs() < 1e-12);
        assert!(sigma >= m.profile().min_pi - 1e-12);
        assert!(matches!(sigma_of_beta(&m, 0.0), Err(IdealError::SigmaUndefined)));
    }
}
