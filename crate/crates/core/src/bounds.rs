//! Closed-form guarantee and impossibility coefficients.
//!
//! Each guarantee is the factor multiplying `v*(.) T` in the corresponding
//! utility bound; impossibility coefficients cap the same ratio from above.
//! Additive error terms carry no explicit constants, so reports record their
//! order only and empirical comparisons use statistical tolerances.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BoundError {
    #[error("bound {kind} inapplicable: {condition}")]
    Inapplicable { kind: &'static str, condition: String },
}

/// General robustness guarantee for a beta-aggressive strategy under
/// decorrelation `gamma`:
/// `gamma (alpha - (1-alpha) beta (1-gamma)) / (alpha + (1-alpha) beta gamma)`,
/// clamped at zero (a negative value is a vacuous guarantee).
pub fn guarantee_general(alpha: f64, beta: f64, gamma: f64) -> f64 {
    guarantee_general_raw(alpha, beta, gamma).max(0.0)
}

/// Unclamped form of [`guarantee_general`].
pub fn guarantee_general_raw(alpha: f64, beta: f64, gamma: f64) -> f64 {
    gamma * (alpha - (1.0 - alpha) * beta * (1.0 - gamma))
        / (alpha + (1.0 - alpha) * beta * gamma)
}

/// Worst-case distribution guarantee at `beta = alpha`, i.i.d. values:
/// `1 / (2 - alpha)`.
pub fn guarantee_worst_case(alpha: f64) -> f64 {
    1.0 / (2.0 - alpha)
}

/// Guarantee for i.i.d. values with a density bounded in `[lambda1, lambda2]`.
/// Returns `(coefficient, prescribed beta)` where the coefficient is
/// `1 - sqrt(2 lambda2 alpha / lambda1)` at `beta = sqrt(2 lambda1 alpha / lambda2)`.
/// Applicable only when `alpha <= min{2 l1/l2, l2/(2 l1)}`.
pub fn guarantee_bounded_density(
    alpha: f64,
    lambda1: f64,
    lambda2: f64,
) -> Result<(f64, f64), BoundError> {
    if lambda1 <= 0.0 || lambda2 < lambda1 {
        return Err(BoundError::Inapplicable {
            kind: "bounded_density",
            condition: format!("need 0 < lambda1 <= lambda2, got ({lambda1}, {lambda2})"),
        });
    }
    let cap = (2.0 * lambda1 / lambda2).min(lambda2 / (2.0 * lambda1));
    if alpha > cap {
        return Err(BoundError::Inapplicable {
            kind: "bounded_density",
            condition: format!("alpha {alpha} > min{{2 l1/l2, l2/(2 l1)}} = {cap}"),
        });
    }
    let beta = (2.0 * lambda1 * alpha / lambda2).sqrt();
    let coeff = 1.0 - (2.0 * lambda2 * alpha / lambda1).sqrt();
    Ok((coeff.max(0.0), beta))
}

/// Guarantee for i.i.d. Bernoulli(p) values under the p-aggressive strategy:
/// `max{alpha, p} / (alpha + p - alpha p)`.
pub fn guarantee_bernoulli(alpha: f64, p: f64) -> f64 {
    alpha.max(p) / (alpha + p - alpha * p)
}

/// Guarantee of the alpha-aggressive strategy under correlation:
/// `gamma (gamma + alpha (1-gamma)) / (1 + (1-alpha) gamma)`.
pub fn guarantee_moderate_correlation(alpha: f64, gamma: f64) -> f64 {
    gamma * (gamma + alpha * (1.0 - gamma)) / (1.0 + (1.0 - alpha) * gamma)
}

/// Applicability condition for the high-correlation guarantee:
/// `sqrt(1-gamma) + 1 - gamma > 1 / (1-alpha)`.
pub fn high_correlation_applicable(alpha: f64, gamma: f64) -> bool {
    (1.0 - gamma).sqrt() + 1.0 - gamma > 1.0 / (1.0 - alpha)
}

/// Guarantee under high correlation with the damped budget
/// `beta = alpha / ((1-alpha)(sqrt(1-gamma) + 1 - gamma))`:
/// coefficient `(1 - sqrt(1-gamma)) / ((1-alpha)(1 + sqrt(1-gamma)))`.
pub fn guarantee_high_correlation(alpha: f64, gamma: f64) -> Result<(f64, f64), BoundError> {
    if !high_correlation_applicable(alpha, gamma) {
        return Err(BoundError::Inapplicable {
            kind: "high_correlation",
            condition: format!(
                "sqrt(1-gamma) + 1 - gamma = {} must exceed 1/(1-alpha) = {}",
                (1.0 - gamma).sqrt() + 1.0 - gamma,
                1.0 / (1.0 - alpha)
            ),
        });
    }
    let s = (1.0 - gamma).sqrt();
    let beta = alpha / ((1.0 - alpha) * (s + 1.0 - gamma));
    let coeff = (1.0 - s) / ((1.0 - alpha) * (1.0 + s));
    Ok((coeff, beta))
}

/// Guarantee of the half-share-aggressive strategy for any correlation:
/// `gamma (1 + gamma) / (4 + 2 gamma)`.
pub fn guarantee_arbitrary_correlation(gamma: f64) -> f64 {
    gamma * (1.0 + gamma) / (4.0 + 2.0 * gamma)
}

/// State-independent strategy guarantee parameterized by
/// `sigma = E[rho*] / max_s E_s[rho*]`:
/// `alpha / (alpha + beta/sigma - alpha beta/sigma)`.
pub fn guarantee_state_independent(alpha: f64, beta: f64, sigma: f64) -> f64 {
    let q = beta / sigma;
    alpha / (alpha + q - alpha * q)
}

/// State-independent guarantee via the simple lower bound
/// `sigma >= min_pi`: coefficient `min_pi / (min_pi + 1 - alpha)`.
pub fn guarantee_min_pi(alpha: f64, min_pi: f64) -> f64 {
    min_pi / (min_pi + 1.0 - alpha)
}

/// Reusable-resource guarantee for cap parameter `r`:
/// `min{ alpha/(beta r), 1 - (1-alpha)/r }`.
pub fn guarantee_mult(alpha: f64, beta: f64, r: f64) -> Result<f64, BoundError> {
    if r < 1.0 - 1e-12 {
        return Err(BoundError::Inapplicable {
            kind: "reusable",
            condition: format!("r must be >= 1, got {r}"),
        });
    }
    Ok((alpha / (beta * r)).min(1.0 - (1.0 - alpha) / r))
}

/// The tuned cap `r = (alpha + beta - alpha beta) / beta` and the coefficient
/// it attains, `alpha / (alpha + beta - alpha beta)`.
pub fn tuned_r(alpha: f64, beta: f64) -> (f64, f64) {
    let r = (alpha + beta - alpha * beta) / beta;
    (r, alpha / (alpha + beta - alpha * beta))
}

/// Impossibility coefficient for correlated values:
/// `gamma / ((1-alpha)(1 + gamma - (1-gamma)^((1-alpha)/alpha)))`.
pub fn impossibility_markov(alpha: f64, gamma: f64) -> f64 {
    let exponent = (1.0 - alpha) / alpha;
    gamma / ((1.0 - alpha) * (1.0 + gamma - (1.0 - gamma).powf(exponent)))
}

/// Limit of [`impossibility_markov`] as `alpha -> 0`: `gamma / (1 + gamma)`.
pub fn impossibility_markov_alpha_zero(gamma: f64) -> f64 {
    gamma / (1.0 + gamma)
}

/// Limit of [`impossibility_markov`] as `gamma -> 0` (for `alpha <= 1/2`):
/// `alpha / (1 - alpha)`, which equals `min_pi / (1 - alpha)` in the
/// two-state construction.
pub fn impossibility_markov_gamma_zero(alpha: f64) -> f64 {
    alpha / (1.0 - alpha)
}

/// Reusable-resource impossibility coefficient:
/// `1 - ((1-alpha)/r) ((k_max - 1)/k_max)`.
pub fn impossibility_mult_coeff(alpha: f64, r: f64, k_max: u32) -> f64 {
    1.0 - ((1.0 - alpha) / r) * ((k_max as f64 - 1.0) / k_max as f64)
}

/// Full reusable-resource utility upper bound:
/// `coeff * v*(beta) T + v*(beta) (k_max - 1)`.
pub fn impossibility_mult(alpha: f64, r: f64, k_max: u32, v_star_beta: f64, t: u64) -> f64 {
    impossibility_mult_coeff(alpha, r, k_max) * v_star_beta * t as f64
        + v_star_beta * (k_max as f64 - 1.0)
}

/// Symmetric-agents welfare upper bound `n v*(1/n) T`.
pub fn welfare_upper_bound(n: u32, v_star_at_inv_n: f64, t: u64) -> f64 {
    n as f64 * v_star_at_inv_n * t as f64
}

/// Price-of-anarchy upper bound implied by a per-agent guarantee coefficient.
pub fn poa_upper(per_agent_coeff: f64) -> f64 {
    1.0 / per_agent_coeff
}

/// Which closed-form bound a report refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    General,
    WorstCase,
    BoundedDensity,
    Bernoulli,
    ModerateCorrelation,
    HighCorrelation,
    ArbitraryCorrelation,
    StateIndependentSigma,
    StateIndependentMinPi,
    Reusable,
    ReusableTuned,
    MarkovImpossibility,
    FloodingImpossibility,
    WelfareUpper,
    /// Price-of-anarchy cap `2 - 1/n` implied by the worst-case guarantee in
    /// symmetric settings.
    PoaWorstCase,
}

impl BoundKind {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "general" => Self::General,
            "worst_case" => Self::WorstCase,
            "bounded_density" => Self::BoundedDensity,
            "bernoulli" => Self::Bernoulli,
            "moderate_correlation" => Self::ModerateCorrelation,
            "high_correlation" => Self::HighCorrelation,
            "arbitrary_correlation" => Self::ArbitraryCorrelation,
            "state_independent_sigma" => Self::StateIndependentSigma,
            "state_independent_min_pi" => Self::StateIndependentMinPi,
            "reusable" => Self::Reusable,
            "reusable_tuned" => Self::ReusableTuned,
            "markov_impossibility" => Self::MarkovImpossibility,
            "flooding_impossibility" => Self::FloodingImpossibility,
            "welfare_upper" => Self::WelfareUpper,
            "poa_worst_case" => Self::PoaWorstCase,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::General => "general",
            Self::WorstCase => "worst_case",
            Self::BoundedDensity => "bounded_density",
            Self::Bernoulli => "bernoulli",
            Self::ModerateCorrelation => "moderate_correlation",
            Self::HighCorrelation => "high_correlation",
            Self::ArbitraryCorrelation => "arbitrary_correlation",
            Self::StateIndependentSigma => "state_independent_sigma",
            Self::StateIndependentMinPi => "state_independent_min_pi",
            Self::Reusable => "reusable",
            Self::ReusableTuned => "reusable_tuned",
            Self::MarkovImpossibility => "markov_impossibility",
            Self::FloodingImpossibility => "flooding_impossibility",
            Self::WelfareUpper => "welfare_upper",
            Self::PoaWorstCase => "poa_worst_case",
        }
    }
}

/// Side of the comparison a bound sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComparisonSide {
    LowerGuarantee,
    UpperImpossibility,
}

/// Order of the bound's additive error term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdditiveOrder {
    Constant,
    SqrtTKmax,
}

impl AdditiveOrder {
    pub fn label(&self) -> &'static str {
        match self {
            AdditiveOrder::Constant => "O(1)",
            AdditiveOrder::SqrtTKmax => "O(sqrt(T))*k_max",
        }
    }
}

/// Parameters a bound may consume; unused entries stay `None`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BoundInputs {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub r: Option<f64>,
    pub p: Option<f64>,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub k_max: Option<u32>,
    pub min_pi: Option<f64>,
    pub sigma: Option<f64>,
    pub n: Option<u32>,
}

/// An evaluated bound: the coefficient multiplying `v* T`, the v* it refers
/// to, and the side of the comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub inputs: BoundInputs,
    pub coefficient: f64,
    pub additive_order: AdditiveOrder,
    pub v_star: f64,
    pub side: ComparisonSide,
    /// True when the raw formula fell at or below zero and was clamped.
    pub vacuous: bool,
}

fn need(x: Option<f64>, kind: &'static str, name: &str) -> Result<f64, BoundError> {
    x.ok_or_else(|| BoundError::Inapplicable {
        kind,
        condition: format!("missing parameter {name}"),
    })
}

/// Evaluates a bound kind on its inputs against a reference `v_star`.
pub fn evaluate_bound(
    kind: BoundKind,
    inputs: BoundInputs,
    v_star: f64,
) -> Result<BoundReport, BoundError> {
    use BoundKind::*;
    let mut vacuous = false;
    let (coefficient, side, additive_order) = match kind {
        General => {
            let a = need(inputs.alpha, "general", "alpha")?;
            let b = need(inputs.beta, "general", "beta")?;
            let g = need(inputs.gamma, "general", "gamma")?;
            let raw = guarantee_general_raw(a, b, g);
            vacuous = raw <= 0.0;
            (raw.max(0.0), ComparisonSide::LowerGuarantee, AdditiveOrder::Constant)
        }
        WorstCase => {
            let a = need(inputs.alpha, "worst_case", "alpha")?;
            (guarantee_worst_case(a), ComparisonSide::LowerGuarantee, AdditiveOrder::Constant)
        }
        BoundedDensity => {
            let a = need(inputs.alpha, "bounded_density", "alpha")?;
            let l1 = need(inputs.lambda1, "bounded_density", "lambda1")?;
            let l2 = need(inputs.lambda2, "bounded_density", "lambda2")?;
            let (c, _beta) = guarantee_bounded_density(a, l1, l2)?;
            vacuous = c == 0.0;
            (c, ComparisonSide::LowerGuarantee, AdditiveOrder::Constant)
        }
        Bernoulli => {
            let a = need(inputs.alpha, "bernoulli", "alpha")?;
            let p = need(inputs.p, "bernoulli", "p")?;
            (guarantee_bernoulli(a, p), ComparisonSide::LowerGuarantee, AdditiveOrder::Constant)
        }
        ModerateCorrelation => {
            let a = need(inputs.alpha, "moderate_correlation", "alpha")?;
            let g = need(inputs.gamma, "moderate_correlation", "gamma")?;
            (
                guarantee_moderate_correlation(a, g),
                ComparisonSide::LowerGuarantee,
                AdditiveOrder::Constant,
            )
        }
        HighCorrelation => {
            let a = need(inputs.alpha, "high_correlation", "alpha")?;
            let g = need(inputs.gamma, "high_correlation", "gamma")?;
            let (c, _beta) = guarantee_high_correlation(a, g)?;
            (c, ComparisonSide::LowerGuarantee, AdditiveOrder::Constant)
        }
        ArbitraryCorrelation => {
            let g = need(inputs.gamma, "arbitrary_correlation", "gamma")?;
            (
                guarantee_arbitrary_correlation(g),
                ComparisonSide::LowerGuarantee,
                AdditiveOrder::Constant,
            )
        }
        StateIndependentSigma => {
            let a = need(inputs.alpha, "state_independent_sigma", "alpha")?;
            let b = need(inputs.beta, "state_independent_sigma", "beta")?;
            let s = need(inputs.sigma, "state_independent_sigma", "sigma")?;
            (
                guarantee_state_independent(a, b, s),
                ComparisonSide::LowerGuarantee,
                AdditiveOrder::Constant,
            )
        }
        StateIndependentMinPi => {
            let a = need(inputs.alpha, "state_independent_min_pi", "alpha")?;
            let m = need(inputs.min_pi, "state_independent_min_pi", "min_pi")?;
            (guarantee_min_pi(a, m), ComparisonSide::LowerGuarantee, AdditiveOrder::Constant)
        }
        Reusable => {
            let a = need(inputs.alpha, "reusable", "alpha")?;
            let b = need(inputs.beta, "reusable", "beta")?;
            let r = need(inputs.r, "reusable", "r")?;
            (guarantee_mult(a, b, r)?, ComparisonSide::LowerGuarantee, AdditiveOrder::SqrtTKmax)
        }
        ReusableTuned => {
            let a = need(inputs.alpha, "reusable_tuned", "alpha")?;
            let b = need(inputs.beta, "reusable_tuned", "beta")?;
            let (_r, c) = tuned_r(a, b);
            (c, ComparisonSide::LowerGuarantee, AdditiveOrder::SqrtTKmax)
        }
        MarkovImpossibility => {
            let a = need(inputs.alpha, "markov_impossibility", "alpha")?;
            let g = need(inputs.gamma, "markov_impossibility", "gamma")?;
            (
                impossibility_markov(a, g).min(1.0),
                ComparisonSide::UpperImpossibility,
                AdditiveOrder::Constant,
            )
        }
        FloodingImpossibility => {
            let a = need(inputs.alpha, "flooding_impossibility", "alpha")?;
            let r = need(inputs.r, "flooding_impossibility", "r")?;
            let k = inputs.k_max.ok_or(BoundError::Inapplicable {
                kind: "flooding_impossibility",
                condition: "missing parameter k_max".into(),
            })?;
            (
                impossibility_mult_coeff(a, r, k),
                ComparisonSide::UpperImpossibility,
                AdditiveOrder::Constant,
            )
        }
        WelfareUpper => {
            let n = inputs.n.ok_or(BoundError::Inapplicable {
                kind: "welfare_upper",
                condition: "missing parameter n".into(),
            })?;
            // Coefficient relative to v*(1/n) T is just n.
            (n as f64, ComparisonSide::UpperImpossibility, AdditiveOrder::Constant)
        }
        PoaWorstCase => {
            let n = inputs.n.ok_or(BoundError::Inapplicable {
                kind: "poa_worst_case",
                condition: "missing parameter n".into(),
            })?;
            (
                poa_upper(guarantee_worst_case(1.0 / n as f64)),
                ComparisonSide::UpperImpossibility,
                AdditiveOrder::Constant,
            )
        }
    };
    Ok(BoundReport { kind, inputs, coefficient, additive_order, v_star, side, vacuous })
}
