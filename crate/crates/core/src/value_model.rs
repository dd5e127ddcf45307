//! Value distributions and hidden-Markov value processes.
//!
//! An agent's per-round value follows a hidden Markov model: a latent state
//! evolves via a time-invariant transition kernel `p(s', s)`, and each state
//! carries a value distribution (or a value-duration distribution in reusable
//! mode). The module computes stationary distributions, the decorrelation
//! parameter `gamma = min p(s', s) / pi(s)`, steady-state mixtures, and samples
//! seeded value paths.

use crate::rng::{self, PURPOSE_VALUES};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

const PROB_SUM_TOL: f64 = 1e-12;
const DENSITY_SUM_TOL: f64 = 1e-9;
const STATIONARY_TOL: f64 = 1e-10;
/// Default atom count when a continuous law is discretized.
pub const DEFAULT_DISCRETIZATION: usize = 10_000;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("transition matrix is not row-stochastic: row {row} sums to {sum}")]
    NotStochastic { row: usize, sum: f64 },
    #[error("transition matrix has a negative entry at ({row},{col})")]
    NegativeEntry { row: usize, col: usize },
    #[error("transition matrix is not square at row {0}")]
    NotSquare(usize),
    #[error("chain not ergodic")]
    NotErgodic,
    #[error("chain not irreducible")]
    NotIrreducible,
    #[error("stationary state {0} has zero mass")]
    ZeroStationaryMass(usize),
    #[error("stationary solve failed to converge")]
    StationaryDiverged,
    #[error("invalid distribution: {0}")]
    BadDistribution(String),
    #[error("per-state distribution count {got} does not match {states} states")]
    StateCountMismatch { got: usize, states: usize },
    #[error("per-state distributions are not all of the same family")]
    MixedFamilies,
    #[error("start state {0} out of range")]
    BadStartState(usize),
}

/// A nonnegative value law. Continuous variants can be discretized on demand.
#[derive(Debug, Clone, PartialEq)]
pub enum ValueDistribution {
    /// Atoms `(value, prob)`, canonicalized: sorted ascending, equal values merged.
    Discrete { atoms: Vec<(f64, f64)> },
    Bernoulli { p: f64 },
    Uniform { lo: f64, hi: f64 },
    /// Piecewise-constant density over `[lo, hi]` with equal-width buckets.
    /// `declared_bounds` are the optional `(lambda1, lambda2)` height bounds.
    BoundedDensity {
        lo: f64,
        hi: f64,
        heights: Vec<f64>,
        declared_bounds: Option<(f64, f64)>,
    },
}

impl ValueDistribution {
    pub fn discrete(atoms: Vec<(f64, f64)>) -> Result<Self, ModelError> {
        if atoms.is_empty() {
            return Err(ModelError::BadDistribution("empty discrete support".into()));
        }
        for &(v, p) in &atoms {
            if !v.is_finite() || v < 0.0 {
                return Err(ModelError::BadDistribution(format!(
                    "support value {v} is negative or non-finite"
                )));
            }
            if !p.is_finite() || p < 0.0 {
                return Err(ModelError::BadDistribution(format!("probability {p} invalid")));
            }
        }
        let sum: f64 = atoms.iter().map(|a| a.1).sum();
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(ModelError::BadDistribution(format!(
                "probabilities sum to {sum}, not 1"
            )));
        }
        let mut atoms = atoms;
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (v, p) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += p,
                _ => merged.push((v, p)),
            }
        }
        Ok(ValueDistribution::Discrete { atoms: merged })
    }

    pub fn bernoulli(p: f64) -> Result<Self, ModelError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(ModelError::BadDistribution(format!("bernoulli p={p} outside [0,1]")));
        }
        Ok(ValueDistribution::Bernoulli { p })
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self, ModelError> {
        if !lo.is_finite() || !hi.is_finite() || lo < 0.0 || hi <= lo {
            return Err(ModelError::BadDistribution(format!(
                "uniform bounds [{lo},{hi}] invalid"
            )));
        }
        Ok(ValueDistribution::Uniform { lo, hi })
    }

    pub fn bounded_density(
        lo: f64,
        hi: f64,
        heights: Vec<f64>,
        declared_bounds: Option<(f64, f64)>,
    ) -> Result<Self, ModelError> {
        if !lo.is_finite() || !hi.is_finite() || lo < 0.0 || hi <= lo || heights.is_empty() {
            return Err(ModelError::BadDistribution("bad density domain".into()));
        }
        let width = (hi - lo) / heights.len() as f64;
        let total: f64 = heights.iter().map(|h| h * width).sum();
        if (total - 1.0).abs() > DENSITY_SUM_TOL {
            return Err(ModelError::BadDistribution(format!(
                "density integrates to {total}, not 1"
            )));
        }
        if let Some((l1, l2)) = declared_bounds {
            if l1 <= 0.0 || l2 < l1 {
                return Err(ModelError::BadDistribution(format!(
                    "declared density bounds ({l1},{l2}) invalid"
                )));
            }
            for &h in &heights {
                if h < l1 - 1e-12 || h > l2 + 1e-12 {
                    return Err(ModelError::BadDistribution(format!(
                        "bucket height {h} outside declared bounds [{l1},{l2}]"
                    )));
                }
            }
        }
        for &h in &heights {
            if !h.is_finite() || h < 0.0 {
                return Err(ModelError::BadDistribution(format!("bucket height {h} invalid")));
            }
        }
        Ok(ValueDistribution::BoundedDensity { lo, hi, heights, declared_bounds })
    }

    pub fn mean(&self) -> f64 {
        match self {
            Self::Discrete { atoms } => atoms.iter().map(|&(v, p)| v * p).sum(),
            Self::Bernoulli { p } => *p,
            Self::Uniform { lo, hi } => 0.5 * (lo + hi),
            Self::BoundedDensity { lo, hi, heights, .. } => {
                let w = (hi - lo) / heights.len() as f64;
                heights
                    .iter()
                    .enumerate()
                    .map(|(i, &h)| {
                        let a = lo + i as f64 * w;
                        h * w * (a + 0.5 * w)
                    })
                    .sum()
            }
        }
    }

    pub fn is_atomless(&self) -> bool {
        matches!(self, Self::Uniform { .. } | Self::BoundedDensity { .. })
    }

    /// `P(V <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Self::Discrete { atoms } => {
                atoms.iter().take_while(|a| a.0 <= x).map(|a| a.1).sum()
            }
            Self::Bernoulli { p } => {
                if x < 0.0 {
                    0.0
                } else if x < 1.0 {
                    1.0 - p
                } else {
                    1.0
                }
            }
            Self::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            Self::BoundedDensity { lo, hi, heights, .. } => {
                if x <= *lo {
                    return 0.0;
                }
                if x >= *hi {
                    return 1.0;
                }
                let w = (hi - lo) / heights.len() as f64;
                let mut acc = 0.0;
                for (i, &h) in heights.iter().enumerate() {
                    let a = lo + i as f64 * w;
                    let b = a + w;
                    if x >= b {
                        acc += h * w;
                    } else {
                        acc += h * (x - a);
                        break;
                    }
                }
                acc.min(1.0)
            }
        }
    }

    /// Generalized inverse CDF: smallest `x` with `cdf(x) >= q`.
    pub fn quantile(&self, q: f64) -> f64 {
        let q = q.clamp(0.0, 1.0);
        match self {
            Self::Discrete { atoms } => {
                let mut acc = 0.0;
                for &(v, p) in atoms {
                    acc += p;
                    if acc >= q - 1e-15 {
                        return v;
                    }
                }
                atoms.last().map(|a| a.0).unwrap_or(0.0)
            }
            Self::Bernoulli { p } => {
                if q <= 1.0 - p {
                    0.0
                } else {
                    1.0
                }
            }
            Self::Uniform { lo, hi } => lo + q * (hi - lo),
            Self::BoundedDensity { lo, hi, heights, .. } => {
                let w = (hi - lo) / heights.len() as f64;
                let mut acc = 0.0;
                for (i, &h) in heights.iter().enumerate() {
                    let bucket = h * w;
                    if acc + bucket >= q && h > 0.0 {
                        return lo + i as f64 * w + (q - acc) / h;
                    }
                    acc += bucket;
                }
                *hi
            }
        }
    }

    /// `P(V > t)`.
    pub fn mass_above(&self, t: f64) -> f64 {
        match self {
            Self::Discrete { atoms } => {
                atoms.iter().filter(|a| a.0 > t).map(|a| a.1).sum()
            }
            _ => 1.0 - self.cdf(t),
        }
    }

    /// `P(V = t)`; zero for atomless laws.
    pub fn mass_at(&self, t: f64) -> f64 {
        match self {
            Self::Discrete { atoms } => atoms
                .iter()
                .find(|a| a.0 == t)
                .map(|a| a.1)
                .unwrap_or(0.0),
            Self::Bernoulli { p } => {
                if t == 1.0 {
                    *p
                } else if t == 0.0 {
                    1.0 - *p
                } else {
                    0.0
                }
            }
            _ => 0.0,
        }
    }

    /// Inverse-transform sample for `u` in `[0, 1)`.
    pub fn sample(&self, u: f64) -> f64 {
        match self {
            Self::Discrete { atoms } => {
                let mut acc = 0.0;
                for &(v, p) in atoms {
                    acc += p;
                    if u < acc {
                        return v;
                    }
                }
                atoms.last().map(|a| a.0).unwrap_or(0.0)
            }
            Self::Bernoulli { p } => {
                if u < *p {
                    1.0
                } else {
                    0.0
                }
            }
            _ => self.quantile(u),
        }
    }

    /// Equal-probability discretization with `n` atoms at quantile midpoints.
    /// Discrete laws are returned unchanged.
    pub fn discretize(&self, n: usize) -> ValueDistribution {
        match self {
            Self::Discrete { .. } => self.clone(),
            Self::Bernoulli { p } => ValueDistribution::Discrete {
                atoms: vec![(0.0, 1.0 - p), (1.0, *p)],
            },
            _ => {
                let n = n.max(1);
                let prob = 1.0 / n as f64;
                let atoms = (0..n)
                    .map(|i| (self.quantile((i as f64 + 0.5) * prob), prob))
                    .collect();
                ValueDistribution::Discrete { atoms }
            }
        }
    }

}

/// One point of a value-duration demand law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemandAtom {
    pub value: f64,
    pub duration: u32,
    pub prob: f64,
}

/// Joint law of `(V, K)` for reusable resources; finite support only.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandDistribution {
    pub support: Vec<DemandAtom>,
    pub k_max: u32,
}

impl DemandDistribution {
    pub fn new(support: Vec<DemandAtom>, k_max: u32) -> Result<Self, ModelError> {
        if support.is_empty() {
            return Err(ModelError::BadDistribution("empty demand support".into()));
        }
        if k_max < 1 {
            return Err(ModelError::BadDistribution("k_max must be >= 1".into()));
        }
        for a in &support {
            if !a.value.is_finite() || a.value < 0.0 {
                return Err(ModelError::BadDistribution(format!(
                    "demand value {} invalid",
                    a.value
                )));
            }
            if a.duration < 1 || a.duration > k_max {
                return Err(ModelError::BadDistribution(format!(
                    "duration {} outside [1, {k_max}]",
                    a.duration
                )));
            }
            if !a.prob.is_finite() || a.prob < 0.0 {
                return Err(ModelError::BadDistribution(format!("probability {} invalid", a.prob)));
            }
        }
        let sum: f64 = support.iter().map(|a| a.prob).sum();
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(ModelError::BadDistribution(format!(
                "demand probabilities sum to {sum}, not 1"
            )));
        }
        Ok(DemandDistribution { support, k_max })
    }

    pub fn sample(&self, u: f64) -> (f64, u32) {
        let mut acc = 0.0;
        for a in &self.support {
            acc += a.prob;
            if u < acc {
                return (a.value, a.duration);
            }
        }
        let last = self.support.last().unwrap();
        (last.value, last.duration)
    }

    /// `max_j v_j k_j`, the largest single-demand utility.
    pub fn max_value_duration(&self) -> f64 {
        self.support
            .iter()
            .map(|a| a.value * a.duration as f64)
            .fold(0.0, f64::max)
    }
}

/// Per-state laws: one entry per latent state, all of the same family.
#[derive(Debug, Clone)]
pub enum StateLaw {
    Values(Vec<ValueDistribution>),
    Demands(Vec<DemandDistribution>),
}

impl StateLaw {
    fn len(&self) -> usize {
        match self {
            StateLaw::Values(v) => v.len(),
            StateLaw::Demands(d) => d.len(),
        }
    }
}

/// How the first latent state is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialState {
    /// Sample `S[1]` from the stationary distribution (requires ergodicity).
    Stationary,
    /// Start at a fixed state (requires irreducibility only).
    Fixed(usize),
}

/// Stationary summary of a chain: distribution, decorrelation, minimum mass.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryProfile {
    pub pi: Vec<f64>,
    pub gamma: f64,
    pub min_pi: f64,
}

/// A latent-state Markov chain with a value (or demand) law per state.
///
/// Immutable after construction; the stationary profile is computed eagerly.
#[derive(Debug, Clone)]
pub struct MarkovValueModel {
    transition: Vec<Vec<f64>>,
    per_state: StateLaw,
    initial: InitialState,
    profile: StationaryProfile,
}

impl MarkovValueModel {
    pub fn new(
        transition: Vec<Vec<f64>>,
        per_state: StateLaw,
        initial: InitialState,
    ) -> Result<Self, ModelError> {
        validate_stochastic(&transition)?;
        let n = transition.len();
        if per_state.len() != n {
            return Err(ModelError::StateCountMismatch { got: per_state.len(), states: n });
        }
        match initial {
            InitialState::Stationary => {
                if !is_primitive(&transition) {
                    return Err(ModelError::NotErgodic);
                }
            }
            InitialState::Fixed(s) => {
                if s >= n {
                    return Err(ModelError::BadStartState(s));
                }
                if !is_irreducible(&transition) {
                    return Err(ModelError::NotIrreducible);
                }
            }
        }
        let pi = solve_stationary(&transition)?;
        let gamma = decorrelation_gamma(&transition, &pi)?;
        let min_pi = pi.iter().cloned().fold(f64::INFINITY, f64::min);
        let profile = StationaryProfile { pi, gamma, min_pi };
        Ok(MarkovValueModel { transition, per_state, initial, profile })
    }

    /// Single-state chain: i.i.d. values from `dist`.
    pub fn iid(dist: ValueDistribution) -> Self {
        Self::new(vec![vec![1.0]], StateLaw::Values(vec![dist]), InitialState::Stationary)
            .expect("single-state chain is always ergodic")
    }

    /// Single-state chain: i.i.d. demands from `dist`.
    pub fn iid_demand(dist: DemandDistribution) -> Self {
        Self::new(vec![vec![1.0]], StateLaw::Demands(vec![dist]), InitialState::Stationary)
            .expect("single-state chain is always ergodic")
    }

    pub fn num_states(&self) -> usize {
        self.transition.len()
    }

    pub fn transition(&self) -> &[Vec<f64>] {
        &self.transition
    }

    pub fn per_state(&self) -> &StateLaw {
        &self.per_state
    }

    pub fn initial(&self) -> InitialState {
        self.initial
    }

    pub fn profile(&self) -> &StationaryProfile {
        &self.profile
    }

    pub fn is_demand_model(&self) -> bool {
        matches!(self.per_state, StateLaw::Demands(_))
    }

    /// Largest `k_max` across states (1 for pure value models).
    pub fn k_max(&self) -> u32 {
        match &self.per_state {
            StateLaw::Values(_) => 1,
            StateLaw::Demands(d) => d.iter().map(|x| x.k_max).max().unwrap_or(1),
        }
    }
}

fn validate_stochastic(p: &[Vec<f64>]) -> Result<(), ModelError> {
    let n = p.len();
    if n == 0 {
        return Err(ModelError::NotSquare(0));
    }
    for (i, row) in p.iter().enumerate() {
        if row.len() != n {
            return Err(ModelError::NotSquare(i));
        }
        for (j, &x) in row.iter().enumerate() {
            if !x.is_finite() || x < 0.0 {
                return Err(ModelError::NegativeEntry { row: i, col: j });
            }
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(ModelError::NotStochastic { row: i, sum });
        }
    }
    Ok(())
}

/// Primitivity check: some power of the adjacency pattern is strictly positive,
/// searched up to power `4 * n`.
fn is_primitive(p: &[Vec<f64>]) -> bool {
    let n = p.len();
    let adj: Vec<Vec<bool>> = p
        .iter()
        .map(|row| row.iter().map(|&x| x > 0.0).collect())
        .collect();
    let mut cur = adj.clone();
    for _ in 0..4 * n {
        if cur.iter().all(|row| row.iter().all(|&b| b)) {
            return true;
        }
        cur = bool_mat_mul(&cur, &adj);
    }
    cur.iter().all(|row| row.iter().all(|&b| b))
}

/// Irreducibility: `(I + A)^n` strictly positive.
fn is_irreducible(p: &[Vec<f64>]) -> bool {
    let n = p.len();
    let mut adj: Vec<Vec<bool>> = p
        .iter()
        .map(|row| row.iter().map(|&x| x > 0.0).collect())
        .collect();
    for (i, row) in adj.iter_mut().enumerate() {
        row[i] = true;
    }
    let base = adj.clone();
    let mut cur = adj;
    for _ in 0..n {
        if cur.iter().all(|row| row.iter().all(|&b| b)) {
            return true;
        }
        cur = bool_mat_mul(&cur, &base);
    }
    cur.iter().all(|row| row.iter().all(|&b| b))
}

fn bool_mat_mul(a: &[Vec<bool>], b: &[Vec<bool>]) -> Vec<Vec<bool>> {
    let n = a.len();
    let mut out = vec![vec![false; n]; n];
    for i in 0..n {
        for k in 0..n {
            if a[i][k] {
                for j in 0..n {
                    if b[k][j] {
                        out[i][j] = true;
                    }
                }
            }
        }
    }
    out
}

/// Stationary distribution of a stochastic matrix: `pi P = pi`, `sum pi = 1`.
///
/// Direct linear solve for up to 64 states; power iteration above (tolerance
/// 1e-12, capped at 1e6 sweeps). The chain must be ergodic.
pub fn stationary_distribution(transition: &[Vec<f64>]) -> Result<Vec<f64>, ModelError> {
    validate_stochastic(transition)?;
    if !is_primitive(transition) {
        return Err(ModelError::NotErgodic);
    }
    solve_stationary(transition)
}

fn solve_stationary(p: &[Vec<f64>]) -> Result<Vec<f64>, ModelError> {
    let n = p.len();
    if n == 1 {
        return Ok(vec![1.0]);
    }
    let pi = if n <= 64 {
        // (P^T - I) pi = 0 with the last equation replaced by sum(pi) = 1.
        let mut a = vec![vec![0.0; n]; n];
        let mut b = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                a[i][j] = p[j][i] - if i == j { 1.0 } else { 0.0 };
            }
        }
        for j in 0..n {
            a[n - 1][j] = 1.0;
        }
        b[n - 1] = 1.0;
        gauss_solve(&mut a, &mut b).ok_or(ModelError::StationaryDiverged)?
    } else {
        let mut pi = vec![1.0 / n as f64; n];
        let mut next = vec![0.0; n];
        let mut converged = false;
        for _ in 0..1_000_000 {
            for x in next.iter_mut() {
                *x = 0.0;
            }
            for (s, row) in p.iter().enumerate() {
                for (t, &q) in row.iter().enumerate() {
                    next[t] += pi[s] * q;
                }
            }
            let delta = pi
                .iter()
                .zip(&next)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            std::mem::swap(&mut pi, &mut next);
            if delta < 1e-12 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(ModelError::StationaryDiverged);
        }
        pi
    };
    let sum: f64 = pi.iter().sum();
    let pi: Vec<f64> = pi.iter().map(|x| x / sum).collect();
    for (s, &x) in pi.iter().enumerate() {
        if x <= 0.0 {
            return Err(ModelError::ZeroStationaryMass(s));
        }
    }
    // Residual check on pi P = pi.
    for t in 0..n {
        let mut acc = 0.0;
        for s in 0..n {
            acc += pi[s] * p[s][t];
        }
        if (acc - pi[t]).abs() > STATIONARY_TOL {
            return Err(ModelError::StationaryDiverged);
        }
    }
    Ok(pi)
}

/// Gaussian elimination with partial pivoting; `None` on a singular system.
fn gauss_solve(a: &mut [Vec<f64>], b: &mut [f64]) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// Decorrelation parameter: `min over (s', s) of p(s', s) / pi(s)`, clamped to
/// `[0, 1]`. Equals 1 exactly when every row sits within 1e-12 (max-norm) of
/// `pi` (i.i.d. values).
pub fn decorrelation_gamma(transition: &[Vec<f64>], pi: &[f64]) -> Result<f64, ModelError> {
    for (s, &x) in pi.iter().enumerate() {
        if x <= 0.0 {
            return Err(ModelError::ZeroStationaryMass(s));
        }
    }
    let iid = transition.iter().all(|row| {
        row.iter()
            .zip(pi)
            .all(|(&q, &mass)| (q - mass).abs() <= 1e-12)
    });
    if iid {
        return Ok(1.0);
    }
    let mut gamma = f64::INFINITY;
    for row in transition {
        for (s, &q) in row.iter().enumerate() {
            gamma = gamma.min(q / pi[s]);
        }
    }
    Ok(gamma.clamp(0.0, 1.0))
}

/// The pi-weighted mixture of the per-state laws.
#[derive(Debug, Clone)]
pub enum Mixture {
    Values(ValueDistribution),
    Demands(DemandDistribution),
}

/// Steady-state mixture `F = sum_s pi(s) F_s`.
///
/// Identical components collapse to themselves; otherwise discrete supports are
/// merged (continuous laws are first discretized at the default resolution).
pub fn steady_state_mixture(model: &MarkovValueModel) -> Result<Mixture, ModelError> {
    let pi = &model.profile().pi;
    match model.per_state() {
        StateLaw::Values(dists) => Ok(Mixture::Values(mix_values(dists, pi))),
        StateLaw::Demands(dists) => Ok(Mixture::Demands(mix_demands(dists, pi)?)),
    }
}

fn mix_values(dists: &[ValueDistribution], pi: &[f64]) -> ValueDistribution {
    if dists.len() == 1 {
        return dists[0].clone();
    }
    if dists.iter().all(|d| d == &dists[0]) {
        return dists[0].clone();
    }
    let mut atoms: Vec<(f64, f64)> = Vec::new();
    for (d, &w) in dists.iter().zip(pi) {
        let discrete = d.discretize(DEFAULT_DISCRETIZATION);
        if let ValueDistribution::Discrete { atoms: a } = discrete {
            for (v, p) in a {
                atoms.push((v, p * w));
            }
        }
    }
    ValueDistribution::discrete(atoms).expect("mixture of valid laws is valid")
}

fn mix_demands(dists: &[DemandDistribution], pi: &[f64]) -> Result<DemandDistribution, ModelError> {
    if dists.len() == 1 {
        return Ok(dists[0].clone());
    }
    if dists.iter().all(|d| d == &dists[0]) {
        return Ok(dists[0].clone());
    }
    let mut merged: Vec<DemandAtom> = Vec::new();
    for (d, &w) in dists.iter().zip(pi) {
        for a in &d.support {
            match merged
                .iter_mut()
                .find(|m| m.value == a.value && m.duration == a.duration)
            {
                Some(m) => m.prob += a.prob * w,
                None => merged.push(DemandAtom {
                    value: a.value,
                    duration: a.duration,
                    prob: a.prob * w,
                }),
            }
        }
    }
    merged.sort_by(|a, b| (a.value, a.duration).partial_cmp(&(b.value, b.duration)).unwrap());
    let k_max = dists.iter().map(|d| d.k_max).max().unwrap();
    DemandDistribution::new(merged, k_max)
}

/// One sampled round: latent state, value, demand duration (1 in value mode).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathPoint {
    pub state: usize,
    pub value: f64,
    pub duration: u32,
}

/// Streaming sampler over a model; two uniform draws per round.
pub struct PathSampler<'a> {
    model: &'a MarkovValueModel,
    rng: ChaCha8Rng,
    state: usize,
    started: bool,
}

impl<'a> PathSampler<'a> {
    pub fn new(model: &'a MarkovValueModel, rng: ChaCha8Rng) -> Self {
        PathSampler { model, rng, state: 0, started: false }
    }

    pub fn next_point(&mut self) -> PathPoint {
        let u_state = rng::uniform01(&mut self.rng);
        if !self.started {
            self.started = true;
            self.state = match self.model.initial() {
                InitialState::Stationary => sample_index(&self.model.profile().pi, u_state),
                InitialState::Fixed(s) => s,
            };
        } else {
            self.state = sample_index(&self.model.transition()[self.state], u_state);
        }
        let u_value = rng::uniform01(&mut self.rng);
        match self.model.per_state() {
            StateLaw::Values(dists) => PathPoint {
                state: self.state,
                value: dists[self.state].sample(u_value),
                duration: 1,
            },
            StateLaw::Demands(dists) => {
                let (value, duration) = dists[self.state].sample(u_value);
                PathPoint { state: self.state, value, duration }
            }
        }
    }
}

fn sample_index(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// Samples a seeded value path; a pure function of `(model, horizon, seed)`.
pub fn sample_path(model: &MarkovValueModel, horizon: usize, seed: u64) -> Vec<PathPoint> {
    let mut sampler = PathSampler::new(model, rng::stream(seed, &[PURPOSE_VALUES]));
    (0..horizon).map(|_| sampler.next_point()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain_imp(alpha: f64, zeta: f64) -> Vec<Vec<f64>> {
        // Two-state sticky chain whose stationary law is (alpha, 1 - alpha).
        vec![
            vec![alpha + zeta * (1.0 - alpha), (1.0 - zeta) * (1.0 - alpha)],
            vec![(1.0 - zeta) * alpha, 1.0 - (1.0 - zeta) * alpha],
        ]
    }

    #[test]
    fn stationary_one_state() {
        assert_eq!(stationary_distribution(&[vec![1.0]]).unwrap(), vec![1.0]);
    }

    #[test]
    fn stationary_symmetric_two_state() {
        let pi = stationary_distribution(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert!((pi[0] - 0.5).abs() < 1e-12 && (pi[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn stationary_sticky_chain() {
        let p = chain_imp(0.25, 0.5);
        assert_eq!(p, vec![vec![0.625, 0.375], vec![0.125, 0.875]]);
        let pi = stationary_distribution(&p).unwrap();
        assert!((pi[0] - 0.25).abs() < 1e-10);
        assert!((pi[1] - 0.75).abs() < 1e-10);
    }

    #[test]
    fn stationary_rejects_bad_matrix() {
        assert!(matches!(
            stationary_distribution(&[vec![0.7, 0.7], vec![0.5, 0.5]]),
            Err(ModelError::NotStochastic { .. })
        ));
        assert!(matches!(
            stationary_distribution(&[vec![0.0, 1.0], vec![1.0, 0.0]]),
            Err(ModelError::NotErgodic)
        ));
    }

    #[test]
    fn gamma_iid_rows() {
        let p = vec![vec![0.3, 0.7], vec![0.3, 0.7]];
        let pi = stationary_distribution(&p).unwrap();
        assert_eq!(decorrelation_gamma(&p, &pi).unwrap(), 1.0);
    }

    #[test]
    fn gamma_two_cycle_is_zero() {
        let p = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let pi = vec![0.5, 0.5];
        assert_eq!(decorrelation_gamma(&p, &pi).unwrap(), 0.0);
    }

    #[test]
    fn gamma_sticky_chain() {
        let p = chain_imp(0.25, 0.5);
        let pi = stationary_distribution(&p).unwrap();
        // Four ratios by hand: 0.625/0.25, 0.375/0.75, 0.125/0.25, 0.875/0.75.
        let g = decorrelation_gamma(&p, &pi).unwrap();
        assert!((g - 0.5).abs() < 1e-12);
    }

    #[test]
    fn mixture_single_state_identity() {
        let d = ValueDistribution::uniform(0.0, 1.0).unwrap();
        let m = MarkovValueModel::iid(d.clone());
        match steady_state_mixture(&m).unwrap() {
            Mixture::Values(v) => assert_eq!(v, d),
            _ => panic!("expected value mixture"),
        }
    }

    #[test]
    fn mixture_identical_bernoulli_collapses() {
        let d = ValueDistribution::bernoulli(0.3).unwrap();
        let m = MarkovValueModel::new(
            vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            StateLaw::Values(vec![d.clone(), d.clone()]),
            InitialState::Stationary,
        )
        .unwrap();
        match steady_state_mixture(&m).unwrap() {
            Mixture::Values(v) => assert_eq!(v, d),
            _ => panic!(),
        }
    }

    #[test]
    fn mixture_two_point() {
        // pi = (0.25, 0.75); state 0 has V = 1, state 1 has V = 0.
        let m = MarkovValueModel::new(
            chain_imp(0.25, 0.5),
            StateLaw::Values(vec![
                ValueDistribution::discrete(vec![(1.0, 1.0)]).unwrap(),
                ValueDistribution::discrete(vec![(0.0, 1.0)]).unwrap(),
            ]),
            InitialState::Stationary,
        )
        .unwrap();
        match steady_state_mixture(&m).unwrap() {
            Mixture::Values(ValueDistribution::Discrete { atoms }) => {
                assert_eq!(atoms.len(), 2);
                assert!((atoms[0].0 - 0.0).abs() < 1e-12 && (atoms[0].1 - 0.75).abs() < 1e-12);
                assert!((atoms[1].0 - 1.0).abs() < 1e-12 && (atoms[1].1 - 0.25).abs() < 1e-12);
            }
            _ => panic!(),
        }
    }

    #[test]
    fn sample_path_constant_model() {
        let m = MarkovValueModel::iid(ValueDistribution::discrete(vec![(2.5, 1.0)]).unwrap());
        let path = sample_path(&m, 3, 7);
        assert_eq!(path.len(), 3);
        for p in path {
            assert_eq!(p.state, 0);
            assert_eq!(p.value, 2.5);
            assert_eq!(p.duration, 1);
        }
    }

    #[test]
    fn sample_path_two_cycle_alternates() {
        let m = MarkovValueModel::new(
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            StateLaw::Values(vec![
                ValueDistribution::discrete(vec![(0.0, 1.0)]).unwrap(),
                ValueDistribution::discrete(vec![(1.0, 1.0)]).unwrap(),
            ]),
            InitialState::Fixed(0),
        )
        .unwrap();
        let path = sample_path(&m, 6, 11);
        let states: Vec<usize> = path.iter().map(|p| p.state).collect();
        assert_eq!(states, vec![0, 1, 0, 1, 0, 1]);
    }

    #[test]
    fn sample_path_deterministic_in_seed() {
        let m = MarkovValueModel::iid(ValueDistribution::uniform(0.0, 1.0).unwrap());
        assert_eq!(sample_path(&m, 50, 13), sample_path(&m, 50, 13));
        assert_ne!(sample_path(&m, 50, 13), sample_path(&m, 50, 14));
    }

    #[test]
    fn empirical_state_frequencies_match_stationary() {
        let m = MarkovValueModel::new(
            chain_imp(0.25, 0.5),
            StateLaw::Values(vec![
                ValueDistribution::bernoulli(1.0).unwrap(),
                ValueDistribution::bernoulli(0.0).unwrap(),
            ]),
            InitialState::Stationary,
        )
        .unwrap();
        let t = 1_000_000usize;
        let path = sample_path(&m, t, 2024);
        let mut counts = [0u64; 2];
        for p in &path {
            counts[p.state] += 1;
        }
        let pi = &m.profile().pi;
        for s in 0..2 {
            let freq = counts[s] as f64 / t as f64;
            let band = 3.0 * (pi[s] * (1.0 - pi[s]) / t as f64).sqrt() * 5.0;
            assert!(
                (freq - pi[s]).abs() < band,
                "state {s}: freq {freq} vs pi {} band {band}",
                pi[s]
            );
            assert!((freq - pi[s]).abs() < 0.01);
        }
    }

    #[test]
    fn discretize_uniform_mean() {
        let d = ValueDistribution::uniform(0.0, 1.0).unwrap();
        let disc = d.discretize(10_000);
        assert!((disc.mean() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn bounded_density_cdf_quantile_roundtrip() {
        let d = ValueDistribution::bounded_density(0.0, 2.0, vec![0.25, 0.75], Some((0.25, 0.75)))
            .unwrap();
        for q in [0.1, 0.25, 0.5, 0.9] {
            let x = d.quantile(q);
            assert!((d.cdf(x) - q).abs() < 1e-12);
        }
        assert!(ValueDistribution::bounded_density(0.0, 2.0, vec![0.25, 0.75], Some((0.3, 0.75)))
            .is_err());
    }

    #[test]
    fn demand_validation() {
        assert!(DemandDistribution::new(
            vec![DemandAtom { value: 1.0, duration: 4, prob: 1.0 }],
            3
        )
        .is_err());
        let d = DemandDistribution::new(
            vec![
                DemandAtom { value: 1.0, duration: 1, prob: 0.5 },
                DemandAtom { value: 1.0, duration: 3, prob: 0.5 },
            ],
            3,
        )
        .unwrap();
        assert_eq!(d.max_value_duration(), 3.0);
    }
}
