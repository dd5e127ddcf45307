//! The dynamic max-min fair mechanism, single-round and reusable variants.
//!
//! Each round the item goes to the requesting agent with the smallest
//! normalized allocation `(A_i + d_i) / alpha_i`, ties broken by lowest agent
//! index. In reusable mode a multi-round demand is rejected when the winner's
//! allocation would exceed `T alpha_i / r`, and a win of duration `d` makes the
//! item unavailable to everyone (winner included) for `d` rounds.
//!
//! Fair shares and `r` are held as exact rationals so that every score
//! comparison, eligibility test, and downstream pathwise invariant check is
//! integer arithmetic: traces are bit-reproducible and the allocation lemmas
//! can be verified without float tolerances.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MechanismError {
    #[error("shares invalid: {0}")]
    BadShares(String),
    #[error("cannot represent {0} as a small rational")]
    IrrationalParameter(f64),
    #[error("agent {agent} requested duration {requested} above k_max {k_max}")]
    RequestDuration { agent: usize, requested: u32, k_max: u32 },
    #[error("contract violation: {0}")]
    ContractViolation(String),
    #[error("operation does not match the configured mode")]
    ModeMismatch,
}

/// Exact nonnegative rational, reduced, used for fair shares and the cap
/// parameter `r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rational {
    num: u64,
    den: u64,
}

impl Rational {
    pub fn new(num: u64, den: u64) -> Result<Self, MechanismError> {
        if den == 0 {
            return Err(MechanismError::BadShares("zero denominator".into()));
        }
        let g = gcd(num.max(1), den);
        Ok(Rational { num: num / g, den: den / g })
    }

    /// Smallest-denominator rational within `1e-12` of `x` (Stern-Brocot
    /// search). Config floats like `0.25` or `0.05` recover their exact
    /// decimal fractions.
    pub fn from_f64(x: f64) -> Result<Self, MechanismError> {
        if !x.is_finite() || x < 0.0 {
            return Err(MechanismError::IrrationalParameter(x));
        }
        let whole = x.floor();
        let frac = x - whole;
        if whole > 1e15 {
            return Err(MechanismError::IrrationalParameter(x));
        }
        let tol = 1e-12;
        let (num, den) = if frac <= tol {
            (0u64, 1u64)
        } else if frac >= 1.0 - tol {
            (1u64, 1u64)
        } else {
            // Continued-fraction convergents of frac.
            let mut found = None;
            let (mut p0, mut q0, mut p1, mut q1) = (0u128, 1u128, 1u128, 0u128);
            let mut rem = frac;
            for _ in 0..64 {
                let a = rem.floor();
                let ai = a as u128;
                let p2 = ai * p1 + p0;
                let q2 = ai * q1 + q0;
                if q2 > 1_000_000_000_000 {
                    break;
                }
                if (p2 as f64 / q2 as f64 - frac).abs() <= tol {
                    found = Some((p2 as u64, q2 as u64));
                    break;
                }
                (p0, q0, p1, q1) = (p1, q1, p2, q2);
                let next = rem - a;
                if next <= f64::EPSILON {
                    break;
                }
                rem = 1.0 / next;
            }
            found.ok_or(MechanismError::IrrationalParameter(x))?
        };
        let whole = whole as u64;
        Rational::new(whole.saturating_mul(den).saturating_add(num), den)
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Mechanism variant plus its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    SingleRound,
    Reusable { horizon: u64, r: Rational, k_max: u32 },
}

#[derive(Debug, Clone)]
pub struct MechanismConfig {
    pub shares: Vec<Rational>,
    pub mode: Mode,
}

impl MechanismConfig {
    pub fn validate(&self) -> Result<(), MechanismError> {
        if self.shares.is_empty() {
            return Err(MechanismError::BadShares("no agents".into()));
        }
        let sum: f64 = self.shares.iter().map(Rational::as_f64).sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(MechanismError::BadShares(format!(
                "fair shares must sum to 1 (got {sum})"
            )));
        }
        for (i, s) in self.shares.iter().enumerate() {
            if s.is_zero() {
                return Err(MechanismError::BadShares(format!("agent {i} has zero share")));
            }
        }
        if let Mode::Reusable { horizon, r, k_max } = self.mode {
            if horizon == 0 {
                return Err(MechanismError::BadShares("horizon must be positive".into()));
            }
            if k_max == 0 {
                return Err(MechanismError::BadShares("k_max must be positive".into()));
            }
            if r.as_f64() < 1.0 {
                return Err(MechanismError::BadShares(format!(
                    "r must be >= 1 (got {})",
                    r.as_f64()
                )));
            }
        }
        Ok(())
    }
}

/// Mutable per-simulation allocation state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MechanismState {
    /// Cumulative rounds allocated to each agent (a win of duration d adds d).
    pub allocations: Vec<u64>,
    /// Next physical round, 1-based.
    pub round: u64,
    /// Agent holding the item beyond its win round, if any.
    pub holder: Option<usize>,
    /// Upcoming rounds for which the item stays held.
    pub hold_remaining: u64,
}

impl MechanismState {
    pub fn new(num_agents: usize) -> Self {
        MechanismState {
            allocations: vec![0; num_agents],
            round: 1,
            holder: None,
            hold_remaining: 0,
        }
    }
}

/// Outcome of one decision round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundOutcome {
    pub winner: Option<usize>,
    pub granted_duration: u64,
    pub eligible: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Mechanism {
    config: MechanismConfig,
}

impl Mechanism {
    pub fn new(config: MechanismConfig) -> Result<Self, MechanismError> {
        config.validate()?;
        Ok(Mechanism { config })
    }

    pub fn config(&self) -> &MechanismConfig {
        &self.config
    }

    pub fn num_agents(&self) -> usize {
        self.config.shares.len()
    }

    /// `(a + d) / alpha_i  <  (b + e) / alpha_j`, exactly. Equality returns
    /// false; the caller applies the index tie-break.
    fn score_less(&self, i: usize, score_i: u64, j: usize, score_j: u64) -> bool {
        let si = self.config.shares[i];
        let sj = self.config.shares[j];
        let lhs = score_i as u128 * si.den as u128 * sj.num as u128;
        let rhs = score_j as u128 * sj.den as u128 * si.num as u128;
        lhs < rhs
    }

    /// Eligibility under the reusable cap: a demand of duration 1 always
    /// qualifies; a longer one requires `A_i + d_i <= T alpha_i / r`.
    fn eligible(&self, alloc: u64, duration: u32, agent: usize) -> bool {
        if duration <= 1 {
            return true;
        }
        match self.config.mode {
            Mode::SingleRound => true,
            Mode::Reusable { horizon, r, .. } => {
                let share = self.config.shares[agent];
                // (A + d) * den_alpha * num_r <= T * num_alpha * den_r
                let lhs =
                    (alloc + duration as u64) as u128 * share.den as u128 * r.num as u128;
                let rhs = horizon as u128 * share.num as u128 * r.den as u128;
                lhs <= rhs
            }
        }
    }

    /// Winner (and granted duration) among `requests` at the current state,
    /// or `None` when nobody eligible requests.
    pub fn winner_of(
        &self,
        state: &MechanismState,
        requests: &[Option<u32>],
    ) -> Option<(usize, u32)> {
        let mut best: Option<(usize, u32, u64)> = None;
        for (i, req) in requests.iter().enumerate() {
            let Some(d) = *req else { continue };
            if !self.eligible(state.allocations[i], d, i) {
                continue;
            }
            let score = state.allocations[i] + d as u64;
            match best {
                None => best = Some((i, d, score)),
                Some((bi, _, bs)) => {
                    if self.score_less(i, score, bi, bs) {
                        best = Some((i, d, score));
                    }
                }
            }
        }
        best.map(|(i, d, _)| (i, d))
    }

    /// Single-round step: winner's allocation increments by one, round advances.
    pub fn step_single(&self, state: &mut MechanismState, requests: &[bool]) -> RoundOutcome {
        debug_assert_eq!(requests.len(), self.num_agents());
        let reqs: Vec<Option<u32>> =
            requests.iter().map(|&r| if r { Some(1) } else { None }).collect();
        let winner = self.winner_of(state, &reqs).map(|(i, _)| i);
        if let Some(w) = winner {
            state.allocations[w] += 1;
        }
        state.round += 1;
        RoundOutcome {
            winner,
            granted_duration: 1,
            eligible: (0..self.num_agents()).filter(|&i| reqs[i].is_some()).collect(),
        }
    }

    /// Reusable step at a decision round. Callers must not submit requests
    /// while a hold is in progress.
    pub fn step_reusable(
        &self,
        state: &mut MechanismState,
        requests: &[Option<u32>],
    ) -> Result<RoundOutcome, MechanismError> {
        let Mode::Reusable { k_max, .. } = self.config.mode else {
            return Err(MechanismError::ModeMismatch);
        };
        if state.hold_remaining > 0 {
            return Err(MechanismError::ContractViolation(
                "request submitted while the item is held".into(),
            ));
        }
        for (i, req) in requests.iter().enumerate() {
            if let Some(d) = req {
                if *d == 0 || *d > k_max {
                    return Err(MechanismError::RequestDuration {
                        agent: i,
                        requested: *d,
                        k_max,
                    });
                }
            }
        }
        let eligible: Vec<usize> = (0..self.num_agents())
            .filter(|&i| {
                requests[i]
                    .map(|d| self.eligible(state.allocations[i], d, i))
                    .unwrap_or(false)
            })
            .collect();
        let outcome = self.winner_of(state, requests);
        if let Some((w, d)) = outcome {
            state.allocations[w] += d as u64;
            state.hold_remaining = d as u64 - 1;
            state.holder = if d > 1 { Some(w) } else { None };
        }
        state.round += 1;
        Ok(RoundOutcome {
            winner: outcome.map(|(i, _)| i),
            granted_duration: outcome.map(|(_, d)| d as u64).unwrap_or(1),
            eligible,
        })
    }

    /// Advances one physical round of an in-progress hold.
    pub fn advance_hold(&self, state: &mut MechanismState) -> Result<(), MechanismError> {
        if state.hold_remaining == 0 {
            return Err(MechanismError::ContractViolation("no hold in progress".into()));
        }
        state.hold_remaining -= 1;
        if state.hold_remaining == 0 {
            state.holder = None;
        }
        state.round += 1;
        Ok(())
    }

    /// Counterfactual blocked indicator for `focal` at the current round.
    ///
    /// True when another agent has the item this round and the criterion would
    /// not have favored the focal agent's counterfactual request of
    /// `focal_demand`: either an opponent holds it from an earlier win, or the
    /// actual winner beats her counterfactual score (with the index
    /// tie-break). The focal agent's own eligibility cap never counts as
    /// blocking: losing a round to her own allocation limit is not the
    /// opponents' doing. Always false when the focal agent actually wins.
    pub fn blocked_for(
        &self,
        state: &MechanismState,
        focal: usize,
        requests: &[Option<u32>],
        focal_demand: u32,
    ) -> bool {
        if state.hold_remaining > 0 {
            return state.holder != Some(focal);
        }
        match self.winner_of(state, requests) {
            None => false,
            Some((w, _)) if w == focal => false,
            Some((w, d_w)) => {
                let focal_score = state.allocations[focal] + focal_demand.max(1) as u64;
                let winner_score = state.allocations[w] + d_w as u64;
                let focal_beats = self.score_less(focal, focal_score, w, winner_score)
                    || (!self.score_less(w, winner_score, focal, focal_score) && focal < w);
                !focal_beats
            }
        }
    }
}
