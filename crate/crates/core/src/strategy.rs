//! Agent request strategies and adversarial blocking strategies.
//!
//! Agent side: the aggressive strategy requests with the optimal ideal-utility
//! probability for its budget; the state-independent strategy requests the
//! top-`p` quantile of the *current state's* law so the marginal request rate
//! is `p` in every state and requests leak no state information.
//!
//! Adversary side: a greedy blocker that requests whenever it can beat the
//! focal agent's best counterfactual score, a win-triggered blocker that
//! requests for a fixed window after each focal win, a flooder that demands a
//! fixed duration every round, and a silent opponent. Adversaries observe only
//! what their information model allows: focal win history (and, optionally,
//! request history) — never values, states, or sampled durations.

use crate::ideal::RequestPolicy;
use crate::mechanism::{Mechanism, MechanismState, Rational};
use crate::value_model::{MarkovValueModel, StateLaw, ValueDistribution};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StrategyError {
    #[error("strategy reads unavailable observable: {0}")]
    UnavailableObservable(&'static str),
    #[error("state-independent strategy requires a per-state value law")]
    RequiresValueLaw,
    #[error("win-triggered blocking windows overlap at round {0}")]
    OverlappingWindows(u64),
}

/// A focal agent's request rule.
#[derive(Debug, Clone)]
pub enum AgentStrategy {
    /// Request with probability `rho*_beta(V)` (or `rho*_beta(V, K)`); for
    /// multi-round policies `demand_support` maps a sampled `(value, duration)`
    /// pair back to its support index.
    BetaAggressive {
        policy: RequestPolicy,
        demand_support: Option<Vec<crate::value_model::DemandAtom>>,
    },
    /// Request iff the value is in the top-`p` quantile of the current state's
    /// law; `thresholds[s]` holds that state's `(threshold, atom_prob)`.
    StateIndependent { p: f64, thresholds: Vec<(f64, f64)> },
    Always,
    Never,
    /// Request iff the value strictly exceeds `tau`.
    FixedThreshold { tau: f64 },
}

impl AgentStrategy {
    /// Builds the state-independent strategy for `model`: the flat request rate
    /// is the maximum per-state request rate of the optimal budget-`beta`
    /// policy on the steady-state mixture.
    pub fn state_independent(
        model: &MarkovValueModel,
        beta: f64,
    ) -> Result<Self, StrategyError> {
        let mixture = match crate::value_model::steady_state_mixture(model) {
            Ok(crate::value_model::Mixture::Values(v)) => v,
            _ => return Err(StrategyError::RequiresValueLaw),
        };
        let policy = crate::ideal::ideal_single(&mixture, beta).policy;
        let dists = match model.per_state() {
            StateLaw::Values(d) => d,
            StateLaw::Demands(_) => return Err(StrategyError::RequiresValueLaw),
        };
        let p = dists
            .iter()
            .map(|d| policy.expected_request_rate(d))
            .fold(0.0, f64::max);
        let thresholds = dists.iter().map(|d| top_quantile_rule(d, p)).collect();
        Ok(AgentStrategy::StateIndependent { p, thresholds })
    }
}

/// `(threshold, atom_prob)` such that requesting above the threshold, and the
/// threshold atom with probability `atom_prob`, has total mass exactly `p`.
fn top_quantile_rule(dist: &ValueDistribution, p: f64) -> (f64, f64) {
    let policy = crate::ideal::ideal_single(dist, p).policy;
    match policy {
        RequestPolicy::SingleRound { threshold, atom_prob, .. } => (threshold, atom_prob),
        RequestPolicy::MultiRound { .. } => unreachable!("single-round law"),
    }
}

/// Decides whether (and for how long) the agent requests this round.
///
/// `coin` is a uniform draw in `[0, 1)` from the agent's private stream. The
/// returned duration equals the sampled demand duration in reusable mode.
pub fn agent_decide(
    strategy: &AgentStrategy,
    value: f64,
    duration: u32,
    state: usize,
    coin: f64,
) -> Option<u32> {
    let requested = match strategy {
        AgentStrategy::BetaAggressive { policy, demand_support } => match policy {
            RequestPolicy::SingleRound { .. } => coin < policy.request_prob(value),
            RequestPolicy::MultiRound { .. } => {
                let rho = demand_support
                    .as_ref()
                    .and_then(|atoms| {
                        atoms
                            .iter()
                            .position(|a| a.value == value && a.duration == duration)
                    })
                    .map(|j| policy.request_prob_atom(j))
                    .unwrap_or(0.0);
                coin < rho
            }
        },
        AgentStrategy::StateIndependent { thresholds, .. } => {
            let (tau, atom) = thresholds[state];
            value > tau || (value == tau && coin < atom)
        }
        AgentStrategy::Always => true,
        AgentStrategy::Never => false,
        AgentStrategy::FixedThreshold { tau } => value > *tau,
    };
    requested.then_some(duration.max(1))
}

/// Information available to an adversary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observe {
    /// Only which past rounds the focal agent won.
    WinsOnly,
    /// Win history plus the focal agent's past request indicators.
    FullRequests,
}

#[derive(Debug, Clone)]
pub enum AdversaryStrategy {
    /// Requests whenever the criterion would let it win against the focal
    /// agent's best counterfactual request.
    GreedyBlocker { observe: Observe },
    /// Requests for `window` rounds immediately after each focal win.
    WinTriggered { window: u64 },
    /// Requests a fixed duration every round.
    KmaxFlooder { duration: u32 },
    Silent,
}

impl AdversaryStrategy {
    /// Default window: `floor((1 - alpha) / alpha)` for the focal share.
    pub fn win_triggered_default(focal_share: Rational) -> Self {
        let window = (focal_share.den() - focal_share.num()) / focal_share.num();
        AdversaryStrategy::WinTriggered { window }
    }

    /// The observables this strategy needs.
    pub fn required_observe(&self) -> Option<Observe> {
        match self {
            AdversaryStrategy::GreedyBlocker { observe } => Some(*observe),
            AdversaryStrategy::WinTriggered { .. } => Some(Observe::WinsOnly),
            _ => None,
        }
    }
}

/// Per-simulation adversary memory, owned by the simulator loop.
#[derive(Debug, Clone, Default)]
pub struct AdversaryMemory {
    window_until: u64,
}

impl AdversaryMemory {
    /// Feeds one focal win indicator; the wins-only observation channel.
    pub fn observe_focal_win(
        &mut self,
        strategy: &AdversaryStrategy,
        round: u64,
    ) -> Result<(), StrategyError> {
        if let AdversaryStrategy::WinTriggered { window } = strategy {
            if round <= self.window_until {
                return Err(StrategyError::OverlappingWindows(round));
            }
            self.window_until = round + window;
        }
        Ok(())
    }
}

/// What the adversary may look at when deciding.
pub struct AdversaryView<'a> {
    pub mechanism: &'a Mechanism,
    pub state: &'a MechanismState,
    pub self_index: usize,
    pub focal_index: usize,
    /// Focal request history; `None` unless the information model grants it.
    pub focal_requests: Option<&'a [bool]>,
}

/// Adversary decision at a decision round; returns the requested duration.
pub fn adversary_decide(
    strategy: &AdversaryStrategy,
    memory: &AdversaryMemory,
    view: &AdversaryView<'_>,
) -> Result<Option<u32>, StrategyError> {
    if matches!(
        strategy,
        AdversaryStrategy::GreedyBlocker { observe: Observe::FullRequests }
    ) && view.focal_requests.is_none()
    {
        return Err(StrategyError::UnavailableObservable("focal request history"));
    }
    Ok(match strategy {
        AdversaryStrategy::Silent => None,
        AdversaryStrategy::KmaxFlooder { duration } => Some(*duration),
        AdversaryStrategy::WinTriggered { .. } => {
            (view.state.round <= memory.window_until).then_some(1)
        }
        AdversaryStrategy::GreedyBlocker { .. } => {
            // Request iff the criterion beats the focal agent's most favorable
            // counterfactual, a duration-1 request (ties go to lower index).
            let me = view.self_index;
            let mut requests = vec![None; view.state.allocations.len()];
            requests[me] = Some(1);
            requests[view.focal_index] = Some(1);
            let wins = view.mechanism.winner_of(view.state, &requests) == Some((me, 1));
            wins.then_some(1)
        }
    })
}
