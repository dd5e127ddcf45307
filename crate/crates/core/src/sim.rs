//! Episode simulator: samples value paths, queries strategies, steps the
//! mechanism, and records a full per-round ledger per agent.
//!
//! Every episode is deterministic in `(experiment, seed)`: each agent's value
//! path and coin stream come from independent sub-streams of the seed, so an
//! adversary's decisions can never perturb an agent's sampled values across
//! counterfactual comparisons. Replications are embarrassingly parallel and
//! aggregated in replication order, so summaries do not depend on the degree
//! of parallelism.
//!
//! The allocation lemmas are checked on every trace in exact integer
//! arithmetic (shares are rationals), so a reported violation is a mechanism
//! bug, never float noise.

use crate::ideal::IdealError;
use crate::mechanism::{Mechanism, MechanismError, MechanismState, Mode, Rational};
use crate::rng::{self, PURPOSE_AGENT_COIN, PURPOSE_REPLICATION, PURPOSE_VALUES};
use crate::strategy::{
    adversary_decide, agent_decide, AdversaryMemory, AdversaryStrategy, AgentStrategy,
    AdversaryView, Observe, StrategyError,
};
use crate::value_model::{MarkovValueModel, ModelError, PathPoint, PathSampler};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid experiment: {0}")]
    Config(String),
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Ideal(#[from] IdealError),
}

/// What an agent slot does in the experiment.
pub enum ResolvedRole {
    /// Samples values from a model and requests via an agent strategy.
    Value { model: MarkovValueModel, strategy: AgentStrategy },
    /// Requests strategically; never draws values.
    Adversary { strategy: AdversaryStrategy },
}

pub struct ResolvedAgent {
    pub share: Rational,
    pub role: ResolvedRole,
}

/// A fully validated, policy-resolved experiment ready to simulate.
pub struct ResolvedExperiment {
    pub mechanism: Mechanism,
    pub agents: Vec<ResolvedAgent>,
    /// Index of the focal agent (first value agent).
    pub focal: usize,
    pub horizon: u64,
    pub fingerprint: u64,
}

impl ResolvedExperiment {
    pub fn mode(&self) -> Mode {
        self.mechanism.config().mode
    }
}

/// One agent's ledger entry for one physical round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentRoundRecord {
    pub state: u32,
    pub value: f64,
    pub duration: u32,
    pub requested: bool,
    pub blocked: bool,
    pub own_hold: bool,
    pub won: bool,
    pub utility: f64,
    pub allocation: u64,
}

/// Full per-round ledger for every agent, plus enough metadata to re-check the
/// pathwise lemmas exactly.
pub struct SimulationTrace {
    pub num_agents: usize,
    pub horizon: u64,
    pub shares: Vec<Rational>,
    pub mode: Mode,
    /// Row-major: `records[(t - 1) * num_agents + agent]`.
    pub records: Vec<AgentRoundRecord>,
    pub seed: u64,
    pub config_fingerprint: u64,
}

impl SimulationTrace {
    pub fn record(&self, t: u64, agent: usize) -> &AgentRoundRecord {
        &self.records[(t as usize - 1) * self.num_agents + agent]
    }
}

/// Runs one full episode of `horizon` physical rounds.
pub fn run_episode(exp: &ResolvedExperiment, seed: u64) -> Result<SimulationTrace, SimError> {
    let n = exp.agents.len();
    let mech = &exp.mechanism;
    let horizon = exp.horizon;
    let single_round = matches!(exp.mode(), Mode::SingleRound);

    let mut samplers: Vec<Option<PathSampler>> = Vec::with_capacity(n);
    let mut coins: Vec<Option<rand_chacha::ChaCha8Rng>> = Vec::with_capacity(n);
    let mut memories: Vec<AdversaryMemory> = vec![AdversaryMemory::default(); n];
    for (i, agent) in exp.agents.iter().enumerate() {
        match &agent.role {
            ResolvedRole::Value { model, .. } => {
                samplers.push(Some(PathSampler::new(
                    model,
                    rng::stream(seed, &[i as u64, PURPOSE_VALUES]),
                )));
                coins.push(Some(rng::stream(seed, &[i as u64, PURPOSE_AGENT_COIN])));
            }
            ResolvedRole::Adversary { .. } => {
                samplers.push(None);
                coins.push(None);
            }
        }
    }

    let mut state = MechanismState::new(n);
    let mut records: Vec<AgentRoundRecord> = Vec::with_capacity(horizon as usize * n);
    let mut focal_request_hist: Vec<bool> = Vec::with_capacity(horizon as usize);
    let mut points: Vec<Option<PathPoint>> = vec![None; n];
    let mut requests: Vec<Option<u32>> = vec![None; n];

    for t in 1..=horizon {
        // Chains evolve every physical round; an unserved demand is lost.
        for i in 0..n {
            points[i] = samplers[i].as_mut().map(|s| s.next_point());
        }

        if state.hold_remaining > 0 {
            let holder = state.holder;
            for i in 0..n {
                let pt = points[i];
                records.push(AgentRoundRecord {
                    state: pt.map(|p| p.state as u32).unwrap_or(0),
                    value: pt.map(|p| p.value).unwrap_or(0.0),
                    duration: pt.map(|p| p.duration).unwrap_or(0),
                    requested: false,
                    blocked: holder != Some(i),
                    own_hold: holder == Some(i),
                    won: false,
                    utility: 0.0,
                    allocation: state.allocations[i],
                });
            }
            focal_request_hist.push(false);
            mech.advance_hold(&mut state)?;
            continue;
        }

        for (i, agent) in exp.agents.iter().enumerate() {
            requests[i] = match &agent.role {
                ResolvedRole::Value { strategy, .. } => {
                    let pt = points[i].expect("value agents always sample");
                    let coin = rng::uniform01(coins[i].as_mut().expect("coin stream"));
                    let d = if single_round { 1 } else { pt.duration };
                    agent_decide(strategy, pt.value, d, pt.state, coin)
                }
                ResolvedRole::Adversary { strategy } => {
                    let view = AdversaryView {
                        mechanism: mech,
                        state: &state,
                        self_index: i,
                        focal_index: exp.focal,
                        focal_requests: match strategy.required_observe() {
                            Some(Observe::FullRequests) => Some(&focal_request_hist),
                            _ => None,
                        },
                    };
                    adversary_decide(strategy, &memories[i], &view)?
                }
            };
        }

        // Counterfactual blocked indicators, evaluated before the step.
        let mut blocked = [false; 64];
        debug_assert!(n <= 64, "widen the blocked scratch buffer");
        for i in 0..n {
            let cf_demand = match &exp.agents[i].role {
                ResolvedRole::Value { .. } => {
                    let d = points[i].map(|p| p.duration).unwrap_or(1);
                    if single_round {
                        1
                    } else {
                        d
                    }
                }
                ResolvedRole::Adversary { .. } => requests[i].unwrap_or(1),
            };
            blocked[i] = mech.blocked_for(&state, i, &requests, cf_demand);
        }

        let outcome = if single_round {
            let bools: Vec<bool> = requests.iter().map(Option::is_some).collect();
            mech.step_single(&mut state, &bools)
        } else {
            mech.step_reusable(&mut state, &requests)?
        };

        focal_request_hist.push(requests[exp.focal].is_some());
        if outcome.winner == Some(exp.focal) {
            for (i, agent) in exp.agents.iter().enumerate() {
                if let ResolvedRole::Adversary { strategy } = &agent.role {
                    memories[i].observe_focal_win(strategy, t)?;
                }
            }
        }

        for i in 0..n {
            let pt = points[i];
            let won = outcome.winner == Some(i);
            let value = pt.map(|p| p.value).unwrap_or(0.0);
            let utility = if won {
                if single_round {
                    value
                } else {
                    value * outcome.granted_duration as f64
                }
            } else {
                0.0
            };
            records.push(AgentRoundRecord {
                state: pt.map(|p| p.state as u32).unwrap_or(0),
                value,
                duration: pt
                    .map(|p| if single_round { 1 } else { p.duration })
                    .unwrap_or_else(|| requests[i].unwrap_or(0)),
                requested: requests[i].is_some(),
                blocked: blocked[i],
                own_hold: false,
                won,
                utility,
                allocation: state.allocations[i],
            });
        }
    }

    Ok(SimulationTrace {
        num_agents: n,
        horizon,
        shares: exp.agents.iter().map(|a| a.share).collect(),
        mode: exp.mode(),
        records,
        seed,
        config_fingerprint: exp.fingerprint,
    })
}

/// Result of a pathwise lemma check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaCheck {
    pub pass: bool,
    /// Earliest violating round, when failing.
    pub worst_round: Option<u64>,
}

/// Pathwise allocation invariant for single-round traces, checked at every
/// prefix: `alpha * sum(Blk) <= (1 - alpha) * (1 + sum(W))`, exactly.
pub fn check_lemma_single(trace: &SimulationTrace, focal: usize) -> LemmaCheck {
    let share = trace.shares[focal];
    let (num, den) = (share.num() as u128, share.den() as u128);
    let mut blk: u128 = 0;
    let mut wins: u128 = 0;
    for t in 1..=trace.horizon {
        let r = trace.record(t, focal);
        blk += r.blocked as u128;
        wins += r.won as u128;
        if num * blk > (den - num) * (1 + wins) {
            return LemmaCheck { pass: false, worst_round: Some(t) };
        }
    }
    LemmaCheck { pass: true, worst_round: None }
}

/// Pathwise blocked-rounds bound for reusable traces, checked at the horizon:
/// `sum(Blk) <= max{ ((1-alpha)/alpha) (k_max + sum(W K)), (1-alpha) T / r }`.
pub fn check_lemma_mult(trace: &SimulationTrace, focal: usize) -> LemmaCheck {
    let Mode::Reusable { horizon, r, k_max } = trace.mode else {
        return LemmaCheck { pass: false, worst_round: None };
    };
    let share = trace.shares[focal];
    let (num, den) = (share.num() as u128, share.den() as u128);
    let mut blk: u128 = 0;
    let mut win_rounds: u128 = 0;
    for t in 1..=trace.horizon {
        let rec = trace.record(t, focal);
        blk += rec.blocked as u128;
        if rec.won {
            win_rounds += rec.duration as u128;
        }
    }
    // alpha = num/den, r = r.num()/r.den().
    let first = num * blk <= (den - num) * (k_max as u128 + win_rounds);
    let second =
        blk * den * r.num() as u128 <= (den - num) * horizon as u128 * r.den() as u128;
    LemmaCheck { pass: first || second, worst_round: None }
}

/// Per-record consistency: `W = Req (1 - Blk)` and `U = V K W` (reusable) or
/// `U = V W` (single-round). Returns the number of violations.
pub fn record_identity_violations(trace: &SimulationTrace) -> u64 {
    let single = matches!(trace.mode, Mode::SingleRound);
    let mut violations = 0;
    for t in 1..=trace.horizon {
        for i in 0..trace.num_agents {
            let r = trace.record(t, i);
            if r.won && (!r.requested || r.blocked) {
                violations += 1;
                continue;
            }
            let expect = if r.won {
                if single {
                    r.value
                } else {
                    r.value * r.duration as f64
                }
            } else {
                0.0
            };
            if r.utility != expect {
                violations += 1;
            }
        }
    }
    violations
}

/// Lemma checks for every agent of a trace plus the per-record identities;
/// total violation count.
pub fn trace_violations(trace: &SimulationTrace) -> u64 {
    let mut v = record_identity_violations(trace);
    for i in 0..trace.num_agents {
        let check = match trace.mode {
            Mode::SingleRound => check_lemma_single(trace, i),
            Mode::Reusable { .. } => check_lemma_mult(trace, i),
        };
        if !check.pass {
            v += 1;
        }
    }
    v
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentStats {
    /// Mean and standard error of total utility across replications.
    pub util_total_mean: f64,
    pub util_total_se: f64,
    pub wins_mean: f64,
    pub blocked_mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationSummary {
    pub replications: u32,
    pub horizon: u64,
    pub per_agent: Vec<AgentStats>,
    /// Pathwise invariant violations across all replications; must be zero.
    pub invariant_violations: u64,
}

impl ReplicationSummary {
    /// Mean per-round utility of an agent.
    pub fn per_round_utility(&self, agent: usize) -> f64 {
        self.per_agent[agent].util_total_mean / self.horizon as f64
    }

    /// Standard error of the per-round utility mean.
    pub fn per_round_se(&self, agent: usize) -> f64 {
        self.per_agent[agent].util_total_se / self.horizon as f64
    }
}

struct RepStats {
    utility: Vec<f64>,
    wins: Vec<u64>,
    blocked: Vec<u64>,
    violations: u64,
    trace: Option<SimulationTrace>,
}

fn run_one(exp: &ResolvedExperiment, seed: u64, keep_trace: bool) -> Result<RepStats, SimError> {
    let trace = run_episode(exp, seed)?;
    let n = trace.num_agents;
    let mut utility = vec![0.0; n];
    let mut wins = vec![0u64; n];
    let mut blocked = vec![0u64; n];
    for t in 1..=trace.horizon {
        for i in 0..n {
            let r = trace.record(t, i);
            utility[i] += r.utility;
            wins[i] += r.won as u64;
            blocked[i] += r.blocked as u64;
        }
    }
    let violations = trace_violations(&trace);
    Ok(RepStats { utility, wins, blocked, violations, trace: keep_trace.then_some(trace) })
}

/// Runs `num_reps` seeded replications (in parallel when `jobs != Some(1)`),
/// aggregating in replication order. Identical inputs give identical output
/// regardless of thread count. Traces are retained only when `keep_traces`.
pub fn run_replications(
    exp: &ResolvedExperiment,
    num_reps: u32,
    master_seed: u64,
    jobs: Option<usize>,
    keep_traces: bool,
) -> Result<(ReplicationSummary, Vec<SimulationTrace>), SimError> {
    if num_reps == 0 {
        return Err(SimError::Config("replications must be >= 1".into()));
    }
    let seeds: Vec<u64> = (0..num_reps as u64)
        .map(|k| rep_seed(master_seed, k))
        .collect();
    let results: Vec<Result<RepStats, SimError>> = match jobs {
        Some(1) => seeds.iter().map(|&s| run_one(exp, s, keep_traces)).collect(),
        Some(j) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(j)
                .build()
                .map_err(|e| SimError::Config(format!("thread pool: {e}")))?;
            pool.install(|| {
                seeds
                    .par_iter()
                    .map(|&s| run_one(exp, s, keep_traces))
                    .collect()
            })
        }
        None => seeds
            .par_iter()
            .map(|&s| run_one(exp, s, keep_traces))
            .collect(),
    };
    let mut stats: Vec<RepStats> = Vec::with_capacity(num_reps as usize);
    for r in results {
        stats.push(r?);
    }

    let n = exp.agents.len();
    let reps = num_reps as f64;
    let mut per_agent = Vec::with_capacity(n);
    for i in 0..n {
        let totals: Vec<f64> = stats.iter().map(|s| s.utility[i]).collect();
        let mean = totals.iter().sum::<f64>() / reps;
        let se = if num_reps > 1 {
            let var =
                totals.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (reps - 1.0);
            (var / reps).sqrt()
        } else {
            0.0
        };
        per_agent.push(AgentStats {
            util_total_mean: mean,
            util_total_se: se,
            wins_mean: stats.iter().map(|s| s.wins[i] as f64).sum::<f64>() / reps,
            blocked_mean: stats.iter().map(|s| s.blocked[i] as f64).sum::<f64>() / reps,
        });
    }
    let invariant_violations = stats.iter().map(|s| s.violations).sum();
    let traces = stats.into_iter().filter_map(|s| s.trace).collect();
    Ok((
        ReplicationSummary {
            replications: num_reps,
            horizon: exp.horizon,
            per_agent,
            invariant_violations,
        },
        traces,
    ))
}

/// Seed for replication `k` of a master seed.
pub fn rep_seed(master_seed: u64, k: u64) -> u64 {
    let bytes = rng::derive_seed(master_seed, &[PURPOSE_REPLICATION, k]);
    u64::from_le_bytes(bytes[..8].try_into().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ideal::ideal_single;
    use crate::mechanism::MechanismConfig;
    use crate::value_model::ValueDistribution;

    fn two_agent_single(
        focal_share: (u64, u64),
        model: MarkovValueModel,
        strategy: AgentStrategy,
        adversary: AdversaryStrategy,
        horizon: u64,
    ) -> ResolvedExperiment {
        let alpha = Rational::new(focal_share.0, focal_share.1).unwrap();
        let rest = Rational::new(focal_share.1 - focal_share.0, focal_share.1).unwrap();
        let mechanism = Mechanism::new(MechanismConfig {
            shares: vec![alpha, rest],
            mode: Mode::SingleRound,
        })
        .unwrap();
        ResolvedExperiment {
            mechanism,
            agents: vec![
                ResolvedAgent { share: alpha, role: ResolvedRole::Value { model, strategy } },
                ResolvedAgent { share: rest, role: ResolvedRole::Adversary { strategy: adversary } },
            ],
            focal: 0,
            horizon,
            fingerprint: 0,
        }
    }

    #[test]
    fn never_strategy_yields_nothing() {
        let exp = two_agent_single(
            (1, 2),
            MarkovValueModel::iid(ValueDistribution::uniform(0.0, 1.0).unwrap()),
            AgentStrategy::Never,
            AdversaryStrategy::Silent,
            100,
        );
        let trace = run_episode(&exp, 3).unwrap();
        let total: f64 = (1..=100).map(|t| trace.record(t, 0).utility).sum();
        let requests = (1..=100).filter(|&t| trace.record(t, 0).requested).count();
        assert_eq!(total, 0.0);
        assert_eq!(requests, 0);
    }

    #[test]
    fn always_uncontested_wins_everything() {
        let exp = two_agent_single(
            (1, 2),
            MarkovValueModel::iid(ValueDistribution::bernoulli(0.5).unwrap()),
            AgentStrategy::Always,
            AdversaryStrategy::Silent,
            100,
        );
        let trace = run_episode(&exp, 3).unwrap();
        let wins = (1..=100).filter(|&t| trace.record(t, 0).won).count();
        assert_eq!(wins, 100);
        assert_eq!(trace.record(100, 0).allocation, 100);
    }

    #[test]
    fn aggressive_vs_silent_matches_ideal_utility() {
        // No blocking means per-round utility concentrates at v*(beta) = 0.5.
        let dist = ValueDistribution::bernoulli(0.5).unwrap();
        let policy = ideal_single(&dist, 0.5).policy;
        let exp = two_agent_single(
            (1, 2),
            MarkovValueModel::iid(dist),
            AgentStrategy::BetaAggressive { policy, demand_support: None },
            AdversaryStrategy::Silent,
            100_000,
        );
        let trace = run_episode(&exp, 11).unwrap();
        let total: f64 = (1..=trace.horizon).map(|t| trace.record(t, 0).utility).sum();
        let per_round = total / trace.horizon as f64;
        // 3 standard errors of a Bernoulli(1/2) mean at T = 1e5.
        let band = 3.0 * (0.25f64 / trace.horizon as f64).sqrt();
        assert!((per_round - 0.5).abs() < band, "per-round {per_round}");
        assert_eq!(trace_violations(&trace), 0);
    }

    #[test]
    fn lemma_single_holds_under_greedy_blocking() {
        let dist = ValueDistribution::uniform(0.0, 1.0).unwrap();
        let exp = two_agent_single(
            (1, 2),
            MarkovValueModel::iid(dist),
            AgentStrategy::Always,
            AdversaryStrategy::GreedyBlocker { observe: Observe::FullRequests },
            10_000,
        );
        let trace = run_episode(&exp, 19).unwrap();
        assert!(check_lemma_single(&trace, 0).pass);
        assert!(check_lemma_single(&trace, 1).pass);
        assert_eq!(record_identity_violations(&trace), 0);
    }

    #[test]
    fn synthetic_violating_ledger_fails_lemma() {
        // Blk = (1,1,1), W = (0,0,0) at alpha = 1/2 breaks the invariant.
        let rec = |blocked| AgentRoundRecord {
            state: 0,
            value: 0.0,
            duration: 1,
            requested: false,
            blocked,
            own_hold: false,
            won: false,
            utility: 0.0,
            allocation: 0,
        };
        let shares = vec![Rational::new(1, 2).unwrap(), Rational::new(1, 2).unwrap()];
        let trace = SimulationTrace {
            num_agents: 2,
            horizon: 3,
            shares,
            mode: Mode::SingleRound,
            records: vec![
                rec(true),
                rec(false),
                rec(true),
                rec(false),
                rec(true),
                rec(false),
            ],
            seed: 0,
            config_fingerprint: 0,
        };
        let check = check_lemma_single(&trace, 0);
        assert!(!check.pass);
        assert_eq!(check.worst_round, Some(2));
    }

    #[test]
    fn synthetic_violating_reusable_ledger_fails_lemma() {
        let rec = |blocked| AgentRoundRecord {
            state: 0,
            value: 0.0,
            duration: 1,
            requested: false,
            blocked,
            own_hold: false,
            won: false,
            utility: 0.0,
            allocation: 0,
        };
        let shares = vec![Rational::new(1, 2).unwrap(), Rational::new(1, 2).unwrap()];
        let records: Vec<AgentRoundRecord> =
            (0..20).flat_map(|_| [rec(true), rec(false)]).collect();
        let trace = SimulationTrace {
            num_agents: 2,
            horizon: 20,
            shares,
            mode: Mode::Reusable {
                horizon: 20,
                r: Rational::new(2, 1).unwrap(),
                k_max: 2,
            },
            records,
            seed: 0,
            config_fingerprint: 0,
        };
        // 20 blocked rounds vs max{1 * (2 + 0), 0.5 * 20 / 2 = 5}.
        assert!(!check_lemma_mult(&trace, 0).pass);
    }

    #[test]
    fn deterministic_traces() {
        let dist = ValueDistribution::uniform(0.0, 1.0).unwrap();
        let policy = ideal_single(&dist, 0.25).policy;
        let mk = || {
            two_agent_single(
                (1, 4),
                MarkovValueModel::iid(ValueDistribution::uniform(0.0, 1.0).unwrap()),
                AgentStrategy::BetaAggressive {
                    policy: policy.clone(),
                    demand_support: None,
                },
                AdversaryStrategy::GreedyBlocker { observe: Observe::WinsOnly },
                2_000,
            )
        };
        let a = run_episode(&mk(), 5).unwrap();
        let b = run_episode(&mk(), 5).unwrap();
        assert_eq!(a.records, b.records);
        let c = run_episode(&mk(), 6).unwrap();
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn replication_summary_deterministic_across_jobs() {
        let dist = ValueDistribution::uniform(0.0, 1.0).unwrap();
        let policy = ideal_single(&dist, 0.25).policy;
        let exp = two_agent_single(
            (1, 4),
            MarkovValueModel::iid(dist),
            AgentStrategy::BetaAggressive { policy, demand_support: None },
            AdversaryStrategy::GreedyBlocker { observe: Observe::FullRequests },
            2_000,
        );
        let (s1, _) = run_replications(&exp, 8, 42, Some(1), false).unwrap();
        let (s4, _) = run_replications(&exp, 8, 42, Some(4), false).unwrap();
        assert_eq!(s1, s4);
        assert_eq!(s1.invariant_violations, 0);
        let (s_again, _) = run_replications(&exp, 8, 42, None, false).unwrap();
        assert_eq!(s1, s_again);
    }

    #[test]
    fn single_rep_summary_has_zero_se() {
        let exp = two_agent_single(
            (1, 2),
            MarkovValueModel::iid(ValueDistribution::bernoulli(0.5).unwrap()),
            AgentStrategy::Always,
            AdversaryStrategy::Silent,
            500,
        );
        let (s, traces) = run_replications(&exp, 1, 9, Some(1), true).unwrap();
        assert_eq!(s.per_agent[0].util_total_se, 0.0);
        assert_eq!(traces.len(), 1);
        assert_eq!(s.per_agent[0].wins_mean, 500.0);
    }
}
