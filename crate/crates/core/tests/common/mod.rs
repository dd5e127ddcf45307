//! Shared helpers for integration tests: random experiment generators and
//! pathwise checks used by both the invariant matrix and the acceptance suite.

use dmmf::ideal::{ideal_multi, ideal_single};
use dmmf::mechanism::{Mechanism, MechanismConfig, Mode, Rational};
use dmmf::rng;
use dmmf::sim::{ResolvedAgent, ResolvedExperiment, ResolvedRole, SimulationTrace};
use dmmf::strategy::{AdversaryStrategy, AgentStrategy, Observe};
use dmmf::value_model::{
    steady_state_mixture, DemandAtom, DemandDistribution, InitialState, MarkovValueModel,
    Mixture, StateLaw, ValueDistribution,
};
use rand_core::RngCore;

pub fn uniform(rng: &mut impl RngCore, lo: f64, hi: f64) -> f64 {
    lo + rng::uniform01(rng) * (hi - lo)
}

pub fn pick(rng: &mut impl RngCore, n: u64) -> u64 {
    rng::below(rng, n)
}

/// Random probabilities summing to 1 within strict tolerance: the last entry
/// absorbs the float residue.
pub fn random_probs(rng: &mut impl RngCore, n: usize) -> Vec<f64> {
    let weights: Vec<f64> = (0..n).map(|_| uniform(rng, 0.05, 1.0)).collect();
    let total: f64 = weights.iter().sum();
    let mut probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let partial: f64 = probs[..n - 1].iter().sum();
    probs[n - 1] = (1.0 - partial).max(0.0);
    probs
}

pub fn random_value_distribution(rng: &mut impl RngCore) -> ValueDistribution {
    match pick(rng, 3) {
        0 => ValueDistribution::bernoulli(uniform(rng, 0.05, 0.95)).unwrap(),
        1 => ValueDistribution::uniform(0.0, uniform(rng, 0.5, 2.0)).unwrap(),
        _ => {
            let n = 2 + pick(rng, 4) as usize;
            let probs = random_probs(rng, n);
            let atoms = probs
                .into_iter()
                .enumerate()
                .map(|(i, p)| (i as f64 * uniform(rng, 0.2, 1.0), p))
                .collect();
            ValueDistribution::discrete(atoms).unwrap()
        }
    }
}

/// Random ergodic model: i.i.d. half the time, otherwise a 2-3 state chain
/// with strictly positive transition entries.
pub fn random_value_model(rng: &mut impl RngCore) -> MarkovValueModel {
    if pick(rng, 2) == 0 {
        return MarkovValueModel::iid(random_value_distribution(rng));
    }
    let states = 2 + pick(rng, 2) as usize;
    let mut transition = Vec::with_capacity(states);
    for _ in 0..states {
        let mut row: Vec<f64> = (0..states).map(|_| uniform(rng, 0.05, 1.0)).collect();
        let sum: f64 = row.iter().sum();
        for x in row.iter_mut() {
            *x /= sum;
        }
        let partial: f64 = row[..states - 1].iter().sum();
        row[states - 1] = (1.0 - partial).max(0.0);
        transition.push(row);
    }
    let dists = (0..states).map(|_| random_value_distribution(rng)).collect();
    MarkovValueModel::new(transition, StateLaw::Values(dists), InitialState::Stationary)
        .unwrap()
}

pub fn random_demand_distribution(rng: &mut impl RngCore, k_max: u32) -> DemandDistribution {
    let n = 1 + pick(rng, 4) as usize;
    let probs = random_probs(rng, n);
    let support = probs
        .into_iter()
        .map(|p| DemandAtom {
            value: uniform(rng, 0.0, 2.0),
            duration: 1 + pick(rng, k_max as u64) as u32,
            prob: p,
        })
        .collect();
    DemandDistribution::new(support, k_max).unwrap()
}

pub fn random_agent_strategy(
    rng: &mut impl RngCore,
    model: &MarkovValueModel,
    alpha: f64,
) -> AgentStrategy {
    let beta = match pick(rng, 4) {
        0 => alpha,
        1 => (alpha / 2.0).max(1e-3),
        2 => (2.0 * alpha).min(1.0),
        _ => uniform(rng, 0.05, 1.0),
    };
    match steady_state_mixture(model).unwrap() {
        Mixture::Values(dist) => match pick(rng, 5) {
            0 => AgentStrategy::Always,
            1 => AgentStrategy::FixedThreshold { tau: uniform(rng, 0.0, 1.0) },
            2 => AgentStrategy::state_independent(model, beta)
                .unwrap_or(AgentStrategy::Always),
            _ => AgentStrategy::BetaAggressive {
                policy: ideal_single(&dist, beta).policy,
                demand_support: None,
            },
        },
        Mixture::Demands(dist) => match pick(rng, 4) {
            0 => AgentStrategy::Always,
            _ => AgentStrategy::BetaAggressive {
                policy: ideal_multi(&dist, beta).unwrap().policy,
                demand_support: Some(dist.support.clone()),
            },
        },
    }
}

pub fn random_adversary(
    rng: &mut impl RngCore,
    focal_share: Rational,
    k_max: u32,
    allow_win_triggered: bool,
) -> AdversaryStrategy {
    loop {
        match pick(rng, 5) {
            0 => return AdversaryStrategy::GreedyBlocker { observe: Observe::FullRequests },
            1 => return AdversaryStrategy::GreedyBlocker { observe: Observe::WinsOnly },
            2 if allow_win_triggered => {
                return AdversaryStrategy::win_triggered_default(focal_share)
            }
            3 => {
                return AdversaryStrategy::KmaxFlooder {
                    duration: 1 + pick(rng, k_max as u64) as u32,
                }
            }
            4 => return AdversaryStrategy::Silent,
            _ => continue,
        }
    }
}

/// Two-agent experiment: a focal value agent vs one merged adversary.
pub fn duel(
    focal_share: Rational,
    mode: Mode,
    horizon: u64,
    model: MarkovValueModel,
    strategy: AgentStrategy,
    adversary: AdversaryStrategy,
) -> ResolvedExperiment {
    let rest = Rational::new(
        focal_share.den() - focal_share.num(),
        focal_share.den(),
    )
    .unwrap();
    let mechanism = Mechanism::new(MechanismConfig {
        shares: vec![focal_share, rest],
        mode,
    })
    .unwrap();
    ResolvedExperiment {
        mechanism,
        agents: vec![
            ResolvedAgent { share: focal_share, role: ResolvedRole::Value { model, strategy } },
            ResolvedAgent { share: rest, role: ResolvedRole::Adversary { strategy: adversary } },
        ],
        focal: 0,
        horizon,
        fingerprint: 0,
    }
}

/// Random single-round duel with share denominator 1000.
pub fn random_single_round_duel(rng: &mut impl RngCore, horizon: u64) -> ResolvedExperiment {
    let k = 50 + pick(rng, 901);
    let share = Rational::new(k, 1000).unwrap();
    let model = random_value_model(rng);
    let strategy = random_agent_strategy(rng, &model, share.as_f64());
    let adversary = random_adversary(rng, share, 1, true);
    duel(share, Mode::SingleRound, horizon, model, strategy, adversary)
}

/// Random reusable duel: k_max <= 8, r in [1, 4].
pub fn random_reusable_duel(rng: &mut impl RngCore, horizon: u64) -> ResolvedExperiment {
    let k = 50 + pick(rng, 901);
    let share = Rational::new(k, 1000).unwrap();
    let k_max = 1 + pick(rng, 8) as u32;
    let r = Rational::new(8 + pick(rng, 25), 8).unwrap();
    let mode = Mode::Reusable { horizon, r, k_max };
    let model = MarkovValueModel::iid_demand(random_demand_distribution(rng, k_max));
    let strategy = random_agent_strategy(rng, &model, share.as_f64());
    // Win-triggered windows can overlap under reusable holds; skip it here.
    let adversary = random_adversary(rng, share, k_max, false);
    duel(share, mode, horizon, model, strategy, adversary)
}

/// True iff the adversary (agent 1) wins every one of its `window` post-win
/// rounds after each focal (agent 0) win, for wins at least `window` rounds
/// before the horizon.
pub fn adversary_wins_all_windows(trace: &SimulationTrace, window: u64) -> bool {
    for t in 1..=trace.horizon.saturating_sub(window) {
        if trace.record(t, 0).won {
            for dt in 1..=window {
                if !trace.record(t + dt, 1).won {
                    return false;
                }
            }
        }
    }
    true
}
