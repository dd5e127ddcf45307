//! Experiment configuration: a single TOML format with nested sections and
//! key = value pairs, plus the compact distribution-spec strings used on the
//! command line.

use crate::ideal::{ideal_multi, ideal_single};
use crate::mechanism::{Mechanism, MechanismConfig, Mode, Rational};
use crate::sim::{ResolvedAgent, ResolvedExperiment, ResolvedRole};
use crate::strategy::{AdversaryStrategy, AgentStrategy, Observe};
use crate::value_model::{
    steady_state_mixture, DemandAtom, DemandDistribution, InitialState, MarkovValueModel,
    Mixture, StateLaw, ValueDistribution,
};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mechanism: MechanismSection,
    pub replications: u32,
    pub master_seed: u64,
    #[serde(default)]
    pub bound_checks: Vec<String>,
    #[serde(default)]
    pub outputs: OutputsSection,
    pub agents: Vec<AgentSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismSection {
    /// "single_round" or "reusable".
    pub mode: String,
    pub horizon: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_max: Option<u32>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary_path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curve_path: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSection {
    pub alpha: f64,
    pub strategy: StrategySection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value_model: Option<ModelSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StrategySection {
    BetaAggressive { beta: f64 },
    StateIndependent { beta: f64 },
    Always,
    Never,
    FixedThreshold { tau: f64 },
    GreedyBlocker { observe: String },
    WinTriggered {
        #[serde(skip_serializing_if = "Option::is_none")]
        window: Option<u64>,
    },
    KmaxFlooder { duration: u32 },
    Silent,
}

impl StrategySection {
    pub fn is_adversary(&self) -> bool {
        matches!(
            self,
            StrategySection::GreedyBlocker { .. }
                | StrategySection::WinTriggered { .. }
                | StrategySection::KmaxFlooder { .. }
                | StrategySection::Silent
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSection {
    /// Single-state shorthand: i.i.d. draws from one distribution.
    Iid { distribution: DistSection },
    Markov {
        transition: Vec<Vec<f64>>,
        states: Vec<StateSection>,
        #[serde(skip_serializing_if = "Option::is_none")]
        start_state: Option<usize>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSection {
    pub distribution: DistSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistSection {
    Bernoulli { p: f64 },
    Uniform { lo: f64, hi: f64 },
    /// Atoms as `[value, prob]` pairs.
    Discrete { atoms: Vec<[f64; 2]> },
    /// Piecewise-constant density over `[lo, hi]`.
    Density {
        lo: f64,
        hi: f64,
        heights: Vec<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        bounds: Option<[f64; 2]>,
    },
    /// Demand atoms as `[value, duration, prob]` triples.
    Demand { atoms: Vec<[f64; 3]>, k_max: u32 },
}

impl ExperimentConfig {
    pub fn from_str(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_str(&text)
    }

    /// Canonical TOML dump; re-parses to an identical structure.
    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// FNV-1a over the canonical dump.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.to_toml_string().bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }

    /// Structural validation; everything `resolve` needs must hold here.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.replications < 1 {
            return Err(ConfigError::Invalid("replications must be >= 1".into()));
        }
        if self.agents.is_empty() {
            return Err(ConfigError::Invalid("at least one agent required".into()));
        }
        let share_sum: f64 = self.agents.iter().map(|a| a.alpha).sum();
        if (share_sum - 1.0).abs() > 1e-9 {
            return Err(ConfigError::Invalid(format!(
                "agent fair shares must sum to 1 within 1e-9 (got {share_sum})"
            )));
        }
        let reusable = match self.mechanism.mode.as_str() {
            "single_round" => false,
            "reusable" => true,
            other => {
                return Err(ConfigError::Invalid(format!(
                    "mechanism.mode must be single_round or reusable, got {other}"
                )))
            }
        };
        if self.mechanism.horizon == 0 {
            return Err(ConfigError::Invalid("mechanism.horizon must be >= 1".into()));
        }
        if reusable {
            let r = self
                .mechanism
                .r
                .ok_or_else(|| ConfigError::Invalid("reusable mode requires r".into()))?;
            if r < 1.0 {
                return Err(ConfigError::Invalid(format!("r must be >= 1, got {r}")));
            }
            let k_max = self
                .mechanism
                .k_max
                .ok_or_else(|| ConfigError::Invalid("reusable mode requires k_max".into()))?;
            if k_max < 1 {
                return Err(ConfigError::Invalid("k_max must be >= 1".into()));
            }
        } else if self.mechanism.r.is_some() || self.mechanism.k_max.is_some() {
            return Err(ConfigError::Invalid(
                "r and k_max apply to reusable mode only".into(),
            ));
        }
        if !self.agents.iter().any(|a| !a.strategy.is_adversary()) {
            return Err(ConfigError::Invalid(
                "at least one non-adversary (value) agent required".into(),
            ));
        }
        for (i, agent) in self.agents.iter().enumerate() {
            if agent.alpha <= 0.0 || agent.alpha >= 1.0 {
                return Err(ConfigError::Invalid(format!(
                    "agent {i}: alpha must be in (0,1), got {}",
                    agent.alpha
                )));
            }
            if agent.strategy.is_adversary() {
                if agent.value_model.is_some() {
                    return Err(ConfigError::Invalid(format!(
                        "agent {i}: adversaries take no value model"
                    )));
                }
            } else if agent.value_model.is_none() {
                return Err(ConfigError::Invalid(format!(
                    "agent {i}: value agents need a value model"
                )));
            }
            if let StrategySection::GreedyBlocker { observe } = &agent.strategy {
                if observe != "wins_only" && observe != "full_requests" {
                    return Err(ConfigError::Invalid(format!(
                        "agent {i}: observe must be wins_only or full_requests"
                    )));
                }
            }
            if let StrategySection::KmaxFlooder { duration } = &agent.strategy {
                let k_max = self.mechanism.k_max.unwrap_or(1);
                if *duration < 1 || *duration > k_max {
                    return Err(ConfigError::Invalid(format!(
                        "agent {i}: flooder duration {} outside [1, {k_max}]",
                        duration
                    )));
                }
            }
            let beta = match &agent.strategy {
                StrategySection::BetaAggressive { beta } => Some(*beta),
                StrategySection::StateIndependent { beta } => Some(*beta),
                _ => None,
            };
            if let Some(beta) = beta {
                if !(0.0..=1.0).contains(&beta) || beta == 0.0 {
                    return Err(ConfigError::Invalid(format!(
                        "agent {i}: beta must be in (0,1], got {beta}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn is_reusable(&self) -> bool {
        self.mechanism.mode == "reusable"
    }

    /// Builds the runnable experiment: models constructed, policies computed,
    /// shares converted to exact rationals.
    pub fn resolve(&self) -> Result<ResolvedExperiment, ConfigError> {
        self.validate()?;
        let reusable = self.is_reusable();
        let shares: Vec<Rational> = self
            .agents
            .iter()
            .map(|a| Rational::from_f64(a.alpha))
            .collect::<Result<_, _>>()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let mode = if reusable {
            Mode::Reusable {
                horizon: self.mechanism.horizon,
                r: Rational::from_f64(self.mechanism.r.unwrap())
                    .map_err(|e| ConfigError::Invalid(e.to_string()))?,
                k_max: self.mechanism.k_max.unwrap(),
            }
        } else {
            Mode::SingleRound
        };
        let mechanism = Mechanism::new(MechanismConfig { shares: shares.clone(), mode })
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;

        let mut agents = Vec::with_capacity(self.agents.len());
        let mut focal = None;
        for (i, section) in self.agents.iter().enumerate() {
            let role = if section.strategy.is_adversary() {
                ResolvedRole::Adversary {
                    strategy: resolve_adversary(&section.strategy, &shares, self)?,
                }
            } else {
                if focal.is_none() {
                    focal = Some(i);
                }
                let model = build_model(
                    section.value_model.as_ref().unwrap(),
                    reusable,
                    self.mechanism.k_max,
                )
                .map_err(|e| ConfigError::Invalid(format!("agent {i}: {e}")))?;
                let strategy = resolve_agent_strategy(&section.strategy, &model, reusable)
                    .map_err(|e| ConfigError::Invalid(format!("agent {i}: {e}")))?;
                ResolvedRole::Value { model, strategy }
            };
            agents.push(ResolvedAgent { share: shares[i], role });
        }
        Ok(ResolvedExperiment {
            mechanism,
            agents,
            focal: focal.expect("validated: at least one value agent"),
            horizon: self.mechanism.horizon,
            fingerprint: self.fingerprint(),
        })
    }
}

fn resolve_adversary(
    section: &StrategySection,
    shares: &[Rational],
    config: &ExperimentConfig,
) -> Result<AdversaryStrategy, ConfigError> {
    let focal_index = config
        .agents
        .iter()
        .position(|a| !a.strategy.is_adversary())
        .expect("validated");
    Ok(match section {
        StrategySection::GreedyBlocker { observe } => AdversaryStrategy::GreedyBlocker {
            observe: if observe == "wins_only" {
                Observe::WinsOnly
            } else {
                Observe::FullRequests
            },
        },
        StrategySection::WinTriggered { window } => match window {
            Some(w) => AdversaryStrategy::WinTriggered { window: *w },
            None => AdversaryStrategy::win_triggered_default(shares[focal_index]),
        },
        StrategySection::KmaxFlooder { duration } => {
            AdversaryStrategy::KmaxFlooder { duration: *duration }
        }
        StrategySection::Silent => AdversaryStrategy::Silent,
        _ => unreachable!("is_adversary gate"),
    })
}

fn resolve_agent_strategy(
    section: &StrategySection,
    model: &MarkovValueModel,
    reusable: bool,
) -> Result<AgentStrategy, String> {
    Ok(match section {
        StrategySection::BetaAggressive { beta } => {
            match steady_state_mixture(model).map_err(|e| e.to_string())? {
                Mixture::Values(dist) => {
                    if reusable {
                        return Err("reusable mode needs a demand distribution".into());
                    }
                    let policy = ideal_single(&dist, *beta).policy;
                    AgentStrategy::BetaAggressive { policy, demand_support: None }
                }
                Mixture::Demands(dist) => {
                    if !reusable {
                        return Err(
                            "demand distributions require the reusable mechanism".into()
                        );
                    }
                    let policy = ideal_multi(&dist, *beta).map_err(|e| e.to_string())?.policy;
                    AgentStrategy::BetaAggressive {
                        policy,
                        demand_support: Some(dist.support.clone()),
                    }
                }
            }
        }
        StrategySection::StateIndependent { beta } => {
            AgentStrategy::state_independent(model, *beta).map_err(|e| e.to_string())?
        }
        StrategySection::Always => AgentStrategy::Always,
        StrategySection::Never => AgentStrategy::Never,
        StrategySection::FixedThreshold { tau } => AgentStrategy::FixedThreshold { tau: *tau },
        _ => unreachable!("is_adversary gate"),
    })
}

fn build_dist(section: &DistSection) -> Result<ValueDistribution, String> {
    match section {
        DistSection::Bernoulli { p } => {
            ValueDistribution::bernoulli(*p).map_err(|e| e.to_string())
        }
        DistSection::Uniform { lo, hi } => {
            ValueDistribution::uniform(*lo, *hi).map_err(|e| e.to_string())
        }
        DistSection::Discrete { atoms } => {
            ValueDistribution::discrete(atoms.iter().map(|a| (a[0], a[1])).collect())
                .map_err(|e| e.to_string())
        }
        DistSection::Density { lo, hi, heights, bounds } => ValueDistribution::bounded_density(
            *lo,
            *hi,
            heights.clone(),
            bounds.map(|b| (b[0], b[1])),
        )
        .map_err(|e| e.to_string()),
        DistSection::Demand { .. } => Err("demand law where a value law is required".into()),
    }
}

fn build_demand(section: &DistSection, mech_k_max: Option<u32>) -> Result<DemandDistribution, String> {
    match section {
        DistSection::Demand { atoms, k_max } => {
            if let Some(mk) = mech_k_max {
                if *k_max > mk {
                    return Err(format!(
                        "distribution k_max {k_max} exceeds mechanism k_max {mk}"
                    ));
                }
            }
            DemandDistribution::new(
                atoms
                    .iter()
                    .map(|a| DemandAtom {
                        value: a[0],
                        duration: a[1] as u32,
                        prob: a[2],
                    })
                    .collect(),
                *k_max,
            )
            .map_err(|e| e.to_string())
        }
        _ => Err("reusable mode requires demand distributions".into()),
    }
}

fn build_model(
    section: &ModelSection,
    reusable: bool,
    mech_k_max: Option<u32>,
) -> Result<MarkovValueModel, String> {
    let (transition, dist_sections, start_state) = match section {
        ModelSection::Iid { distribution } => {
            (vec![vec![1.0]], vec![distribution.clone()], None)
        }
        ModelSection::Markov { transition, states, start_state } => (
            transition.clone(),
            states.iter().map(|s| s.distribution.clone()).collect(),
            *start_state,
        ),
    };
    let law = if reusable {
        StateLaw::Demands(
            dist_sections
                .iter()
                .map(|d| build_demand(d, mech_k_max))
                .collect::<Result<_, _>>()?,
        )
    } else {
        StateLaw::Values(
            dist_sections
                .iter()
                .map(build_dist)
                .collect::<Result<_, _>>()?,
        )
    };
    let initial = match start_state {
        Some(s) => InitialState::Fixed(s),
        None => InitialState::Stationary,
    };
    MarkovValueModel::new(transition, law, initial).map_err(|e| e.to_string())
}

/// Compact distribution spec used by the `ideal` subcommand:
///
/// - `bernoulli:<p>`
/// - `uniform:<lo>:<hi>`
/// - `discrete:<v>=<p>,<v>=<p>,...`
/// - `density:<lo>:<hi>:<h1>,<h2>,...`
/// - `demand:<v>x<k>=<p>,...` (k_max is the largest duration)
pub enum DistSpec {
    Value(ValueDistribution),
    Demand(DemandDistribution),
}

pub fn parse_dist_spec(spec: &str) -> Result<DistSpec, ConfigError> {
    let bad = |msg: String| ConfigError::Parse(msg);
    let (kind, rest) = spec
        .split_once(':')
        .ok_or_else(|| bad(format!("distribution spec needs kind:args, got {spec}")))?;
    let parse_f64 = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| bad(format!("bad number {s} in distribution spec")))
    };
    match kind {
        "bernoulli" => {
            let p = parse_f64(rest)?;
            ValueDistribution::bernoulli(p)
                .map(DistSpec::Value)
                .map_err(|e| bad(e.to_string()))
        }
        "uniform" => {
            let parts: Vec<&str> = rest.split(':').collect();
            if parts.len() != 2 {
                return Err(bad(format!("uniform needs lo:hi, got {rest}")));
            }
            ValueDistribution::uniform(parse_f64(parts[0])?, parse_f64(parts[1])?)
                .map(DistSpec::Value)
                .map_err(|e| bad(e.to_string()))
        }
        "discrete" => {
            let mut atoms = Vec::new();
            for pair in rest.split(',') {
                let (v, p) = pair
                    .split_once('=')
                    .ok_or_else(|| bad(format!("discrete atom needs v=p, got {pair}")))?;
                atoms.push((parse_f64(v)?, parse_f64(p)?));
            }
            ValueDistribution::discrete(atoms)
                .map(DistSpec::Value)
                .map_err(|e| bad(e.to_string()))
        }
        "density" => {
            let parts: Vec<&str> = rest.splitn(3, ':').collect();
            if parts.len() != 3 {
                return Err(bad(format!("density needs lo:hi:heights, got {rest}")));
            }
            let heights = parts[2]
                .split(',')
                .map(parse_f64)
                .collect::<Result<Vec<_>, _>>()?;
            ValueDistribution::bounded_density(
                parse_f64(parts[0])?,
                parse_f64(parts[1])?,
                heights,
                None,
            )
            .map(DistSpec::Value)
            .map_err(|e| bad(e.to_string()))
        }
        "demand" => {
            let mut atoms = Vec::new();
            for triple in rest.split(',') {
                let (vk, p) = triple
                    .split_once('=')
                    .ok_or_else(|| bad(format!("demand atom needs vxk=p, got {triple}")))?;
                let (v, k) = vk
                    .split_once('x')
                    .ok_or_else(|| bad(format!("demand atom needs vxk=p, got {triple}")))?;
                let k: u32 = k
                    .trim()
                    .parse()
                    .map_err(|_| bad(format!("bad duration {k}")))?;
                atoms.push(DemandAtom { value: parse_f64(v)?, duration: k, prob: parse_f64(p)? });
            }
            let k_max = atoms.iter().map(|a| a.duration).max().unwrap_or(1);
            DemandDistribution::new(atoms, k_max)
                .map(DistSpec::Demand)
                .map_err(|e| bad(e.to_string()))
        }
        other => Err(bad(format!("unknown distribution kind {other}"))),
    }
}

/// Parses a `start:step:end` inclusive grid.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, ConfigError> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(ConfigError::Parse(format!("grid needs start:step:end, got {spec}")));
    }
    let start: f64 = parts[0]
        .parse()
        .map_err(|_| ConfigError::Parse(format!("bad grid start {}", parts[0])))?;
    let step: f64 = parts[1]
        .parse()
        .map_err(|_| ConfigError::Parse(format!("bad grid step {}", parts[1])))?;
    let end: f64 = parts[2]
        .parse()
        .map_err(|_| ConfigError::Parse(format!("bad grid end {}", parts[2])))?;
    if step <= 0.0 || end < start {
        return Err(ConfigError::Parse(format!("empty grid {spec}")));
    }
    let mut grid = Vec::new();
    let mut i = 0u64;
    loop {
        let x = start + i as f64 * step;
        if x > end + step * 1e-9 {
            break;
        }
        grid.push(x.min(end));
        i += 1;
    }
    if grid.is_empty() {
        return Err(ConfigError::Parse(format!("empty grid {spec}")));
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
replications = 1
master_seed = 7

[mechanism]
mode = "single_round"
horizon = 100

[[agents]]
alpha = 0.25
[agents.strategy]
kind = "beta_aggressive"
beta = 0.25
[agents.value_model]
kind = "iid"
distribution = { kind = "uniform", lo = 0.0, hi = 1.0 }

[[agents]]
alpha = 0.75
[agents.strategy]
kind = "greedy_blocker"
observe = "full_requests"
"#;

    #[test]
    fn minimal_config_parses_and_resolves() {
        let cfg = ExperimentConfig::from_str(MINIMAL).unwrap();
        cfg.validate().unwrap();
        let exp = cfg.resolve().unwrap();
        assert_eq!(exp.agents.len(), 2);
        assert_eq!(exp.focal, 0);
        assert_eq!(exp.horizon, 100);
    }

    #[test]
    fn share_sum_enforced() {
        let text = MINIMAL.replace("alpha = 0.75", "alpha = 0.6");
        let cfg = ExperimentConfig::from_str(&text).unwrap();
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("sum to 1"), "{err}");
    }

    #[test]
    fn round_trip_dump() {
        let cfg = ExperimentConfig::from_str(MINIMAL).unwrap();
        let dumped = cfg.to_toml_string();
        let back = ExperimentConfig::from_str(&dumped).unwrap();
        assert_eq!(dumped, back.to_toml_string());
        assert_eq!(cfg.fingerprint(), back.fingerprint());
    }

    #[test]
    fn parse_errors_carry_location() {
        let err = ExperimentConfig::from_str("mechanism = 3\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line"), "{msg}");
    }

    #[test]
    fn reusable_requires_r_and_kmax() {
        let text = MINIMAL.replace("mode = \"single_round\"", "mode = \"reusable\"");
        let cfg = ExperimentConfig::from_str(&text).unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn dist_specs_parse() {
        assert!(matches!(
            parse_dist_spec("bernoulli:0.3").unwrap(),
            DistSpec::Value(ValueDistribution::Bernoulli { .. })
        ));
        assert!(matches!(
            parse_dist_spec("uniform:0:1").unwrap(),
            DistSpec::Value(ValueDistribution::Uniform { .. })
        ));
        match parse_dist_spec("discrete:1=0.25,0=0.75").unwrap() {
            DistSpec::Value(ValueDistribution::Discrete { atoms }) => {
                assert_eq!(atoms.len(), 2)
            }
            _ => panic!(),
        }
        match parse_dist_spec("demand:1x1=0.5,1x3=0.5").unwrap() {
            DistSpec::Demand(d) => assert_eq!(d.k_max, 3),
            _ => panic!(),
        }
        assert!(parse_dist_spec("nope:1").is_err());
    }

    #[test]
    fn grids_parse() {
        let g = parse_grid("0:0.05:1").unwrap();
        assert_eq!(g.len(), 21);
        assert!((g[20] - 1.0).abs() < 1e-12);
        assert!(parse_grid("1:0.1:0").is_err());
        assert!(parse_grid("0:-1:1").is_err());
        assert!(parse_grid("0:0.1").is_err());
    }
}
