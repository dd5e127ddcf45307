//! Command-line front end.
//!
//! Exit codes: 0 success, 2 config/parse error, 3 pathwise invariant violation
//! (a mechanism bug).

use clap::{Args, Parser, Subcommand};
use dmmf::bounds::{self, BoundInputs, BoundKind, BoundReport};
use dmmf::config::{parse_dist_spec, parse_grid, DistSpec, ExperimentConfig};
use dmmf::ideal::{self, verify_concavity};
use dmmf::mechanism::Mode;
use dmmf::output;
use dmmf::sim::{run_replications, ResolvedExperiment, ResolvedRole};
use dmmf::strategy::AgentStrategy;
use dmmf::value_model::{steady_state_mixture, Mixture};
use serde::Deserialize;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "dmmf", about = "Dynamic max-min fair allocation: simulation and analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOpts {
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Replication count override.
    #[arg(long)]
    reps: Option<u32>,
    /// Worker threads (default: all cores). Output is identical either way.
    #[arg(long)]
    jobs: Option<usize>,
    /// Directory prefix for relative output paths.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config: replications, summary, optional trace CSV.
    Simulate {
        config: PathBuf,
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Ideal-utility curve for a distribution spec over a beta grid.
    Ideal {
        /// e.g. bernoulli:0.3, uniform:0:1, discrete:1=0.25,0=0.75,
        /// demand:1x1=0.5,1x3=0.5
        spec: String,
        /// start:step:end (inclusive)
        #[arg(long)]
        grid: String,
        /// Output CSV path (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Atom count for the discretized cross-check column.
        #[arg(long, default_value_t = 10_000)]
        discretize: usize,
    },
    /// Evaluate bound coefficients over parameter grids from a TOML file.
    Bounds {
        params: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Parse, validate, and re-emit a config in canonical form.
    ConfigDump { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { config, opts } => cmd_simulate(&config, &opts),
        Command::Ideal { spec, grid, out, out_dir, discretize } => {
            cmd_ideal(&spec, &grid, out.as_deref(), out_dir.as_deref(), discretize)
        }
        Command::Bounds { params, out, out_dir } => {
            cmd_bounds(&params, out.as_deref(), out_dir.as_deref())
        }
        Command::ConfigDump { config } => cmd_config_dump(&config),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn resolve_out(path: &str, out_dir: Option<&Path>) -> PathBuf {
    let p = PathBuf::from(path);
    match out_dir {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p,
    }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), String> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .map_err(|e| format!("cannot create {}: {e}", parent.display()))?;
        }
    }
    fs::write(path, contents).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn cmd_simulate(config_path: &Path, opts: &CommonOpts) -> Result<ExitCode, String> {
    let mut config = ExperimentConfig::from_path(config_path).map_err(|e| e.to_string())?;
    if let Some(seed) = opts.seed {
        config.master_seed = seed;
    }
    if let Some(reps) = opts.reps {
        config.replications = reps;
    }
    config.validate().map_err(|e| e.to_string())?;
    let exp = config.resolve().map_err(|e| e.to_string())?;
    let keep_traces = config.outputs.trace_path.is_some();
    let (summary, traces) = run_replications(
        &exp,
        config.replications,
        config.master_seed,
        opts.jobs,
        keep_traces,
    )
    .map_err(|e| e.to_string())?;

    let mut reports: Vec<(usize, BoundReport)> = Vec::new();
    for kind_name in &config.bound_checks {
        let kind = BoundKind::parse(kind_name)
            .ok_or_else(|| format!("unknown bound kind {kind_name}"))?;
        match bound_report_for(&exp, &config, kind) {
            Ok(report) => reports.push((exp.focal, report)),
            Err(why) => eprintln!("bound {kind_name} inapplicable: {why}"),
        }
    }

    let mut summary_text = Vec::new();
    output::write_summary(&mut summary_text, &summary, &reports, exp.fingerprint)
        .map_err(|e| e.to_string())?;
    print!("{}", String::from_utf8_lossy(&summary_text));
    std::io::stdout().flush().ok();

    if let Some(path) = &config.outputs.summary_path {
        write_file(&resolve_out(path, opts.out_dir.as_deref()), &summary_text)?;
    }
    if let Some(path) = &config.outputs.trace_path {
        let mut csv = Vec::new();
        output::write_trace_csv(&mut csv, &traces).map_err(|e| e.to_string())?;
        write_file(&resolve_out(path, opts.out_dir.as_deref()), &csv)?;
    }
    if let Some(path) = &config.outputs.curve_path {
        // Ideal-utility curve of the focal agent's steady-state mixture.
        let ResolvedRole::Value { model, .. } = &exp.agents[exp.focal].role else {
            return Err("focal agent is not a value agent".into());
        };
        let mut rows = Vec::new();
        for i in 0..=20 {
            let beta = i as f64 / 20.0;
            let (value, policy) = match steady_state_mixture(model).map_err(|e| e.to_string())? {
                Mixture::Values(dist) => {
                    let r = ideal::ideal_single(&dist, beta);
                    (r.value, r.policy)
                }
                Mixture::Demands(dist) => {
                    let r = ideal::ideal_multi(&dist, beta).map_err(|e| e.to_string())?;
                    (r.value, r.policy)
                }
            };
            rows.push((beta, value, policy));
        }
        let mut csv = Vec::new();
        output::write_curve_csv(&mut csv, &rows).map_err(|e| e.to_string())?;
        write_file(&resolve_out(path, opts.out_dir.as_deref()), &csv)?;
    }
    if summary.invariant_violations > 0 {
        eprintln!(
            "invariant violations detected: {} (mechanism bug)",
            summary.invariant_violations
        );
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}

/// Assembles the focal agent's bound inputs from the experiment itself.
fn bound_report_for(
    exp: &ResolvedExperiment,
    config: &ExperimentConfig,
    kind: BoundKind,
) -> Result<BoundReport, String> {
    let focal = exp.focal;
    let ResolvedRole::Value { model, strategy } = &exp.agents[focal].role else {
        return Err("focal agent is not a value agent".into());
    };
    let alpha = exp.agents[focal].share.as_f64();
    let profile = model.profile();
    let beta = match strategy {
        AgentStrategy::BetaAggressive { policy, .. } => Some(policy.beta()),
        AgentStrategy::StateIndependent { .. } => match &config.agents[focal].strategy {
            dmmf::config::StrategySection::StateIndependent { beta } => Some(*beta),
            _ => None,
        },
        _ => None,
    };
    let (r, k_max) = match exp.mode() {
        Mode::Reusable { r, k_max, .. } => (Some(r.as_f64()), Some(k_max)),
        Mode::SingleRound => (None, None),
    };
    // v* evaluated on the steady-state mixture at the budget the bound refers to.
    let v_star_at = |b: f64| -> Result<f64, String> {
        match steady_state_mixture(model).map_err(|e| e.to_string())? {
            Mixture::Values(dist) => Ok(ideal::ideal_single(&dist, b).value),
            Mixture::Demands(dist) => {
                Ok(ideal::ideal_multi(&dist, b).map_err(|e| e.to_string())?.value)
            }
        }
    };
    let p = match steady_state_mixture(model).map_err(|e| e.to_string())? {
        Mixture::Values(dmmf::value_model::ValueDistribution::Bernoulli { p }) => Some(p),
        _ => None,
    };
    let (lambda1, lambda2) = match steady_state_mixture(model).map_err(|e| e.to_string())? {
        Mixture::Values(dmmf::value_model::ValueDistribution::Uniform { lo, hi }) => {
            let h = 1.0 / (hi - lo);
            (Some(h), Some(h))
        }
        Mixture::Values(dmmf::value_model::ValueDistribution::BoundedDensity {
            declared_bounds,
            ..
        }) => match declared_bounds {
            Some((l1, l2)) => (Some(l1), Some(l2)),
            None => (None, None),
        },
        _ => (None, None),
    };
    let sigma = beta.and_then(|b| ideal::sigma_of_beta(model, b).ok());
    let inputs = BoundInputs {
        alpha: Some(alpha),
        beta,
        gamma: Some(profile.gamma),
        r,
        p,
        lambda1,
        lambda2,
        k_max,
        min_pi: Some(profile.min_pi),
        sigma,
        n: Some(exp.agents.len() as u32),
    };
    // Guarantees stated against the ideal utility use v*(alpha); the general,
    // state-independent-sigma, and reusable bounds are stated against v*(beta).
    let reference_beta = match kind {
        BoundKind::General
        | BoundKind::StateIndependentSigma
        | BoundKind::Reusable
        | BoundKind::ReusableTuned
        | BoundKind::FloodingImpossibility => beta.unwrap_or(alpha),
        _ => alpha,
    };
    let v_star = v_star_at(reference_beta)?;
    bounds::evaluate_bound(kind, inputs, v_star).map_err(|e| e.to_string())
}

fn cmd_ideal(
    spec: &str,
    grid_spec: &str,
    out: Option<&Path>,
    out_dir: Option<&Path>,
    discretize: usize,
) -> Result<ExitCode, String> {
    let grid = parse_grid(grid_spec).map_err(|e| e.to_string())?;
    let dist = parse_dist_spec(spec).map_err(|e| e.to_string())?;
    let mut rows = Vec::with_capacity(grid.len());
    let mut curve = Vec::with_capacity(grid.len());
    match &dist {
        DistSpec::Value(d) => {
            for &beta in &grid {
                let r = ideal::ideal_single(d, beta);
                curve.push((beta, r.value));
                rows.push((beta, r.value, r.policy));
            }
            if d.is_atomless() {
                // Discretized cross-check, reported to stderr.
                let disc = d.discretize(discretize);
                let worst = grid
                    .iter()
                    .map(|&b| (ideal::ideal_single(&disc, b).value
                        - ideal::ideal_single(d, b).value)
                        .abs())
                    .fold(0.0, f64::max);
                eprintln!("discretized-path max deviation: {}", output::fmt_f64(worst));
            }
        }
        DistSpec::Demand(d) => {
            for &beta in &grid {
                let r = ideal::ideal_multi(d, beta).map_err(|e| e.to_string())?;
                curve.push((beta, r.value));
                rows.push((beta, r.value, r.policy));
            }
        }
    }
    let report = verify_concavity(&curve);
    eprintln!(
        "worst concavity violation: {}; worst monotonicity violation: {}",
        output::fmt_f64(report.worst_concavity_violation),
        output::fmt_f64(report.worst_monotonicity_violation)
    );
    let mut csv = Vec::new();
    output::write_curve_csv(&mut csv, &rows).map_err(|e| e.to_string())?;
    match out {
        Some(path) => {
            let path = resolve_out(path.to_str().unwrap_or_default(), out_dir);
            write_file(&path, &csv)?;
        }
        None => print!("{}", String::from_utf8_lossy(&csv)),
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Deserialize)]
struct BoundParamsFile {
    checks: Vec<BoundCheckSection>,
}

#[derive(Debug, Deserialize)]
struct BoundCheckSection {
    kind: String,
    #[serde(default)]
    alpha: Vec<f64>,
    #[serde(default)]
    beta: Vec<f64>,
    #[serde(default)]
    gamma: Vec<f64>,
    #[serde(default)]
    r: Vec<f64>,
    #[serde(default)]
    p: Vec<f64>,
    #[serde(default)]
    lambda1: Vec<f64>,
    #[serde(default)]
    lambda2: Vec<f64>,
    #[serde(default)]
    k_max: Vec<u32>,
    #[serde(default)]
    min_pi: Vec<f64>,
    #[serde(default)]
    sigma: Vec<f64>,
    #[serde(default)]
    n: Vec<u32>,
}

fn cmd_bounds(
    params_path: &Path,
    out: Option<&Path>,
    out_dir: Option<&Path>,
) -> Result<ExitCode, String> {
    let text = fs::read_to_string(params_path)
        .map_err(|e| format!("cannot read {}: {e}", params_path.display()))?;
    let params: BoundParamsFile =
        toml::from_str(&text).map_err(|e| format!("parse error: {e}"))?;
    let mut rows: Vec<(String, String, Result<f64, String>)> = Vec::new();
    for check in &params.checks {
        let kind = BoundKind::parse(&check.kind)
            .ok_or_else(|| format!("unknown bound kind {}", check.kind))?;
        // Cartesian product over all supplied parameter grids (odometer walk;
        // empty grids contribute a single None).
        let floats: [(&str, &[f64]); 9] = [
            ("alpha", &check.alpha),
            ("beta", &check.beta),
            ("gamma", &check.gamma),
            ("r", &check.r),
            ("p", &check.p),
            ("lambda1", &check.lambda1),
            ("lambda2", &check.lambda2),
            ("min_pi", &check.min_pi),
            ("sigma", &check.sigma),
        ];
        let ints: [(&str, &[u32]); 2] = [("k_max", &check.k_max), ("n", &check.n)];
        let dims: Vec<usize> = floats
            .iter()
            .map(|(_, v)| v.len().max(1))
            .chain(ints.iter().map(|(_, v)| v.len().max(1)))
            .collect();
        let mut idx = vec![0usize; dims.len()];
        loop {
            let pick = |j: usize| -> Option<f64> { floats[j].1.get(idx[j]).copied() };
            let pick_u = |j: usize| -> Option<u32> { ints[j].1.get(idx[9 + j]).copied() };
            let inputs = BoundInputs {
                alpha: pick(0),
                beta: pick(1),
                gamma: pick(2),
                r: pick(3),
                p: pick(4),
                lambda1: pick(5),
                lambda2: pick(6),
                min_pi: pick(7),
                sigma: pick(8),
                k_max: pick_u(0),
                n: pick_u(1),
            };
            let mut desc: Vec<String> = Vec::new();
            for (j, (name, _)) in floats.iter().enumerate() {
                if let Some(x) = pick(j) {
                    desc.push(format!("{name}={x}"));
                }
            }
            for (j, (name, _)) in ints.iter().enumerate() {
                if let Some(x) = pick_u(j) {
                    desc.push(format!("{name}={x}"));
                }
            }
            let result = bounds::evaluate_bound(kind, inputs, 1.0)
                .map(|rep| rep.coefficient)
                .map_err(|e| e.to_string());
            rows.push((check.kind.clone(), desc.join(";"), result));

            let mut d = 0;
            loop {
                idx[d] += 1;
                if idx[d] < dims[d] {
                    break;
                }
                idx[d] = 0;
                d += 1;
                if d == dims.len() {
                    break;
                }
            }
            if d == dims.len() {
                break;
            }
        }
    }
    let mut csv = Vec::new();
    output::write_bounds_csv(&mut csv, &rows).map_err(|e| e.to_string())?;
    match out {
        Some(path) => {
            let path = resolve_out(path.to_str().unwrap_or_default(), out_dir);
            write_file(&path, &csv)?;
        }
        None => print!("{}", String::from_utf8_lossy(&csv)),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_config_dump(config_path: &Path) -> Result<ExitCode, String> {
    let config = ExperimentConfig::from_path(config_path).map_err(|e| e.to_string())?;
    config.validate().map_err(|e| e.to_string())?;
    print!("{}", config.to_toml_string());
    Ok(ExitCode::SUCCESS)
}
