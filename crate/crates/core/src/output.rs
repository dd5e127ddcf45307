//! Stable text output: trace CSV, ideal-utility curves, bound tables, and the
//! flat key = value summary.
//!
//! Floats are printed with 12 significant digits in scientific notation so
//! identical runs produce byte-identical files.

use crate::bounds::{BoundReport, ComparisonSide};
use crate::ideal::RequestPolicy;
use crate::sim::{ReplicationSummary, SimulationTrace};
use std::io::{self, Write};

/// 12-significant-digit float formatting.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        return "0.00000000000e0".to_string();
    }
    format!("{x:.11e}")
}

/// Trace CSV header, fixed column order.
pub const TRACE_HEADER: &str =
    "replication,t,agent_id,state,value,duration,requested,blocked,own_hold,won,utility,allocation";

/// Writes one trace's rows (all rounds, all agents) for replication `rep`.
pub fn write_trace_rows(
    w: &mut impl Write,
    rep: u32,
    trace: &SimulationTrace,
) -> io::Result<()> {
    for t in 1..=trace.horizon {
        for agent in 0..trace.num_agents {
            let r = trace.record(t, agent);
            writeln!(
                w,
                "{rep},{t},{agent},{},{},{},{},{},{},{},{},{}",
                r.state,
                fmt_f64(r.value),
                r.duration,
                r.requested as u8,
                r.blocked as u8,
                r.own_hold as u8,
                r.won as u8,
                fmt_f64(r.utility),
                r.allocation,
            )?;
        }
    }
    Ok(())
}

/// Full trace CSV with header for a sequence of replications.
pub fn write_trace_csv(w: &mut impl Write, traces: &[SimulationTrace]) -> io::Result<()> {
    writeln!(w, "{TRACE_HEADER}")?;
    for (rep, trace) in traces.iter().enumerate() {
        write_trace_rows(w, rep as u32, trace)?;
    }
    Ok(())
}

/// Ideal-utility curve CSV: `beta,v_star,threshold_or_policy`.
pub fn write_curve_csv(
    w: &mut impl Write,
    rows: &[(f64, f64, RequestPolicy)],
) -> io::Result<()> {
    writeln!(w, "beta,v_star,threshold_or_policy")?;
    for (beta, v, policy) in rows {
        let desc = match policy {
            RequestPolicy::SingleRound { threshold, atom_prob, .. } => {
                format!("tau={};atom={}", fmt_f64(*threshold), fmt_f64(*atom_prob))
            }
            RequestPolicy::MultiRound { request_probs, .. } => {
                let parts: Vec<String> = request_probs.iter().map(|r| fmt_f64(*r)).collect();
                format!("rho={}", parts.join("|"))
            }
        };
        writeln!(w, "{},{},{desc}", fmt_f64(*beta), fmt_f64(*v))?;
    }
    Ok(())
}

/// Bound table CSV: one row per evaluated (or inapplicable) bound.
pub fn write_bounds_csv(
    w: &mut impl Write,
    rows: &[(String, String, Result<f64, String>)],
) -> io::Result<()> {
    writeln!(w, "kind,params,coefficient,applicable,note")?;
    for (kind, params, result) in rows {
        match result {
            Ok(c) => writeln!(w, "{kind},{params},{},1,", fmt_f64(*c))?,
            Err(why) => writeln!(w, "{kind},{params},,0,{why}")?,
        }
    }
    Ok(())
}

/// Flat key = value summary. Keys per agent `i`:
/// `agent<i>_util_mean`, `agent<i>_util_se` (per-round utility),
/// `agent<i>_wins_mean`, `agent<i>_blk_mean`, and per requested bound kind
/// `agent<i>_bound_<kind>_coeff` / `agent<i>_bound_<kind>_ratio`
/// (ratio = empirical per-round utility / (coeff * v*)).
pub fn write_summary(
    w: &mut impl Write,
    summary: &ReplicationSummary,
    bound_reports: &[(usize, BoundReport)],
    fingerprint: u64,
) -> io::Result<()> {
    writeln!(w, "replications={}", summary.replications)?;
    writeln!(w, "horizon={}", summary.horizon)?;
    writeln!(w, "config_fingerprint={fingerprint:016x}")?;
    writeln!(w, "invariant_violations={}", summary.invariant_violations)?;
    for (i, stats) in summary.per_agent.iter().enumerate() {
        writeln!(w, "agent{i}_util_mean={}", fmt_f64(summary.per_round_utility(i)))?;
        writeln!(w, "agent{i}_util_se={}", fmt_f64(summary.per_round_se(i)))?;
        writeln!(w, "agent{i}_wins_mean={}", fmt_f64(stats.wins_mean))?;
        writeln!(w, "agent{i}_blk_mean={}", fmt_f64(stats.blocked_mean))?;
    }
    for (agent, report) in bound_reports {
        let name = report.kind.name();
        writeln!(
            w,
            "agent{agent}_bound_{name}_coeff={}",
            fmt_f64(report.coefficient)
        )?;
        writeln!(w, "agent{agent}_bound_{name}_v_star={}", fmt_f64(report.v_star))?;
        let reference = report.coefficient * report.v_star;
        let ratio = if reference > 0.0 {
            summary.per_round_utility(*agent) / reference
        } else {
            f64::INFINITY
        };
        writeln!(w, "agent{agent}_bound_{name}_ratio={}", fmt_f64(ratio))?;
        let side = match report.side {
            ComparisonSide::LowerGuarantee => "lower_guarantee",
            ComparisonSide::UpperImpossibility => "upper_impossibility",
        };
        writeln!(w, "agent{agent}_bound_{name}_side={side}")?;
        writeln!(
            w,
            "agent{agent}_bound_{name}_additive={}",
            report.additive_order.label()
        )?;
    }
    Ok(())
}
