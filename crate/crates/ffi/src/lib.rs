//! C ABI for the dmmf toolkit.
//!
//! Conventions:
//! - every fallible function returns a status code (`DMMF_OK` = 0); outputs go
//!   through pointers,
//! - handles are opaque; free them with the matching `*_free`,
//! - the last error message is thread-local, fetched with
//!   [`dmmf_last_error`].

use dmmf::bounds;
use dmmf::config::{parse_dist_spec, DistSpec, ExperimentConfig};
use dmmf::ideal;
use dmmf::sim::{run_replications, ReplicationSummary};
use libc::{c_char, c_double, c_int, size_t};
use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::ptr;

pub const DMMF_OK: c_int = 0;
pub const DMMF_ERR_INVALID_ARGUMENT: c_int = 1;
pub const DMMF_ERR_PARSE: c_int = 2;
pub const DMMF_ERR_RUN: c_int = 3;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(sanitized).unwrap());
}

/// Copies the last error message on this thread into `buf` (NUL-terminated,
/// truncated to `cap`). Returns the full message length.
///
/// # Safety
/// `buf` must point to at least `cap` writable bytes, or be null.
#[no_mangle]
pub unsafe extern "C" fn dmmf_last_error(buf: *mut c_char, cap: size_t) -> size_t {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap);
            ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            // Ensure termination even when truncated.
            *buf.add(n - 1) = 0;
        }
        bytes.len() - 1
    })
}

unsafe fn cstr<'a>(ptr: *const c_char) -> Result<&'a str, c_int> {
    if ptr.is_null() {
        set_error("null string argument");
        return Err(DMMF_ERR_INVALID_ARGUMENT);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("string argument is not UTF-8");
        DMMF_ERR_INVALID_ARGUMENT
    })
}

fn write_out(out: *mut c_double, value: f64) -> c_int {
    if out.is_null() {
        set_error("null output pointer");
        return DMMF_ERR_INVALID_ARGUMENT;
    }
    unsafe { *out = value };
    DMMF_OK
}

// ---------------------------------------------------------------------------
// Bound formulas (pure).
// ---------------------------------------------------------------------------

/// General robustness guarantee coefficient (clamped at zero).
#[no_mangle]
pub extern "C" fn dmmf_guarantee_general(
    alpha: c_double,
    beta: c_double,
    gamma: c_double,
    out: *mut c_double,
) -> c_int {
    write_out(out, bounds::guarantee_general(alpha, beta, gamma))
}

/// Reusable-resource guarantee `min{alpha/(beta r), 1 - (1-alpha)/r}`.
#[no_mangle]
pub extern "C" fn dmmf_guarantee_mult(
    alpha: c_double,
    beta: c_double,
    r: c_double,
    out: *mut c_double,
) -> c_int {
    match bounds::guarantee_mult(alpha, beta, r) {
        Ok(c) => write_out(out, c),
        Err(e) => {
            set_error(&e.to_string());
            DMMF_ERR_INVALID_ARGUMENT
        }
    }
}

/// Tuned cap parameter and its coefficient.
#[no_mangle]
pub extern "C" fn dmmf_tuned_r(
    alpha: c_double,
    beta: c_double,
    out_r: *mut c_double,
    out_coeff: *mut c_double,
) -> c_int {
    let (r, c) = bounds::tuned_r(alpha, beta);
    let rc = write_out(out_r, r);
    if rc != DMMF_OK {
        return rc;
    }
    write_out(out_coeff, c)
}

/// Correlated-values impossibility coefficient.
#[no_mangle]
pub extern "C" fn dmmf_impossibility_markov(
    alpha: c_double,
    gamma: c_double,
    out: *mut c_double,
) -> c_int {
    write_out(out, bounds::impossibility_markov(alpha, gamma))
}

/// Reusable-resource impossibility: full utility upper bound.
#[no_mangle]
pub extern "C" fn dmmf_impossibility_mult(
    alpha: c_double,
    r: c_double,
    k_max: u32,
    v_star_beta: c_double,
    horizon: u64,
    out: *mut c_double,
) -> c_int {
    write_out(out, bounds::impossibility_mult(alpha, r, k_max, v_star_beta, horizon))
}

// ---------------------------------------------------------------------------
// Ideal utility over distribution specs.
// ---------------------------------------------------------------------------

/// Opaque parsed distribution.
pub struct DmmfDist {
    spec: DistSpec,
}

/// Parses a distribution spec string (same grammar as the CLI `ideal`
/// subcommand) into an opaque handle.
///
/// # Safety
/// `spec` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dmmf_dist_parse(
    spec: *const c_char,
    out: *mut *mut DmmfDist,
) -> c_int {
    let spec = match cstr(spec) {
        Ok(s) => s,
        Err(code) => return code,
    };
    if out.is_null() {
        set_error("null output pointer");
        return DMMF_ERR_INVALID_ARGUMENT;
    }
    match parse_dist_spec(spec) {
        Ok(parsed) => {
            *out = Box::into_raw(Box::new(DmmfDist { spec: parsed }));
            DMMF_OK
        }
        Err(e) => {
            set_error(&e.to_string());
            DMMF_ERR_PARSE
        }
    }
}

/// Frees a distribution handle.
///
/// # Safety
/// `dist` must come from [`dmmf_dist_parse`] (or be null).
#[no_mangle]
pub unsafe extern "C" fn dmmf_dist_free(dist: *mut DmmfDist) {
    if !dist.is_null() {
        drop(Box::from_raw(dist));
    }
}

/// Ideal utility `v*(beta)` of a parsed distribution. For single-round value
/// laws, also reports the optimal threshold policy through `out_threshold` /
/// `out_atom_prob` (both may be null); for demand laws those outputs are NaN.
///
/// # Safety
/// `dist` must be a live handle from [`dmmf_dist_parse`].
#[no_mangle]
pub unsafe extern "C" fn dmmf_ideal(
    dist: *const DmmfDist,
    beta: c_double,
    out_value: *mut c_double,
    out_threshold: *mut c_double,
    out_atom_prob: *mut c_double,
) -> c_int {
    if dist.is_null() {
        set_error("null distribution handle");
        return DMMF_ERR_INVALID_ARGUMENT;
    }
    let handle = &*dist;
    let (value, threshold, atom) = match &handle.spec {
        DistSpec::Value(d) => {
            let r = ideal::ideal_single(d, beta);
            match r.policy {
                ideal::RequestPolicy::SingleRound { threshold, atom_prob, .. } => {
                    (r.value, threshold, atom_prob)
                }
                _ => (r.value, f64::NAN, f64::NAN),
            }
        }
        DistSpec::Demand(d) => match ideal::ideal_multi(d, beta) {
            Ok(r) => (r.value, f64::NAN, f64::NAN),
            Err(e) => {
                set_error(&e.to_string());
                return DMMF_ERR_RUN;
            }
        },
    };
    if !out_threshold.is_null() {
        *out_threshold = threshold;
    }
    if !out_atom_prob.is_null() {
        *out_atom_prob = atom;
    }
    write_out(out_value, value)
}

// ---------------------------------------------------------------------------
// Simulation from a TOML config.
// ---------------------------------------------------------------------------

/// Opaque replication summary.
pub struct DmmfSummary {
    summary: ReplicationSummary,
}

/// Runs an experiment described by TOML text and returns a summary handle.
/// `seed_override < 0` keeps the config's master seed; `reps_override == 0`
/// keeps the config's replication count; `jobs == 0` uses all cores.
///
/// # Safety
/// `config_toml` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dmmf_run_simulation(
    config_toml: *const c_char,
    seed_override: i64,
    reps_override: u32,
    jobs: u32,
    out: *mut *mut DmmfSummary,
) -> c_int {
    let text = match cstr(config_toml) {
        Ok(s) => s,
        Err(code) => return code,
    };
    if out.is_null() {
        set_error("null output pointer");
        return DMMF_ERR_INVALID_ARGUMENT;
    }
    let mut config = match ExperimentConfig::from_str(text) {
        Ok(c) => c,
        Err(e) => {
            set_error(&e.to_string());
            return DMMF_ERR_PARSE;
        }
    };
    if seed_override >= 0 {
        config.master_seed = seed_override as u64;
    }
    if reps_override > 0 {
        config.replications = reps_override;
    }
    let exp = match config.resolve() {
        Ok(e) => e,
        Err(e) => {
            set_error(&e.to_string());
            return DMMF_ERR_PARSE;
        }
    };
    let jobs = if jobs == 0 { None } else { Some(jobs as usize) };
    match run_replications(&exp, config.replications, config.master_seed, jobs, false) {
        Ok((summary, _)) => {
            *out = Box::into_raw(Box::new(DmmfSummary { summary }));
            DMMF_OK
        }
        Err(e) => {
            set_error(&e.to_string());
            DMMF_ERR_RUN
        }
    }
}

/// Frees a summary handle.
///
/// # Safety
/// `summary` must come from [`dmmf_run_simulation`] (or be null).
#[no_mangle]
pub unsafe extern "C" fn dmmf_summary_free(summary: *mut DmmfSummary) {
    if !summary.is_null() {
        drop(Box::from_raw(summary));
    }
}

/// Number of agents in a summary.
///
/// # Safety
/// `summary` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn dmmf_summary_num_agents(summary: *const DmmfSummary) -> size_t {
    if summary.is_null() {
        return 0;
    }
    (*summary).summary.per_agent.len()
}

/// Pathwise invariant violations across all replications (must be zero).
///
/// # Safety
/// `summary` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn dmmf_summary_violations(summary: *const DmmfSummary) -> u64 {
    if summary.is_null() {
        return u64::MAX;
    }
    (*summary).summary.invariant_violations
}

/// Per-agent statistic selector for [`dmmf_summary_stat`].
#[repr(C)]
pub enum DmmfStat {
    /// Mean per-round utility.
    UtilMean = 0,
    /// Standard error of the per-round utility mean.
    UtilSe = 1,
    /// Mean win count.
    WinsMean = 2,
    /// Mean blocked-round count.
    BlockedMean = 3,
}

/// Reads one per-agent statistic from a summary.
///
/// # Safety
/// `summary` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dmmf_summary_stat(
    summary: *const DmmfSummary,
    agent: size_t,
    stat: DmmfStat,
    out: *mut c_double,
) -> c_int {
    if summary.is_null() {
        set_error("null summary handle");
        return DMMF_ERR_INVALID_ARGUMENT;
    }
    let s = &(*summary).summary;
    if agent >= s.per_agent.len() {
        set_error("agent index out of range");
        return DMMF_ERR_INVALID_ARGUMENT;
    }
    let value = match stat {
        DmmfStat::UtilMean => s.per_round_utility(agent),
        DmmfStat::UtilSe => s.per_round_se(agent),
        DmmfStat::WinsMean => s.per_agent[agent].wins_mean,
        DmmfStat::BlockedMean => s.per_agent[agent].blocked_mean,
    };
    write_out(out, value)
}
