//! C ABI over `snaipw`.
//!
//! Logs and plans cross the boundary as opaque handles created by
//! `snaipw_*_new`/`snaipw_*_load` and released by the matching `_free`.
//! Every fallible call returns a [`SnaipwStatus`]; on failure the message is
//! available from [`snaipw_last_error`] on the same thread until the next
//! call.
#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use snaipw::audit::{contract_report, Status};
use snaipw::experiment_log::LogFormat;
use snaipw::nuisance::{fit_forward, fit_leaky_full, zero_nuisance, FitLedger, LearnerConfig, NuisanceFitSet, NuisanceMode};
use snaipw::{
    fixed_v_interval, load_log, make_burnin_plan, make_forward_plan, score_series, sn_interval, Critical, ExperimentLog,
    ForwardPlan, InferenceReport, UnitRecord,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnaipwStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    InvalidLog = 4,
    FitFailed = 5,
    InferenceFailed = 6,
    ContractFailed = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnaipwCritical {
    Z = 0,
    T = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnaipwNuisance {
    /// Forward cross-fitted linear regressions.
    Forward = 0,
    /// Zero regression, i.e. IPW.
    Zero = 1,
    /// Single fit on all units. Breaks predictability.
    LeakyFull = 2,
}

/// Per-check result: 0 pass, 1 warn, 2 fail.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SnaipwContract {
    pub propensity_calibration: i32,
    pub executed_overlap: i32,
    pub scored_set: i32,
    pub predictability: i32,
    pub fixed_horizon: i32,
    pub any_fail: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SnaipwInterval {
    pub theta_hat: f64,
    pub v_hat: f64,
    pub se_hat: f64,
    pub n_eff: usize,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub critical_value: f64,
    /// Set when every score is equal and `v_hat` is zero.
    pub degenerate: bool,
}

impl From<&InferenceReport> for SnaipwInterval {
    fn from(r: &InferenceReport) -> Self {
        Self {
            theta_hat: r.theta_hat,
            v_hat: r.v_hat,
            se_hat: r.se_hat,
            n_eff: r.n_eff,
            ci_lo: r.ci_lo,
            ci_hi: r.ci_hi,
            critical_value: r.critical_value,
            degenerate: r.degenerate,
        }
    }
}

/// Opaque experiment log.
pub struct SnaipwLog(ExperimentLog);

/// Opaque blocking plan.
pub struct SnaipwPlan(ForwardPlan);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

type Fallible = Result<(), (SnaipwStatus, String)>;

fn guard(f: impl FnOnce() -> Fallible) -> SnaipwStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SnaipwStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            SnaipwStatus::Panic
        }
    }
}

fn null() -> (SnaipwStatus, String) {
    (SnaipwStatus::NullPointer, "null pointer argument".into())
}

unsafe fn slice<'a, T>(p: *const T, len: usize) -> Result<&'a [T], (SnaipwStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null());
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Message for the last failed call on this thread, or NULL. Valid until the
/// next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn snaipw_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn snaipw_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// AIPW score of one unit.
#[no_mangle]
pub extern "C" fn snaipw_aipw_score(a: u8, y: f64, pi: f64, m0: f64, m1: f64) -> f64 {
    snaipw::aipw_score(a, y, pi, m0, m1)
}

/// Builds a log from column arrays. `x` is row-major `n × p` and may be NULL
/// when `p == 0`. Arrival indices are `1..n` in array order.
#[no_mangle]
pub unsafe extern "C" fn snaipw_log_new(
    n: usize,
    p: usize,
    x: *const f64,
    a: *const u8,
    y: *const f64,
    pi: *const f64,
    out: *mut *mut SnaipwLog,
) -> SnaipwStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let len = n.checked_mul(p).ok_or((SnaipwStatus::InvalidArgument, "n * p overflows".into()))?;
        let (x, a, y, pi) = (slice(x, len)?, slice(a, n)?, slice(y, n)?, slice(pi, n)?);
        let records = (0..n)
            .map(|i| UnitRecord {
                t: i + 1,
                x: x[i * p..(i + 1) * p].to_vec(),
                a: a[i],
                y: y[i],
                pi: pi[i],
            })
            .collect();
        let log = ExperimentLog::with_dimension(records, p).map_err(|e| (SnaipwStatus::InvalidLog, e.to_string()))?;
        *out = Box::into_raw(Box::new(SnaipwLog(log)));
        Ok(())
    })
}

/// Reads a JSONL or CSV log; the format follows the file extension.
#[no_mangle]
pub unsafe extern "C" fn snaipw_log_load(path: *const c_char, out: *mut *mut SnaipwLog) -> SnaipwStatus {
    guard(|| {
        if path.is_null() || out.is_null() {
            return Err(null());
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| (SnaipwStatus::InvalidArgument, "path is not UTF-8".into()))?;
        let path = Path::new(path);
        let log = load_log(path, LogFormat::from_path(path)).map_err(|e| {
            let status = match e {
                snaipw::error::LogError::Io { .. } => SnaipwStatus::Io,
                _ => SnaipwStatus::InvalidLog,
            };
            (status, e.to_string())
        })?;
        *out = Box::into_raw(Box::new(SnaipwLog(log)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn snaipw_log_free(log: *mut SnaipwLog) {
    if !log.is_null() {
        drop(Box::from_raw(log));
    }
}

/// Number of units, or 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn snaipw_log_len(log: *const SnaipwLog) -> usize {
    log.as_ref().map_or(0, |l| l.0.len())
}

unsafe fn new_plan(
    out: *mut *mut SnaipwPlan,
    make: impl FnOnce() -> Result<ForwardPlan, snaipw::error::LogError>,
) -> SnaipwStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let plan = make().map_err(|e| (SnaipwStatus::InvalidArgument, e.to_string()))?;
        *out = Box::into_raw(Box::new(SnaipwPlan(plan)));
        Ok(())
    })
}

/// `k` near-equal contiguous blocks; the first block is never scored.
#[no_mangle]
pub unsafe extern "C" fn snaipw_plan_forward(n: usize, k: usize, out: *mut *mut SnaipwPlan) -> SnaipwStatus {
    new_plan(out, || make_forward_plan(n, k))
}

/// Burn-in of `n0` units followed by one scored block.
#[no_mangle]
pub unsafe extern "C" fn snaipw_plan_burnin(n: usize, n0: usize, out: *mut *mut SnaipwPlan) -> SnaipwStatus {
    new_plan(out, || make_burnin_plan(n, n0))
}

/// Every unit scored; only meaningful with fixed nuisances.
#[no_mangle]
pub unsafe extern "C" fn snaipw_plan_all(n: usize, out: *mut *mut SnaipwPlan) -> SnaipwStatus {
    new_plan(out, || ForwardPlan::all_scored(n))
}

#[no_mangle]
pub unsafe extern "C" fn snaipw_plan_free(plan: *mut SnaipwPlan) {
    if !plan.is_null() {
        drop(Box::from_raw(plan));
    }
}

/// Size of the scored set, or 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn snaipw_plan_n_eff(plan: *const SnaipwPlan) -> usize {
    plan.as_ref().map_or(0, |p| p.0.n_eff())
}

fn critical(c: SnaipwCritical) -> Critical {
    match c {
        SnaipwCritical::Z => Critical::Z,
        SnaipwCritical::T => Critical::T,
    }
}

fn report_out(
    out: *mut SnaipwInterval,
    report: Result<InferenceReport, snaipw::error::InferenceError>,
) -> Fallible {
    let report = report.map_err(|e| (SnaipwStatus::InferenceFailed, e.to_string()))?;
    unsafe { *out = SnaipwInterval::from(&report) };
    Ok(())
}

/// Self-normalized interval from precomputed scores.
#[no_mangle]
pub unsafe extern "C" fn snaipw_sn_interval(
    scores: *const f64,
    len: usize,
    alpha: f64,
    crit: SnaipwCritical,
    out: *mut SnaipwInterval,
) -> SnaipwStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        report_out(out, sn_interval(slice(scores, len)?, alpha, critical(crit)))
    })
}

/// Interval with a supplied variance `v_fix` in place of the sample variance.
#[no_mangle]
pub unsafe extern "C" fn snaipw_fixed_v_interval(
    scores: *const f64,
    len: usize,
    v_fix: f64,
    alpha: f64,
    out: *mut SnaipwInterval,
) -> SnaipwStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        report_out(out, fixed_v_interval(slice(scores, len)?, v_fix, alpha))
    })
}

fn fit(log: &ExperimentLog, plan: &ForwardPlan, mode: SnaipwNuisance) -> Result<(NuisanceFitSet, FitLedger), (SnaipwStatus, String)> {
    let learner = LearnerConfig::linear();
    let fitted = match mode {
        SnaipwNuisance::Forward => fit_forward(log, plan, &learner),
        SnaipwNuisance::LeakyFull => fit_leaky_full(log, plan, &learner),
        SnaipwNuisance::Zero => return Ok((zero_nuisance(), FitLedger::for_fixed(plan, NuisanceMode::Zero))),
    };
    fitted.map_err(|e| (SnaipwStatus::FitFailed, e.to_string()))
}

fn pair<'a>(log: *const SnaipwLog, plan: *const SnaipwPlan) -> Result<(&'a ExperimentLog, &'a ForwardPlan), (SnaipwStatus, String)> {
    let log = unsafe { log.as_ref() }.ok_or_else(null)?;
    let plan = unsafe { plan.as_ref() }.ok_or_else(null)?;
    if plan.0.n != log.0.len() {
        return Err((
            SnaipwStatus::InvalidArgument,
            format!("plan covers {} units but the log has {}", plan.0.n, log.0.len()),
        ));
    }
    Ok((&log.0, &plan.0))
}

/// Fits nuisances, scores the plan's scored set, and writes the
/// self-normalized interval.
#[no_mangle]
pub unsafe extern "C" fn snaipw_infer(
    log: *const SnaipwLog,
    plan: *const SnaipwPlan,
    nuisance: SnaipwNuisance,
    alpha: f64,
    crit: SnaipwCritical,
    out: *mut SnaipwInterval,
) -> SnaipwStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let (log, plan) = pair(log, plan)?;
        let (fits, _) = fit(log, plan, nuisance)?;
        let scores = score_series(log, plan, &fits).map_err(|e| (SnaipwStatus::FitFailed, e.to_string()))?;
        report_out(out, sn_interval(&scores.values(), alpha, critical(crit)))
    })
}

/// Runs the logging-contract checks for the given nuisance mode. Returns
/// `SNAIPW_STATUS_CONTRACT_FAILED` when any check fails; `out` is filled in
/// either way.
#[no_mangle]
pub unsafe extern "C" fn snaipw_contract_check(
    log: *const SnaipwLog,
    plan: *const SnaipwPlan,
    nuisance: SnaipwNuisance,
    epsilon: f64,
    horizon: usize,
    out: *mut SnaipwContract,
) -> SnaipwStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        if !(epsilon > 0.0 && epsilon < 0.5) {
            return Err((SnaipwStatus::InvalidArgument, "epsilon must lie in (0, 0.5)".into()));
        }
        let (log, plan) = pair(log, plan)?;
        let (_, ledger) = fit(log, plan, nuisance)?;
        let report = contract_report(log, plan, &ledger, epsilon, horizon, 10, 50);
        let code = |check: &str| match report.status_of(check) {
            Some(Status::Pass) => 0,
            Some(Status::Warn) => 1,
            _ => 2,
        };
        *out = SnaipwContract {
            propensity_calibration: code("propensity_calibration"),
            executed_overlap: code("executed_overlap"),
            scored_set: code("scored_set"),
            predictability: code("predictability"),
            fixed_horizon: code("fixed_horizon"),
            any_fail: report.any_fail(),
        };
        if report.any_fail() {
            let failed: Vec<&str> = report
                .verdicts
                .iter()
                .filter(|v| v.status == Status::Fail)
                .map(|v| v.check.as_str())
                .collect();
            return Err((SnaipwStatus::ContractFailed, format!("failed checks: {}", failed.join(", "))));
        }
        Ok(())
    })
}
