//! Executable logging contract: propensity calibration, executed overlap,
//! scored-set integrity, predictability of nuisance fits, fixed horizon.
//!
//! Calibration can only raise warnings. Agreement between `A_t` and `π_t`
//! inside bins never certifies that logging was correct.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::experiment_log::{ExperimentLog, ForwardPlan};
use crate::nuisance::FitLedger;

#[derive(Debug, Error, PartialEq)]
pub enum AuditError {
    #[error("empty log")]
    EmptyLog,
    #[error("invalid calibration settings: {0}")]
    InvalidBins(String),
    #[error("ledger has no fit for scored block {block}, arm {arm}")]
    MissingEntry { block: usize, arm: u8 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Warn,
    Fail,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Status::Pass => "pass",
            Status::Warn => "warn",
            Status::Fail => "fail",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditVerdict {
    pub check: String,
    pub status: Status,
    pub details: Vec<String>,
}

impl AuditVerdict {
    fn new(check: &str, status: Status, details: Vec<String>) -> Self {
        debug_assert!(status != Status::Fail || !details.is_empty());
        Self {
            check: check.to_string(),
            status,
            details,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    /// Mean of `A_t` in the bin.
    pub abar: f64,
    /// Mean of `π_t` in the bin.
    pub pibar: f64,
    pub deviation: f64,
    /// `3·√(π̄(1−π̄)/N_B)`.
    pub threshold: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub bins: Vec<CalibrationBin>,
    pub n_bins: usize,
    pub n_min: usize,
    pub merged: bool,
}

impl CalibrationReport {
    pub fn flagged(&self) -> impl Iterator<Item = &CalibrationBin> {
        self.bins.iter().filter(|b| b.flagged)
    }

    pub fn max_abs_deviation(&self) -> f64 {
        self.bins.iter().map(|b| b.deviation.abs()).fold(0.0, f64::max)
    }
}

#[derive(Default, Clone, Copy)]
struct BinAcc {
    count: usize,
    a_sum: f64,
    pi_sum: f64,
}

/// Equal-width propensity bins over (0, 1). Empty bins are dropped; bins with
/// fewer than `n_min` units are merged into their right neighbour, and a
/// short tail merges into the last emitted bin. One bin always remains.
pub fn calibration_bins(log: &ExperimentLog, n_bins: usize, n_min: usize) -> Result<CalibrationReport, AuditError> {
    if log.is_empty() {
        return Err(AuditError::EmptyLog);
    }
    if n_bins == 0 || n_min == 0 {
        return Err(AuditError::InvalidBins(format!(
            "n_bins = {n_bins}, n_min = {n_min}; both must be >= 1"
        )));
    }
    let mut raw = vec![BinAcc::default(); n_bins];
    for r in log.records() {
        let b = ((r.pi * n_bins as f64).floor() as usize).min(n_bins - 1);
        raw[b].count += 1;
        raw[b].a_sum += f64::from(r.a);
        raw[b].pi_sum += r.pi;
    }
    let width = 1.0 / n_bins as f64;

    // (lo index, hi index, accumulator)
    let mut groups: Vec<(usize, usize, BinAcc)> = Vec::new();
    let mut pending: Option<(usize, usize, BinAcc)> = None;
    let mut merged = false;
    for (i, acc) in raw.iter().enumerate().filter(|(_, a)| a.count > 0) {
        let (lo, mut cur) = match pending.take() {
            Some((lo, _, prev)) => {
                merged = true;
                (lo, prev)
            }
            None => (i, BinAcc::default()),
        };
        cur.count += acc.count;
        cur.a_sum += acc.a_sum;
        cur.pi_sum += acc.pi_sum;
        if cur.count >= n_min {
            groups.push((lo, i, cur));
        } else {
            pending = Some((lo, i, cur));
        }
    }
    if let Some((lo, hi, rest)) = pending {
        match groups.last_mut() {
            Some(last) => {
                merged = true;
                last.1 = hi;
                last.2.count += rest.count;
                last.2.a_sum += rest.a_sum;
                last.2.pi_sum += rest.pi_sum;
            }
            None => groups.push((lo, hi, rest)),
        }
    }

    let bins = groups
        .into_iter()
        .map(|(lo, hi, acc)| {
            let n = acc.count as f64;
            let abar = acc.a_sum / n;
            let pibar = acc.pi_sum / n;
            let deviation = abar - pibar;
            let threshold = 3.0 * (pibar * (1.0 - pibar) / n).sqrt();
            CalibrationBin {
                lo: lo as f64 * width,
                hi: (hi + 1) as f64 * width,
                count: acc.count,
                abar,
                pibar,
                deviation,
                threshold,
                flagged: deviation.abs() > threshold,
            }
        })
        .collect();
    Ok(CalibrationReport {
        bins,
        n_bins,
        n_min,
        merged,
    })
}

pub fn calibration_verdict(report: &CalibrationReport) -> AuditVerdict {
    let mut details: Vec<String> = report
        .flagged()
        .map(|b| {
            format!(
                "bin [{:.2}, {:.2}): N = {}, A_bar = {:.4}, pi_bar = {:.4}, deviation {:+.4} exceeds 3-sigma {:.4}",
                b.lo, b.hi, b.count, b.abar, b.pibar, b.deviation, b.threshold
            )
        })
        .collect();
    let status = if details.is_empty() {
        details.push(format!(
            "{} bin(s), max |A_bar - pi_bar| = {:.4}; calibration cannot certify correct logging",
            report.bins.len(),
            report.max_abs_deviation()
        ));
        Status::Pass
    } else {
        Status::Warn
    };
    AuditVerdict::new("propensity_calibration", status, details)
}

const MAX_LISTED: usize = 20;

/// Every scored `π_t` must lie in `[ε, 1−ε]`.
pub fn overlap_check(log: &ExperimentLog, plan: &ForwardPlan, epsilon: f64) -> AuditVerdict {
    assert!(epsilon > 0.0 && epsilon < 0.5, "epsilon must lie in (0, 0.5)");
    let scored: Vec<(usize, f64)> = plan
        .scored
        .iter()
        .filter_map(|&t| log.get(t).map(|r| (t, r.pi)))
        .collect();
    let min = scored.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let max = scored.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    let offending: Vec<&(usize, f64)> = scored
        .iter()
        .filter(|(_, pi)| *pi < epsilon || *pi > 1.0 - epsilon)
        .collect();
    let mut details = vec![format!(
        "realized pi on scored units: min = {min:.6}, max = {max:.6}; required [{epsilon}, {}]",
        1.0 - epsilon
    )];
    if offending.is_empty() {
        return AuditVerdict::new("executed_overlap", Status::Pass, details);
    }
    details.push(format!("{} scored unit(s) outside the band", offending.len()));
    details.extend(
        offending
            .iter()
            .take(MAX_LISTED)
            .map(|(t, pi)| format!("t = {t}: pi = {pi}")),
    );
    AuditVerdict::new("executed_overlap", Status::Fail, details)
}

fn fmt_ranges(ranges: &[[usize; 2]]) -> String {
    if ranges.is_empty() {
        return "[]".into();
    }
    let shown: Vec<String> = ranges.iter().take(4).map(|r| format!("[{},{}]", r[0], r[1])).collect();
    let mut s = shown.join(" ");
    if ranges.len() > 4 {
        let _ = write!(s, " ... ({} ranges)", ranges.len());
    }
    s
}

/// Passes iff each scored block has exactly one fit per arm and every
/// training index precedes the block.
pub fn predictability_audit(ledger: &FitLedger, plan: &ForwardPlan) -> Result<AuditVerdict, AuditError> {
    let mut details = Vec::new();
    for k in plan.scored_blocks() {
        let block = plan.block(k);
        for arm in [0u8, 1] {
            let fits: Vec<_> = ledger
                .entries()
                .iter()
                .filter(|e| e.block == k && e.arm == arm)
                .collect();
            if fits.is_empty() {
                return Err(AuditError::MissingEntry { block: k, arm });
            }
            if fits.len() > 1 {
                details.push(format!("block {k} arm {arm}: {} fits recorded, expected exactly one", fits.len()));
            }
            for fit in fits {
                let inside = fit.overlap(&block);
                let after: usize = fit
                    .train
                    .iter()
                    .map(|r| r[1].saturating_sub((*block.end()).max(r[0] - 1)))
                    .sum();
                if !inside.is_empty() || after > 0 {
                    let listed: Vec<String> = inside.iter().take(MAX_LISTED).map(usize::to_string).collect();
                    let mut msg = format!(
                        "block {k} arm {arm}: training range {} overlaps block [{},{}]",
                        fmt_ranges(&fit.train),
                        block.start(),
                        block.end()
                    );
                    if !inside.is_empty() {
                        let _ = write!(msg, "; indices inside block: {}", listed.join(","));
                        if inside.len() > MAX_LISTED {
                            let _ = write!(msg, ",... ({} total)", inside.len());
                        }
                    }
                    if after > 0 {
                        let _ = write!(msg, "; {after} index(es) after the block");
                    }
                    details.push(msg);
                }
            }
        }
    }
    if details.is_empty() {
        Ok(AuditVerdict::new(
            "predictability",
            Status::Pass,
            vec![format!(
                "{} scored block(s): every fit trained strictly before its block",
                plan.scored_blocks().len()
            )],
        ))
    } else {
        Ok(AuditVerdict::new("predictability", Status::Fail, details))
    }
}

/// The plan is internally consistent, matches the log, and its scored set is
/// exactly the one its declared rule implies.
pub fn scored_set_integrity(log: &ExperimentLog, plan: &ForwardPlan) -> AuditVerdict {
    let mut problems = Vec::new();
    if plan.block_bounds.first() != Some(&0) || plan.block_bounds.windows(2).any(|w| w[1] <= w[0]) {
        problems.push(format!("block cut points are not strictly increasing from 0: {:?}", plan.block_bounds));
    }
    if plan.block_bounds.last() != Some(&plan.n) {
        problems.push(format!("last cut point {:?} differs from plan horizon {}", plan.block_bounds.last(), plan.n));
    }
    if plan.n != log.len() {
        problems.push(format!("plan horizon {} differs from log length {}", plan.n, log.len()));
    }
    if plan.n_eff != plan.scored.len() {
        problems.push(format!("declared n_eff {} but {} scored indices", plan.n_eff, plan.scored.len()));
    }
    if problems.is_empty() && plan.scored != plan.expected_scored() {
        let expected = plan.expected_scored();
        let extra: Vec<String> = plan
            .scored
            .iter()
            .filter(|t| expected.binary_search(t).is_err())
            .take(MAX_LISTED)
            .map(usize::to_string)
            .collect();
        let missing: Vec<String> = expected
            .iter()
            .filter(|t| plan.scored.binary_search(t).is_err())
            .take(MAX_LISTED)
            .map(usize::to_string)
            .collect();
        problems.push(format!(
            "scored set does not match rule {:?}: unexpected [{}], missing [{}]",
            plan.rule,
            extra.join(","),
            missing.join(",")
        ));
    }
    if plan.scored.len() < 2 {
        problems.push(format!("n_eff = {} < 2; no interval can be reported", plan.scored.len()));
    }
    if problems.is_empty() {
        AuditVerdict::new(
            "scored_set",
            Status::Pass,
            vec![format!("n = {}, K = {}, n_eff = {}, rule {:?}", plan.n, plan.k(), plan.n_eff, plan.rule)],
        )
    } else {
        AuditVerdict::new("scored_set", Status::Fail, problems)
    }
}

pub fn fixed_horizon_check(log: &ExperimentLog, plan: &ForwardPlan, horizon: usize) -> AuditVerdict {
    if log.len() == horizon && plan.n == horizon {
        AuditVerdict::new("fixed_horizon", Status::Pass, vec![format!("log length equals declared horizon {horizon}")])
    } else {
        AuditVerdict::new(
            "fixed_horizon",
            Status::Fail,
            vec![format!(
                "declared horizon {horizon}, log has {} units, plan covers {}",
                log.len(),
                plan.n
            )],
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractReport {
    pub verdicts: Vec<AuditVerdict>,
}

impl ContractReport {
    pub fn any_fail(&self) -> bool {
        self.verdicts.iter().any(|v| v.status == Status::Fail)
    }

    pub fn status_of(&self, check: &str) -> Option<Status> {
        self.verdicts.iter().find(|v| v.check == check).map(|v| v.status)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<24} {:<6} details", "check", "status");
        for v in &self.verdicts {
            let first = v.details.first().map(String::as_str).unwrap_or("");
            let _ = writeln!(out, "{:<24} {:<6} {}", v.check, v.status.to_string().to_uppercase(), first);
            for d in v.details.iter().skip(1) {
                let _ = writeln!(out, "{:<24} {:<6} {}", "", "", d);
            }
        }
        out
    }
}

/// Calibration, overlap, scored-set integrity, predictability and fixed
/// horizon, in that order.
pub fn contract_report(
    log: &ExperimentLog,
    plan: &ForwardPlan,
    ledger: &FitLedger,
    epsilon: f64,
    horizon: usize,
    n_bins: usize,
    n_min: usize,
) -> ContractReport {
    let calibration = match calibration_bins(log, n_bins, n_min) {
        Ok(report) => calibration_verdict(&report),
        Err(e) => AuditVerdict::new("propensity_calibration", Status::Warn, vec![e.to_string()]),
    };
    let integrity = scored_set_integrity(log, plan);
    let predictability = if plan.scored.iter().any(|&t| t == 0 || t > plan.n) {
        AuditVerdict::new("predictability", Status::Fail, vec!["scored indices outside the plan horizon".into()])
    } else {
        match predictability_audit(ledger, plan) {
            Ok(v) => v,
            Err(e) => AuditVerdict::new("predictability", Status::Fail, vec![e.to_string()]),
        }
    };
    ContractReport {
        verdicts: vec![
            calibration,
            overlap_check(log, plan, epsilon),
            integrity,
            predictability,
            fixed_horizon_check(log, plan, horizon),
        ],
    }
}
