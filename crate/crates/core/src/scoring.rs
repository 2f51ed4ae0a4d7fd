//! AIPW pseudo-outcomes over the scored set.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::FitError;
use crate::experiment_log::{fmt_real, ExperimentLog, ForwardPlan, UnitRecord};
use crate::nuisance::{NuisanceFitSet, NuisanceMode};

/// Doubly robust score
/// `(A/π)(Y − m1) − ((1−A)/(1−π))(Y − m0) + m1 − m0`.
#[inline]
pub fn aipw_score(a: u8, y: f64, pi: f64, m0: f64, m1: f64) -> f64 {
    let a = f64::from(a);
    (a / pi) * (y - m1) - ((1.0 - a) / (1.0 - pi)) * (y - m0) + m1 - m0
}

pub fn aipw_score_record(record: &UnitRecord, m0: f64, m1: f64) -> f64 {
    aipw_score(record.a, record.y, record.pi, m0, m1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSeries {
    /// `(t, φ̂_t)` for every scored `t`, in increasing `t`.
    pub entries: Vec<(usize, f64)>,
    pub mode: NuisanceMode,
}

impl ScoreSeries {
    pub fn from_values(values: Vec<f64>, mode: NuisanceMode) -> Self {
        Self {
            entries: values.into_iter().enumerate().map(|(i, v)| (i + 1, v)).collect(),
            mode,
        }
    }

    pub fn n_eff(&self) -> usize {
        self.entries.len()
    }

    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|&(_, v)| v).collect()
    }

    pub fn value_at(&self, t: usize) -> Option<f64> {
        self.entries
            .binary_search_by_key(&t, |&(s, _)| s)
            .ok()
            .map(|i| self.entries[i].1)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,phi_hat\n");
        for (t, v) in &self.entries {
            let _ = writeln!(out, "{t},{}", fmt_real(*v));
        }
        out
    }
}

fn score_with(
    log: &ExperimentLog,
    plan: &ForwardPlan,
    fits: &NuisanceFitSet,
    propensity: impl Fn(&UnitRecord) -> f64,
) -> Result<ScoreSeries, FitError> {
    if plan.n != log.len() {
        return Err(FitError::HorizonMismatch {
            plan: plan.n,
            log: log.len(),
        });
    }
    let entries = plan
        .scored
        .iter()
        .map(|&t| {
            let r = log.get(t).expect("scored index within horizon");
            let (m0, m1) = fits.predict(t, plan.block_of(t), &r.x)?;
            Ok((t, aipw_score(r.a, r.y, propensity(r), m0, m1)))
        })
        .collect::<Result<Vec<_>, FitError>>()?;
    Ok(ScoreSeries {
        entries,
        mode: fits.mode(),
    })
}

/// Evaluates each scored unit's block nuisance at `x_t` and scores it with
/// the logged propensity.
pub fn score_series(log: &ExperimentLog, plan: &ForwardPlan, fits: &NuisanceFitSet) -> Result<ScoreSeries, FitError> {
    score_with(log, plan, fits, |r| r.pi)
}

/// Same as [`score_series`] but with `assumed_pi` in place of every logged
/// propensity. A deliberately wrong baseline.
pub fn mislogged_score_series(
    log: &ExperimentLog,
    plan: &ForwardPlan,
    fits: &NuisanceFitSet,
    assumed_pi: f64,
) -> Result<ScoreSeries, FitError> {
    assert!(
        assumed_pi > 0.0 && assumed_pi < 1.0,
        "assumed propensity must lie in (0, 1)"
    );
    score_with(log, plan, fits, |_| assumed_pi)
}
