//! Fixed-horizon point estimate, studentizer and Wald intervals.
//!
//! All sums go through [`CompensatedSum`] so that the exact identity
//! `(n_eff − 1)V̂ = Q − n_eff(θ̂ − θ0)²` stays checkable at 1e-9 relative
//! even for long series.

mod quantile;

use serde::{Deserialize, Serialize};

use crate::error::InferenceError;

pub use quantile::{normal_cdf, quantile, Reference};

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::default();
        iter.into_iter().for_each(|v| s.add(v));
        s
    }
}

pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().collect::<CompensatedSum>().value()
}

/// `θ̂`, the mean of the scores.
pub fn estimate(values: &[f64]) -> Result<f64, InferenceError> {
    if values.is_empty() {
        return Err(InferenceError::EmptySeries);
    }
    Ok(compensated_sum(values.iter().copied()) / values.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimate {
    pub theta_hat: f64,
    pub v_hat: f64,
    /// `V̂ == 0`: the interval is uninformative and should be reported as a
    /// design or measurement degeneracy.
    pub degenerate: bool,
}

/// Sample variance `Σ(φ̂_t − θ̂)² / (n_eff − 1)`.
pub fn sample_variance(values: &[f64]) -> Result<VarianceEstimate, InferenceError> {
    if values.len() < 2 {
        return Err(InferenceError::TooFewScores(values.len()));
    }
    let theta_hat = estimate(values)?;
    let ss = compensated_sum(values.iter().map(|v| (v - theta_hat) * (v - theta_hat)));
    let v_hat = ss / (values.len() - 1) as f64;
    Ok(VarianceEstimate {
        theta_hat,
        v_hat,
        degenerate: v_hat == 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Critical {
    Z,
    T,
}

impl std::str::FromStr for Critical {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "z" | "Z" => Ok(Critical::Z),
            "t" | "T" => Ok(Critical::T),
            other => Err(format!("unknown critical value `{other}` (expected z or t)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalVariant {
    SnZ,
    SnT,
    FixedV,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceReport {
    pub theta_hat: f64,
    pub v_hat: f64,
    pub se_hat: f64,
    pub n_eff: usize,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub variant: IntervalVariant,
    pub alpha: f64,
    pub critical_value: f64,
    pub v_fix: Option<f64>,
    pub degenerate: bool,
}

impl InferenceReport {
    pub fn length(&self) -> f64 {
        self.ci_hi - self.ci_lo
    }

    pub fn covers(&self, theta: f64) -> bool {
        self.ci_lo <= theta && theta <= self.ci_hi
    }

    pub fn summary(&self) -> String {
        let variant = match self.variant {
            IntervalVariant::SnZ => "SN (z)",
            IntervalVariant::SnT => "SN (t)",
            IntervalVariant::FixedV => "Fixed-V",
        };
        let mut s = format!(
            "theta_hat = {:.6}  {:.0}% CI [{:.6}, {:.6}]  SE = {:.6}  V_hat = {:.6}  n_eff = {}  ({variant})",
            self.theta_hat,
            100.0 * (1.0 - self.alpha),
            self.ci_lo,
            self.ci_hi,
            self.se_hat,
            self.v_hat,
            self.n_eff,
        );
        if self.degenerate {
            s.push_str("  WARNING: V_hat = 0 (degenerate design/measurement)");
        }
        s
    }
}

fn check_alpha(alpha: f64) -> Result<f64, InferenceError> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(1.0 - alpha / 2.0)
    } else {
        Err(InferenceError::InvalidAlpha(alpha))
    }
}

/// Two-sided critical value at level `alpha`.
pub fn critical_value(critical: Critical, alpha: f64, n_eff: usize) -> Result<f64, InferenceError> {
    let p = check_alpha(alpha)?;
    let dist = match critical {
        Critical::Z => Reference::StdNormal,
        Critical::T => Reference::StudentT {
            df: (n_eff.saturating_sub(1)) as f64,
        },
    };
    quantile(dist, p)
}

/// Self-normalized Wald interval `θ̂ ± crit·√(V̂/n_eff)`.
pub fn sn_interval(values: &[f64], alpha: f64, critical: Critical) -> Result<InferenceReport, InferenceError> {
    let var = sample_variance(values)?;
    let n = values.len();
    let crit = critical_value(critical, alpha, n)?;
    let se_hat = (var.v_hat / n as f64).sqrt();
    Ok(InferenceReport {
        theta_hat: var.theta_hat,
        v_hat: var.v_hat,
        se_hat,
        n_eff: n,
        ci_lo: var.theta_hat - crit * se_hat,
        ci_hi: var.theta_hat + crit * se_hat,
        variant: match critical {
            Critical::Z => IntervalVariant::SnZ,
            Critical::T => IntervalVariant::SnT,
        },
        alpha,
        critical_value: crit,
        v_fix: None,
        degenerate: var.degenerate,
    })
}

/// Wald interval with a deterministic variance constant:
/// `θ̂ ± z·√(v_fix/n_eff)`. `se_hat` still reports the studentizer.
pub fn fixed_v_interval(values: &[f64], v_fix: f64, alpha: f64) -> Result<InferenceReport, InferenceError> {
    if !(v_fix > 0.0 && v_fix.is_finite()) {
        return Err(InferenceError::InvalidFixedVariance(v_fix));
    }
    let var = sample_variance(values)?;
    let n = values.len();
    let crit = critical_value(Critical::Z, alpha, n)?;
    let half = crit * (v_fix / n as f64).sqrt();
    Ok(InferenceReport {
        theta_hat: var.theta_hat,
        v_hat: var.v_hat,
        se_hat: (var.v_hat / n as f64).sqrt(),
        n_eff: n,
        ci_lo: var.theta_hat - half,
        ci_hi: var.theta_hat + half,
        variant: IntervalVariant::FixedV,
        alpha,
        critical_value: crit,
        v_fix: Some(v_fix),
        degenerate: var.degenerate,
    })
}

/// Realized quadratic variation and score sum at a supplied `θ0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QvReport {
    pub theta0: f64,
    pub n_eff: usize,
    pub theta_hat: f64,
    pub v_hat: f64,
    /// `Q = Σ ξ_t²` with `ξ_t = φ̂_t − θ0`.
    pub q_t: f64,
    /// `S = Σ ξ_t`.
    pub s_t: f64,
    /// `(n_eff − 1)V̂ − (Q − n_eff(θ̂ − θ0)²)`; zero up to roundoff.
    pub identity_residual: f64,
}

impl QvReport {
    /// `(n_eff − 1)V̂ / Q`.
    pub fn studentizer_ratio(&self) -> f64 {
        (self.n_eff - 1) as f64 * self.v_hat / self.q_t
    }

    /// `1 − (S/√Q)²/n_eff`, algebraically equal to [`Self::studentizer_ratio`].
    pub fn ratio_from_score_sum(&self) -> f64 {
        1.0 - self.s_t * self.s_t / self.q_t / self.n_eff as f64
    }
}

pub fn qv_report(values: &[f64], theta0: f64) -> Result<QvReport, InferenceError> {
    let var = sample_variance(values)?;
    let n = values.len();
    let q_t = compensated_sum(values.iter().map(|v| (v - theta0) * (v - theta0)));
    let s_t = compensated_sum(values.iter().map(|v| v - theta0));
    let centered = var.theta_hat - theta0;
    let identity_residual = (n - 1) as f64 * var.v_hat - (q_t - n as f64 * centered * centered);
    Ok(QvReport {
        theta0,
        n_eff: n,
        theta_hat: var.theta_hat,
        v_hat: var.v_hat,
        q_t,
        s_t,
        identity_residual,
    })
}
