//! Replication runner for the coverage study.
//!
//! Replications run on a dedicated rayon pool and are collected in
//! replication order before any reduction, so tables do not depend on the
//! worker count.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, SimError};
use crate::inference::{fixed_v_interval, sn_interval, CompensatedSum, Critical, InferenceReport};
use crate::nuisance::{
    fit_forward, fit_leaky_full, fit_naive_cross_fit, zero_nuisance, ClampBounds, FeatureMap, LearnerConfig,
    NuisanceFitSet,
};
use crate::scoring::{mislogged_score_series, score_series};
use crate::simlab::{
    generate_trial, oracle_variance_trace, policy_learner, second_moment_contribution, Design, DesignParams,
    DesignSpec, TrialData,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Sn,
    FixedV,
    RegimeFixed,
    SnT,
    SnAipwPredictable,
    SnAipwLeakyFull,
    SnIpw,
    SnAipwOracle,
    SnAipwWellSpec,
    SnAipwMisspec,
    SnOracle,
    SnAipw,
    NaiveIidDml,
    SnIpwAssume0p5,
}

impl Method {
    pub const ALL: [Method; 14] = [
        Method::Sn,
        Method::FixedV,
        Method::RegimeFixed,
        Method::SnT,
        Method::SnAipwPredictable,
        Method::SnAipwLeakyFull,
        Method::SnIpw,
        Method::SnAipwOracle,
        Method::SnAipwWellSpec,
        Method::SnAipwMisspec,
        Method::SnOracle,
        Method::SnAipw,
        Method::NaiveIidDml,
        Method::SnIpwAssume0p5,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Method::Sn => "SN",
            Method::FixedV => "Fixed-V",
            Method::RegimeFixed => "Regime-Fixed",
            Method::SnT => "SN-t",
            Method::SnAipwPredictable => "SN-AIPW-Predictable",
            Method::SnAipwLeakyFull => "SN-AIPW-LeakyFull",
            Method::SnIpw => "SN-IPW",
            Method::SnAipwOracle => "SN-AIPW-Oracle",
            Method::SnAipwWellSpec => "SN-AIPW-WellSpec",
            Method::SnAipwMisspec => "SN-AIPW-Misspec",
            Method::SnOracle => "SN-Oracle",
            Method::SnAipw => "SN-AIPW",
            Method::NaiveIidDml => "Naive-iid-DML",
            Method::SnIpwAssume0p5 => "SN-IPW-Assume0p5",
        }
    }

    pub fn allowed(&self, design: Design) -> bool {
        use Design::*;
        match self {
            Method::Sn | Method::FixedV | Method::SnT => matches!(design, A | B),
            Method::RegimeFixed => design == A,
            Method::SnAipwPredictable | Method::SnAipwLeakyFull => design == C1,
            Method::SnIpw | Method::SnAipwOracle | Method::SnOracle => matches!(design, C1 | C2 | D),
            Method::SnAipwWellSpec | Method::SnAipwMisspec => design == C2,
            Method::SnAipw | Method::NaiveIidDml | Method::SnIpwAssume0p5 => design == D,
        }
    }

    /// Methods reported for a design by default, in table order.
    pub fn defaults_for(design: Design) -> Vec<Method> {
        match design {
            Design::A => vec![Method::FixedV, Method::RegimeFixed, Method::Sn],
            Design::B => vec![Method::FixedV, Method::Sn],
            Design::C1 => vec![Method::SnAipwPredictable, Method::SnAipwLeakyFull, Method::SnIpw],
            Design::C2 => vec![Method::SnAipwOracle, Method::SnAipwWellSpec, Method::SnAipwMisspec, Method::SnIpw],
            Design::D => vec![
                Method::SnOracle,
                Method::SnAipw,
                Method::NaiveIidDml,
                Method::SnIpw,
                Method::SnIpwAssume0p5,
            ],
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| SimError::UnknownMethod(s.to_string()))
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Everything a coverage run depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub params: DesignParams,
    pub ns: Vec<usize>,
    pub methods: Vec<Method>,
    pub reps: usize,
    pub master_seed: u64,
    pub workers: usize,
    pub alpha: f64,
    /// Overrides the design's fixed long-run variance.
    pub v_fix: Option<f64>,
}

impl McConfig {
    pub fn new(design: Design, ns: Vec<usize>, reps: usize, master_seed: u64) -> Self {
        Self {
            params: DesignParams::defaults(design),
            ns,
            methods: Method::defaults_for(design),
            reps,
            master_seed,
            workers: 1,
            alpha: 0.05,
            v_fix: None,
        }
    }

    pub fn design(&self) -> Design {
        self.params.design()
    }

    pub fn spec(&self, n: usize, rep: u64) -> DesignSpec {
        DesignSpec {
            n,
            master_seed: self.master_seed,
            rep,
            params: self.params.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        let design = self.design();
        if self.reps == 0 {
            return Err(SimError::InvalidParameter("R must be at least 1".into()).into());
        }
        if self.workers == 0 {
            return Err(SimError::InvalidParameter("workers must be at least 1".into()).into());
        }
        if self.ns.is_empty() || self.methods.is_empty() {
            return Err(SimError::InvalidParameter("need at least one n and one method".into()).into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(SimError::InvalidParameter(format!("alpha = {} outside (0,1)", self.alpha)).into());
        }
        if let Some(m) = self.methods.iter().find(|m| !m.allowed(design)) {
            return Err(SimError::MethodNotForDesign {
                method: m.label().into(),
                design: design.to_string(),
            }
            .into());
        }
        if self.methods.contains(&Method::FixedV) && self.v_fix.or(self.params.v_fix()).is_none() {
            return Err(SimError::InvalidParameter("Fixed-V needs a fixed variance".into()).into());
        }
        for &n in &self.ns {
            self.spec(n, 0).validate()?;
        }
        Ok(())
    }
}

/// One method's interval in one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: Method,
    pub theta_hat: f64,
    pub v_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub covers: bool,
    pub rejects: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepOutcome {
    pub rep: u64,
    pub n: usize,
    pub n_eff: usize,
    pub theta0: f64,
    pub regime: Option<f64>,
    pub results: Vec<MethodResult>,
}

fn forward_fits(trial: &TrialData, config: &LearnerConfig) -> Result<NuisanceFitSet, Error> {
    Ok(fit_forward(&trial.log, &trial.plan, config)?.0)
}

fn c1_leaky_learner(params: &DesignParams) -> LearnerConfig {
    match params {
        DesignParams::C1(c) => LearnerConfig::ridge(FeatureMap::RawSquaresSin, c.leaky_lambda)
            .with_clamp(Some(ClampBounds::new(-c.clamp, c.clamp))),
        _ => unreachable!("leaky learner is defined for C1 only"),
    }
}

/// Interval for one method on one realized trial.
pub fn method_report(trial: &TrialData, method: Method, alpha: f64, v_fix: Option<f64>) -> Result<InferenceReport, Error> {
    let params = &trial.spec.params;
    let sn = |fits: &NuisanceFitSet, critical| -> Result<InferenceReport, Error> {
        let s = score_series(&trial.log, &trial.plan, fits)?;
        Ok(sn_interval(&s.values(), alpha, critical)?)
    };
    match method {
        Method::Sn | Method::SnIpw => sn(&zero_nuisance(), Critical::Z),
        Method::SnT => sn(&zero_nuisance(), Critical::T),
        Method::FixedV => {
            let v = v_fix
                .or(params.v_fix())
                .ok_or_else(|| SimError::InvalidParameter("Fixed-V needs a fixed variance".into()))?;
            let s = score_series(&trial.log, &trial.plan, &zero_nuisance())?;
            Ok(fixed_v_interval(&s.values(), v, alpha)?)
        }
        Method::RegimeFixed => {
            let (DesignParams::A(a), Some(pi)) = (params, trial.regime) else {
                return Err(SimError::MethodNotForDesign {
                    method: method.label().into(),
                    design: trial.spec.design().to_string(),
                }
                .into());
            };
            let v = second_moment_contribution(pi, a.sigma0 * a.sigma0, a.sigma1 * a.sigma1, 0.0, 0.0, 0.0, 0.0);
            let s = score_series(&trial.log, &trial.plan, &zero_nuisance())?;
            Ok(fixed_v_interval(&s.values(), v, alpha)?)
        }
        Method::SnAipwPredictable | Method::SnAipw => {
            let cfg = policy_learner(params).expect("adaptive design learner");
            sn(&forward_fits(trial, &cfg)?, Critical::Z)
        }
        Method::SnAipwLeakyFull => {
            let (fits, _) = fit_leaky_full(&trial.log, &trial.plan, &c1_leaky_learner(params))?;
            sn(&fits, Critical::Z)
        }
        Method::SnAipwOracle | Method::SnOracle => sn(&trial.oracle_fits(), Critical::Z),
        Method::SnAipwWellSpec => sn(&forward_fits(trial, &LearnerConfig::linear())?, Critical::Z),
        Method::SnAipwMisspec => {
            let DesignParams::C2(c) = params else {
                unreachable!("checked by Method::allowed")
            };
            let cfg = LearnerConfig::ridge(FeatureMap::Subset { cols: c.misspec_cols.clone() }, 1e-8);
            sn(&forward_fits(trial, &cfg)?, Critical::Z)
        }
        Method::NaiveIidDml => {
            let DesignParams::D(d) = params else {
                unreachable!("checked by Method::allowed")
            };
            let cfg = policy_learner(params).expect("adaptive design learner");
            let (fits, _) = fit_naive_cross_fit(&trial.log, &trial.plan, &cfg, d.naive_folds)?;
            sn(&fits, Critical::Z)
        }
        Method::SnIpwAssume0p5 => {
            let s = mislogged_score_series(&trial.log, &trial.plan, &zero_nuisance(), 0.5)?;
            Ok(sn_interval(&s.values(), alpha, Critical::Z)?)
        }
    }
}

pub fn run_replication(config: &McConfig, n: usize, rep: u64) -> Result<RepOutcome, Error> {
    let trial = generate_trial(&config.spec(n, rep))?;
    let theta0 = trial.truth.theta0;
    let results = config
        .methods
        .iter()
        .map(|&method| {
            let r = method_report(&trial, method, config.alpha, config.v_fix)?;
            Ok(MethodResult {
                method,
                theta_hat: r.theta_hat,
                v_hat: r.v_hat,
                ci_lo: r.ci_lo,
                ci_hi: r.ci_hi,
                covers: r.covers(theta0),
                rejects: !r.covers(0.0),
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    Ok(RepOutcome {
        rep,
        n,
        n_eff: trial.plan.n_eff(),
        theta0,
        regime: trial.regime,
        results,
    })
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, Error> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| SimError::InvalidParameter(format!("cannot start worker pool: {e}")).into())
}

/// Runs every replication at horizon `n`, returned in replication order.
pub fn run_replications(config: &McConfig, n: usize) -> Result<Vec<RepOutcome>, Error> {
    config.validate()?;
    pool(config.workers)?.install(|| {
        (0..config.reps as u64)
            .into_par_iter()
            .map(|rep| run_replication(config, n, rep))
            .collect()
    })
}

/// `√(p̂(1−p̂)/R)`.
pub fn mcse(p_hat: f64, reps: usize) -> f64 {
    assert!((0.0..=1.0).contains(&p_hat), "p_hat must lie in [0,1]");
    assert!(reps >= 1, "R must be at least 1");
    (p_hat * (1.0 - p_hat) / reps as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRow {
    pub design: String,
    pub n: usize,
    pub n_eff: usize,
    pub method: String,
    pub coverage: f64,
    pub mcse: f64,
    pub avg_length: f64,
    pub bias: f64,
    pub reject_rate: f64,
    /// Post-burn-in propensity for Design A conditional rows.
    pub regime: Option<f64>,
    pub reps: usize,
    pub mean_v_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McTable {
    pub design: String,
    pub reps: usize,
    pub master_seed: u64,
    pub alpha: f64,
    pub rows: Vec<McRow>,
}

const CSV_HEADER: &str = "design,n,n_eff,method,coverage,mcse,avg_length,bias,reject_rate,regime,reps,mean_v_hat";

impl McTable {
    pub fn row(&self, n: usize, method: Method, regime: Option<f64>) -> Option<&McRow> {
        self.rows
            .iter()
            .find(|r| r.n == n && r.method == method.label() && r.regime == regime)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let regime = r.regime.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.design, r.n, r.n_eff, r.method, r.coverage, r.mcse, r.avg_length, r.bias, r.reject_rate, regime, r.reps,
                r.mean_v_hat
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }

    /// Fixed-width rendering rounded to three decimals.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:>6} {:>6} {:<20} {:>7} {:>8} {:>7} {:>9} {:>10} {:>7} {:>5}",
            "n", "n_eff", "method", "regime", "coverage", "mcse", "avg_len", "bias", "reject", "R"
        );
        for r in &self.rows {
            let regime = r.regime.map(|v| format!("{v}")).unwrap_or_else(|| "all".into());
            let _ = writeln!(
                out,
                "{:>6} {:>6} {:<20} {:>7} {:>8.3} {:>7.3} {:>9.3} {:>10.3} {:>7.3} {:>5}",
                r.n, r.n_eff, r.method, regime, r.coverage, r.mcse, r.avg_length, r.bias, r.reject_rate, r.reps
            );
        }
        out
    }
}

fn aggregate(design: Design, method_idx: usize, outcomes: &[&RepOutcome], regime: Option<f64>) -> McRow {
    let first = outcomes[0];
    let r = outcomes.len();
    let rf = r as f64;
    let mut len = CompensatedSum::default();
    let mut bias = CompensatedSum::default();
    let mut v = CompensatedSum::default();
    let (mut covered, mut rejected) = (0usize, 0usize);
    for o in outcomes {
        let m = &o.results[method_idx];
        len.add(m.ci_hi - m.ci_lo);
        bias.add(m.theta_hat - o.theta0);
        v.add(m.v_hat);
        covered += usize::from(m.covers);
        rejected += usize::from(m.rejects);
    }
    let coverage = covered as f64 / rf;
    McRow {
        design: design.to_string(),
        n: first.n,
        n_eff: first.n_eff,
        method: first.results[method_idx].method.label().into(),
        coverage,
        mcse: mcse(coverage, r),
        avg_length: len.value() / rf,
        bias: bias.value() / rf,
        reject_rate: rejected as f64 / rf,
        regime,
        reps: r,
        mean_v_hat: v.value() / rf,
    }
}

/// Reduces replications (in order) into table rows: one marginal row per
/// method, followed for Design A by one row per realized regime.
pub fn aggregate_rows(design: Design, outcomes: &[RepOutcome]) -> Vec<McRow> {
    let Some(first) = outcomes.first() else {
        return Vec::new();
    };
    let all: Vec<&RepOutcome> = outcomes.iter().collect();
    let mut regimes: Vec<f64> = outcomes.iter().filter_map(|o| o.regime).collect();
    regimes.sort_by(|a, b| b.total_cmp(a));
    regimes.dedup();
    let mut rows = Vec::new();
    for idx in 0..first.results.len() {
        rows.push(aggregate(design, idx, &all, None));
        if design == Design::A {
            for &g in &regimes {
                let subset: Vec<&RepOutcome> = outcomes.iter().filter(|o| o.regime == Some(g)).collect();
                rows.push(aggregate(design, idx, &subset, Some(g)));
            }
        }
    }
    rows
}

pub fn run_design(config: &McConfig) -> Result<McTable, Error> {
    config.validate()?;
    let mut rows = Vec::new();
    for &n in &config.ns {
        let outcomes = run_replications(config, n)?;
        rows.extend(aggregate_rows(config.design(), &outcomes));
    }
    Ok(McTable {
        design: config.design().to_string(),
        reps: config.reps,
        master_seed: config.master_seed,
        alpha: config.alpha,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceRatioHistogram {
    pub bins: Vec<HistogramBin>,
    /// `V_𝒯²/n_eff` per replication, in replication order.
    pub values: Vec<f64>,
    pub regimes: Vec<Option<f64>>,
}

impl VarianceRatioHistogram {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,count\n");
        for b in &self.bins {
            let _ = writeln!(out, "{},{},{}", b.lo, b.hi, b.count);
        }
        out
    }
}

/// Equal-width bins spanning the observed range; the last bin is closed.
pub fn bin_values(values: &[f64], bins: usize) -> Vec<HistogramBin> {
    assert!(bins >= 1, "need at least one bin");
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.is_empty() {
        return Vec::new();
    }
    let width = (hi - lo) / bins as f64;
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|i| HistogramBin {
            lo: lo + width * i as f64,
            hi: if i + 1 == bins { hi } else { lo + width * (i + 1) as f64 },
            count: 0,
        })
        .collect();
    for &v in values {
        let i = if width > 0.0 {
            (((v - lo) / width).floor() as usize).min(bins - 1)
        } else {
            0
        };
        out[i].count += 1;
    }
    out
}

/// `V_𝒯²/n_eff` under zero nuisance for each Design A replication.
pub fn variance_ratio_histogram(config: &McConfig, n: usize, bins: usize) -> Result<VarianceRatioHistogram, Error> {
    if config.design() != Design::A {
        return Err(SimError::InvalidParameter(format!(
            "variance-ratio histogram is defined for design A, not {}",
            config.design()
        ))
        .into());
    }
    if bins == 0 || config.reps == 0 || config.workers == 0 {
        return Err(SimError::InvalidParameter("bins, R and workers must be at least 1".into()).into());
    }
    config.spec(n, 0).validate()?;
    let per_rep: Vec<(f64, Option<f64>)> = pool(config.workers)?.install(|| {
        (0..config.reps as u64)
            .into_par_iter()
            .map(|rep| -> Result<(f64, Option<f64>), Error> {
                let trial = generate_trial(&config.spec(n, rep))?;
                let trace = oracle_variance_trace(&trial, &trial.plan, &zero_nuisance())?;
                Ok((trace.ratio, trial.regime))
            })
            .collect::<Result<Vec<_>, Error>>()
    })?;
    let values: Vec<f64> = per_rep.iter().map(|v| v.0).collect();
    Ok(VarianceRatioHistogram {
        bins: bin_values(&values, bins),
        values,
        regimes: per_rep.into_iter().map(|v| v.1).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::{quantile, Reference};

    #[test]
    fn mcse_examples() {
        assert!((mcse(0.5, 100) - 0.05).abs() < 1e-15);
        assert!((mcse(0.955, 1000) - 0.006_555_5).abs() < 1e-6);
        assert_eq!(mcse(0.0, 7), 0.0);
        assert_eq!(mcse(1.0, 7), 0.0);
    }

    #[test]
    fn method_labels_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.label().parse::<Method>().unwrap(), m);
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(serde_json::from_str::<Method>(&json).unwrap(), m);
        }
        assert!("SN-foo".parse::<Method>().is_err());
    }

    #[test]
    fn invalid_method_design_combination() {
        let mut cfg = McConfig::new(Design::B, vec![250], 2, 1);
        cfg.methods = vec![Method::RegimeFixed];
        assert!(matches!(
            run_design(&cfg),
            Err(Error::Sim(SimError::MethodNotForDesign { .. }))
        ));
        cfg.methods = vec![Method::SnIpwAssume0p5];
        assert!(run_design(&cfg).is_err());
        let mut cfg = McConfig::new(Design::A, vec![250], 0, 1);
        assert!(run_design(&cfg).is_err());
        cfg.reps = 1;
        cfg.workers = 0;
        assert!(run_design(&cfg).is_err());
    }

    #[test]
    fn single_replication_smoke() {
        for design in Design::ALL {
            let mut cfg = McConfig::new(design, vec![300], 1, 4);
            if let DesignParams::D(d) = &mut cfg.params {
                d.theta0_draws = 10_000;
            }
            let table = run_design(&cfg).unwrap();
            for row in table.rows.iter().filter(|r| r.regime.is_none()) {
                assert!(row.coverage == 0.0 || row.coverage == 1.0);
                assert_eq!(row.mcse, 0.0);
                assert_eq!(row.reps, 1);
                assert!(row.avg_length >= 0.0);
            }
        }
    }

    #[test]
    fn fixed_v_length_is_deterministic() {
        let cfg = McConfig::new(Design::B, vec![500], 20, 9);
        let table = run_design(&cfg).unwrap();
        let row = table.row(500, Method::FixedV, None).unwrap();
        let z = quantile(Reference::StdNormal, 0.975).unwrap();
        let expected = 2.0 * z * (17.5f64 / 500.0).sqrt();
        assert!((row.avg_length - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn regime_rows_partition_replications() {
        let cfg = McConfig::new(Design::A, vec![250], 60, 2);
        let table = run_design(&cfg).unwrap();
        for m in &cfg.methods {
            let total: usize = table
                .rows
                .iter()
                .filter(|r| r.method == m.label() && r.regime.is_some())
                .map(|r| r.reps)
                .sum();
            assert_eq!(total, 60);
        }
    }

    #[test]
    fn worker_count_invariance() {
        let mut cfg = McConfig::new(Design::C2, vec![200, 400], 12, 3);
        let one = run_design(&cfg).unwrap();
        cfg.workers = 4;
        let four = run_design(&cfg).unwrap();
        assert_eq!(one.to_csv(), four.to_csv());
        assert_eq!(one, four);
    }

    #[test]
    fn csv_layout() {
        let cfg = McConfig::new(Design::B, vec![250], 3, 1);
        let csv = run_design(&cfg).unwrap().to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first.len(), 12);
        assert_eq!(first[0], "B");
        assert_eq!(first[3], "Fixed-V");
        assert_eq!(first[9], "");
    }

    #[test]
    fn histogram_binning() {
        let values = [16.25, 46.25, 16.25, 46.25, 46.25];
        let one = bin_values(&values, 1);
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].count, 5);
        let many = bin_values(&values, 10);
        assert_eq!(many[0].count, 2);
        assert_eq!(many[9].count, 3);
        assert_eq!(many[9].hi, 46.25);
        assert_eq!(bin_values(&[3.0, 3.0], 4)[0].count, 2);
    }

    #[test]
    fn histogram_requires_design_a() {
        let cfg = McConfig::new(Design::B, vec![250], 2, 1);
        assert!(variance_ratio_histogram(&cfg, 250, 10).is_err());
        let cfg = McConfig::new(Design::A, vec![250], 20, 1);
        let h = variance_ratio_histogram(&cfg, 250, 1).unwrap();
        assert_eq!(h.bins[0].count, 20);
    }
}
