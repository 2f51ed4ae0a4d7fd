//! Outcome regressions `m̂_a` fitted under the forward discipline.
//!
//! In forward mode the pair used on block `I_k` is trained only on units in
//! `I_1 ∪ … ∪ I_{k-1}` and then frozen for the whole block. Every fit is
//! recorded in a [`FitLedger`] so predictability can be audited from the
//! ledger alone. The leaky and naive cross-fitting modes exist as stress-test
//! baselines and are expected to fail that audit.

mod ridge;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{FitError, LogError};
use crate::experiment_log::{ExperimentLog, ForwardPlan, UnitRecord};

pub use ridge::{solve_ridge, RidgeSolution};

/// Deterministic feature expansion applied to covariates before the ridge fit.
/// An unpenalized intercept is always added by the solver.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureMap {
    /// No features: the fit is the arm mean.
    Constant,
    Raw,
    /// 0-based covariate columns to keep.
    Subset { cols: Vec<usize> },
    /// Raw covariates, their squares, and `sin(x1)`.
    RawSquaresSin,
}

impl FeatureMap {
    pub fn id(&self) -> String {
        match self {
            FeatureMap::Constant => "constant".into(),
            FeatureMap::Raw => "raw".into(),
            FeatureMap::Subset { cols } => {
                let cols: Vec<String> = cols.iter().map(|c| format!("x{}", c + 1)).collect();
                format!("subset[{}]", cols.join(","))
            }
            FeatureMap::RawSquaresSin => "raw+squares+sin_x1".into(),
        }
    }

    pub fn dim(&self, p: usize) -> usize {
        match self {
            FeatureMap::Constant => 0,
            FeatureMap::Raw => p,
            FeatureMap::Subset { cols } => cols.len(),
            FeatureMap::RawSquaresSin => 2 * p + usize::from(p > 0),
        }
    }

    pub fn check(&self, p: usize) -> Result<(), FitError> {
        if let FeatureMap::Subset { cols } = self {
            if let Some(&index) = cols.iter().find(|&&c| c >= p) {
                return Err(FitError::FeatureIndex {
                    map: self.id(),
                    index,
                    p,
                });
            }
        }
        Ok(())
    }

    pub fn expand(&self, x: &[f64]) -> Vec<f64> {
        match self {
            FeatureMap::Constant => Vec::new(),
            FeatureMap::Raw => x.to_vec(),
            FeatureMap::Subset { cols } => cols.iter().map(|&c| x[c]).collect(),
            FeatureMap::RawSquaresSin => {
                let mut f = Vec::with_capacity(2 * x.len() + 1);
                f.extend_from_slice(x);
                f.extend(x.iter().map(|v| v * v));
                if let Some(x1) = x.first() {
                    f.push(x1.sin());
                }
                f
            }
        }
    }
}

/// Affine predictor over a feature map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub feature_map: FeatureMap,
    pub ridge_lambda: f64,
}

impl LinearModel {
    pub fn feature_map_id(&self) -> String {
        self.feature_map.id()
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let f = self.feature_map.expand(x);
        self.intercept + f.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>()
    }
}

/// Ridge fit on raw feature rows (identity feature map).
pub fn fit_ridge(features: &[Vec<f64>], targets: &[f64], lambda: f64) -> Result<LinearModel, FitError> {
    let sol = solve_ridge(features, targets, lambda)?;
    Ok(LinearModel {
        weights: sol.weights,
        intercept: sol.intercept,
        feature_map: FeatureMap::Raw,
        ridge_lambda: lambda,
    })
}

/// Ridge fit of `y` on `map(x)`.
pub fn fit_linear(map: &FeatureMap, xs: &[&[f64]], ys: &[f64], lambda: f64) -> Result<LinearModel, FitError> {
    let rows: Vec<Vec<f64>> = xs.iter().map(|x| map.expand(x)).collect();
    let sol = solve_ridge(&rows, ys, lambda)?;
    Ok(LinearModel {
        weights: sol.weights,
        intercept: sol.intercept,
        feature_map: map.clone(),
        ridge_lambda: lambda,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regressor {
    Linear(LinearModel),
    Constant { value: f64 },
}

impl Regressor {
    pub fn predict(&self, x: &[f64]) -> f64 {
        match self {
            Regressor::Linear(m) => m.predict(x),
            Regressor::Constant { value } => *value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelPair {
    pub m0: Regressor,
    pub m1: Regressor,
}

impl ModelPair {
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        (self.m0.predict(x), self.m1.predict(x))
    }

    /// Point prediction of the treatment effect `m̂1(x) − m̂0(x)`.
    pub fn effect(&self, x: &[f64], clamp: Option<ClampBounds>) -> f64 {
        let (m0, m1) = self.predict(x);
        match clamp {
            Some(c) => c.apply(m1) - c.apply(m0),
            None => m1 - m0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClampBounds {
    pub lo: f64,
    pub hi: f64,
}

impl ClampBounds {
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo <= hi, "clamp bounds must satisfy lo <= hi");
        Self { lo, hi }
    }

    pub fn apply(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NuisanceMode {
    Forward,
    LeakyFull,
    /// K-fold cross-fitting by index modulo K, ignoring time order.
    NaiveCrossFit,
    Zero,
    Oracle,
}

impl fmt::Display for NuisanceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            NuisanceMode::Forward => "forward",
            NuisanceMode::LeakyFull => "leaky_full",
            NuisanceMode::NaiveCrossFit => "naive_cross_fit",
            NuisanceMode::Zero => "zero",
            NuisanceMode::Oracle => "oracle",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for NuisanceMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "forward" => Ok(NuisanceMode::Forward),
            "leaky_full" | "leaky" => Ok(NuisanceMode::LeakyFull),
            "naive_cross_fit" | "naive" => Ok(NuisanceMode::NaiveCrossFit),
            "zero" | "ipw" => Ok(NuisanceMode::Zero),
            "oracle" => Ok(NuisanceMode::Oracle),
            other => Err(format!("unknown nuisance mode `{other}`")),
        }
    }
}

/// True regression pair `x ↦ (m0*(x), m1*(x))`.
pub type OracleFn = Arc<dyn Fn(&[f64]) -> (f64, f64) + Send + Sync>;

#[derive(Clone)]
enum PairSource {
    /// Indexed by 1-based block id (slot 0 unused).
    PerBlock(Vec<Option<ModelPair>>),
    Single(ModelPair),
    /// Indexed by `t mod folds`.
    Folds(Vec<ModelPair>),
    Zero,
    Oracle(OracleFn),
}

/// The nuisance pairs a score series is evaluated with.
#[derive(Clone)]
pub struct NuisanceFitSet {
    mode: NuisanceMode,
    clamp: Option<ClampBounds>,
    source: PairSource,
}

impl fmt::Debug for NuisanceFitSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NuisanceFitSet")
            .field("mode", &self.mode)
            .field("clamp", &self.clamp)
            .finish_non_exhaustive()
    }
}

impl NuisanceFitSet {
    pub fn mode(&self) -> NuisanceMode {
        self.mode
    }

    pub fn clamp(&self) -> Option<ClampBounds> {
        self.clamp
    }

    pub fn with_clamp(mut self, clamp: Option<ClampBounds>) -> Self {
        self.clamp = clamp;
        self
    }

    /// Forward-mode pair frozen for block `k`, if one was fitted.
    pub fn block_pair(&self, k: usize) -> Option<&ModelPair> {
        match &self.source {
            PairSource::PerBlock(v) => v.get(k).and_then(Option::as_ref),
            PairSource::Single(p) => Some(p),
            _ => None,
        }
    }

    /// Clamped `(m̂0(x), m̂1(x))` for unit `t` lying in block `block`.
    pub fn predict(&self, t: usize, block: usize, x: &[f64]) -> Result<(f64, f64), FitError> {
        let (m0, m1) = match &self.source {
            PairSource::PerBlock(v) => v
                .get(block)
                .and_then(Option::as_ref)
                .ok_or(FitError::MissingBlockFit(block))?
                .predict(x),
            PairSource::Single(p) => p.predict(x),
            PairSource::Folds(pairs) => pairs[t % pairs.len()].predict(x),
            PairSource::Zero => (0.0, 0.0),
            PairSource::Oracle(f) => f(x),
        };
        Ok(match self.clamp {
            Some(c) => (c.apply(m0), c.apply(m1)),
            None => (m0, m1),
        })
    }
}

/// Learner settings shared by every fit in a set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub feature_map: FeatureMap,
    pub ridge_lambda: f64,
    pub clamp: Option<ClampBounds>,
    /// Predict the pooled prior mean (or 0 with no prior data) when an arm
    /// has no training units.
    pub fallback: bool,
    /// Recorded in the ledger; ridge fits themselves are deterministic.
    pub seed: u64,
}

impl LearnerConfig {
    /// Plain linear regression on raw covariates with numerical jitter.
    pub fn linear() -> Self {
        Self {
            feature_map: FeatureMap::Raw,
            ridge_lambda: 1e-8,
            clamp: None,
            fallback: true,
            seed: 0,
        }
    }

    pub fn ridge(feature_map: FeatureMap, ridge_lambda: f64) -> Self {
        Self {
            feature_map,
            ridge_lambda,
            ..Self::linear()
        }
    }

    pub fn with_clamp(mut self, clamp: Option<ClampBounds>) -> Self {
        self.clamp = clamp;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitKind {
    Ridge,
    /// Arm had no training units; predicts the pooled prior outcome mean.
    FallbackMean,
    /// No training units at all; predicts 0.
    FallbackZero,
    /// Data-free nuisance (zero or oracle).
    Fixed,
}

/// One ledger line: which data the model used on a block was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    /// Append counter.
    pub order: usize,
    pub block: usize,
    pub arm: u8,
    pub mode: NuisanceMode,
    pub kind: FitKind,
    /// Inclusive 1-based index ranges of the data window the fit could see.
    pub train: Vec<[usize; 2]>,
    /// Units of this arm actually used.
    pub n_train: usize,
    pub learner: String,
    pub ridge_lambda: f64,
    pub seed: u64,
    pub clamp: Option<[f64; 2]>,
}

impl FitRecord {
    pub fn max_train(&self) -> Option<usize> {
        self.train.iter().map(|r| r[1]).max()
    }

    /// Training indices that fall inside `range`.
    pub fn overlap(&self, range: &std::ops::RangeInclusive<usize>) -> Vec<usize> {
        let mut hits = Vec::new();
        for r in &self.train {
            let lo = r[0].max(*range.start());
            let hi = r[1].min(*range.end());
            hits.extend(lo..=hi);
        }
        hits
    }
}

/// Append-only provenance log of nuisance fits.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitLedger {
    entries: Vec<FitRecord>,
}

impl FitLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, mut record: FitRecord) {
        record.order = self.entries.len();
        self.entries.push(record);
    }

    pub fn entries(&self) -> &[FitRecord] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Ledger for a data-free nuisance: one empty-training entry per scored
    /// block and arm.
    pub fn for_fixed(plan: &ForwardPlan, mode: NuisanceMode) -> Self {
        let mut ledger = Self::new();
        for block in plan.scored_blocks() {
            for arm in [0u8, 1] {
                ledger.push(FitRecord {
                    order: 0,
                    block,
                    arm,
                    mode,
                    kind: FitKind::Fixed,
                    train: Vec::new(),
                    n_train: 0,
                    learner: mode.to_string(),
                    ridge_lambda: 0.0,
                    seed: 0,
                    clamp: None,
                });
            }
        }
        ledger
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("ledger entries serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, LogError> {
        let mut ledger = Self::new();
        for (i, line) in text.lines().filter(|l| !l.trim().is_empty()).enumerate() {
            let rec: FitRecord = serde_json::from_str(line).map_err(|e| LogError::Malformed {
                row: i + 1,
                field: "fit".into(),
                reason: e.to_string(),
            })?;
            ledger.entries.push(rec);
        }
        Ok(ledger)
    }
}

fn clamp_array(c: Option<ClampBounds>) -> Option<[f64; 2]> {
    c.map(|c| [c.lo, c.hi])
}

fn fit_arm(
    units: &[&UnitRecord],
    arm: u8,
    pooled_mean: Option<f64>,
    config: &LearnerConfig,
    block: usize,
) -> Result<(Regressor, FitKind, usize), FitError> {
    let (xs, ys): (Vec<&[f64]>, Vec<f64>) = units
        .iter()
        .filter(|r| r.a == arm)
        .map(|r| (r.x.as_slice(), r.y))
        .unzip();
    if xs.is_empty() {
        if !config.fallback {
            return Err(FitError::NoPriorData { block, arm });
        }
        return Ok(match pooled_mean {
            Some(value) => (Regressor::Constant { value }, FitKind::FallbackMean, 0),
            None => (Regressor::Constant { value: 0.0 }, FitKind::FallbackZero, 0),
        });
    }
    let model = fit_linear(&config.feature_map, &xs, &ys, config.ridge_lambda)?;
    Ok((Regressor::Linear(model), FitKind::Ridge, xs.len()))
}

/// Fits the pair for a block from the given training units, returning the
/// pair and one ledger record per arm (order counters unset).
pub fn fit_pair_on(
    units: &[&UnitRecord],
    train: Vec<[usize; 2]>,
    block: usize,
    mode: NuisanceMode,
    config: &LearnerConfig,
) -> Result<(ModelPair, [FitRecord; 2]), FitError> {
    let pooled_mean = if units.is_empty() {
        None
    } else {
        Some(units.iter().map(|r| r.y).sum::<f64>() / units.len() as f64)
    };
    let (m0, k0, n0) = fit_arm(units, 0, pooled_mean, config, block)?;
    let (m1, k1, n1) = fit_arm(units, 1, pooled_mean, config, block)?;
    let record = |arm, kind, n_train| FitRecord {
        order: 0,
        block,
        arm,
        mode,
        kind,
        train: train.clone(),
        n_train,
        learner: config.feature_map.id(),
        ridge_lambda: config.ridge_lambda,
        seed: config.seed,
        clamp: clamp_array(config.clamp),
    };
    let records = [record(0, k0, n0), record(1, k1, n1)];
    Ok((ModelPair { m0, m1 }, records))
}

/// Forward pair for a block starting at unit `start`, trained on the prefix
/// `records[..start-1]`.
pub fn fit_forward_block(
    prefix: &[UnitRecord],
    block: usize,
    config: &LearnerConfig,
) -> Result<(ModelPair, [FitRecord; 2]), FitError> {
    let units: Vec<&UnitRecord> = prefix.iter().collect();
    let train = if prefix.is_empty() {
        Vec::new()
    } else {
        vec![[1, prefix.len()]]
    };
    fit_pair_on(&units, train, block, NuisanceMode::Forward, config)
}

fn check_inputs(log: &ExperimentLog, plan: &ForwardPlan, config: &LearnerConfig) -> Result<(), FitError> {
    if plan.n != log.len() {
        return Err(FitError::HorizonMismatch {
            plan: plan.n,
            log: log.len(),
        });
    }
    config.feature_map.check(log.dim())
}

/// Forward cross-fitting: the pair for scored block `I_k` sees only
/// `I_1 ∪ … ∪ I_{k-1}`, fitted separately per arm, and is frozen across `I_k`.
pub fn fit_forward(
    log: &ExperimentLog,
    plan: &ForwardPlan,
    config: &LearnerConfig,
) -> Result<(NuisanceFitSet, FitLedger), FitError> {
    if plan.k() < 2 {
        return Err(FitError::TooFewBlocks(plan.k()));
    }
    check_inputs(log, plan, config)?;
    let mut per_block = vec![None; plan.k() + 1];
    let mut ledger = FitLedger::new();
    for k in plan.scored_blocks() {
        let start = *plan.block(k).start();
        let (pair, records) = fit_forward_block(&log.records()[..start - 1], k, config)?;
        per_block[k] = Some(pair);
        records.into_iter().for_each(|r| ledger.push(r));
    }
    Ok((
        NuisanceFitSet {
            mode: NuisanceMode::Forward,
            clamp: config.clamp,
            source: PairSource::PerBlock(per_block),
        },
        ledger,
    ))
}

/// One pair fitted on all `n` units and reused on every scored block.
/// Violates predictability on purpose.
pub fn fit_leaky_full(
    log: &ExperimentLog,
    plan: &ForwardPlan,
    config: &LearnerConfig,
) -> Result<(NuisanceFitSet, FitLedger), FitError> {
    check_inputs(log, plan, config)?;
    if log.is_empty() {
        return Err(FitError::EmptyTrainingSet);
    }
    let units: Vec<&UnitRecord> = log.records().iter().collect();
    let (pair, records) = fit_pair_on(&units, vec![[1, log.len()]], 0, NuisanceMode::LeakyFull, config)?;
    let mut ledger = FitLedger::new();
    for k in plan.scored_blocks() {
        for r in &records {
            ledger.push(FitRecord { block: k, ..r.clone() });
        }
    }
    Ok((
        NuisanceFitSet {
            mode: NuisanceMode::LeakyFull,
            clamp: config.clamp,
            source: PairSource::Single(pair),
        },
        ledger,
    ))
}

/// i.i.d.-style cross-fitting: unit `t` is scored with the pair trained on
/// all units whose index differs from `t` modulo `folds`, past and future.
pub fn fit_naive_cross_fit(
    log: &ExperimentLog,
    plan: &ForwardPlan,
    config: &LearnerConfig,
    folds: usize,
) -> Result<(NuisanceFitSet, FitLedger), FitError> {
    check_inputs(log, plan, config)?;
    assert!(folds >= 2, "cross-fitting needs at least 2 folds");
    let n = log.len();
    let mut pairs = Vec::with_capacity(folds);
    let mut fold_records = Vec::with_capacity(folds);
    for f in 0..folds {
        let units: Vec<&UnitRecord> = log.records().iter().filter(|r| r.t % folds != f).collect();
        let train = index_ranges((1..=n).filter(|t| t % folds != f));
        let (pair, records) = fit_pair_on(&units, train, 0, NuisanceMode::NaiveCrossFit, config)?;
        pairs.push(pair);
        fold_records.push(records);
    }
    let mut ledger = FitLedger::new();
    for k in plan.scored_blocks() {
        let block = plan.block(k);
        let used: Vec<usize> = (0..folds).filter(|f| block.clone().any(|t| t % folds == *f)).collect();
        let mut seen = vec![false; n + 1];
        for &f in &used {
            (1..=n).filter(|t| t % folds != f).for_each(|t| seen[t] = true);
        }
        let train = index_ranges((1..=n).filter(|&t| seen[t]));
        for arm in [0u8, 1] {
            let template = &fold_records[used[0]][arm as usize];
            let n_train = used.iter().map(|&f| fold_records[f][arm as usize].n_train).max().unwrap_or(0);
            ledger.push(FitRecord {
                block: k,
                train: train.clone(),
                n_train,
                ..template.clone()
            });
        }
    }
    Ok((
        NuisanceFitSet {
            mode: NuisanceMode::NaiveCrossFit,
            clamp: config.clamp,
            source: PairSource::Folds(pairs),
        },
        ledger,
    ))
}

/// `m̂0 ≡ m̂1 ≡ 0`: the AIPW score reduces to the IPW score.
pub fn zero_nuisance() -> NuisanceFitSet {
    NuisanceFitSet {
        mode: NuisanceMode::Zero,
        clamp: None,
        source: PairSource::Zero,
    }
}

pub fn oracle_nuisance(truth: OracleFn) -> NuisanceFitSet {
    NuisanceFitSet {
        mode: NuisanceMode::Oracle,
        clamp: None,
        source: PairSource::Oracle(truth),
    }
}

/// Compresses a sorted index stream into inclusive ranges.
fn index_ranges(indices: impl Iterator<Item = usize>) -> Vec<[usize; 2]> {
    let mut out: Vec<[usize; 2]> = Vec::new();
    for t in indices {
        match out.last_mut() {
            Some(r) if r[1] + 1 == t => r[1] = t,
            _ => out.push([t, t]),
        }
    }
    out
}
