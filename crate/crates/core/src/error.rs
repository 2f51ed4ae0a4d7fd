use std::path::PathBuf;

use thiserror::Error;

/// Problems found while reading or validating an experiment log.
#[derive(Debug, Error)]
pub enum LogError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed row {row}: field `{field}`: {reason}")]
    Malformed {
        row: usize,
        field: String,
        reason: String,
    },
    #[error("propensity out of open interval (0,1) at row {row}: pi = {pi}")]
    PropensityOutOfRange { row: usize, pi: f64 },
    #[error("non-binary treatment at row {row}: a = {value}")]
    NonBinaryTreatment { row: usize, value: String },
    #[error("non-finite value at row {row}: field `{field}`")]
    NonFinite { row: usize, field: String },
    #[error("inconsistent covariate dimension at row {row}: expected {expected}, found {found}")]
    DimensionMismatch {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("time index gap/disorder at row {row}: expected t = {expected}, found t = {found}")]
    TimeOrder {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
}

/// Nuisance fitting failures.
#[derive(Debug, Error)]
pub enum FitError {
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("feature/target length mismatch: {rows} rows vs {targets} targets")]
    ShapeMismatch { rows: usize, targets: usize },
    #[error("ridge_lambda must be finite and nonnegative, got {0}")]
    InvalidLambda(f64),
    #[error("normal equations are singular at lambda = {lambda} ({dim} unknowns): features are rank deficient")]
    RankDeficient { lambda: f64, dim: usize },
    #[error("block {block} has no prior observations for arm {arm} and fallback is disabled")]
    NoPriorData { block: usize, arm: u8 },
    #[error("plan has {0} blocks; forward fitting needs at least 2")]
    TooFewBlocks(usize),
    #[error("plan horizon {plan} does not match log length {log}")]
    HorizonMismatch { plan: usize, log: usize },
    #[error("missing nuisance fit for scored block {0}")]
    MissingBlockFit(usize),
    #[error("feature map {map} needs covariate index {index} but the log has p = {p}")]
    FeatureIndex { map: String, index: usize, p: usize },
}

/// Estimation and interval construction failures.
#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("empty score series")]
    EmptySeries,
    #[error("need n_eff >= 2 for a variance estimate, got {0}")]
    TooFewScores(usize),
    #[error("alpha must lie in (0, 1], got {0}")]
    InvalidAlpha(f64),
    #[error("probability must lie in (0, 1), got {0}")]
    InvalidProbability(f64),
    #[error("degrees of freedom must be >= 1, got {0}")]
    InvalidDf(f64),
    #[error("v_fix must be positive, got {0}")]
    InvalidFixedVariance(f64),
}

/// Simulation configuration and oracle failures.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("unknown design `{0}`")]
    UnknownDesign(String),
    #[error("unknown method `{0}`")]
    UnknownMethod(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("method {method} is not available for design {design}")]
    MethodNotForDesign { method: String, design: String },
    #[error("oracle truth unavailable: {0}")]
    TruthUnavailable(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Audit(#[from] crate::audit::AuditError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization error: {0}")]
    Serde(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
