//! Self-normalized AIPW inference for adaptive experiments.
//!
//! The pipeline is: load an [`experiment_log::ExperimentLog`], fix a
//! [`experiment_log::ForwardPlan`], fit outcome regressions block by block
//! ([`nuisance`]), turn each scored unit into a pseudo-outcome ([`scoring`]),
//! and report a studentized Wald interval ([`inference`]). The [`audit`]
//! module checks the logging contract the interval relies on; [`simlab`] and
//! [`mc_engine`] provide the simulated designs and the coverage study.

pub mod audit;
pub mod cli;
pub mod error;
pub mod experiment_log;
pub mod inference;
pub mod mc_engine;
pub mod nuisance;
pub mod scoring;
pub mod simlab;

pub use error::{Error, Result};
pub use experiment_log::{load_log, make_burnin_plan, make_forward_plan, ExperimentLog, ForwardPlan, UnitRecord};
pub use inference::{fixed_v_interval, qv_report, sn_interval, Critical, InferenceReport, QvReport};
pub use scoring::{aipw_score, score_series, ScoreSeries};
