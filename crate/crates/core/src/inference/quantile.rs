use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::InferenceError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reference {
    StdNormal,
    StudentT { df: f64 },
}

/// Inverse CDF of the standard normal or a standard Student-t.
pub fn quantile(dist: Reference, p: f64) -> Result<f64, InferenceError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(InferenceError::InvalidProbability(p));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    match dist {
        Reference::StdNormal => Ok(Normal::standard().inverse_cdf(p)),
        Reference::StudentT { df } => {
            if !(df >= 1.0) {
                return Err(InferenceError::InvalidDf(df));
            }
            let t = StudentsT::new(0.0, 1.0, df).map_err(|_| InferenceError::InvalidDf(df))?;
            Ok(t.inverse_cdf(p))
        }
    }
}

pub fn normal_cdf(z: f64) -> f64 {
    Normal::standard().cdf(z)
}
