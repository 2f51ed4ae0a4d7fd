use nalgebra::{DMatrix, DVector};

use crate::error::FitError;

/// Coefficients of an affine predictor `b + w·z`.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeSolution {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

/// Minimizes `‖y − (Zw + b)‖² + λ‖w‖²` with an unpenalized intercept.
///
/// Columns and targets are centered, which eliminates `b`; the remaining
/// `d × d` normal equations `(ZcᵀZc + λI) w = Zcᵀyc` are solved by Cholesky.
/// At `λ = 0` a (numerically) rank-deficient design is reported instead of
/// returning an arbitrary solution.
pub fn solve_ridge(rows: &[Vec<f64>], targets: &[f64], lambda: f64) -> Result<RidgeSolution, FitError> {
    if rows.len() != targets.len() {
        return Err(FitError::ShapeMismatch {
            rows: rows.len(),
            targets: targets.len(),
        });
    }
    if rows.is_empty() {
        return Err(FitError::EmptyTrainingSet);
    }
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(FitError::InvalidLambda(lambda));
    }
    let n = rows.len();
    let d = rows[0].len();
    if let Some(bad) = rows.iter().find(|r| r.len() != d) {
        return Err(FitError::ShapeMismatch {
            rows: bad.len(),
            targets: d,
        });
    }

    let inv_n = 1.0 / n as f64;
    let y_mean = targets.iter().sum::<f64>() * inv_n;
    if d == 0 {
        return Ok(RidgeSolution {
            weights: Vec::new(),
            intercept: y_mean,
        });
    }

    let mut z_mean = vec![0.0; d];
    for r in rows {
        for (m, v) in z_mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    z_mean.iter_mut().for_each(|m| *m *= inv_n);

    let zc = DMatrix::from_fn(n, d, |i, j| rows[i][j] - z_mean[j]);
    let yc = DVector::from_iterator(n, targets.iter().map(|y| y - y_mean));

    let mut gram = zc.tr_mul(&zc);
    let scale = gram.diagonal().iter().cloned().fold(0.0_f64, f64::max);
    for j in 0..d {
        gram[(j, j)] += lambda;
    }
    let rhs = zc.tr_mul(&yc);

    let chol = gram
        .cholesky()
        .ok_or(FitError::RankDeficient { lambda, dim: d })?;
    if lambda == 0.0 {
        let l = chol.l_dirty();
        let tiny = 1e-12 * scale.max(f64::MIN_POSITIVE);
        if (0..d).any(|j| l[(j, j)] * l[(j, j)] <= tiny) {
            return Err(FitError::RankDeficient { lambda, dim: d });
        }
    }
    let w = chol.solve(&rhs);
    let intercept = y_mean - w.iter().zip(&z_mean).map(|(wj, mj)| wj * mj).sum::<f64>();
    Ok(RidgeSolution {
        weights: w.iter().copied().collect(),
        intercept,
    })
}
