//! Exact Gaussian-process regression with a squared-exponential kernel and
//! fixed hyperparameters.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Diagonal jitter ladder, relative to the signal variance.
pub const JITTER_START: f64 = 1e-8;
pub const JITTER_MAX: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct GaussianProcess {
    pub lengthscale: f64,
    pub signal_var: f64,
    pub jitter: f64,
    x_mean: Vec<f64>,
    x_scale: Vec<f64>,
    train: Vec<Vec<f64>>,
    y_mean: f64,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl GaussianProcess {
    /// Inputs are standardized per column using the training rows; the
    /// lengthscale defaults to `sqrt(dim) / 2` and the signal variance is the
    /// population variance of the targets.
    pub fn fit(rows: &[Vec<f64>], y: &[f64], lengthscale: Option<f64>) -> Result<Self> {
        if rows.len() != y.len() {
            return Err(Error::LengthMismatch {
                left: rows.len(),
                right: y.len(),
            });
        }
        if rows.is_empty() {
            return Err(Error::EmptyInput("no GP training rows"));
        }
        let n = rows.len();
        let d = rows[0].len();
        let x_mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
        let x_scale: Vec<f64> = (0..d)
            .map(|j| {
                let v = rows.iter().map(|r| (r[j] - x_mean[j]).powi(2)).sum::<f64>() / n as f64;
                if v > 1e-24 {
                    v.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        let train: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.iter().enumerate().map(|(j, v)| (v - x_mean[j]) / x_scale[j]).collect())
            .collect();
        let y_mean = y.iter().sum::<f64>() / n as f64;
        let signal_var = (y.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / n as f64).max(1e-12);
        let lengthscale = lengthscale.unwrap_or((d as f64).sqrt() / 2.0).max(1e-12);
        let inv2l2 = 0.5 / (lengthscale * lengthscale);
        let base = DMatrix::from_fn(n, n, |i, j| signal_var * (-sq_dist(&train[i], &train[j]) * inv2l2).exp());
        let resid = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
        let mut jitter = JITTER_START;
        loop {
            let mut k = base.clone();
            for i in 0..n {
                k[(i, i)] += jitter * signal_var;
            }
            if let Some(chol) = Cholesky::new(k) {
                let alpha = chol.solve(&resid);
                return Ok(Self {
                    lengthscale,
                    signal_var,
                    jitter,
                    x_mean,
                    x_scale,
                    train,
                    y_mean,
                    chol,
                    alpha,
                });
            }
            if jitter >= JITTER_MAX {
                return Err(Error::CovarianceFactorization { jitter });
            }
            jitter *= 10.0;
        }
    }

    fn kernel_vector(&self, row: &[f64]) -> DVector<f64> {
        let x: Vec<f64> = row
            .iter()
            .enumerate()
            .map(|(j, v)| (v - self.x_mean[j]) / self.x_scale[j])
            .collect();
        let inv2l2 = 0.5 / (self.lengthscale * self.lengthscale);
        DVector::from_iterator(
            self.train.len(),
            self.train.iter().map(|t| self.signal_var * (-sq_dist(t, &x) * inv2l2).exp()),
        )
    }

    /// Posterior mean and variance (noise-free latent function).
    pub fn predict(&self, row: &[f64]) -> (f64, f64) {
        let k = self.kernel_vector(row);
        let mean = self.y_mean + k.dot(&self.alpha);
        let v = self.chol.l().solve_lower_triangular(&k).expect("Cholesky factor is nonsingular");
        let var = (self.signal_var - v.dot(&v)).max(0.0);
        (mean, var)
    }
}
