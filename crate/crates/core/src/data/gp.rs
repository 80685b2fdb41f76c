//! Gaussian process sampling through a jittered Cholesky factor.

use crate::array::RealArray;
use crate::error::{dim_err, Error, Result};
use crate::linalg::{min_eigenvalue, Cholesky};
use crate::rng::{fill_standard_normal, Rng};

/// Diagonal inflations tried in order; the first entry factors
/// positive semi-definite matrices without modification.
pub const JITTER_SCHEDULE: [f64; 6] = [0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

/// A covariance factor together with the jitter that produced it.
#[derive(Debug, Clone)]
pub struct CovarianceFactor {
    pub cholesky: Cholesky,
    pub jitter: f64,
}

fn reconstruction_ok(a: &RealArray, c: &Cholesky, jitter: f64) -> bool {
    let n = c.dim();
    let scale = (0..n).map(|i| a.get(i, i).abs()).fold(0.0, f64::max).max(1e-300);
    for i in 0..n {
        for j in 0..=i {
            let mut s = 0.0;
            for k in 0..=j {
                s += c.get(i, k) * c.get(j, k);
            }
            let target = a.get(i, j) + if i == j { jitter } else { 0.0 };
            if (s - target).abs() > 1e-9 * scale + 4.0 * jitter {
                return false;
            }
        }
    }
    true
}

/// Factors `cov + jitter·I`, escalating the jitter along
/// [`JITTER_SCHEDULE`].
pub fn factor_covariance(cov: &RealArray) -> Result<CovarianceFactor> {
    let n = cov.rows();
    if cov.shape().len() != 2 || cov.cols() != n || n == 0 {
        return Err(dim_err("covariance", "non-empty n × n", format!("{:?}", cov.shape())));
    }
    if !cov.all_finite() {
        return Err(Error::NotPsd { min_eigenvalue: f64::NAN });
    }
    let scale = (0..n).map(|i| cov.get(i, i).abs()).fold(0.0, f64::max);
    for &jitter in &JITTER_SCHEDULE {
        let tol = if jitter == 0.0 { 1e-12 * scale } else { 0.0 };
        if let Some(c) = Cholesky::factor(cov, jitter, tol)? {
            if reconstruction_ok(cov, &c, jitter) {
                return Ok(CovarianceFactor { cholesky: c, jitter });
            }
        }
    }
    Err(Error::NotPsd { min_eigenvalue: min_eigenvalue(cov)? })
}

/// Draws `n_samples` rows `mean + L ξ`.
pub fn sample_gp(mean: &[f64], cov: &RealArray, n_samples: usize, rng: &mut Rng) -> Result<RealArray> {
    if mean.len() != cov.rows() {
        return Err(dim_err("sample_gp mean", cov.rows(), mean.len()));
    }
    let factor = factor_covariance(cov)?;
    Ok(sample_with_factor(mean, &factor.cholesky, n_samples, rng))
}

pub fn sample_with_factor(mean: &[f64], chol: &Cholesky, n_samples: usize, rng: &mut Rng) -> RealArray {
    let n = mean.len();
    let mut out = Vec::with_capacity(n_samples * n);
    let mut xi = vec![0.0; n];
    for _ in 0..n_samples {
        fill_standard_normal(rng, &mut xi);
        let lx = chol.mul_lower(&xi);
        out.extend(mean.iter().zip(lx).map(|(m, v)| m + v));
    }
    RealArray::matrix(n_samples, n, out).expect("sized")
}

/// Empirical covariance of the rows of `samples` (1/n normalization).
pub fn empirical_covariance(samples: &RealArray) -> RealArray {
    let (m, n) = (samples.rows(), samples.cols());
    let mut mean = vec![0.0; n];
    for r in 0..m {
        for (acc, v) in mean.iter_mut().zip(samples.row(r)) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= m as f64);
    let mut cov = RealArray::zeros(&[n, n]);
    for r in 0..m {
        let row = samples.row(r);
        for i in 0..n {
            let di = row[i] - mean[i];
            for j in 0..n {
                let v = cov.get(i, j) + di * (row[j] - mean[j]);
                cov.set(i, j, v);
            }
        }
    }
    cov.map(|v| v / m as f64)
}

pub fn relative_frobenius(a: &RealArray, b: &RealArray) -> f64 {
    let num: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.data().iter().map(|y| y * y).sum();
    (num / den).sqrt()
}
