//! Squared-exponential kernel and the benchmark mean functions.

use serde::{Deserialize, Serialize};

use crate::array::RealArray;
use crate::error::{Error, Result};

/// Mean function of a Gaussian process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MeanFunction {
    #[default]
    Zero,
    /// `(6x − 2)² sin(12x − 4)`
    HighFidelity,
    /// `0.5 μ_H(x) + 10(x − 0.5) − 5`
    LowFidelity,
}

impl MeanFunction {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            MeanFunction::Zero => 0.0,
            MeanFunction::HighFidelity => mu_high(x),
            MeanFunction::LowFidelity => mu_low(x),
        }
    }
}

pub fn mu_high(x: f64) -> f64 {
    (6.0 * x - 2.0).powi(2) * (12.0 * x - 4.0).sin()
}

pub fn mu_low(x: f64) -> f64 {
    0.5 * mu_high(x) + 10.0 * (x - 0.5) - 5.0
}

/// Squared-exponential GP prior: signal variance `sigma_f2`, squared
/// length-scale `l2` and a mean function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpSpec {
    pub sigma_f2: f64,
    pub l2: f64,
    #[serde(default)]
    pub mean: MeanFunction,
}

impl GpSpec {
    pub fn new(sigma_f2: f64, l2: f64, mean: MeanFunction) -> Result<Self> {
        let spec = Self { sigma_f2, l2, mean };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_f2 > 0.0 && self.sigma_f2.is_finite()) {
            return Err(Error::Config(format!("sigma_f2 must be positive, got {}", self.sigma_f2)));
        }
        if !(self.l2 > 0.0 && self.l2.is_finite()) {
            return Err(Error::Config(format!("l2 must be positive, got {}", self.l2)));
        }
        Ok(())
    }

    pub fn kernel(&self, x: f64, xp: f64) -> f64 {
        rbf_kernel(x, xp, self)
    }

    pub fn mean_vector(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.mean.eval(x)).collect()
    }

    /// Gram matrix `K[i, j] = k(xs[i], xs[j])`.
    pub fn gram(&self, xs: &[f64]) -> RealArray {
        self.cross(xs, xs)
    }

    /// Cross-covariance `K[i, j] = k(a[i], b[j])`.
    pub fn cross(&self, a: &[f64], b: &[f64]) -> RealArray {
        let mut data = Vec::with_capacity(a.len() * b.len());
        for &x in a {
            data.extend(b.iter().map(|&xp| self.kernel(x, xp)));
        }
        RealArray::matrix(a.len(), b.len(), data).expect("sized")
    }
}

/// `σ_f² exp(−(x − x')² / (2 l²))`
pub fn rbf_kernel(x: f64, xp: f64, spec: &GpSpec) -> f64 {
    let d = x - xp;
    spec.sigma_f2 * (-d * d / (2.0 * spec.l2)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{is_symmetric, min_eigenvalue};

    #[test]
    fn kernel_values() {
        let s = GpSpec::new(1.0, 0.5, MeanFunction::Zero).unwrap();
        assert_eq!(rbf_kernel(0.7, 0.7, &s), 1.0);
        assert!((rbf_kernel(0.0, 1.0, &s) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(rbf_kernel(0.2, -1.3, &s), rbf_kernel(-1.3, 0.2, &s));
    }

    #[test]
    fn mean_functions() {
        assert!((mu_high(0.5) - 2.0f64.sin()).abs() < 1e-14);
        assert!((mu_high(0.5) - 0.9093).abs() < 1e-4);
        assert!((mu_low(0.5) + 4.5454).abs() < 1e-4);
    }

    #[test]
    fn gram_is_symmetric_psd() {
        let s = GpSpec::new(0.5, 0.5, MeanFunction::HighFidelity).unwrap();
        let xs: Vec<f64> = (0..40).map(|i| i as f64 / 39.0).collect();
        let k = s.gram(&xs);
        assert!(is_symmetric(&k, 0.0));
        assert!(min_eigenvalue(&k).unwrap() >= -1e-8);
    }

    #[test]
    fn rejects_bad_hyperparameters() {
        assert!(GpSpec::new(0.0, 1.0, MeanFunction::Zero).is_err());
        assert!(GpSpec::new(1.0, -1.0, MeanFunction::Zero).is_err());
    }
}
