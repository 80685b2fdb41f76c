//! Two correlated Gaussian processes observed at shared sensors.

use serde::{Deserialize, Serialize};

use crate::array::RealArray;
use crate::data::gp::sample_gp;
use crate::data::kernel::{GpSpec, MeanFunction};
use crate::dataset::PairedDataset;
use crate::error::{Error, Result};
use crate::metrics::Gaussian1D;
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiFidelitySpec {
    pub low: GpSpec,
    pub high: GpSpec,
    pub rho: f64,
    pub sensors: Vec<f64>,
    pub realizations: usize,
}

impl Default for MultiFidelitySpec {
    fn default() -> Self {
        Self {
            low: GpSpec { sigma_f2: 0.1, l2: 0.5, mean: MeanFunction::LowFidelity },
            high: GpSpec { sigma_f2: 0.5, l2: 0.5, mean: MeanFunction::HighFidelity },
            rho: 0.8,
            sensors: vec![0.0, 0.4, 0.6, 1.0],
            realizations: 50,
        }
    }
}

impl MultiFidelitySpec {
    pub fn validate(&self) -> Result<()> {
        self.low.validate()?;
        self.high.validate()?;
        if self.sensors.is_empty() {
            return Err(Error::Config("sensor set is empty".into()));
        }
        if !self.rho.is_finite() {
            return Err(Error::Config("rho must be finite".into()));
        }
        if self.realizations == 0 {
            return Err(Error::Config("realizations must be positive".into()));
        }
        Ok(())
    }

    /// Stacked `[μ_L(xs), μ_H(xs)]`.
    pub fn joint_mean(&self, xs: &[f64]) -> Vec<f64> {
        let mut m = self.low.mean_vector(xs);
        m.extend(self.high.mean_vector(xs));
        m
    }

    /// Block covariance `[[K_LL, K_LH], [K_LHᵀ, K_HH]]` over `xs`.
    pub fn joint_covariance(&self, xs: &[f64]) -> RealArray {
        let n = xs.len();
        let mut c = RealArray::zeros(&[2 * n, 2 * n]);
        for i in 0..n {
            for j in 0..n {
                let kl = self.low.kernel(xs[i], xs[j]);
                let kh = self.high.kernel(xs[i], xs[j]);
                c.set(i, j, kl);
                c.set(i, n + j, self.rho * kl);
                c.set(n + i, j, self.rho * kl);
                c.set(n + i, n + j, self.rho * self.rho * kl + kh);
            }
        }
        c
    }

    /// Exact marginal of the high-fidelity process at `x`.
    pub fn high_marginal(&self, x: f64) -> Gaussian1D {
        let var = self.rho * self.rho * self.low.sigma_f2 + self.high.sigma_f2;
        Gaussian1D { mu: self.high.mean.eval(x), sigma2: var }
    }

    /// Joint low-fidelity paths over a grid, one row per path.
    pub fn sample_low_paths(&self, xs: &[f64], n_paths: usize, rng: &mut Rng) -> Result<RealArray> {
        sample_gp(&self.low.mean_vector(xs), &self.low.gram(xs), n_paths, rng)
    }
}

/// Realizations of both processes at the sensors, one row per realization.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiFidelityData {
    pub sensors: Vec<f64>,
    pub low: RealArray,
    pub high: RealArray,
}

impl MultiFidelityData {
    /// Rows `(x, y_L) → y_H`.
    pub fn multi_fidelity_pairs(&self) -> PairedDataset {
        let (mut xin, mut yout) = (Vec::new(), Vec::new());
        for r in 0..self.low.rows() {
            for (s, &x) in self.sensors.iter().enumerate() {
                xin.extend([x, self.low.get(r, s)]);
                yout.push(self.high.get(r, s));
            }
        }
        let n = yout.len();
        PairedDataset::new(RealArray::matrix(n, 2, xin).expect("sized"), RealArray::column(yout).expect("sized"))
            .expect("aligned")
    }

    /// Rows `x → y_H`, ignoring the low-fidelity observations.
    pub fn single_fidelity_pairs(&self) -> PairedDataset {
        let (mut xin, mut yout) = (Vec::new(), Vec::new());
        for r in 0..self.high.rows() {
            for (s, &x) in self.sensors.iter().enumerate() {
                xin.push(x);
                yout.push(self.high.get(r, s));
            }
        }
        PairedDataset::new(RealArray::column(xin).expect("sized"), RealArray::column(yout).expect("sized"))
            .expect("aligned")
    }
}

pub fn multifidelity_dataset(spec: &MultiFidelitySpec, rng: &mut Rng) -> Result<MultiFidelityData> {
    spec.validate()?;
    let n = spec.sensors.len();
    let draws = sample_gp(
        &spec.joint_mean(&spec.sensors),
        &spec.joint_covariance(&spec.sensors),
        spec.realizations,
        rng,
    )?;
    let mut low = Vec::with_capacity(spec.realizations * n);
    let mut high = Vec::with_capacity(spec.realizations * n);
    for r in 0..spec.realizations {
        low.extend_from_slice(&draws.row(r)[..n]);
        high.extend_from_slice(&draws.row(r)[n..]);
    }
    Ok(MultiFidelityData {
        sensors: spec.sensors.clone(),
        low: RealArray::matrix(spec.realizations, n, low)?,
        high: RealArray::matrix(spec.realizations, n, high)?,
    })
}
