//! The one-dimensional sensitivity benchmark: `g ~ GP(μ_H, k(0.5, 0.5))`.

use rand::Rng as _;
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
pub struct BenchmarkSpec {
    pub process: GpSpec,
    /// Input locations drawn uniformly on [0, 1].
    pub locations: usize,
    /// Independent realizations observed at every location.
    pub realizations: usize,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        Self {
            process: GpSpec { sigma_f2: 0.5, l2: 0.5, mean: MeanFunction::HighFidelity },
            locations: 100,
            realizations: 100,
        }
    }
}

impl BenchmarkSpec {
    pub fn exact_marginal(&self, x: f64) -> Gaussian1D {
        Gaussian1D { mu: self.process.mean.eval(x), sigma2: self.process.sigma_f2 }
    }

    pub fn size(&self) -> usize {
        self.locations * self.realizations
    }
}

/// `locations × realizations` pairs `(x, g(x))`.
pub fn benchmark_dataset(spec: &BenchmarkSpec, rng: &mut Rng) -> Result<PairedDataset> {
    spec.process.validate()?;
    if spec.size() == 0 {
        return Err(Error::Config("benchmark needs locations and realizations ≥ 1".into()));
    }
    let xs: Vec<f64> = (0..spec.locations).map(|_| rng.random_range(0.0..=1.0)).collect();
    let paths = sample_gp(&spec.process.mean_vector(&xs), &spec.process.gram(&xs), spec.realizations, rng)?;
    let mut xin = Vec::with_capacity(spec.size());
    let mut yout = Vec::with_capacity(spec.size());
    for r in 0..spec.realizations {
        xin.extend_from_slice(&xs);
        yout.extend_from_slice(paths.row(r));
    }
    PairedDataset::new(RealArray::column(xin)?, RealArray::column(yout)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn default_layout() {
        let spec = BenchmarkSpec::default();
        let d = benchmark_dataset(&spec, &mut stream_rng(7, 0)).unwrap();
        assert_eq!(d.len(), 10_000);
        assert_eq!(spec.exact_marginal(0.5).sigma2, 0.5);
        let resid: Vec<f64> =
            (0..d.len()).map(|i| d.outputs.get(i, 0) - spec.process.mean.eval(d.inputs.get(i, 0))).collect();
        let var = resid.iter().map(|r| r * r).sum::<f64>() / resid.len() as f64;
        assert!((var - 0.5).abs() < 0.1, "{var}");
    }
}
