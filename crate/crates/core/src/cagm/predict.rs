use serde::{Deserialize, Serialize};

use crate::array::RealArray;
use crate::error::{dim_err, Error, Result};
use crate::rng::{fill_standard_normal, Rng};

use super::model::CagmModel;

/// Monte Carlo moments of the predictive distribution at one input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveStats {
    pub mean: Vec<f64>,
    /// Normalized by `1/n_mc`.
    pub variance: Vec<f64>,
    pub n_mc: usize,
}

impl PredictiveStats {
    pub fn std(&self) -> Vec<f64> {
        self.variance.iter().map(|v| v.sqrt()).collect()
    }

    /// Moments of the rows of `samples`.
    pub fn from_samples(samples: &RealArray) -> Self {
        let (n, d) = (samples.rows(), samples.cols());
        let mut mean = vec![0.0; d];
        for i in 0..n {
            for (m, v) in mean.iter_mut().zip(samples.row(i)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut variance = vec![0.0; d];
        for i in 0..n {
            for ((s, v), m) in variance.iter_mut().zip(samples.row(i)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        variance.iter_mut().for_each(|s| *s /= n as f64);
        Self { mean, variance, n_mc: n }
    }
}

/// `n × latent_dim` i.i.d. standard normal draws.
pub fn sample_latent(n: usize, latent_dim: usize, rng: &mut Rng) -> RealArray {
    let mut z = RealArray::zeros(&[n.max(1), latent_dim.max(1)]);
    fill_standard_normal(rng, z.data_mut());
    z
}

/// Generator evaluated on `x ⊕ z`, row by row.
pub fn generate(model: &CagmModel, x: &RealArray, z: &RealArray) -> Result<RealArray> {
    if x.rows() != z.rows() {
        return Err(dim_err("generate row counts", x.rows(), z.rows()));
    }
    if x.cols() != model.x_dim() {
        return Err(dim_err("generate x width", model.x_dim(), x.cols()));
    }
    if z.cols() != model.latent_dim() {
        return Err(dim_err("generate z width", model.latent_dim(), z.cols()));
    }
    model.generator.forward(&RealArray::hcat(&[x, z])?)
}

/// `n_mc` generator samples at `x_star` with prior-drawn latents.
pub fn predict_samples(model: &CagmModel, x_star: &[f64], n_mc: usize, rng: &mut Rng) -> Result<RealArray> {
    if n_mc == 0 {
        return Err(Error::Contract("n_mc must be positive".into()));
    }
    if x_star.len() != model.x_dim() {
        return Err(dim_err("x* width", model.x_dim(), x_star.len()));
    }
    let x = RealArray::tile_row(x_star, n_mc);
    let z = sample_latent(n_mc, model.latent_dim(), rng);
    generate(model, &x, &z)
}

pub fn predict_moments(model: &CagmModel, x_star: &[f64], n_mc: usize, rng: &mut Rng) -> Result<PredictiveStats> {
    if n_mc < 2 {
        return Err(Error::Contract(format!("predictive moments need n_mc >= 2, got {n_mc}")));
    }
    let samples = predict_samples(model, x_star, n_mc, rng)?;
    Ok(PredictiveStats::from_samples(&samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cagm::Architecture;
    use crate::mlp::{Dense, Mlp};
    use crate::rng::stream_rng;

    fn affine_generator(wx: f64, wz: f64, b: f64) -> CagmModel {
        let one = |w: Vec<f64>, r: usize| Dense {
            weights: RealArray::matrix(r, 1, w).unwrap(),
            bias: RealArray::zeros(&[1, 1]),
        };
        let mut gen_layer = one(vec![wx, wz], 2);
        gen_layer.bias.data_mut()[0] = b;
        CagmModel::from_parts(
            Mlp::from_layers(vec![gen_layer]).unwrap(),
            Mlp::from_layers(vec![one(vec![0.0, 1.0], 2)]).unwrap(),
            Mlp::from_layers(vec![one(vec![0.0, 1.0], 2)]).unwrap(),
            1,
        )
        .unwrap()
    }

    #[test]
    fn latent_moments() {
        let mut rng = stream_rng(3, 0);
        let z = sample_latent(100_000, 1, &mut rng);
        let n = z.len() as f64;
        let mean = z.data().iter().sum::<f64>() / n;
        let var = z.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 4.0 / n.sqrt());
        assert!((var - 1.0).abs() < 0.05);
        assert_eq!(sample_latent(5, 2, &mut stream_rng(9, 1)), sample_latent(5, 2, &mut stream_rng(9, 1)));
    }

    #[test]
    fn affine_generator_adds_inputs() {
        let m = affine_generator(1.0, 1.0, 0.0);
        let x = RealArray::column(vec![0.5, -2.0]).unwrap();
        let z = RealArray::column(vec![0.25, 1.0]).unwrap();
        let y = generate(&m, &x, &z).unwrap();
        assert_eq!(y.data(), &[0.75, -1.0]);
        assert_eq!(generate(&m, &x, &z).unwrap(), y);
    }

    #[test]
    fn zero_generator_outputs_zero() {
        let mut m = CagmModel::new(2, 3, 2, &Architecture::uniform(2, 5), 1).unwrap();
        for p in m.generator.params_mut() {
            p.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
        let mut rng = stream_rng(0, 0);
        let x = sample_latent(4, 2, &mut rng);
        let z = sample_latent(4, 2, &mut rng);
        assert!(generate(&m, &x, &z).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mismatched_rows_rejected() {
        let m = affine_generator(1.0, 1.0, 0.0);
        let x = RealArray::column(vec![0.5, -2.0]).unwrap();
        let z = RealArray::column(vec![0.25]).unwrap();
        assert!(generate(&m, &x, &z).is_err());
    }

    #[test]
    fn degenerate_generator_has_zero_variance() {
        let m = affine_generator(2.0, 0.0, 0.5);
        let s = predict_moments(&m, &[1.5], 64, &mut stream_rng(1, 0)).unwrap();
        assert_eq!(s.variance, vec![0.0]);
        assert_eq!(s.mean, vec![3.5]);
    }

    #[test]
    fn identity_latent_generator_recovers_prior() {
        let m = affine_generator(0.0, 1.0, 0.0);
        let n = 100_000;
        let s = predict_moments(&m, &[0.3], n, &mut stream_rng(2, 0)).unwrap();
        assert!(s.mean[0].abs() < 4.0 / (n as f64).sqrt());
        assert!((s.variance[0] - 1.0).abs() < 0.05);
    }

    #[test]
    fn two_point_moments() {
        let samples = RealArray::column(vec![1.0, 3.0]).unwrap();
        let s = PredictiveStats::from_samples(&samples);
        assert_eq!(s.mean, vec![2.0]);
        assert_eq!(s.variance, vec![1.0]);
    }

    #[test]
    fn samples_consistent_with_moments() {
        let m = CagmModel::new(1, 2, 2, &Architecture::uniform(2, 6), 4).unwrap();
        let n = 100_000;
        let samples = predict_samples(&m, &[0.2], n, &mut stream_rng(5, 0)).unwrap();
        let from_samples = PredictiveStats::from_samples(&samples);
        let direct = predict_moments(&m, &[0.2], n, &mut stream_rng(6, 0)).unwrap();
        for d in 0..2 {
            let se = (from_samples.variance[d] / n as f64).sqrt();
            assert!((from_samples.mean[d] - direct.mean[d]).abs() < 3.0 * 2f64.sqrt() * se);
        }
        let one = predict_samples(&m, &[0.2], 1, &mut stream_rng(5, 0)).unwrap();
        assert_eq!(one.shape(), &[1, 2]);
        assert_eq!(one.row(0), samples.row(0));
        assert!(predict_moments(&m, &[0.2], 1, &mut stream_rng(5, 0)).is_err());
    }
}
