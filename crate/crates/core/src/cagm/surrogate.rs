use serde::{Deserialize, Serialize};

use crate::array::RealArray;
use crate::dataset::{PairedDataset, Standardization};
use crate::error::{dim_err, Result};
use crate::rng::Rng;

use super::model::CagmModel;
use super::predict::{generate, predict_samples, PredictiveStats};
use super::train::{train_with, LossHistory, TrainConfig};

/// A model trained on standardized data together with the scalers that
/// map physical inputs and outputs to and from network units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Surrogate {
    pub model: CagmModel,
    pub scaling: Standardization,
}

impl Surrogate {
    pub fn new(model: CagmModel, scaling: Standardization) -> Result<Self> {
        if scaling.x.dim() != model.x_dim() {
            return Err(dim_err("input scaler width", model.x_dim(), scaling.x.dim()));
        }
        if scaling.y.dim() != model.y_dim() {
            return Err(dim_err("output scaler width", model.y_dim(), scaling.y.dim()));
        }
        Ok(Self { model, scaling })
    }

    /// Trains on `data` given in physical units.
    pub fn train(&mut self, data: &PairedDataset, config: &TrainConfig) -> Result<LossHistory> {
        self.train_with(data, config, |_, _, _| {})
    }

    pub fn train_with(
        &mut self,
        data: &PairedDataset,
        config: &TrainConfig,
        observer: impl FnMut(usize, f64, f64),
    ) -> Result<LossHistory> {
        let scaled = self.scaling.apply(data)?;
        train_with(&mut self.model, &scaled, config, observer)
    }

    /// Generator output in physical units for physical inputs `x`.
    pub fn generate(&self, x: &RealArray, z: &RealArray) -> Result<RealArray> {
        let out = generate(&self.model, &self.scaling.x.transform(x)?, z)?;
        self.scaling.y.inverse(&out)
    }

    pub fn predict_samples(&self, x_star: &[f64], n_mc: usize, rng: &mut Rng) -> Result<RealArray> {
        if x_star.len() != self.model.x_dim() {
            return Err(dim_err("x* width", self.model.x_dim(), x_star.len()));
        }
        let xs = self.scaling.x.transform_row(x_star);
        self.scaling.y.inverse(&predict_samples(&self.model, &xs, n_mc, rng)?)
    }

    pub fn predict_moments(&self, x_star: &[f64], n_mc: usize, rng: &mut Rng) -> Result<PredictiveStats> {
        if n_mc < 2 {
            return Err(crate::error::Error::Contract(format!("predictive moments need n_mc >= 2, got {n_mc}")));
        }
        Ok(PredictiveStats::from_samples(&self.predict_samples(x_star, n_mc, rng)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cagm::Architecture;
    use crate::dataset::Scaler;
    use crate::rng::stream_rng;

    #[test]
    fn physical_units_round_trip() {
        let model = CagmModel::new(1, 1, 1, &Architecture::uniform(2, 4), 1).unwrap();
        let scaling = Standardization {
            x: Scaler { shift: vec![2.0], scale: vec![4.0] },
            y: Scaler { shift: vec![-1.0], scale: vec![3.0] },
        };
        let s = Surrogate::new(model.clone(), scaling).unwrap();
        let a = s.predict_samples(&[6.0], 5, &mut stream_rng(0, 0)).unwrap();
        let b = predict_samples(&model, &[1.0], 5, &mut stream_rng(0, 0)).unwrap();
        for (u, v) in a.data().iter().zip(b.data()) {
            assert!((u - (v * 3.0 - 1.0)).abs() < 1e-14);
        }
        assert!(Surrogate::new(model, Standardization::identity(2, 1)).is_err());
    }
}
