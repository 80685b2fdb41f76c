use serde::{Deserialize, Serialize};

use crate::array::RealArray;
use crate::error::{dim_err, Result};

/// Paired observations `(x_i, y_i)` drawn from the empirical joint
/// distribution, one pair per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedDataset {
    pub inputs: RealArray,
    pub outputs: RealArray,
    /// Optional per-row label, e.g. the physical time of a snapshot.
    pub labels: Option<Vec<f64>>,
}

impl PairedDataset {
    pub fn new(inputs: RealArray, outputs: RealArray) -> Result<Self> {
        if inputs.rows() != outputs.rows() {
            return Err(dim_err("dataset row counts", inputs.rows(), outputs.rows()));
        }
        Ok(Self {
            inputs,
            outputs,
            labels: None,
        })
    }

    pub fn with_labels(mut self, labels: Vec<f64>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(dim_err("dataset labels", self.len(), labels.len()));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn x_dim(&self) -> usize {
        self.inputs.cols()
    }

    pub fn y_dim(&self) -> usize {
        self.outputs.cols()
    }

    pub fn select(&self, rows: &[usize]) -> Self {
        Self {
            inputs: self.inputs.select_rows(rows),
            outputs: self.outputs.select_rows(rows),
            labels: self
                .labels
                .as_ref()
                .map(|l| rows.iter().map(|&i| l[i]).collect()),
        }
    }
}

/// Per-column affine map `u = (v − shift) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

fn column_moments(a: &RealArray) -> (Vec<f64>, Vec<f64>) {
    let (n, d) = (a.rows().max(1) as f64, a.cols());
    let mut mean = vec![0.0; d];
    for r in 0..a.rows() {
        for (m, v) in mean.iter_mut().zip(a.row(r)) {
            *m += v / n;
        }
    }
    let mut var = vec![0.0; d];
    for r in 0..a.rows() {
        for ((s, v), m) in var.iter_mut().zip(a.row(r)).zip(&mean) {
            *s += (v - m).powi(2) / n;
        }
    }
    (mean, var)
}

fn safe_scale(var: f64) -> f64 {
    if var > 1e-24 {
        var.sqrt()
    } else {
        1.0
    }
}

impl Scaler {
    pub fn identity(dim: usize) -> Self {
        Self { shift: vec![0.0; dim], scale: vec![1.0; dim] }
    }

    /// Column-wise mean and standard deviation.
    pub fn fit(a: &RealArray) -> Self {
        let (mean, var) = column_moments(a);
        Self { shift: mean, scale: var.into_iter().map(safe_scale).collect() }
    }

    /// One mean and standard deviation shared by all columns.
    pub fn fit_global(a: &RealArray) -> Self {
        let n = a.len().max(1) as f64;
        let mean = a.data().iter().sum::<f64>() / n;
        let var = a.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self { shift: vec![mean; a.cols()], scale: vec![safe_scale(var); a.cols()] }
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    fn check(&self, a: &RealArray) -> Result<()> {
        if a.cols() != self.dim() {
            return Err(dim_err("scaler columns", self.dim(), a.cols()));
        }
        Ok(())
    }

    pub fn transform(&self, a: &RealArray) -> Result<RealArray> {
        self.check(a)?;
        let mut out = a.clone();
        for r in 0..out.rows() {
            for ((v, s), c) in out.row_mut(r).iter_mut().zip(&self.shift).zip(&self.scale) {
                *v = (*v - s) / c;
            }
        }
        Ok(out)
    }

    pub fn inverse(&self, a: &RealArray) -> Result<RealArray> {
        self.check(a)?;
        let mut out = a.clone();
        for r in 0..out.rows() {
            for ((v, s), c) in out.row_mut(r).iter_mut().zip(&self.shift).zip(&self.scale) {
                *v = *v * c + s;
            }
        }
        Ok(out)
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter().zip(&self.shift).zip(&self.scale).map(|((v, s), c)| (v - s) / c).collect()
    }
}

/// Input and output scalers applied before training and undone on prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub x: Scaler,
    pub y: Scaler,
}

impl Standardization {
    pub fn identity(x_dim: usize, y_dim: usize) -> Self {
        Self { x: Scaler::identity(x_dim), y: Scaler::identity(y_dim) }
    }

    pub fn fit(data: &PairedDataset) -> Self {
        Self { x: Scaler::fit(&data.inputs), y: Scaler::fit(&data.outputs) }
    }

    pub fn apply(&self, data: &PairedDataset) -> Result<PairedDataset> {
        Ok(PairedDataset {
            inputs: self.x.transform(&data.inputs)?,
            outputs: self.y.transform(&data.outputs)?,
            labels: data.labels.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaler_round_trip() {
        let a = RealArray::matrix(3, 2, vec![1.0, 10.0, 2.0, 10.0, 3.0, 10.0]).unwrap();
        let s = Scaler::fit(&a);
        assert_eq!(s.scale[1], 1.0);
        let t = s.transform(&a).unwrap();
        assert!(t.column_values(0).iter().sum::<f64>().abs() < 1e-15);
        let back = s.inverse(&t).unwrap();
        for (x, y) in back.data().iter().zip(a.data()) {
            assert!((x - y).abs() < 1e-14);
        }
        let g = Scaler::fit_global(&a);
        assert_eq!(g.shift[0], g.shift[1]);
    }
}
