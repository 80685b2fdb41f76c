//! Small dense linear algebra for covariance matrices.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::array::RealArray;
use crate::error::{dim_err, Error, Result};

/// Lower-triangular factor `L` with `L Lᵀ = A`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    n: usize,
    lower: Vec<f64>,
}

fn check_square(a: &RealArray) -> Result<usize> {
    let n = a.rows();
    if a.shape().len() != 2 || a.cols() != n {
        return Err(dim_err("square matrix", "n × n", format!("{:?}", a.shape())));
    }
    Ok(n)
}

impl Cholesky {
    /// Factorizes `a + jitter·I`. Pivots within `zero_tol` of zero are
    /// treated as exact zeros (rank-deficient PSD input); a pivot below
    /// `-zero_tol` fails the factorization.
    pub fn factor(a: &RealArray, jitter: f64, zero_tol: f64) -> Result<Option<Self>> {
        let n = check_square(a)?;
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = a.get(j, j) + jitter;
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if d > zero_tol {
                let ljj = d.sqrt();
                l[j * n + j] = ljj;
                for i in j + 1..n {
                    let mut s = a.get(i, j);
                    for k in 0..j {
                        s -= l[i * n + k] * l[j * n + k];
                    }
                    l[i * n + j] = s / ljj;
                }
            } else if d >= -zero_tol {
                // zero pivot: column stays zero
            } else {
                return Ok(None);
            }
        }
        Ok(Some(Self { n, lower: l }))
    }

    /// Strict factorization of a positive definite matrix.
    pub fn strict(a: &RealArray) -> Result<Option<Self>> {
        let n = check_square(a)?;
        let f = Self::factor(a, 0.0, 0.0)?;
        Ok(f.filter(|c| (0..n).all(|i| c.lower[i * n + i] > 0.0)))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn lower(&self) -> RealArray {
        RealArray::matrix(self.n, self.n, self.lower.clone()).expect("square")
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.lower[i * self.n + j]
    }

    /// `L x` for a vector `x`.
    pub fn mul_lower(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|i| (0..=i).map(|k| self.lower[i * n + k] * x[k]).sum())
            .collect()
    }

    /// Solves `L x = b`.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = b.to_vec();
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= self.lower[i * n + k] * x[k];
            }
            x[i] = s / self.lower[i * n + i];
        }
        x
    }

    /// Solves `Lᵀ x = b`.
    pub fn solve_upper(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = b.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.lower[k * n + i] * x[k];
            }
            x[i] = s / self.lower[i * n + i];
        }
        x
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.solve_upper(&self.solve_lower(b))
    }

    /// `log det A = 2 Σ log L_ii`.
    pub fn log_det(&self) -> f64 {
        (0..self.n).map(|i| 2.0 * self.lower[i * self.n + i].ln()).sum()
    }
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(a: &RealArray) -> Result<f64> {
    let n = check_square(a)?;
    let m = DMatrix::from_row_slice(n, n, a.data());
    let eig = SymmetricEigen::new(m);
    eig.eigenvalues
        .iter()
        .copied()
        .reduce(f64::min)
        .ok_or_else(|| Error::Contract("empty matrix".into()))
}

pub fn is_symmetric(a: &RealArray, tol: f64) -> bool {
    let n = a.rows();
    a.cols() == n && (0..n).all(|i| (0..i).all(|j| (a.get(i, j) - a.get(j, i)).abs() <= tol))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_and_solve() {
        let a = RealArray::matrix(3, 3, vec![4.0, 2.0, 0.4, 2.0, 5.0, 1.0, 0.4, 1.0, 3.0]).unwrap();
        let c = Cholesky::strict(&a).unwrap().unwrap();
        let b = [1.0, -2.0, 0.5];
        let x = c.solve(&b);
        for i in 0..3 {
            let ax: f64 = (0..3).map(|j| a.get(i, j) * x[j]).sum();
            assert!((ax - b[i]).abs() < 1e-12);
        }
        let det: f64 = 4.0 * (5.0 * 3.0 - 1.0) - 2.0 * (2.0 * 3.0 - 0.4) + 0.4 * (2.0 - 5.0 * 0.4);
        assert!((c.log_det() - det.ln()).abs() < 1e-12);
    }

    #[test]
    fn semidefinite_zero_matrix() {
        let a = RealArray::zeros(&[3, 3]);
        let c = Cholesky::factor(&a, 0.0, 1e-14).unwrap().unwrap();
        assert!(c.lower().data().iter().all(|&v| v == 0.0));
        assert!(Cholesky::strict(&a).unwrap().is_none());
    }

    #[test]
    fn indefinite_fails() {
        let a = RealArray::matrix(2, 2, vec![1.0, 2.0, 2.0, 1.0]).unwrap();
        assert!(Cholesky::factor(&a, 0.0, 1e-12).unwrap().is_none());
        assert!((min_eigenvalue(&a).unwrap() + 1.0).abs() < 1e-12);
    }
}
