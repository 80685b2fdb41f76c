//! Gaussian KL divergence and the average marginal discrepancy metric.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::cagm::{predict_samples, CagmModel};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gaussian1D {
    pub mu: f64,
    pub sigma2: f64,
}

impl Gaussian1D {
    pub fn new(mu: f64, sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0) || !mu.is_finite() || !sigma2.is_finite() {
            return Err(Error::Domain(format!("invalid Gaussian N({mu}, {sigma2})")));
        }
        Ok(Self { mu, sigma2 })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    pub fn pdf(&self, y: f64) -> f64 {
        (-(y - self.mu).powi(2) / (2.0 * self.sigma2)).exp() / (2.0 * std::f64::consts::PI * self.sigma2).sqrt()
    }
}

/// `KL(p1 ‖ p2)` for univariate Gaussians.
pub fn gauss_kl(p1: &Gaussian1D, p2: &Gaussian1D) -> Result<f64> {
    if !(p1.sigma2 > 0.0 && p2.sigma2 > 0.0) {
        return Err(Error::Domain(format!("variances must be positive, got {} and {}", p1.sigma2, p2.sigma2)));
    }
    let kl = 0.5 * (p2.sigma2 / p1.sigma2).ln() + (p1.sigma2 + (p1.mu - p2.mu).powi(2)) / (2.0 * p2.sigma2) - 0.5;
    Ok(kl.max(0.0))
}

/// Moment fit with the 1/n variance.
pub fn fit_gaussian(samples: &[f64]) -> Result<Gaussian1D> {
    if samples.len() < 2 {
        return Err(Error::Degenerate(format!("need at least 2 samples, got {}", samples.len())));
    }
    let n = samples.len() as f64;
    let mu = samples.iter().sum::<f64>() / n;
    let sigma2 = samples.iter().map(|s| (s - mu).powi(2)).sum::<f64>() / n;
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::Degenerate(format!("sample variance is {sigma2}")));
    }
    Ok(Gaussian1D { mu, sigma2 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KlDirection {
    /// `KL(exact ‖ model)`
    Forward,
    /// `KL(model ‖ exact)`
    Reverse,
}

/// Per-location forward and reverse KL between fitted model marginals and
/// the exact ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalReport {
    pub xs: Vec<f64>,
    pub kl_forward: Vec<f64>,
    pub kl_reverse: Vec<f64>,
    /// Locations dropped because the fitted marginal was degenerate.
    pub excluded: Vec<f64>,
    pub direction: KlDirection,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

impl MarginalReport {
    pub fn average_forward(&self) -> f64 {
        mean(&self.kl_forward)
    }

    pub fn average_reverse(&self) -> f64 {
        mean(&self.kl_reverse)
    }

    /// Average in the requested direction.
    pub fn value(&self) -> f64 {
        match self.direction {
            KlDirection::Forward => self.average_forward(),
            KlDirection::Reverse => self.average_reverse(),
        }
    }

    pub fn excluded_count(&self) -> usize {
        self.excluded.len()
    }

    /// Rows `x,kl_forward,kl_reverse` followed by a `mean` summary row.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,kl_forward,kl_reverse\n");
        for i in 0..self.xs.len() {
            let _ = writeln!(s, "{:.16e},{:.16e},{:.16e}", self.xs[i], self.kl_forward[i], self.kl_reverse[i]);
        }
        let _ = writeln!(s, "mean,{:.16e},{:.16e}", self.average_forward(), self.average_reverse());
        s
    }
}

/// Deterministic uniform grid of `n` points on `[a, b]`.
pub fn uniform_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![0.5 * (a + b)],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Evaluates the metric with an arbitrary sampler of the model marginal.
pub fn avg_marginal_kl_with(
    mut sampler: impl FnMut(f64, usize, &mut Rng) -> Result<Vec<f64>>,
    exact: impl Fn(f64) -> Gaussian1D,
    test_xs: &[f64],
    n_mc: usize,
    direction: KlDirection,
    rng: &mut Rng,
) -> Result<MarginalReport> {
    if test_xs.is_empty() {
        return Err(Error::Config("no test locations".into()));
    }
    let mut report =
        MarginalReport { xs: vec![], kl_forward: vec![], kl_reverse: vec![], excluded: vec![], direction };
    for &x in test_xs {
        let samples = sampler(x, n_mc, rng)?;
        let truth = exact(x);
        match fit_gaussian(&samples) {
            Ok(model) => {
                report.xs.push(x);
                report.kl_forward.push(gauss_kl(&truth, &model)?);
                report.kl_reverse.push(gauss_kl(&model, &truth)?);
            }
            Err(Error::Degenerate(_)) => report.excluded.push(x),
            Err(e) => return Err(e),
        }
    }
    Ok(report)
}

/// Average marginal KL of a scalar-input, scalar-output model.
pub fn avg_marginal_kl(
    model: &CagmModel,
    exact: impl Fn(f64) -> Gaussian1D,
    test_xs: &[f64],
    n_mc: usize,
    direction: KlDirection,
    rng: &mut Rng,
) -> Result<MarginalReport> {
    avg_marginal_kl_with(
        |x, n, r| Ok(predict_samples(model, &[x], n, r)?.into_data()),
        exact,
        test_xs,
        n_mc,
        direction,
        rng,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{standard_normal, stream_rng};

    #[test]
    fn kl_values() {
        let a = Gaussian1D::new(0.0, 1.0).unwrap();
        let b = Gaussian1D::new(1.0, 4.0).unwrap();
        assert_eq!(gauss_kl(&a, &a).unwrap(), 0.0);
        assert!((gauss_kl(&a, &b).unwrap() - (2f64.ln() + 0.25 - 0.5)).abs() < 1e-15);
        assert!(gauss_kl(&a, &b).unwrap() != gauss_kl(&b, &a).unwrap());
        let bad = Gaussian1D { mu: 0.0, sigma2: 0.0 };
        assert!(matches!(gauss_kl(&bad, &a), Err(Error::Domain(_))));
    }

    #[test]
    fn fit_values() {
        assert_eq!(fit_gaussian(&[1.0, 3.0]).unwrap(), Gaussian1D { mu: 2.0, sigma2: 1.0 });
        assert!(matches!(fit_gaussian(&[2.0; 5]), Err(Error::Degenerate(_))));
        let mut rng = stream_rng(9, 0);
        let s: Vec<f64> = (0..100_000).map(|_| standard_normal(&mut rng)).collect();
        let g = fit_gaussian(&s).unwrap();
        assert!(g.mu.abs() < 0.02 && (g.sigma2 - 1.0).abs() < 0.03);
    }

    #[test]
    fn double_sigma_reverse_kl() {
        let exact = |x: f64| Gaussian1D { mu: x, sigma2: 0.25 };
        // deterministic two-point "samples" with mean x and std 2·0.5
        let r = avg_marginal_kl_with(
            |x, _, _| Ok(vec![x - 1.0, x + 1.0]),
            exact,
            &[0.0, 0.5],
            2,
            KlDirection::Reverse,
            &mut stream_rng(0, 0),
        )
        .unwrap();
        let expected = (0.5f64).ln() + 2.0 - 0.5;
        assert!((r.value() - expected).abs() < 1e-12);
        assert!((expected - 0.8069).abs() < 1e-4);
    }

    #[test]
    fn exclusions_and_csv() {
        let r = avg_marginal_kl_with(
            |x, _, _| Ok(if x > 0.5 { vec![1.0, 1.0] } else { vec![-1.0, 1.0] }),
            |_| Gaussian1D { mu: 0.0, sigma2: 1.0 },
            &[0.0, 1.0],
            2,
            KlDirection::Forward,
            &mut stream_rng(0, 0),
        )
        .unwrap();
        assert_eq!(r.excluded, vec![1.0]);
        assert_eq!(r.value(), 0.0);
        let csv = r.to_csv();
        assert!(csv.starts_with("x,kl_forward,kl_reverse\n"));
        assert!(csv.lines().last().unwrap().starts_with("mean,"));
    }

    #[test]
    fn grid() {
        assert_eq!(uniform_grid(0.0, 1.0, 3), vec![0.0, 0.5, 1.0]);
    }
}
