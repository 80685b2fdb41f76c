//! The three noisy one-dimensional regression processes.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::array::RealArray;
use crate::dataset::PairedDataset;
use crate::error::{Error, Result};
use crate::rng::{standard_normal, Rng};

pub const DOMAIN: (f64, f64) = (-2.0, 2.0);
const SHIFT: f64 = 0.03;
const EPS_STD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseCase {
    Homoscedastic,
    Heteroscedastic,
    NonAdditive,
}

impl NoiseCase {
    pub const ALL: [NoiseCase; 3] = [Self::Homoscedastic, Self::Heteroscedastic, Self::NonAdditive];
}

fn folded(x: f64) -> f64 {
    (x - SHIFT).abs() + SHIFT
}

/// Noise-free signal `log(10 s) sin(π s)` with `s = |x − 0.03| + 0.03`.
pub fn signal(x: f64) -> f64 {
    let s = folded(x);
    (10.0 * s).ln() * (std::f64::consts::PI * s).sin()
}

/// Standard deviation of `δ(x) = ε / exp(2 s)`, `ε ~ N(0, 0.5²)`.
pub fn envelope(x: f64) -> f64 {
    EPS_STD / (2.0 * folded(x)).exp()
}

/// Standard deviation of the noise-free signal over the domain, by
/// composite Simpson quadrature.
pub fn signal_std() -> f64 {
    let (a, b) = DOMAIN;
    let n = 40_000;
    let h = (b - a) / n as f64;
    let simpson = |f: &dyn Fn(f64) -> f64| {
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0 / (b - a)
    };
    let m = simpson(&signal);
    let m2 = simpson(&|x| signal(x).powi(2));
    (m2 - m * m).sqrt()
}

/// Regression process settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressionSpec {
    pub case: NoiseCase,
    /// Homoscedastic noise standard deviation as a fraction of [`signal_std`].
    #[serde(default = "default_fraction")]
    pub noise_fraction: f64,
}

fn default_fraction() -> f64 {
    0.05
}

impl RegressionSpec {
    pub fn new(case: NoiseCase) -> Self {
        Self { case, noise_fraction: default_fraction() }
    }

    pub fn homoscedastic_std(&self) -> f64 {
        self.noise_fraction * signal_std()
    }

    fn draw(&self, x: f64, homo_std: f64, rng: &mut Rng) -> f64 {
        match self.case {
            NoiseCase::Homoscedastic => signal(x) + homo_std * standard_normal(rng),
            NoiseCase::Heteroscedastic => signal(x) + envelope(x) * standard_normal(rng),
            NoiseCase::NonAdditive => {
                let s = folded(x);
                let delta = envelope(x) * standard_normal(rng);
                (10.0 * s).ln() * (std::f64::consts::PI * s + 2.0 * delta).sin() + delta
            }
        }
    }

    /// Noisy responses at the given inputs.
    pub fn sample_at(&self, xs: &[f64], rng: &mut Rng) -> Vec<f64> {
        let homo = self.homoscedastic_std();
        xs.iter().map(|&x| self.draw(x, homo, rng)).collect()
    }
}

/// `n` pairs with inputs uniform on [−2, 2].
pub fn noisy_regression_dataset(case: NoiseCase, n: usize, rng: &mut Rng) -> Result<PairedDataset> {
    regression_dataset(&RegressionSpec::new(case), n, rng)
}

pub fn regression_dataset(spec: &RegressionSpec, n: usize, rng: &mut Rng) -> Result<PairedDataset> {
    if n == 0 {
        return Err(Error::Config("regression dataset needs n ≥ 1".into()));
    }
    if !(spec.noise_fraction >= 0.0) {
        return Err(Error::Config("noise_fraction must be non-negative".into()));
    }
    let xs: Vec<f64> = (0..n).map(|_| rng.random_range(DOMAIN.0..=DOMAIN.1)).collect();
    let ys = spec.sample_at(&xs, rng);
    PairedDataset::new(RealArray::column(xs)?, RealArray::column(ys)?)
}
