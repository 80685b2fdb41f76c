//! Exact Gaussian process regression with a squared-exponential kernel.

use nalgebra::{Cholesky as NaCholesky, DMatrix, DVector, Dyn};

use crate::array::RealArray;
use crate::data::gp::JITTER_SCHEDULE;
use crate::data::kernel::{GpSpec, MeanFunction};
use crate::error::{Error, Result};

type Cholesky = NaCholesky<f64, Dyn>;

const RESTART_OFFSETS: [[f64; 3]; 5] =
    [[0.0, 0.0, 0.0], [1.0, -1.0, -1.0], [-1.0, 1.0, 1.0], [0.5, 0.5, -2.0], [-0.5, -0.5, 2.0]];
const ASCENT_STEPS: usize = 500;
const ASCENT_RATE: f64 = 0.05;
const MIN_LOG_NOISE: f64 = -23.0;
const LOG_BOUND: f64 = 15.0;
/// Ascent stops once the likelihood has not improved by more than this
/// (relative) over [`PATIENCE`] steps.
const TOLERANCE: f64 = 1e-10;
const PATIENCE: usize = 25;

/// A fitted regressor: hyperparameters, centered training data and the
/// cached factor of `K + σ_n² I`.
#[derive(Debug, Clone)]
pub struct GpRegressor {
    pub kernel: GpSpec,
    pub noise: f64,
    pub jitter: f64,
    xs: Vec<f64>,
    y_mean: f64,
    chol: Cholesky,
    alpha: Vec<f64>,
    lml: f64,
}

/// Per-point posterior summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct GpPrediction {
    pub mean: Vec<f64>,
    /// Latent variance plus observation noise.
    pub variance: Vec<f64>,
    pub latent_variance: Vec<f64>,
}

struct Evaluation {
    chol: Cholesky,
    jitter: f64,
    alpha: Vec<f64>,
    lml: f64,
}

fn params_spec(p: &[f64; 3]) -> (GpSpec, f64) {
    (GpSpec { sigma_f2: p[0].exp(), l2: p[1].exp(), mean: MeanFunction::Zero }, p[2].exp())
}

fn noisy_gram(xs: &[f64], spec: &GpSpec, noise: f64, jitter: f64) -> DMatrix<f64> {
    let n = xs.len();
    DMatrix::from_fn(n, n, |i, j| spec.kernel(xs[i], xs[j]) + if i == j { noise + jitter } else { 0.0 })
}

fn evaluate(xs: &[f64], y: &[f64], spec: &GpSpec, noise: f64) -> Option<Evaluation> {
    let n = xs.len();
    for &jitter in &JITTER_SCHEDULE {
        let Some(chol) = noisy_gram(xs, spec, noise, jitter).cholesky() else { continue };
        let alpha = chol.solve(&DVector::from_column_slice(y));
        let fit: f64 = y.iter().zip(alpha.iter()).map(|(a, b)| a * b).sum();
        let log_det: f64 = chol.l_dirty().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
        let lml = -0.5 * fit - 0.5 * log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
        if lml.is_finite() {
            return Some(Evaluation { chol, jitter, alpha: alpha.as_slice().to_vec(), lml });
        }
    }
    None
}

/// Gradient of the log marginal likelihood with respect to
/// `(log σ_f², log l², log σ_n²)`.
fn gradient(xs: &[f64], spec: &GpSpec, noise: f64, ev: &Evaluation) -> [f64; 3] {
    let n = xs.len();
    let kinv = ev.chol.inverse();
    let mut g = [0.0; 3];
    for j in 0..n {
        for i in j..n {
            let w = ev.alpha[i] * ev.alpha[j] - kinv[(i, j)];
            let d = xs[i] - xs[j];
            let kf = spec.kernel(xs[i], xs[j]);
            let mult = if i == j { 0.5 } else { 1.0 };
            g[0] += mult * w * kf;
            g[1] += mult * w * kf * d * d / (2.0 * spec.l2);
            if i == j {
                g[2] += 0.5 * w * noise;
            }
        }
    }
    g
}

fn center(y: &[f64]) -> (f64, Vec<f64>) {
    let m = y.iter().sum::<f64>() / y.len() as f64;
    (m, y.iter().map(|v| v - m).collect())
}

/// Log marginal likelihood of centered targets under the given hyperparameters.
pub fn log_marginal_likelihood(xs: &[f64], y: &[f64], spec: &GpSpec, noise: f64) -> Result<f64> {
    let (_, yc) = center(y);
    evaluate(xs, &yc, spec, noise)
        .map(|e| e.lml)
        .ok_or_else(|| Error::IllConditioned("covariance could not be factored".into()))
}

fn ascend(xs: &[f64], y: &[f64], start: [f64; 3]) -> Option<([f64; 3], Evaluation)> {
    let mut p = start;
    let (spec, noise) = params_spec(&p);
    let mut best_ev = evaluate(xs, y, &spec, noise)?;
    let mut best = p;
    let mut cur = evaluate(xs, y, &spec, noise)?;
    let mut stale = 0;
    let (b1, b2, eps) = (0.9, 0.999, 1e-8);
    let (mut m, mut v) = ([0.0; 3], [0.0; 3]);
    for t in 1..=ASCENT_STEPS {
        let (spec, noise) = params_spec(&p);
        let g = gradient(xs, &spec, noise, &cur);
        if g.iter().any(|v| !v.is_finite()) {
            break;
        }
        for i in 0..3 {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let mh = m[i] / (1.0 - b1.powi(t as i32));
            let vh = v[i] / (1.0 - b2.powi(t as i32));
            p[i] = (p[i] + ASCENT_RATE * mh / (vh.sqrt() + eps)).clamp(-LOG_BOUND, LOG_BOUND);
        }
        p[2] = p[2].max(MIN_LOG_NOISE);
        let (spec, noise) = params_spec(&p);
        match evaluate(xs, y, &spec, noise) {
            Some(ev) => {
                if ev.lml > best_ev.lml + TOLERANCE * best_ev.lml.abs().max(1.0) {
                    stale = 0;
                } else {
                    stale += 1;
                }
                if ev.lml > best_ev.lml {
                    best = p;
                    best_ev = evaluate(xs, y, &spec, noise)?;
                }
                cur = ev;
                if stale >= PATIENCE {
                    break;
                }
            }
            None => break,
        }
    }
    Some((best, best_ev))
}

/// Fits `(σ_f², l², σ_n²)` by multi-start gradient ascent of the log
/// marginal likelihood in log-parameter space, keeping the best restart.
pub fn gp_fit(xs: &[f64], y: &[f64], init: &GpSpec, noise_init: f64) -> Result<GpRegressor> {
    if xs.len() != y.len() {
        return Err(crate::error::dim_err("gp_fit targets", xs.len(), y.len()));
    }
    if xs.len() < 2 {
        return Err(Error::Config("gp_fit needs at least 2 training points".into()));
    }
    init.validate()?;
    let (y_mean, yc) = center(y);
    let base = [init.sigma_f2.ln(), init.l2.ln(), noise_init.max(MIN_LOG_NOISE.exp()).ln()];
    let mut best: Option<([f64; 3], Evaluation)> = None;
    for off in RESTART_OFFSETS {
        let start = [base[0] + off[0], base[1] + off[1], (base[2] + off[2]).max(MIN_LOG_NOISE)];
        if let Some((p, ev)) = ascend(xs, &yc, start) {
            if best.as_ref().is_none_or(|(_, b)| ev.lml > b.lml) {
                best = Some((p, ev));
            }
        }
    }
    let (p, ev) = best.ok_or_else(|| Error::IllConditioned("every restart failed to factor the covariance".into()))?;
    let (kernel, noise) = params_spec(&p);
    Ok(GpRegressor {
        kernel,
        noise,
        jitter: ev.jitter,
        xs: xs.to_vec(),
        y_mean,
        chol: ev.chol,
        alpha: ev.alpha,
        lml: ev.lml,
    })
}

impl GpRegressor {
    /// Builds the posterior for fixed hyperparameters without optimization.
    pub fn with_hyperparameters(xs: &[f64], y: &[f64], kernel: GpSpec, noise: f64) -> Result<Self> {
        if xs.len() != y.len() || xs.is_empty() {
            return Err(crate::error::dim_err("gp targets", xs.len(), y.len()));
        }
        let (y_mean, yc) = center(y);
        let ev = evaluate(xs, &yc, &kernel, noise)
            .ok_or_else(|| Error::IllConditioned("covariance could not be factored".into()))?;
        Ok(Self { kernel, noise, jitter: ev.jitter, xs: xs.to_vec(), y_mean, chol: ev.chol, alpha: ev.alpha, lml: ev.lml })
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        self.lml
    }

    pub fn training_inputs(&self) -> &[f64] {
        &self.xs
    }
}

pub fn gp_predict(model: &GpRegressor, x_star: &[f64]) -> GpPrediction {
    let mut out = GpPrediction { mean: vec![], variance: vec![], latent_variance: vec![] };
    for &x in x_star {
        let ks: Vec<f64> = model.xs.iter().map(|&xi| model.kernel.kernel(x, xi)).collect();
        let mean = model.y_mean + ks.iter().zip(&model.alpha).map(|(a, b)| a * b).sum::<f64>();
        let mut v = DVector::from_column_slice(&ks);
        model.chol.l_dirty().solve_lower_triangular_mut(&mut v);
        let latent = (model.kernel.sigma_f2 - v.iter().map(|a| a * a).sum::<f64>()).max(0.0);
        out.mean.push(mean);
        out.latent_variance.push(latent);
        out.variance.push(latent + model.noise);
    }
    out
}

impl GpPrediction {
    pub fn to_array(&self) -> RealArray {
        let n = self.mean.len();
        let mut d = Vec::with_capacity(2 * n);
        for i in 0..n {
            d.extend([self.mean[i], self.variance[i]]);
        }
        RealArray::matrix(n, 2, d).expect("sized")
    }
}
