use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::adam::AdamState;
use crate::array::RealArray;
use crate::dataset::PairedDataset;
use crate::error::{dim_err, Error, Result};
use crate::mlp::MlpNodes;
use crate::rng::{stream_rng, streams, Rng};
use crate::tape::{Gradients, Tape};

use super::loss::{discriminator_loss_graph, generator_loss_graph};
use super::model::CagmModel;
use super::predict::{generate, sample_latent};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    /// Entropic regularization weight, `>= 1`.
    pub lambda: f64,
    /// Residual (data-fit) penalty weight.
    pub beta: f64,
    /// Generator/encoder steps per iteration.
    pub k_g: usize,
    /// Discriminator steps per iteration.
    pub k_d: usize,
    pub learning_rate: f64,
    /// Rows per minibatch; at or above the dataset size the full dataset is used.
    pub batch_size: usize,
    pub iterations: usize,
    pub seed: u64,
    /// Monte Carlo sample count for predictions.
    pub n_mc: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 1.5,
            beta: 0.0,
            k_g: 1,
            k_d: 1,
            learning_rate: 1e-4,
            batch_size: 500,
            iterations: 20_000,
            seed: 0,
            n_mc: 2000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.lambda >= 1.0) {
            problems.push(format!("lambda must be >= 1 (got {})", self.lambda));
        }
        if !(self.beta >= 0.0) {
            problems.push(format!("beta must be >= 0 (got {})", self.beta));
        }
        if self.k_g == 0 || self.k_d == 0 {
            problems.push(format!("k_g and k_d must be positive (got {}, {})", self.k_g, self.k_d));
        }
        if !(self.learning_rate > 0.0) {
            problems.push(format!("learning_rate must be positive (got {})", self.learning_rate));
        }
        if self.batch_size == 0 {
            problems.push("batch_size must be positive".into());
        }
        if self.n_mc == 0 {
            problems.push("n_mc must be positive".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }
}

/// Per-iteration losses, averaged over that iteration's steps.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossHistory {
    /// Discriminator objective `L_D` (maximized).
    pub discriminator: Vec<f64>,
    /// Generator/encoder objective `L_G` (minimized).
    pub generator: Vec<f64>,
    /// Clamped discriminator logits per iteration.
    pub saturated: Vec<usize>,
}

impl LossHistory {
    pub fn len(&self) -> usize {
        self.discriminator.len()
    }

    pub fn is_empty(&self) -> bool {
        self.discriminator.is_empty()
    }
}

fn minibatch(data: &PairedDataset, batch_size: usize, rng: &mut Rng) -> (RealArray, RealArray) {
    let n = data.len();
    if batch_size >= n {
        return (data.inputs.clone(), data.outputs.clone());
    }
    let idx: Vec<usize> = (0..batch_size).map(|_| rng.random_range(0..n)).collect();
    (data.inputs.select_rows(&idx), data.outputs.select_rows(&idx))
}

fn collect(grads: &Gradients, nodes: &MlpNodes, tape: &Tape) -> Vec<RealArray> {
    nodes
        .ids()
        .into_iter()
        .map(|id| grads.get(id).cloned().unwrap_or_else(|| RealArray::zeros(tape.value(id).shape())))
        .collect()
}

/// Alternating optimization without progress reporting; see [`train_with`].
pub fn train(model: &mut CagmModel, data: &PairedDataset, config: &TrainConfig) -> Result<LossHistory> {
    train_with(model, data, config, |_, _, _| {})
}

/// Runs `config.iterations` rounds of `k_d` discriminator ascent steps
/// followed by `k_g` generator/encoder descent steps, each on a fresh
/// minibatch and fresh prior draws. `observer` sees
/// `(iteration, L_D, L_G)` after every round.
///
/// On divergence the model keeps the last finite parameters and the error
/// carries the history recorded so far.
pub fn train_with(
    model: &mut CagmModel,
    data: &PairedDataset,
    config: &TrainConfig,
    mut observer: impl FnMut(usize, f64, f64),
) -> Result<LossHistory> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::Config("training dataset is empty".into()));
    }
    if data.x_dim() != model.x_dim() {
        return Err(dim_err("dataset x width", model.x_dim(), data.x_dim()));
    }
    if data.y_dim() != model.y_dim() {
        return Err(dim_err("dataset y width", model.y_dim(), data.y_dim()));
    }

    let mut rng = stream_rng(config.seed, streams::TRAINING);
    let lr = config.learning_rate;
    let mut adam_d = AdamState::new(&model.discriminator.params(), lr);
    let mut adam_g = AdamState::new(&model.generator.params(), lr);
    let mut adam_e = AdamState::new(&model.encoder.params(), lr);
    let mut history = LossHistory::default();

    let diverged = |iteration: usize, reason: String, history: &LossHistory| Error::Divergence {
        iteration,
        reason,
        partial: Box::new(history.clone()),
    };
    let relabel = |e: Error, iteration: usize, history: &LossHistory| match e {
        Error::Divergence { reason, .. } => diverged(iteration, reason, history),
        other => other,
    };

    for it in 0..config.iterations {
        let mut ld_sum = 0.0;
        let mut saturated = 0;
        for _ in 0..config.k_d {
            let (x, y) = minibatch(data, config.batch_size, &mut rng);
            let z = sample_latent(x.rows(), model.latent_dim(), &mut rng);
            let fake = generate(model, &x, &z)?;
            let mut tape = Tape::new();
            let disc = model.discriminator.record(&mut tape, true);
            let (ld, sat) = discriminator_loss_graph(&mut tape, &disc, &x, &y, &fake)?;
            let value = tape.value(ld).item();
            if !value.is_finite() {
                return Err(diverged(it, format!("discriminator loss {value}"), &history));
            }
            let ascent = tape.scale(ld, -1.0);
            let grads = tape.backward(ascent)?;
            let g = collect(&grads, &disc, &tape);
            adam_d
                .step(&mut model.discriminator.params_mut(), &g)
                .map_err(|e| relabel(e, it, &history))?;
            ld_sum += value;
            saturated += sat;
        }

        let mut lg_sum = 0.0;
        for _ in 0..config.k_g {
            let (x, y) = minibatch(data, config.batch_size, &mut rng);
            let z = sample_latent(x.rows(), model.latent_dim(), &mut rng);
            let mut tape = Tape::new();
            let gen = model.generator.record(&mut tape, true);
            let enc = model.encoder.record(&mut tape, true);
            let disc = model.discriminator.record(&mut tape, false);
            let lg = generator_loss_graph(&mut tape, &gen, &enc, &disc, &x, &y, &z, config.lambda, config.beta)?;
            let value = tape.value(lg).item();
            if !value.is_finite() {
                return Err(diverged(it, format!("generator loss {value}"), &history));
            }
            let grads = tape.backward(lg)?;
            let gg = collect(&grads, &gen, &tape);
            let ge = collect(&grads, &enc, &tape);
            adam_g
                .step(&mut model.generator.params_mut(), &gg)
                .map_err(|e| relabel(e, it, &history))?;
            adam_e
                .step(&mut model.encoder.params_mut(), &ge)
                .map_err(|e| relabel(e, it, &history))?;
            lg_sum += value;
        }

        let ld = ld_sum / config.k_d as f64;
        let lg = lg_sum / config.k_g as f64;
        history.discriminator.push(ld);
        history.generator.push(lg);
        history.saturated.push(saturated);
        observer(it, ld, lg);
    }
    Ok(history)
}
