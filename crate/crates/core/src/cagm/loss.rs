use crate::array::RealArray;
use crate::error::{Error, Result};
use crate::mlp::MlpNodes;
use crate::tape::{NodeId, Tape};

use super::model::CagmModel;
use super::predict::generate;

/// Discriminator logits are clamped to `±LOGIT_CLAMP` before the log-sigmoid.
pub const LOGIT_CLAMP: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscriminatorLoss {
    pub value: f64,
    /// Logits that hit the clamp.
    pub saturated: usize,
}

fn count_saturated(v: &RealArray) -> usize {
    v.data().iter().filter(|l| l.abs() > LOGIT_CLAMP).count()
}

/// Records `E[log σ(T(x, ỹ))] + E[log(1 − σ(T(x, y)))]` on `tape`, where `ỹ`
/// are generated outputs already detached from the generator. Only the
/// discriminator handles in `disc` can carry gradients.
pub fn discriminator_loss_graph(
    tape: &mut Tape,
    disc: &MlpNodes,
    x: &RealArray,
    y: &RealArray,
    fake_y: &RealArray,
) -> Result<(NodeId, usize)> {
    let xi = tape.constant(x.clone());
    let real = tape.constant(y.clone());
    let fake = tape.constant(fake_y.clone());
    let fake_in = tape.concat(&[xi, fake])?;
    let real_in = tape.concat(&[xi, real])?;
    let t_fake = disc.forward(tape, fake_in)?;
    let t_real = disc.forward(tape, real_in)?;
    let saturated = count_saturated(tape.value(t_fake)) + count_saturated(tape.value(t_real));

    let t_fake = tape.clamp(t_fake, -LOGIT_CLAMP, LOGIT_CLAMP);
    let t_real = tape.clamp(t_real, -LOGIT_CLAMP, LOGIT_CLAMP);
    let log_fake = tape.log_sigmoid(t_fake);
    let fake_term = tape.mean(log_fake);
    // log(1 − σ(t)) = log σ(−t)
    let neg_real = tape.scale(t_real, -1.0);
    let log_real = tape.log_sigmoid(neg_real);
    let real_term = tape.mean(log_real);
    Ok((tape.add(fake_term, real_term)?, saturated))
}

/// Records the generator/encoder objective
/// `E[T(x, f(x,z)) + (λ−1)/2·‖z − f_φ(x, f(x,z))‖² + β‖f(x,z) − y‖²]`.
///
/// The encoder is read as a unit-variance Gaussian posterior head, so the
/// `(1−λ)·log q_φ` term becomes the cycle penalty above with constants
/// dropped. Whether `disc` is trainable is up to the caller; training records
/// it as constants.
#[allow(clippy::too_many_arguments)]
pub fn generator_loss_graph(
    tape: &mut Tape,
    gen: &MlpNodes,
    enc: &MlpNodes,
    disc: &MlpNodes,
    x: &RealArray,
    y: &RealArray,
    z: &RealArray,
    lambda: f64,
    beta: f64,
) -> Result<NodeId> {
    if x.rows() != z.rows() || x.rows() != y.rows() {
        return Err(crate::error::dim_err("generator loss batch rows", x.rows(), z.rows().min(y.rows())));
    }
    let n = x.rows() as f64;
    let xi = tape.constant(x.clone());
    let yi = tape.constant(y.clone());
    let zi = tape.constant(z.clone());

    let gen_in = tape.concat(&[xi, zi])?;
    let fake = gen.forward(tape, gen_in)?;
    let pair = tape.concat(&[xi, fake])?;

    let logits = disc.forward(tape, pair)?;
    let adversarial = tape.mean(logits);

    let z_hat = enc.forward(tape, pair)?;
    let cycle = tape.sub(zi, z_hat)?;
    let cycle = tape.square(cycle);
    let cycle = tape.sum(cycle);
    let cycle = tape.scale(cycle, (lambda - 1.0) / (2.0 * n));

    let resid = tape.sub(fake, yi)?;
    let resid = tape.square(resid);
    let resid = tape.sum(resid);
    let resid = tape.scale(resid, beta / n);

    let loss = tape.add(adversarial, cycle)?;
    tape.add(loss, resid)
}

/// Evaluates the discriminator objective for a real batch `(x, y)` and
/// latent draws `z` paired row-wise with `x`.
pub fn discriminator_loss(model: &CagmModel, x: &RealArray, y: &RealArray, z: &RealArray) -> Result<DiscriminatorLoss> {
    let fake = generate(model, x, z)?;
    let mut tape = Tape::new();
    let disc = model.discriminator.record(&mut tape, false);
    let (out, saturated) = discriminator_loss_graph(&mut tape, &disc, x, y, &fake)?;
    Ok(DiscriminatorLoss {
        value: tape.value(out).item(),
        saturated,
    })
}

pub fn generator_loss(
    model: &CagmModel,
    x: &RealArray,
    y: &RealArray,
    z: &RealArray,
    lambda: f64,
    beta: f64,
) -> Result<f64> {
    if lambda < 1.0 {
        return Err(Error::Config(format!("lambda must be >= 1, got {lambda}")));
    }
    let mut tape = Tape::new();
    let gen = model.generator.record(&mut tape, false);
    let enc = model.encoder.record(&mut tape, false);
    let disc = model.discriminator.record(&mut tape, false);
    let out = generator_loss_graph(&mut tape, &gen, &enc, &disc, x, y, z, lambda, beta)?;
    Ok(tape.value(out).item())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlp::{Dense, Mlp};

    fn layer(w: Vec<f64>, rows: usize, cols: usize) -> Dense {
        Dense {
            weights: RealArray::matrix(rows, cols, w).unwrap(),
            bias: RealArray::zeros(&[1, cols]),
        }
    }

    /// 1-d x, y, z; generator `x + z`, encoder `e_x·x + e_y·y`, discriminator `d_y·y`.
    fn linear_model(e: (f64, f64), d_y: f64) -> CagmModel {
        let gen = Mlp::from_layers(vec![layer(vec![1.0, 1.0], 2, 1)]).unwrap();
        let enc = Mlp::from_layers(vec![layer(vec![e.0, e.1], 2, 1)]).unwrap();
        let disc = Mlp::from_layers(vec![layer(vec![0.0, d_y], 2, 1)]).unwrap();
        CagmModel::from_parts(gen, enc, disc, 1).unwrap()
    }

    fn col(v: &[f64]) -> RealArray {
        RealArray::column(v.to_vec()).unwrap()
    }

    #[test]
    fn uninformative_discriminator_gives_minus_ln4() {
        let m = linear_model((0.0, 1.0), 0.0);
        let l = discriminator_loss(&m, &col(&[0.3, -1.0]), &col(&[1.0, 2.0]), &col(&[0.1, 0.5])).unwrap();
        assert!((l.value + 4f64.ln()).abs() < 1e-15);
        assert_eq!(l.saturated, 0);
    }

    #[test]
    fn hand_computed_discriminator_loss() {
        // x = 0, z = 1 → fake y = 1 → logit 1; real y = −1 → logit −1.
        let m = linear_model((0.0, 1.0), 1.0);
        let l = discriminator_loss(&m, &col(&[0.0]), &col(&[-1.0]), &col(&[1.0])).unwrap();
        let expected = 2.0 * (1.0 / (1.0 + (-1f64).exp())).ln();
        assert!((l.value - expected).abs() < 1e-14);
        assert!((l.value + 0.6265).abs() < 1e-4);
    }

    #[test]
    fn confident_discriminator_approaches_zero_and_saturates() {
        let m = linear_model((0.0, 1.0), 100.0);
        let l = discriminator_loss(&m, &col(&[0.0]), &col(&[-1.0]), &col(&[1.0])).unwrap();
        assert!(l.value <= 0.0 && l.value > -1e-12);
        assert_eq!(l.saturated, 2);
    }

    #[test]
    fn generator_loss_without_regularization_is_adversarial_term() {
        let m = linear_model((0.3, -0.2), 0.7);
        let (x, y, z) = (col(&[0.5, -1.0]), col(&[2.0, 0.0]), col(&[0.1, 0.4]));
        let l = generator_loss(&m, &x, &y, &z, 1.0, 0.0).unwrap();
        let fake: Vec<f64> = x.data().iter().zip(z.data()).map(|(a, b)| a + b).collect();
        let adv = 0.7 * fake.iter().sum::<f64>() / 2.0;
        assert!((l - adv).abs() < 1e-15);
    }

    #[test]
    fn generator_loss_hand_example() {
        // T logit 0.2 via d_y: fake y = x + z = 0.2 with d_y = 1.
        // Encoder returns ẑ = e_y·y; choose so (z − ẑ)² = 0.5.
        let (x, z) = (0.0, 0.2);
        let fake = x + z;
        let z_hat = z - 0.5f64.sqrt();
        let m = linear_model((0.0, z_hat / fake), 1.0);
        let l = generator_loss(&m, &col(&[x]), &col(&[0.0]), &col(&[z]), 1.5, 0.0).unwrap();
        assert!((l - 0.325).abs() < 1e-12, "{l}");
    }

    #[test]
    fn perfect_cycle_leaves_adversarial_term() {
        // encoder ẑ = y − x = z recovers the latent exactly.
        let m = linear_model((-1.0, 1.0), 0.4);
        let (x, y, z) = (col(&[0.5, -1.0]), col(&[2.0, 0.0]), col(&[0.1, 0.4]));
        let a = generator_loss(&m, &x, &y, &z, 1.0, 0.0).unwrap();
        let b = generator_loss(&m, &x, &y, &z, 3.7, 0.0).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn residual_penalty() {
        let m = linear_model((-1.0, 1.0), 0.0);
        // fake = 0.6, y = 2 → residual² = 1.96
        let l = generator_loss(&m, &col(&[0.5]), &col(&[2.0]), &col(&[0.1]), 1.5, 0.5).unwrap();
        assert!((l - 0.98).abs() < 1e-12);
    }

    #[test]
    fn lambda_below_one_rejected() {
        let m = linear_model((0.0, 1.0), 1.0);
        assert!(generator_loss(&m, &col(&[0.0]), &col(&[0.0]), &col(&[0.0]), 0.5, 0.0).is_err());
    }
}
