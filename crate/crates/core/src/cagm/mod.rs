//! The conditional adversarial generative model.
//!
//! Three networks cooperate: a generator `y = f_θ(x, z)` pushing a standard
//! normal latent through a deterministic map, an encoder `z ≈ f_φ(x, y)`
//! whose cycle error bounds the generative entropy, and a discriminator
//! `T_ψ(x, y)` whose logit estimates the log density ratio between generated
//! and observed pairs.

mod loss;
mod model;
mod predict;
mod surrogate;
mod train;

pub use loss::{
    discriminator_loss, discriminator_loss_graph, generator_loss, generator_loss_graph, DiscriminatorLoss,
    LOGIT_CLAMP,
};
pub use model::{Architecture, CagmModel};
pub use predict::{generate, predict_moments, predict_samples, sample_latent, PredictiveStats};
pub use surrogate::Surrogate;
pub use train::{train, train_with, LossHistory, TrainConfig};
