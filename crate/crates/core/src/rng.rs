//! Reproducible random streams.
//!
//! Every stochastic operation draws from a ChaCha8 generator addressed by
//! `(seed, stream)`, so independent consumers (network init, minibatch
//! sampling, latent draws, data generation) never share state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Rng = ChaCha8Rng;

/// Well-known stream ids.
pub mod streams {
    pub const GENERATOR_INIT: u64 = 1;
    pub const ENCODER_INIT: u64 = 2;
    pub const DISCRIMINATOR_INIT: u64 = 3;
    pub const TRAINING: u64 = 10;
    pub const DATA: u64 = 20;
    pub const SPLIT: u64 = 21;
    pub const HELD_OUT: u64 = 22;
    pub const PREDICTION: u64 = 30;
    pub const EVALUATION: u64 = 31;
}

/// Generator for stream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn standard_normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn fill_standard_normal(rng: &mut Rng, out: &mut [f64]) {
    for v in out {
        *v = StandardNormal.sample(rng);
    }
}
