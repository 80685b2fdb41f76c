use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::mlp::{xavier_init_stream, Mlp};
use crate::rng::streams;

/// Hidden-layer widths of the three networks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub generator_hidden: Vec<usize>,
    pub encoder_hidden: Vec<usize>,
    pub discriminator_hidden: Vec<usize>,
}

impl Architecture {
    /// `depth` hidden layers of `width` for generator and encoder, one fewer
    /// for the discriminator.
    pub fn uniform(depth: usize, width: usize) -> Self {
        Self {
            generator_hidden: vec![width; depth],
            encoder_hidden: vec![width; depth],
            discriminator_hidden: vec![width; depth.saturating_sub(1)],
        }
    }
}

impl Default for Architecture {
    fn default() -> Self {
        Self::uniform(3, 100)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CagmModel {
    /// `(x ⊕ z) → y`
    pub generator: Mlp,
    /// `(x ⊕ y) → z`
    pub encoder: Mlp,
    /// `(x ⊕ y) →` logit
    pub discriminator: Mlp,
    x_dim: usize,
    y_dim: usize,
    latent_dim: usize,
}

fn widths(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut w = Vec::with_capacity(hidden.len() + 2);
    w.push(input);
    w.extend_from_slice(hidden);
    w.push(output);
    w
}

impl CagmModel {
    /// Xavier-initialized model; each network draws from its own stream of `seed`.
    pub fn new(x_dim: usize, y_dim: usize, latent_dim: usize, arch: &Architecture, seed: u64) -> Result<Self> {
        if x_dim == 0 || y_dim == 0 || latent_dim == 0 {
            return Err(Error::Config(format!(
                "dimensions must be positive (x {x_dim}, y {y_dim}, latent {latent_dim})"
            )));
        }
        let generator = xavier_init_stream(
            &widths(x_dim + latent_dim, &arch.generator_hidden, y_dim),
            seed,
            streams::GENERATOR_INIT,
        )?;
        let encoder = xavier_init_stream(
            &widths(x_dim + y_dim, &arch.encoder_hidden, latent_dim),
            seed,
            streams::ENCODER_INIT,
        )?;
        let discriminator = xavier_init_stream(
            &widths(x_dim + y_dim, &arch.discriminator_hidden, 1),
            seed,
            streams::DISCRIMINATOR_INIT,
        )?;
        Self::from_parts(generator, encoder, discriminator, latent_dim)
    }

    /// Assembles a model from existing networks, checking that their widths
    /// agree.
    pub fn from_parts(generator: Mlp, encoder: Mlp, discriminator: Mlp, latent_dim: usize) -> Result<Self> {
        if latent_dim == 0 || generator.input_width() <= latent_dim {
            return Err(Error::Config(format!(
                "generator input width {} leaves no room for x beside latent dim {latent_dim}",
                generator.input_width()
            )));
        }
        let x_dim = generator.input_width() - latent_dim;
        let y_dim = generator.output_width();
        if encoder.input_width() != x_dim + y_dim {
            return Err(dim_err("encoder input width", x_dim + y_dim, encoder.input_width()));
        }
        if encoder.output_width() != latent_dim {
            return Err(dim_err("encoder output width", latent_dim, encoder.output_width()));
        }
        if discriminator.input_width() != x_dim + y_dim {
            return Err(dim_err("discriminator input width", x_dim + y_dim, discriminator.input_width()));
        }
        if discriminator.output_width() != 1 {
            return Err(dim_err("discriminator output width", 1, discriminator.output_width()));
        }
        Ok(Self {
            generator,
            encoder,
            discriminator,
            x_dim,
            y_dim,
            latent_dim,
        })
    }

    pub fn x_dim(&self) -> usize {
        self.x_dim
    }

    pub fn y_dim(&self) -> usize {
        self.y_dim
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }
}
