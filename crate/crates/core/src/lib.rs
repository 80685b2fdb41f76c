//! Probabilistic surrogates for stochastic systems built from an
//! entropy-regularized conditional adversarial generative model.
//!
//! The crate bundles the numerical substrate (dense arrays, a reverse-mode
//! tape, tanh MLPs, Adam), the model itself, the synthetic benchmark
//! processes, Gaussian KL metrics and an exact GP regression baseline.

pub mod adam;
pub mod array;
pub mod cagm;
pub mod data;
pub mod dataset;
pub mod error;
pub mod gp_baseline;
pub mod gradcheck;
pub mod linalg;
pub mod metrics;
pub mod mlp;
pub mod rng;
pub mod tape;

pub use array::RealArray;
pub use dataset::PairedDataset;
pub use error::{Error, Result};
