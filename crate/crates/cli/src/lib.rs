//! Configuration, orchestration and artifact persistence for the
//! conditional adversarial surrogate experiments.

pub mod config;
pub mod error;
pub mod experiments;
pub mod io;
pub mod sweep;

pub use config::{ExperimentConfig, ExperimentId, Scale};
pub use error::{CliError, CliResult};
pub use experiments::{run, ExperimentReport};
pub use sweep::{sweep, SweepParameter, SweepSpec};
