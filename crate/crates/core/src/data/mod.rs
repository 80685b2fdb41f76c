//! Synthetic data-generating processes.

pub mod benchmark;
pub mod burgers;
pub mod gp;
pub mod kernel;
pub mod multifidelity;
pub mod regression;

pub use benchmark::{benchmark_dataset, BenchmarkSpec};
pub use burgers::{
    burgers_dataset, burgers_ensemble, burgers_solve, burgers_solve_substeps, conditional_gp_ic,
    conditional_ic_moments, snapshot_split, BurgersData, BurgersEnsemble, BurgersSolution, BurgersSpec,
    SnapshotSplit, TimeNormalization,
};
pub use gp::{factor_covariance, sample_gp, CovarianceFactor};
pub use kernel::{mu_high, mu_low, rbf_kernel, GpSpec, MeanFunction};
pub use multifidelity::{multifidelity_dataset, MultiFidelityData, MultiFidelitySpec};
pub use regression::{noisy_regression_dataset, regression_dataset, NoiseCase, RegressionSpec};
