//! Experiment configuration documents and presets.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use cagm_core::cagm::{Architecture, TrainConfig};
use cagm_core::data::{BenchmarkSpec, BurgersSpec, MultiFidelitySpec};
use cagm_core::metrics::KlDirection;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentId {
    RegressionI,
    RegressionIi,
    RegressionIii,
    Multifidelity,
    MultifidelitySingle,
    Burgers,
    AppendixBenchmark,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 7] = [
        Self::RegressionI,
        Self::RegressionIi,
        Self::RegressionIii,
        Self::Multifidelity,
        Self::MultifidelitySingle,
        Self::Burgers,
        Self::AppendixBenchmark,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::RegressionI => "regression_i",
            Self::RegressionIi => "regression_ii",
            Self::RegressionIii => "regression_iii",
            Self::Multifidelity => "multifidelity",
            Self::MultifidelitySingle => "multifidelity_single",
            Self::Burgers => "burgers",
            Self::AppendixBenchmark => "appendix_benchmark",
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentId {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| CliError::Schema(format!("unknown experiment '{s}'")))
    }
}

/// Training budget of a preset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    /// Full network sizes and iteration budgets.
    #[default]
    Full,
    /// Reduced networks and iteration counts for a single workstation core.
    Desk,
}

impl FromStr for Scale {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "full" => Ok(Self::Full),
            "desk" => Ok(Self::Desk),
            _ => Err(CliError::Schema(format!("unknown scale '{s}' (expected full or desk)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub generator_hidden: Vec<usize>,
    pub encoder_hidden: Vec<usize>,
    pub discriminator_hidden: Vec<usize>,
    pub latent_dim: usize,
}

impl ModelSpec {
    pub fn uniform(depth: usize, width: usize, latent_dim: usize) -> Self {
        let a = Architecture::uniform(depth, width);
        Self {
            generator_hidden: a.generator_hidden,
            encoder_hidden: a.encoder_hidden,
            discriminator_hidden: a.discriminator_hidden,
            latent_dim,
        }
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            generator_hidden: self.generator_hidden.clone(),
            encoder_hidden: self.encoder_hidden.clone(),
            discriminator_hidden: self.discriminator_hidden.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegressionData {
    pub n_train: usize,
    pub n_test: usize,
    pub noise_fraction: f64,
}

impl Default for RegressionData {
    fn default() -> Self {
        Self { n_train: 200, n_test: 200, noise_fraction: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BurgersData {
    pub spec: BurgersSpec,
    pub n_realizations: usize,
    pub n_train_snapshots: usize,
    /// Seed of the train / held-out snapshot split, independent of `seed`.
    pub split_seed: u64,
}

impl Default for BurgersData {
    fn default() -> Self {
        Self { spec: BurgersSpec::default(), n_realizations: 100, n_train_snapshots: 64, split_seed: 0 }
    }
}

/// Data-generating settings; only the section matching the experiment is used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct DataSpec {
    pub regression: RegressionData,
    pub multifidelity: MultiFidelitySpec,
    pub benchmark: BenchmarkSpec,
    pub burgers: BurgersData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricSpec {
    /// Evaluation locations on the unit interval.
    pub n_test: usize,
    /// Samples per location for fitted marginals and predictive moments.
    pub n_mc: usize,
    /// Draw locations uniformly at random instead of on a regular grid.
    pub random_locations: bool,
    pub direction: KlDirection,
    /// Low-fidelity paths pooled by the multi-fidelity predictor.
    pub n_paths: usize,
}

impl Default for MetricSpec {
    fn default() -> Self {
        Self { n_test: 100, n_mc: 2000, random_locations: false, direction: KlDirection::Reverse, n_paths: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    /// Master seed; data, initialization, training and evaluation streams
    /// are all derived from it. Overrides `train.seed`.
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub train: TrainConfig,
    pub model: ModelSpec,
    #[serde(default)]
    pub data: DataSpec,
    #[serde(default)]
    pub metric: MetricSpec,
}

impl ExperimentConfig {
    pub fn preset(id: ExperimentId, scale: Scale) -> Self {
        let full_model = ModelSpec::uniform(3, 100, 1);
        let base = TrainConfig { lambda: 1.5, beta: 0.0, learning_rate: 1e-4, iterations: 20_000, ..TrainConfig::default() };
        let mut cfg = match id {
            ExperimentId::RegressionI | ExperimentId::RegressionIi | ExperimentId::RegressionIii => Self {
                experiment: id,
                seed: 0,
                output_dir: None,
                train: TrainConfig { k_d: 2, k_g: 1, batch_size: 200, ..base.clone() },
                model: full_model,
                data: DataSpec::default(),
                metric: MetricSpec::default(),
            },
            ExperimentId::Multifidelity | ExperimentId::MultifidelitySingle => Self {
                experiment: id,
                seed: 0,
                output_dir: None,
                train: TrainConfig { k_d: 1, k_g: 5, batch_size: 200, ..base.clone() },
                model: full_model,
                data: DataSpec::default(),
                metric: MetricSpec::default(),
            },
            ExperimentId::Burgers => Self {
                experiment: id,
                seed: 0,
                output_dir: None,
                train: TrainConfig { k_d: 1, k_g: 1, beta: 0.5, batch_size: 256, ..base.clone() },
                model: ModelSpec {
                    generator_hidden: vec![256, 256, 256],
                    encoder_hidden: vec![256, 256, 256],
                    discriminator_hidden: vec![256, 256],
                    latent_dim: 32,
                },
                data: DataSpec::default(),
                metric: MetricSpec { n_mc: 20_000, ..MetricSpec::default() },
            },
            ExperimentId::AppendixBenchmark => Self {
                experiment: id,
                seed: 0,
                output_dir: None,
                train: TrainConfig { k_d: 3, k_g: 1, batch_size: 500, ..base.clone() },
                model: full_model,
                data: DataSpec::default(),
                metric: MetricSpec::default(),
            },
        };
        if scale == Scale::Desk {
            cfg.apply_desk_scale();
        }
        cfg
    }

    fn apply_desk_scale(&mut self) {
        match self.experiment {
            ExperimentId::RegressionI | ExperimentId::RegressionIi | ExperimentId::RegressionIii => {
                self.model = ModelSpec::uniform(3, 50, 1);
            }
            ExperimentId::Multifidelity | ExperimentId::MultifidelitySingle => {
                self.model = ModelSpec::uniform(3, 50, 1);
                self.train.iterations = 5_000;
            }
            ExperimentId::Burgers => {
                self.model = ModelSpec {
                    generator_hidden: vec![128; 3],
                    encoder_hidden: vec![128; 3],
                    discriminator_hidden: vec![128; 2],
                    latent_dim: 32,
                };
                self.train.iterations = 15_000;
            }
            ExperimentId::AppendixBenchmark => {
                self.model = ModelSpec::uniform(3, 50, 1);
                self.train.batch_size = 128;
                self.train.iterations = 10_000;
            }
        }
    }

    /// Parses a TOML document, rejecting unknown keys.
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Schema(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> CliResult<()> {
        let mut problems = Vec::new();
        if let Err(e) = self.train.validate() {
            problems.push(e.to_string());
        }
        if self.model.latent_dim == 0 {
            problems.push("model.latent_dim must be positive".into());
        }
        for (name, v) in [
            ("model.generator_hidden", &self.model.generator_hidden),
            ("model.encoder_hidden", &self.model.encoder_hidden),
            ("model.discriminator_hidden", &self.model.discriminator_hidden),
        ] {
            if v.contains(&0) {
                problems.push(format!("{name} contains a zero width"));
            }
        }
        if self.metric.n_test == 0 {
            problems.push("metric.n_test must be positive".into());
        }
        if self.metric.n_mc < 2 {
            problems.push("metric.n_mc must be at least 2".into());
        }
        if self.metric.n_paths == 0 {
            problems.push("metric.n_paths must be positive".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(CliError::Schema(problems.join("; ")))
        }
    }

    /// Training settings with the master seed applied.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig { seed: self.seed, ..self.train.clone() }
    }

    /// First 16 hex digits of the SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = None;
        let digest = Sha256::digest(canonical.to_toml().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_round_trip_through_toml() {
        for id in ExperimentId::ALL {
            for scale in [Scale::Full, Scale::Desk] {
                let cfg = ExperimentConfig::preset(id, scale);
                cfg.validate().unwrap();
                let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
                assert_eq!(back, cfg);
                assert_eq!(back.hash(), cfg.hash());
            }
        }
    }

    #[test]
    fn preset_update_ratios() {
        let r = |id| {
            let c = ExperimentConfig::preset(id, Scale::Full);
            (c.train.k_d, c.train.k_g)
        };
        assert_eq!(r(ExperimentId::RegressionI), (2, 1));
        assert_eq!(r(ExperimentId::Multifidelity), (1, 5));
        assert_eq!(r(ExperimentId::Burgers), (1, 1));
        assert_eq!(r(ExperimentId::AppendixBenchmark), (3, 1));
        assert_eq!(ExperimentConfig::preset(ExperimentId::Burgers, Scale::Full).train.beta, 0.5);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut text = ExperimentConfig::preset(ExperimentId::RegressionI, Scale::Full).to_toml();
        text = text.replace("[train]", "[train]\nlearning_rte = 0.1");
        let err = ExperimentConfig::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("learning_rte"), "{err}");
    }

    #[test]
    fn invalid_values_list_every_problem() {
        let mut cfg = ExperimentConfig::preset(ExperimentId::RegressionI, Scale::Full);
        cfg.train.lambda = 0.5;
        cfg.metric.n_mc = 1;
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("lambda") && err.contains("n_mc"), "{err}");
    }

    #[test]
    fn experiment_names_parse() {
        for id in ExperimentId::ALL {
            assert_eq!(id.name().parse::<ExperimentId>().unwrap(), id);
        }
        assert!("regression_iv".parse::<ExperimentId>().is_err());
    }
}
