//! On-disk formats: provenance-stamped CSV tables, dataset files and
//! model checkpoints.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use cagm_core::cagm::{CagmModel, Surrogate, TrainConfig};
use cagm_core::dataset::Standardization;
use cagm_core::mlp::{Dense, Mlp};
use cagm_core::{PairedDataset, RealArray};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{io_err, CliError, CliResult};

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v:.16e}")
    }
}

/// Identifies the configuration, seed and code version behind an artifact.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
}

impl Provenance {
    pub fn of(config: &ExperimentConfig) -> Self {
        Self { config_hash: config.hash(), seed: config.seed, version: env!("CARGO_PKG_VERSION").to_string() }
    }

    pub fn comment(&self) -> String {
        format!("# config_hash={} seed={} version={}", self.config_hash, self.seed, self.version)
    }
}

/// A table of string cells with a header row.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: vec![] }
    }

    pub fn push_numbers(&mut self, row: &[f64]) {
        self.rows.push(row.iter().map(|&v| fmt_num(v)).collect());
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn render(&self, provenance: &Provenance) -> String {
        let mut s = provenance.comment();
        s.push('\n');
        s.push_str(&self.header.join(","));
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }

    pub fn write(&self, path: &Path, provenance: &Provenance) -> CliResult<()> {
        fs::write(path, self.render(provenance)).map_err(io_err(path))
    }
}

/// Parses a CSV written by [`Table::write`], skipping comment lines.
pub fn read_table(path: &Path) -> CliResult<Table> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.is_empty());
    let header = lines.next().map(|h| h.split(',').map(String::from).collect()).unwrap_or_default();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    Ok(Table { header, rows })
}

const DATASET_MAGIC: &str = "# cagm-dataset v1";

/// Header of a dataset file.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetHeader {
    pub generator: String,
    pub seed: u64,
    /// JSON encoding of the generating spec.
    pub spec: String,
    pub rows: usize,
    pub x_dim: usize,
    pub y_dim: usize,
    pub labeled: bool,
}

/// Writes `data` as a commented header followed by a CSV matrix with
/// columns `x0.., y0.. [, label]`.
pub fn write_dataset(path: &Path, generator: &str, seed: u64, spec_json: &str, data: &PairedDataset) -> CliResult<()> {
    let mut s = String::new();
    let _ = writeln!(s, "{DATASET_MAGIC}");
    let _ = writeln!(s, "# generator={generator}");
    let _ = writeln!(s, "# seed={seed}");
    let _ = writeln!(s, "# spec={spec_json}");
    let _ = writeln!(s, "# shape={} {} {}", data.len(), data.x_dim(), data.y_dim());
    let mut cols: Vec<String> = (0..data.x_dim()).map(|i| format!("x{i}")).collect();
    cols.extend((0..data.y_dim()).map(|i| format!("y{i}")));
    if data.labels.is_some() {
        cols.push("label".into());
    }
    let _ = writeln!(s, "{}", cols.join(","));
    for r in 0..data.len() {
        let mut cells: Vec<String> = data.inputs.row(r).iter().map(|&v| fmt_num(v)).collect();
        cells.extend(data.outputs.row(r).iter().map(|&v| fmt_num(v)));
        if let Some(l) = &data.labels {
            cells.push(fmt_num(l[r]));
        }
        let _ = writeln!(s, "{}", cells.join(","));
    }
    fs::write(path, s).map_err(io_err(path))
}

pub fn read_dataset(path: &Path) -> CliResult<(DatasetHeader, PairedDataset)> {
    let bad = |reason: String| CliError::DatasetFile { path: path.to_path_buf(), reason };
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut lines = text.lines();
    if lines.next() != Some(DATASET_MAGIC) {
        return Err(bad("missing dataset header".into()));
    }
    let mut field = |key: &str| -> CliResult<String> {
        let line = lines.next().ok_or_else(|| bad(format!("missing {key}")))?;
        line.strip_prefix(&format!("# {key}="))
            .map(String::from)
            .ok_or_else(|| bad(format!("expected '# {key}=', found '{line}'")))
    };
    let generator = field("generator")?;
    let seed = field("seed")?.parse().map_err(|e| bad(format!("seed: {e}")))?;
    let spec = field("spec")?;
    let shape: Vec<usize> = field("shape")?
        .split_whitespace()
        .map(|v| v.parse().map_err(|e| bad(format!("shape: {e}"))))
        .collect::<CliResult<_>>()?;
    let [rows, x_dim, y_dim] = shape[..] else { return Err(bad("shape needs three entries".into())) };
    let columns = lines.next().ok_or_else(|| bad("missing column header".into()))?;
    let labeled = columns.ends_with(",label");
    let width = x_dim + y_dim + usize::from(labeled);
    let (mut xs, mut ys, mut labels) = (Vec::new(), Vec::new(), Vec::new());
    let mut count = 0;
    for (i, line) in lines.enumerate() {
        let vals: Vec<f64> = line
            .split(',')
            .map(|v| v.parse::<f64>().map_err(|e| bad(format!("row {i}: {e}"))))
            .collect::<CliResult<_>>()?;
        if vals.len() != width {
            return Err(bad(format!("row {i} has {} values, expected {width}", vals.len())));
        }
        xs.extend_from_slice(&vals[..x_dim]);
        ys.extend_from_slice(&vals[x_dim..x_dim + y_dim]);
        if labeled {
            labels.push(vals[width - 1]);
        }
        count += 1;
    }
    if count != rows {
        return Err(bad(format!("header declares {rows} rows, found {count}")));
    }
    let mut data = PairedDataset::new(RealArray::matrix(rows, x_dim, xs)?, RealArray::matrix(rows, y_dim, ys)?)?;
    if labeled {
        data = data.with_labels(labels)?;
    }
    Ok((DatasetHeader { generator, seed, spec, rows, x_dim, y_dim, labeled }, data))
}

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkRecord {
    pub layer_widths: Vec<usize>,
    /// Row-major `(in, out)` weight matrices in layer order.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl NetworkRecord {
    fn from_mlp(net: &Mlp) -> Self {
        Self {
            layer_widths: net.widths().to_vec(),
            weights: net.layers().iter().map(|l| l.weights.data().to_vec()).collect(),
            biases: net.layers().iter().map(|l| l.bias.data().to_vec()).collect(),
        }
    }

    fn to_mlp(&self) -> Result<Mlp, String> {
        let w = &self.layer_widths;
        if w.len() < 2 || self.weights.len() != w.len() - 1 || self.biases.len() != w.len() - 1 {
            return Err("layer count does not match layer_widths".into());
        }
        let layers = (0..w.len() - 1)
            .map(|i| {
                Ok(Dense {
                    weights: RealArray::matrix(w[i], w[i + 1], self.weights[i].clone()).map_err(|e| e.to_string())?,
                    bias: RealArray::matrix(1, w[i + 1], self.biases[i].clone()).map_err(|e| e.to_string())?,
                })
            })
            .collect::<Result<Vec<_>, String>>()?;
        Mlp::from_layers(layers).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FinalLosses {
    pub discriminator: f64,
    pub generator: f64,
}

/// Serialized form of a trained surrogate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub latent_dim: usize,
    pub generator: NetworkRecord,
    pub encoder: NetworkRecord,
    pub discriminator: NetworkRecord,
    pub scaling: Standardization,
    pub train_config: Option<TrainConfig>,
    pub final_losses: Option<FinalLosses>,
}

impl Checkpoint {
    pub fn new(s: &Surrogate, train_config: Option<TrainConfig>, final_losses: Option<FinalLosses>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            latent_dim: s.model.latent_dim(),
            generator: NetworkRecord::from_mlp(&s.model.generator),
            encoder: NetworkRecord::from_mlp(&s.model.encoder),
            discriminator: NetworkRecord::from_mlp(&s.model.discriminator),
            scaling: s.scaling.clone(),
            train_config,
            final_losses,
        }
    }

    pub fn surrogate(&self) -> Result<Surrogate, String> {
        let model = CagmModel::from_parts(
            self.generator.to_mlp()?,
            self.encoder.to_mlp()?,
            self.discriminator.to_mlp()?,
            self.latent_dim,
        )
        .map_err(|e| e.to_string())?;
        Surrogate::new(model, self.scaling.clone()).map_err(|e| e.to_string())
    }
}

pub fn save_checkpoint(checkpoint: &Checkpoint, path: &Path) -> CliResult<()> {
    let text = serde_json::to_string_pretty(checkpoint).map_err(|e| CliError::Checkpoint {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    fs::write(path, text).map_err(io_err(path))
}

/// Loads a checkpoint; version mismatches and malformed documents are
/// errors and never yield a partial model.
pub fn load_checkpoint(path: &Path) -> CliResult<(Checkpoint, Surrogate)> {
    let bad = |reason: String| CliError::Checkpoint { path: path.to_path_buf(), reason };
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| bad(format!("malformed document: {e}")))?;
    match value.get("schema_version").and_then(|v| v.as_u64()) {
        Some(v) if v == u64::from(SCHEMA_VERSION) => {}
        Some(v) => return Err(bad(format!("schema_version {v} is not supported (expected {SCHEMA_VERSION})"))),
        None => return Err(bad("missing schema_version".into())),
    }
    let ck: Checkpoint = serde_json::from_value(value).map_err(|e| bad(format!("invalid document: {e}")))?;
    let s = ck.surrogate().map_err(bad)?;
    Ok((ck, s))
}
