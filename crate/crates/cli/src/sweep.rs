//! Sensitivity sweeps over the benchmark hyperparameter axes.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, ModelSpec};
use crate::error::{io_err, CliError, CliResult};
use crate::experiments::run;
use crate::io::{fmt_num, Provenance, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Lambda,
    Architecture,
    KgKd,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            Self::Lambda => "lambda",
            Self::Architecture => "architecture",
            Self::KgKd => "kg_kd",
        }
    }

    /// Number of the table reproduced by a sweep over this parameter.
    pub fn table_number(self) -> u32 {
        match self {
            Self::Lambda => 2,
            Self::Architecture => 3,
            Self::KgKd => 4,
        }
    }

    pub fn from_table_number(n: u32) -> CliResult<Self> {
        match n {
            2 => Ok(Self::Lambda),
            3 => Ok(Self::Architecture),
            4 => Ok(Self::KgKd),
            _ => Err(CliError::Schema(format!("no sweep reproduces table {n} (expected 2, 3 or 4)"))),
        }
    }
}

impl fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParameter {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        [Self::Lambda, Self::Architecture, Self::KgKd]
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| CliError::Schema(format!("unknown sweep parameter '{s}'")))
    }
}

/// Values swept along one axis or a 2-D grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "parameter", rename_all = "snake_case", deny_unknown_fields)]
pub enum SweepGrid {
    Lambda { values: Vec<f64> },
    /// Generator / encoder depth × width; the discriminator is one layer shallower.
    Architecture { depths: Vec<usize>, widths: Vec<usize> },
    KgKd { k_g: Vec<usize>, k_d: Vec<usize> },
}

/// A single cell setting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CellSetting {
    Lambda(f64),
    Architecture { depth: usize, width: usize },
    KgKd { k_g: usize, k_d: usize },
}

impl CellSetting {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        match *self {
            Self::Lambda(l) => cfg.train.lambda = l,
            Self::Architecture { depth, width } => cfg.model = ModelSpec::uniform(depth, width, cfg.model.latent_dim),
            Self::KgKd { k_g, k_d } => {
                cfg.train.k_g = k_g;
                cfg.train.k_d = k_d;
            }
        }
    }

    /// Row and column labels in the wide table layout.
    pub fn coordinates(&self) -> (String, String) {
        match *self {
            Self::Lambda(l) => ("reverse_kl".into(), format!("{l}")),
            Self::Architecture { depth, width } => (depth.to_string(), width.to_string()),
            Self::KgKd { k_g, k_d } => (k_g.to_string(), k_d.to_string()),
        }
    }

    pub fn label(&self) -> String {
        match *self {
            Self::Lambda(l) => format!("lambda_{l}"),
            Self::Architecture { depth, width } => format!("depth_{depth}_width_{width}"),
            Self::KgKd { k_g, k_d } => format!("kg_{k_g}_kd_{k_d}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub grid: SweepGrid,
    pub seeds: Vec<u64>,
}

impl SweepSpec {
    /// The standard grid for this parameter.
    pub fn standard(parameter: SweepParameter, seeds: Vec<u64>) -> Self {
        let grid = match parameter {
            SweepParameter::Lambda => SweepGrid::Lambda { values: vec![1.0, 1.2, 1.5, 1.8, 2.0, 5.0] },
            SweepParameter::Architecture => SweepGrid::Architecture { depths: vec![2, 3, 4], widths: vec![20, 50, 100] },
            SweepParameter::KgKd => SweepGrid::KgKd { k_g: vec![1, 3, 5], k_d: vec![1, 3, 5] },
        };
        Self { grid, seeds }
    }

    pub fn parameter(&self) -> SweepParameter {
        match self.grid {
            SweepGrid::Lambda { .. } => SweepParameter::Lambda,
            SweepGrid::Architecture { .. } => SweepParameter::Architecture,
            SweepGrid::KgKd { .. } => SweepParameter::KgKd,
        }
    }

    pub fn cells(&self) -> Vec<CellSetting> {
        match &self.grid {
            SweepGrid::Lambda { values } => values.iter().map(|&l| CellSetting::Lambda(l)).collect(),
            SweepGrid::Architecture { depths, widths } => depths
                .iter()
                .flat_map(|&depth| widths.iter().map(move |&width| CellSetting::Architecture { depth, width }))
                .collect(),
            SweepGrid::KgKd { k_g, k_d } => k_g
                .iter()
                .flat_map(|&g| k_d.iter().map(move |&d| CellSetting::KgKd { k_g: g, k_d: d }))
                .collect(),
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        let cells = self.cells();
        if cells.is_empty() {
            return Err(CliError::Schema("sweep grid is empty".into()));
        }
        if self.seeds.is_empty() {
            return Err(CliError::Schema("sweep needs at least one seed".into()));
        }
        for c in &cells {
            let bad = match *c {
                CellSetting::Lambda(l) => !(l.is_finite() && l >= 1.0),
                CellSetting::Architecture { depth, width } => depth < 2 || width == 0,
                CellSetting::KgKd { k_g, k_d } => k_g == 0 || k_d == 0,
            };
            if bad {
                return Err(CliError::Schema(format!("invalid sweep cell {}", c.label())));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub setting: CellSetting,
    /// Metric per seed, `NaN` where training diverged.
    pub values: Vec<f64>,
}

impl CellResult {
    /// Median over the seeds that completed; `NaN` if none did.
    pub fn median(&self) -> f64 {
        median(&self.values)
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub cells: Vec<CellResult>,
}

impl SweepResult {
    /// One row per (cell, seed).
    pub fn long_table(&self) -> Table {
        let mut t = Table::new(&["cell", "row", "column", "seed", "value"]);
        for c in &self.cells {
            let (r, col) = c.setting.coordinates();
            for (s, v) in self.spec.seeds.iter().zip(&c.values) {
                t.push(vec![c.setting.label(), r.clone(), col.clone(), s.to_string(), fmt_num(*v)]);
            }
        }
        t
    }

    /// Seed medians arranged as a two-way table.
    pub fn wide_table(&self) -> Table {
        let corner = match self.spec.parameter() {
            SweepParameter::Lambda => "lambda",
            SweepParameter::Architecture => "depth\\width",
            SweepParameter::KgKd => "k_g\\k_d",
        };
        let mut rows: Vec<String> = vec![];
        let mut cols: Vec<String> = vec![];
        for c in &self.cells {
            let (r, col) = c.setting.coordinates();
            if !rows.contains(&r) {
                rows.push(r);
            }
            if !cols.contains(&col) {
                cols.push(col);
            }
        }
        let mut header = vec![corner.to_string()];
        header.extend(cols.iter().cloned());
        let mut t = Table { header, rows: vec![] };
        for r in &rows {
            let mut line = vec![r.clone()];
            for col in &cols {
                let v = self
                    .cells
                    .iter()
                    .find(|c| c.setting.coordinates() == (r.clone(), col.clone()))
                    .map_or(f64::NAN, CellResult::median);
                line.push(fmt_num(v));
            }
            t.rows.push(line);
        }
        t
    }

    pub fn write(&self, out: &Path, base: &ExperimentConfig) -> CliResult<Vec<PathBuf>> {
        fs::create_dir_all(out).map_err(io_err(out))?;
        let prov = Provenance::of(base);
        let long = out.join(format!("sweep_{}_long.csv", self.spec.parameter()));
        let table = out.join(format!("table_{}.csv", self.spec.parameter().table_number()));
        self.long_table().write(&long, &prov)?;
        self.wide_table().write(&table, &prov)?;
        Ok(vec![long, table])
    }
}

fn is_divergence(e: &CliError) -> bool {
    use cagm_core::Error;
    matches!(
        e,
        CliError::Core(Error::Divergence { .. } | Error::SolverDivergence { .. } | Error::Evaluation(_))
    )
}

/// Runs every cell × seed with `parallel` workers; each run writes into its
/// own directory under `out`.
pub fn sweep(spec: &SweepSpec, base: &ExperimentConfig, out: &Path, parallel: usize) -> CliResult<SweepResult> {
    spec.validate()?;
    base.validate()?;
    let jobs: Vec<(usize, usize)> = (0..spec.cells().len())
        .flat_map(|c| (0..spec.seeds.len()).map(move |s| (c, s)))
        .collect();
    let cells = spec.cells();
    let run_one = |&(c, s): &(usize, usize)| -> CliResult<f64> {
        let mut cfg = base.clone();
        cells[c].apply(&mut cfg);
        cfg.seed = spec.seeds[s];
        let dir = out.join(cells[c].label()).join(format!("seed_{}", cfg.seed));
        match run(&cfg, &dir) {
            Ok(report) => Ok(report.primary()),
            Err(e) if is_divergence(&e) => {
                log::warn!("{} seed {}: {e}", cells[c].label(), cfg.seed);
                Ok(f64::NAN)
            }
            Err(e) => Err(e),
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallel.max(1))
        .build()
        .map_err(|e| CliError::Schema(format!("cannot start worker pool: {e}")))?;
    let values: Vec<f64> = pool.install(|| jobs.par_iter().map(run_one).collect::<CliResult<Vec<f64>>>())?;
    let results = cells
        .iter()
        .enumerate()
        .map(|(c, &setting)| CellResult {
            setting,
            values: values[c * spec.seeds.len()..(c + 1) * spec.seeds.len()].to_vec(),
        })
        .collect();
    Ok(SweepResult { spec: spec.clone(), cells: results })
}
