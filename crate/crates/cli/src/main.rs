use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cagm_cli::config::{ExperimentConfig, ExperimentId, Scale};
use cagm_cli::experiments::{self, ExperimentReport};
use cagm_cli::io::{fmt_num, load_checkpoint, Provenance, Table};
use cagm_cli::sweep::{self, SweepParameter, SweepSpec};
use cagm_core::rng::{stream_rng, streams};
use clap::{Args, Parser, Subcommand};

/// Conditional adversarial surrogates: data generation, training,
/// evaluation and sensitivity sweeps.
#[derive(Parser)]
#[command(name = "cagm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// TOML experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in experiment preset, used when no --config is given.
    #[arg(long)]
    preset: Option<String>,
    /// Budget of the preset: full or desk.
    #[arg(long, default_value = "desk")]
    scale: String,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to $CAGM_OUTPUT_ROOT/<experiment>_seed<seed>.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate data, train and evaluate.
    Run(ConfigArgs),
    /// Write the experiment's training data files.
    GenData(ConfigArgs),
    /// Generate data and train, writing checkpoints and loss histories.
    Train(ConfigArgs),
    /// Evaluate checkpoints previously written by `train` in the output directory.
    Evaluate(ConfigArgs),
    /// Sample a checkpoint at given inputs.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Input point, comma separated for multi-dimensional inputs; repeatable.
        #[arg(long = "x", required = true, allow_hyphen_values = true)]
        xs: Vec<String>,
        #[arg(long, default_value_t = 2000)]
        n_mc: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sensitivity sweep on the benchmark (or a given config).
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// lambda, architecture or kg_kd.
        #[arg(long)]
        parameter: String,
        /// Comma separated seeds per cell.
        #[arg(long, default_value = "0,1,2", value_delimiter = ',')]
        seeds: Vec<u64>,
        #[arg(long, default_value_t = 1)]
        parallel: usize,
    },
    /// Reproduce sensitivity table 2 (lambda), 3 (architecture) or 4 (kg/kd).
    ReproduceTable {
        table: u32,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value = "0,1,2", value_delimiter = ',')]
        seeds: Vec<u64>,
        #[arg(long, default_value_t = 1)]
        parallel: usize,
    },
    /// Write the data behind figure 3 (multi-fidelity band), 4 (per-location KL) or 7 (Burgers slices).
    ReproduceFigure {
        figure: u32,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Print a preset as TOML.
    ShowConfig(ConfigArgs),
}

fn load_config(args: &ConfigArgs, default: Option<ExperimentId>) -> Result<ExperimentConfig> {
    let mut cfg = match (&args.config, &args.preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ExperimentConfig::from_toml(&text)?
        }
        (None, Some(name)) => ExperimentConfig::preset(name.parse()?, args.scale.parse::<Scale>()?),
        (None, None) => match default {
            Some(id) => ExperimentConfig::preset(id, args.scale.parse::<Scale>()?),
            None => bail!("either --config or --preset is required"),
        },
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.output_dir = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn output_dir(cfg: &ExperimentConfig, suffix: &str) -> PathBuf {
    cfg.output_dir.clone().unwrap_or_else(|| {
        let root = std::env::var_os("CAGM_OUTPUT_ROOT").map_or_else(|| PathBuf::from("runs"), PathBuf::from);
        root.join(format!("{}{suffix}_seed{}", cfg.experiment, cfg.seed))
    })
}

fn print_report(report: &ExperimentReport, out: &Path) {
    println!("{} seed {} -> {}", report.experiment, report.seed, out.display());
    for (k, v) in &report.metrics {
        println!("  {k:<36} {v:.6e}");
    }
}

fn parse_point(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().with_context(|| format!("invalid input value '{v}'")))
        .collect()
}

fn run_sweep(cfg: &ExperimentConfig, parameter: SweepParameter, seeds: Vec<u64>, parallel: usize) -> Result<()> {
    let spec = SweepSpec::standard(parameter, seeds);
    let out = output_dir(cfg, &format!("_sweep_{parameter}"));
    let result = sweep::sweep(&spec, cfg, &out, parallel)?;
    let files = result.write(&out, cfg)?;
    print!("{}", result.wide_table().render(&Provenance::of(cfg)));
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Run(args) => {
            let cfg = load_config(&args, None)?;
            let out = output_dir(&cfg, "");
            let report = experiments::run(&cfg, &out)?;
            print_report(&report, &out);
        }
        Command::GenData(args) => {
            let cfg = load_config(&args, None)?;
            let out = output_dir(&cfg, "");
            let data = experiments::generate_data(&cfg)?;
            for f in experiments::write_data(&cfg, &data, &out)? {
                println!("wrote {}", f.display());
            }
        }
        Command::Train(args) => {
            let cfg = load_config(&args, None)?;
            let out = output_dir(&cfg, "");
            let data = experiments::generate_data(&cfg)?;
            experiments::write_data(&cfg, &data, &out)?;
            for m in experiments::train_models(&cfg, &data, &out)? {
                println!("wrote {}", experiments::checkpoint_path(&out, m.name).display());
            }
            fs::write(out.join("config.toml"), cfg.to_toml()).context("writing config.toml")?;
        }
        Command::Evaluate(args) => {
            let cfg = load_config(&args, None)?;
            let out = output_dir(&cfg, "");
            let data = experiments::generate_data(&cfg)?;
            let models = experiments::load_models(&cfg, &data, &out)?;
            let (metrics, _) = experiments::evaluate(&cfg, &data, &models, &out)?;
            print_report(&ExperimentReport { experiment: cfg.experiment, seed: cfg.seed, metrics, files: vec![] }, &out);
        }
        Command::Predict { checkpoint, xs, n_mc, seed, out } => {
            let (_, surrogate) = load_checkpoint(&checkpoint)?;
            let x_dim = surrogate.model.x_dim();
            let mut header: Vec<String> = (0..x_dim).map(|i| format!("x{i}")).collect();
            for j in 0..surrogate.model.y_dim() {
                header.extend([format!("mean{j}"), format!("lower{j}"), format!("upper{j}")]);
            }
            let mut table = Table { header, rows: vec![] };
            let mut rng = stream_rng(seed, streams::PREDICTION);
            for s in &xs {
                let x = parse_point(s)?;
                if x.len() != x_dim {
                    bail!("input '{s}' has {} values, the model expects {x_dim}", x.len());
                }
                let st = surrogate.predict_moments(&x, n_mc, &mut rng)?;
                let mut row: Vec<String> = x.iter().map(|v| fmt_num(*v)).collect();
                for (m, v) in st.mean.iter().zip(&st.variance) {
                    row.extend([fmt_num(*m), fmt_num(m - 2.0 * v.sqrt()), fmt_num(m + 2.0 * v.sqrt())]);
                }
                table.rows.push(row);
            }
            let prov = Provenance { config_hash: "checkpoint".into(), seed, version: env!("CARGO_PKG_VERSION").into() };
            match out {
                Some(p) => table.write(&p, &prov)?,
                None => print!("{}", table.render(&prov)),
            }
        }
        Command::Sweep { cfg, parameter, seeds, parallel } => {
            let base = load_config(&cfg, Some(ExperimentId::AppendixBenchmark))?;
            run_sweep(&base, parameter.parse()?, seeds, parallel)?;
        }
        Command::ReproduceTable { table, cfg, seeds, parallel } => {
            let base = load_config(&cfg, Some(ExperimentId::AppendixBenchmark))?;
            run_sweep(&base, SweepParameter::from_table_number(table)?, seeds, parallel)?;
        }
        Command::ReproduceFigure { figure, cfg } => {
            let (id, file) = match figure {
                3 => (ExperimentId::Multifidelity, "predictions.csv"),
                4 => (ExperimentId::Multifidelity, "kl_per_location.csv"),
                7 => (ExperimentId::Burgers, "predictions.csv"),
                _ => bail!("no reproduction for figure {figure} (expected 3, 4 or 7)"),
            };
            let mut args = cfg.clone();
            if args.config.is_none() && args.preset.is_none() {
                args.preset = Some(id.name().into());
            }
            let cfg = load_config(&args, None)?;
            if cfg.experiment != id {
                bail!("figure {figure} needs experiment {id}, config has {}", cfg.experiment);
            }
            let out = output_dir(&cfg, "");
            let report = experiments::run(&cfg, &out)?;
            print_report(&report, &out);
            println!("figure {figure} data: {}", out.join(file).display());
        }
        Command::ShowConfig(args) => print!("{}", load_config(&args, None)?.to_toml()),
    }
    Ok(())
}
