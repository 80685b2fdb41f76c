//! End-to-end pipelines: generate data, train, evaluate, write artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use cagm_core::cagm::{sample_latent, CagmModel, LossHistory, PredictiveStats, Surrogate};
use cagm_core::data::regression::{envelope, signal, DOMAIN};
use cagm_core::data::{
    benchmark_dataset, burgers_dataset, multifidelity_dataset, regression_dataset, BurgersData as BurgersSamples,
    MultiFidelityData, MultiFidelitySpec, NoiseCase, RegressionSpec,
};
use cagm_core::dataset::Standardization;
use cagm_core::gp_baseline::{gp_fit, gp_predict};
use cagm_core::data::{GpSpec, MeanFunction};
use cagm_core::metrics::{avg_marginal_kl_with, uniform_grid, MarginalReport};
use cagm_core::rng::{stream_rng, streams, Rng};
use cagm_core::{Error, PairedDataset, RealArray};
use rand::Rng as _;

use crate::config::{ExperimentConfig, ExperimentId};
use crate::error::{io_err, CliError, CliResult};
use crate::io::{fmt_num, load_checkpoint, save_checkpoint, write_dataset, Checkpoint, FinalLosses, Provenance, Table};

/// Summary of one experiment run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub experiment: ExperimentId,
    pub seed: u64,
    pub metrics: BTreeMap<String, f64>,
    pub files: Vec<PathBuf>,
}

impl ExperimentReport {
    pub fn metric(&self, key: &str) -> Option<f64> {
        self.metrics.get(key).copied()
    }

    /// The metric a sweep aggregates for this experiment.
    pub fn primary(&self) -> f64 {
        self.metric(primary_metric(self.experiment)).unwrap_or(f64::NAN)
    }
}

pub fn primary_metric(id: ExperimentId) -> &'static str {
    match id {
        ExperimentId::RegressionI | ExperimentId::RegressionIi | ExperimentId::RegressionIii => "coverage_2sigma",
        ExperimentId::Multifidelity => "mf_reverse_kl",
        ExperimentId::MultifidelitySingle => "sf_reverse_kl",
        ExperimentId::Burgers => "mean_rel_l2_max",
        ExperimentId::AppendixBenchmark => "reverse_kl",
    }
}

/// Training data of an experiment, regenerated deterministically from
/// the configuration and seed.
#[derive(Debug, Clone)]
pub enum ExperimentData {
    Regression { spec: RegressionSpec, train: PairedDataset },
    MultiFidelity(MultiFidelityData),
    Benchmark(PairedDataset),
    Burgers(Box<BurgersSamples>),
}

/// A trained surrogate and its loss history.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub name: &'static str,
    pub surrogate: Surrogate,
    pub history: LossHistory,
}

fn noise_case(id: ExperimentId) -> Option<NoiseCase> {
    match id {
        ExperimentId::RegressionI => Some(NoiseCase::Homoscedastic),
        ExperimentId::RegressionIi => Some(NoiseCase::Heteroscedastic),
        ExperimentId::RegressionIii => Some(NoiseCase::NonAdditive),
        _ => None,
    }
}

pub fn generate_data(cfg: &ExperimentConfig) -> CliResult<ExperimentData> {
    let mut rng = stream_rng(cfg.seed, streams::DATA);
    Ok(match cfg.experiment {
        id @ (ExperimentId::RegressionI | ExperimentId::RegressionIi | ExperimentId::RegressionIii) => {
            let spec = RegressionSpec {
                case: noise_case(id).expect("regression id"),
                noise_fraction: cfg.data.regression.noise_fraction,
            };
            let train = regression_dataset(&spec, cfg.data.regression.n_train, &mut rng)?;
            ExperimentData::Regression { spec, train }
        }
        ExperimentId::Multifidelity | ExperimentId::MultifidelitySingle => {
            ExperimentData::MultiFidelity(multifidelity_dataset(&cfg.data.multifidelity, &mut rng)?)
        }
        ExperimentId::AppendixBenchmark => ExperimentData::Benchmark(benchmark_dataset(&cfg.data.benchmark, &mut rng)?),
        ExperimentId::Burgers => {
            let b = &cfg.data.burgers;
            let mut split_rng = stream_rng(b.split_seed, streams::SPLIT);
            ExperimentData::Burgers(Box::new(burgers_dataset(
                &b.spec,
                b.n_realizations,
                b.n_train_snapshots,
                &mut rng,
                &mut split_rng,
            )?))
        }
    })
}

fn spec_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("specs serialize")
}

/// Writes the training data files; returns their paths.
pub fn write_data(cfg: &ExperimentConfig, data: &ExperimentData, out: &Path) -> CliResult<Vec<PathBuf>> {
    fs::create_dir_all(out).map_err(io_err(out))?;
    let name = cfg.experiment.name();
    let mut files = vec![];
    let mut put = |file: &str, spec: String, d: &PairedDataset| -> CliResult<()> {
        let p = out.join(file);
        write_dataset(&p, name, cfg.seed, &spec, d)?;
        files.push(p);
        Ok(())
    };
    match data {
        ExperimentData::Regression { spec, train } => put("dataset.csv", spec_json(spec), train)?,
        ExperimentData::MultiFidelity(d) => {
            let spec = spec_json(&cfg.data.multifidelity);
            put("dataset.csv", spec.clone(), &d.multi_fidelity_pairs())?;
            put("dataset_single.csv", spec, &d.single_fidelity_pairs())?;
        }
        ExperimentData::Benchmark(d) => put("dataset.csv", spec_json(&cfg.data.benchmark), d)?,
        ExperimentData::Burgers(b) => put("dataset.csv", spec_json(&cfg.data.burgers), &b.dataset)?,
    }
    Ok(files)
}

fn training_sets(cfg: &ExperimentConfig, data: &ExperimentData) -> Vec<(&'static str, PairedDataset, Standardization)> {
    match data {
        ExperimentData::Regression { train, .. } => vec![("model", train.clone(), Standardization::fit(train))],
        ExperimentData::Benchmark(d) => vec![("model", d.clone(), Standardization::fit(d))],
        ExperimentData::MultiFidelity(d) => {
            let mut sets = vec![];
            if cfg.experiment == ExperimentId::Multifidelity {
                let mf = d.multi_fidelity_pairs();
                let s = Standardization::fit(&mf);
                sets.push(("multi_fidelity", mf, s));
            }
            let sf = d.single_fidelity_pairs();
            let s = Standardization::fit(&sf);
            sets.push(("single_fidelity", sf, s));
            sets
        }
        ExperimentData::Burgers(b) => {
            // outputs stay in physical units: the residual penalty is not scale invariant
            vec![("model", b.dataset.clone(), Standardization::identity(1, b.dataset.y_dim()))]
        }
    }
}

fn suffix(name: &str) -> String {
    if name == "model" {
        String::new()
    } else {
        format!("_{name}")
    }
}

pub fn checkpoint_path(out: &Path, name: &str) -> PathBuf {
    out.join(format!("checkpoint{}.json", suffix(name)))
}

fn history_table(h: &LossHistory) -> Table {
    let mut t = Table::new(&["iteration", "discriminator_loss", "generator_loss", "saturated"]);
    for i in 0..h.len() {
        t.push(vec![
            (i + 1).to_string(),
            fmt_num(h.discriminator[i]),
            fmt_num(h.generator[i]),
            h.saturated[i].to_string(),
        ]);
    }
    t
}

/// Trains every model of the experiment, writing checkpoints and loss
/// histories. On divergence the partial history is still written.
pub fn train_models(cfg: &ExperimentConfig, data: &ExperimentData, out: &Path) -> CliResult<Vec<TrainedModel>> {
    fs::create_dir_all(out).map_err(io_err(out))?;
    let prov = Provenance::of(cfg);
    let tc = cfg.train_config();
    let arch = cfg.model.architecture();
    let mut trained = vec![];
    for (name, set, scaling) in training_sets(cfg, data) {
        let model = CagmModel::new(set.x_dim(), set.y_dim(), cfg.model.latent_dim, &arch, cfg.seed)?;
        let mut surrogate = Surrogate::new(model, scaling)?;
        let history_path = out.join(format!("loss_history{}.csv", suffix(name)));
        let history = match surrogate.train_with(&set, &tc, |it, ld, lg| {
            if (it + 1) % 1000 == 0 {
                log::info!("{} {name}: iteration {} L_D {ld:.4} L_G {lg:.4}", cfg.experiment, it + 1);
            }
        }) {
            Ok(h) => h,
            Err(Error::Divergence { iteration, reason, partial }) => {
                history_table(&partial).write(&history_path, &prov)?;
                return Err(Error::Divergence { iteration, reason, partial }.into());
            }
            Err(e) => return Err(e.into()),
        };
        history_table(&history).write(&history_path, &prov)?;
        let losses = (!history.is_empty()).then(|| FinalLosses {
            discriminator: *history.discriminator.last().expect("non-empty"),
            generator: *history.generator.last().expect("non-empty"),
        });
        save_checkpoint(&Checkpoint::new(&surrogate, Some(tc.clone()), losses), &checkpoint_path(out, name))?;
        trained.push(TrainedModel { name, surrogate, history });
    }
    Ok(trained)
}

/// Reloads the checkpoints written by [`train_models`].
pub fn load_models(cfg: &ExperimentConfig, data: &ExperimentData, out: &Path) -> CliResult<Vec<TrainedModel>> {
    training_sets(cfg, data)
        .into_iter()
        .map(|(name, _, _)| {
            let (_, surrogate) = load_checkpoint(&checkpoint_path(out, name))?;
            Ok(TrainedModel { name, surrogate, history: LossHistory::default() })
        })
        .collect()
}

fn test_locations(cfg: &ExperimentConfig, a: f64, b: f64) -> Vec<f64> {
    if cfg.metric.random_locations {
        let mut rng = stream_rng(cfg.seed, streams::EVALUATION);
        let mut xs: Vec<f64> = (0..cfg.metric.n_test).map(|_| rng.random_range(a..=b)).collect();
        xs.sort_by(f64::total_cmp);
        xs
    } else {
        uniform_grid(a, b, cfg.metric.n_test)
    }
}

fn model_named<'a>(models: &'a [TrainedModel], name: &str) -> CliResult<&'a TrainedModel> {
    models
        .iter()
        .find(|m| m.name == name)
        .ok_or_else(|| CliError::Schema(format!("no trained model named {name}")))
}

/// Mean of `−L_D` over the final `window` iterations.
pub fn tail_neg_discriminator_loss(h: &LossHistory, window: usize) -> f64 {
    let n = h.discriminator.len().min(window);
    if n == 0 {
        return f64::NAN;
    }
    -h.discriminator[h.discriminator.len() - n..].iter().sum::<f64>() / n as f64
}

fn band_row(stats: &PredictiveStats) -> [f64; 3] {
    let sd = stats.variance[0].sqrt();
    [stats.mean[0], stats.mean[0] - 2.0 * sd, stats.mean[0] + 2.0 * sd]
}

/// Computes metrics and writes prediction tables.
pub fn evaluate(
    cfg: &ExperimentConfig,
    data: &ExperimentData,
    models: &[TrainedModel],
    out: &Path,
) -> CliResult<(BTreeMap<String, f64>, Vec<PathBuf>)> {
    fs::create_dir_all(out).map_err(io_err(out))?;
    let prov = Provenance::of(cfg);
    let mut metrics = BTreeMap::new();
    let mut files = vec![];
    let mut rng = stream_rng(cfg.seed, streams::PREDICTION);
    let n_mc = cfg.metric.n_mc;
    for m in models.iter().filter(|m| !m.history.is_empty()) {
        metrics.insert(format!("final_neg_discriminator_loss{}", suffix(m.name)), tail_neg_discriminator_loss(&m.history, 2000));
    }
    match data {
        ExperimentData::Regression { spec, train } => {
            let s = &model_named(models, "model")?.surrogate;
            let xs: Vec<f64> = train.inputs.data().to_vec();
            let ys: Vec<f64> = train.outputs.data().to_vec();
            let var = {
                let m = ys.iter().sum::<f64>() / ys.len() as f64;
                ys.iter().map(|y| (y - m).powi(2)).sum::<f64>() / ys.len() as f64
            };
            let gp = gp_fit(&xs, &ys, &GpSpec { sigma_f2: var.max(1e-6), l2: 0.25, mean: MeanFunction::Zero }, 0.01 * var.max(1e-6))?;
            metrics.insert("gp_sigma_f2".into(), gp.kernel.sigma_f2);
            metrics.insert("gp_l2".into(), gp.kernel.l2);
            metrics.insert("gp_noise".into(), gp.noise);

            let reference_sd = |x: f64| match spec.case {
                NoiseCase::Homoscedastic => spec.homoscedastic_std(),
                _ => envelope(x),
            };
            let grid = uniform_grid(DOMAIN.0, DOMAIN.1, 200);
            let gpp = gp_predict(&gp, &grid);
            let mut table = Table::new(&[
                "x", "mean", "lower", "upper", "noise_free", "noise_std", "gp_mean", "gp_lower", "gp_upper",
            ]);
            let (mut sq, mut gp_sq) = (0.0, 0.0);
            for (i, &x) in grid.iter().enumerate() {
                let st = s.predict_moments(&[x], n_mc, &mut rng)?;
                let [m, lo, hi] = band_row(&st);
                let gsd = gpp.variance[i].sqrt();
                sq += (m - signal(x)).powi(2);
                gp_sq += (gpp.mean[i] - signal(x)).powi(2);
                table.push_numbers(&[x, m, lo, hi, signal(x), reference_sd(x), gpp.mean[i], gpp.mean[i] - 2.0 * gsd, gpp.mean[i] + 2.0 * gsd]);
            }
            let p = out.join("predictions.csv");
            table.write(&p, &prov)?;
            files.push(p);
            metrics.insert("mean_rmse".into(), (sq / grid.len() as f64).sqrt());
            metrics.insert("gp_mean_rmse".into(), (gp_sq / grid.len() as f64).sqrt());

            let mut held_rng = stream_rng(cfg.seed, streams::HELD_OUT);
            let n_test = cfg.data.regression.n_test;
            let hx: Vec<f64> = (0..n_test).map(|_| held_rng.random_range(DOMAIN.0..=DOMAIN.1)).collect();
            let hy = spec.sample_at(&hx, &mut held_rng);
            let gph = gp_predict(&gp, &hx);
            let (mut cover, mut gp_cover) = (0usize, 0usize);
            let mut held = Table::new(&["x", "y", "mean", "std", "covered", "gp_mean", "gp_std", "gp_covered"]);
            for i in 0..n_test {
                let st = s.predict_moments(&[hx[i]], n_mc, &mut rng)?;
                let sd = st.variance[0].sqrt();
                let c = (hy[i] - st.mean[0]).abs() <= 2.0 * sd;
                let gsd = gph.variance[i].sqrt();
                let gc = (hy[i] - gph.mean[i]).abs() <= 2.0 * gsd;
                cover += usize::from(c);
                gp_cover += usize::from(gc);
                held.push_numbers(&[hx[i], hy[i], st.mean[0], sd, f64::from(u8::from(c)), gph.mean[i], gsd, f64::from(u8::from(gc))]);
            }
            let p = out.join("held_out.csv");
            held.write(&p, &prov)?;
            files.push(p);
            metrics.insert("coverage_2sigma".into(), cover as f64 / n_test.max(1) as f64);
            metrics.insert("gp_coverage_2sigma".into(), gp_cover as f64 / n_test.max(1) as f64);
            let st = s.predict_moments(&[0.03], n_mc.max(10_000), &mut rng)?;
            metrics.insert("sigma_at_0_03".into(), st.variance[0].sqrt());
            metrics.insert("reference_sigma_at_0_03".into(), reference_sd(0.03));
        }
        ExperimentData::Benchmark(_) => {
            let s = &model_named(models, "model")?.surrogate;
            let spec = &cfg.data.benchmark;
            let xs = test_locations(cfg, 0.0, 1.0);
            let report = avg_marginal_kl_with(
                |x, n, r| Ok(s.predict_samples(&[x], n, r)?.into_data()),
                |x| spec.exact_marginal(x),
                &xs,
                n_mc,
                cfg.metric.direction,
                &mut rng,
            )?;
            files.push(write_marginal_report(out, "marginal_kl.csv", &report, &prov)?);
            insert_report(&mut metrics, "", &report);
            let mut table = Table::new(&["x", "mean", "lower", "upper", "exact_mean", "exact_lower", "exact_upper"]);
            for &x in &xs {
                let [m, lo, hi] = band_row(&s.predict_moments(&[x], n_mc, &mut rng)?);
                let e = spec.exact_marginal(x);
                table.push_numbers(&[x, m, lo, hi, e.mu, e.mu - 2.0 * e.sigma(), e.mu + 2.0 * e.sigma()]);
            }
            let p = out.join("predictions.csv");
            table.write(&p, &prov)?;
            files.push(p);
        }
        ExperimentData::MultiFidelity(_) => {
            let spec = &cfg.data.multifidelity;
            let xs = test_locations(cfg, 0.0, 1.0);
            let mut kl_table = Table::new(&["x"]);
            let mut pred = Table::new(&["x", "exact_mean", "exact_lower", "exact_upper"]);
            let mut columns: Vec<Vec<f64>> = vec![xs.clone()];
            let exact: Vec<_> = xs.iter().map(|&x| spec.high_marginal(x)).collect();
            columns.push(exact.iter().map(|e| e.mu).collect());
            columns.push(exact.iter().map(|e| e.mu - 2.0 * e.sigma()).collect());
            columns.push(exact.iter().map(|e| e.mu + 2.0 * e.sigma()).collect());
            let mut kl_columns: Vec<Vec<f64>> = vec![xs.clone()];
            for m in models {
                let mut rng = stream_rng(cfg.seed, streams::PREDICTION);
                let (tag, samples) = if m.name == "multi_fidelity" {
                    let per_path = (n_mc / cfg.metric.n_paths).max(1);
                    ("mf", multifidelity_predict(&m.surrogate, spec, &xs, cfg.metric.n_paths, per_path, &mut rng)?)
                } else {
                    let mut cols = Vec::with_capacity(xs.len());
                    for &x in &xs {
                        cols.push(m.surrogate.predict_samples(&[x], n_mc, &mut rng)?.into_data());
                    }
                    ("sf", columns_to_array(&cols))
                };
                let mut col = 0;
                let report = avg_marginal_kl_with(
                    |_, _, _| {
                        col += 1;
                        Ok(samples.column_values(col - 1))
                    },
                    |x| spec.high_marginal(x),
                    &xs,
                    samples.rows(),
                    cfg.metric.direction,
                    &mut rng,
                )?;
                files.push(write_marginal_report(out, &format!("marginal_kl_{}.csv", m.name), &report, &prov)?);
                insert_report(&mut metrics, &format!("{tag}_"), &report);
                let stats: Vec<PredictiveStats> = (0..xs.len())
                    .map(|j| PredictiveStats::from_samples(&RealArray::column(samples.column_values(j)).expect("column")))
                    .collect();
                for h in ["mean", "lower", "upper"] {
                    pred.header.push(format!("{tag}_{h}"));
                }
                columns.push(stats.iter().map(|s| s.mean[0]).collect());
                columns.push(stats.iter().map(|s| band_row(s)[1]).collect());
                columns.push(stats.iter().map(|s| band_row(s)[2]).collect());
                // per-location values aligned with xs; excluded locations get NaN
                for (h, vals) in [("kl_forward", &report.kl_forward), ("kl_reverse", &report.kl_reverse)] {
                    kl_table.header.push(format!("{tag}_{h}"));
                    kl_columns.push(
                        xs.iter()
                            .map(|x| report.xs.iter().position(|v| v == x).map_or(f64::NAN, |i| vals[i]))
                            .collect(),
                    );
                }
            }
            for i in 0..xs.len() {
                pred.push_numbers(&columns.iter().map(|c| c[i]).collect::<Vec<_>>());
                kl_table.push_numbers(&kl_columns.iter().map(|c| c[i]).collect::<Vec<_>>());
            }
            for (t, f) in [(&pred, "predictions.csv"), (&kl_table, "kl_per_location.csv")] {
                let p = out.join(f);
                t.write(&p, &prov)?;
                files.push(p);
            }
        }
        ExperimentData::Burgers(b) => {
            let s = &model_named(models, "model")?.surrogate;
            let spec = &cfg.data.burgers.spec;
            let grid = b.ensemble.grid.clone();
            let mut table = Table::new(&["x"]);
            let mut columns = vec![grid.clone()];
            let (mut worst_l2, mut worst_r): (f64, f64) = (0.0, 1.0);
            for &t in &spec.reserved_times {
                let j = spec.time_index(t).ok_or_else(|| CliError::Schema(format!("time {t} not on the grid")))?;
                let reference = PredictiveStats::from_samples(&b.ensemble.snapshots_at(j));
                let predicted = s.predict_moments(&[b.time_normalization.apply(t)], n_mc, &mut rng)?;
                let l2 = relative_l2(&predicted.mean, &reference.mean);
                let r = pearson(&predicted.std(), &reference.std());
                metrics.insert(format!("mean_rel_l2_t{t}"), l2);
                metrics.insert(format!("sigma_pearson_t{t}"), r);
                worst_l2 = worst_l2.max(l2);
                worst_r = worst_r.min(r);
                for h in ["ref_mean", "ref_std", "pred_mean", "pred_std"] {
                    table.header.push(format!("{h}_t{t}"));
                }
                columns.extend([reference.mean.clone(), reference.std(), predicted.mean.clone(), predicted.std()]);
            }
            metrics.insert("mean_rel_l2_max".into(), worst_l2);
            metrics.insert("sigma_pearson_min".into(), worst_r);
            metrics.insert("boundary_max".into(), b.ensemble.boundary_max);
            for i in 0..grid.len() {
                table.push_numbers(&columns.iter().map(|c| c[i]).collect::<Vec<_>>());
            }
            let p = out.join("predictions.csv");
            table.write(&p, &prov)?;
            files.push(p);
        }
    }
    let mut summary = Table::new(&["metric", "value"]);
    for (k, v) in &metrics {
        summary.push(vec![k.clone(), fmt_num(*v)]);
    }
    let p = out.join("summary.csv");
    summary.write(&p, &prov)?;
    files.push(p);
    Ok((metrics, files))
}

fn insert_report(metrics: &mut BTreeMap<String, f64>, prefix: &str, r: &MarginalReport) {
    metrics.insert(format!("{prefix}reverse_kl"), r.average_reverse());
    metrics.insert(format!("{prefix}forward_kl"), r.average_forward());
    metrics.insert(format!("{prefix}excluded_locations"), r.excluded_count() as f64);
}

fn write_marginal_report(out: &Path, file: &str, r: &MarginalReport, prov: &Provenance) -> CliResult<PathBuf> {
    let mut t = Table::new(&["x", "kl_forward", "kl_reverse"]);
    for i in 0..r.xs.len() {
        t.push_numbers(&[r.xs[i], r.kl_forward[i], r.kl_reverse[i]]);
    }
    t.push(vec!["mean".into(), fmt_num(r.average_forward()), fmt_num(r.average_reverse())]);
    let p = out.join(file);
    t.write(&p, prov)?;
    Ok(p)
}

fn columns_to_array(cols: &[Vec<f64>]) -> RealArray {
    let rows = cols.first().map_or(0, Vec::len);
    let mut data = Vec::with_capacity(rows * cols.len());
    for r in 0..rows {
        data.extend(cols.iter().map(|c| c[r]));
    }
    RealArray::matrix(rows, cols.len(), data).expect("rectangular")
}

pub fn relative_l2(a: &[f64], reference: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(reference).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = reference.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// Pools generator samples over `n_paths` joint low-fidelity paths: each
/// path value `y_L(x*)` is fed pointwise with `n_mc` fresh latents.
/// Returns an `(n_paths · n_mc) × |grid|` sample matrix.
pub fn multifidelity_predict(
    model: &Surrogate,
    spec: &MultiFidelitySpec,
    grid: &[f64],
    n_paths: usize,
    n_mc: usize,
    rng: &mut Rng,
) -> CliResult<RealArray> {
    if model.model.x_dim() != 2 {
        return Err(CliError::Schema(format!(
            "multi-fidelity prediction needs a model with inputs (x, y_L), got input width {}",
            model.model.x_dim()
        )));
    }
    if n_paths == 0 || n_mc == 0 || grid.is_empty() {
        return Err(CliError::Schema("n_paths, n_mc and the grid must be non-empty".into()));
    }
    let low = spec.sample_low_paths(grid, n_paths, rng)?;
    let rows = n_paths * n_mc;
    let mut cols = Vec::with_capacity(grid.len());
    for (j, &x) in grid.iter().enumerate() {
        let mut input = Vec::with_capacity(2 * rows);
        for p in 0..n_paths {
            for _ in 0..n_mc {
                input.extend([x, low.get(p, j)]);
            }
        }
        let z = sample_latent(rows, model.model.latent_dim(), rng);
        let y = model.generate(&RealArray::matrix(rows, 2, input)?, &z)?;
        cols.push(y.into_data());
    }
    Ok(columns_to_array(&cols))
}

/// Executes generate-data → train → evaluate and writes every artifact
/// under `out`.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> CliResult<ExperimentReport> {
    cfg.validate()?;
    let data = generate_data(cfg)?;
    let mut files = write_data(cfg, &data, out)?;
    let models = train_models(cfg, &data, out)?;
    for m in &models {
        files.push(checkpoint_path(out, m.name));
    }
    let (metrics, eval_files) = evaluate(cfg, &data, &models, out)?;
    files.extend(eval_files);
    let cfg_path = out.join("config.toml");
    fs::write(&cfg_path, cfg.to_toml()).map_err(io_err(&cfg_path))?;
    files.push(cfg_path);
    Ok(ExperimentReport { experiment: cfg.experiment, seed: cfg.seed, metrics, files })
}
