use std::fs;
use std::path::Path;

use cagm_cli::config::{ExperimentConfig, ExperimentId, Scale};
use cagm_cli::experiments::{self, multifidelity_predict};
use cagm_cli::io::{load_checkpoint, read_dataset};
use cagm_cli::sweep::{sweep, SweepGrid, SweepSpec};
use cagm_cli::{run, CliError};
use cagm_core::array::RealArray;
use cagm_core::cagm::{CagmModel, Surrogate};
use cagm_core::data::MultiFidelitySpec;
use cagm_core::dataset::Standardization;
use cagm_core::mlp::{xavier_init, Dense, Mlp};
use cagm_core::rng::{stream_rng, streams};

fn quick(id: ExperimentId, iterations: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::preset(id, Scale::Desk);
    cfg.train.iterations = iterations;
    cfg.model = cagm_cli::config::ModelSpec::uniform(2, 8, cfg.model.latent_dim);
    cfg.metric.n_mc = 200;
    cfg.metric.n_test = 20;
    cfg.metric.n_paths = 20;
    cfg
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn untrained_regression_run_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick(ExperimentId::RegressionI, 0);
    let report = run(&cfg, dir.path()).unwrap();
    for f in ["dataset.csv", "checkpoint.json", "loss_history.csv", "predictions.csv", "held_out.csv", "summary.csv", "config.toml"] {
        assert!(dir.path().join(f).exists(), "missing {f}");
    }
    let cov = report.metric("coverage_2sigma").unwrap();
    assert!((0.0..=1.0).contains(&cov));
    assert!(report.metric("sigma_at_0_03").unwrap().is_finite());
    let (header, data) = read_dataset(&dir.path().join("dataset.csv")).unwrap();
    assert_eq!((header.rows, data.len()), (200, 200));
    let pred = fs::read_to_string(dir.path().join("predictions.csv")).unwrap();
    assert!(pred.starts_with("# config_hash="));
    assert!(pred.lines().nth(1).unwrap().starts_with("x,mean,lower,upper"));
}

#[test]
fn same_config_and_seed_give_identical_csvs() {
    let cfg = quick(ExperimentId::AppendixBenchmark, 30);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run(&cfg, a.path()).unwrap();
    run(&cfg, b.path()).unwrap();
    let (fa, fb) = (csv_files(a.path()), csv_files(b.path()));
    assert!(fa.len() >= 4);
    assert_eq!(fa, fb);
    let mut other = cfg.clone();
    other.seed = 1;
    let c = tempfile::tempdir().unwrap();
    run(&other, c.path()).unwrap();
    assert_ne!(
        fs::read(a.path().join("loss_history.csv")).unwrap(),
        fs::read(c.path().join("loss_history.csv")).unwrap()
    );
}

#[test]
fn multifidelity_report_has_both_models() {
    let dir = tempfile::tempdir().unwrap();
    let report = run(&quick(ExperimentId::Multifidelity, 5), dir.path()).unwrap();
    assert!(report.metric("mf_reverse_kl").unwrap().is_finite());
    assert!(report.metric("sf_reverse_kl").unwrap().is_finite());
    let kl = fs::read_to_string(dir.path().join("kl_per_location.csv")).unwrap();
    assert!(kl.lines().nth(1).unwrap().starts_with("x,mf_kl_forward,mf_kl_reverse,sf_kl_forward,sf_kl_reverse"));
    assert!(dir.path().join("checkpoint_multi_fidelity.json").exists());
    assert!(dir.path().join("checkpoint_single_fidelity.json").exists());

    let single = run(&quick(ExperimentId::MultifidelitySingle, 5), tempfile::tempdir().unwrap().path()).unwrap();
    assert!(single.metric("mf_reverse_kl").is_none());
    assert_eq!(single.metric("sf_reverse_kl"), report.metric("sf_reverse_kl"));
}

#[test]
fn burgers_pipeline_reports_reserved_times() {
    let mut cfg = quick(ExperimentId::Burgers, 3);
    cfg.model.latent_dim = 4;
    cfg.data.burgers.n_realizations = 4;
    cfg.data.burgers.n_train_snapshots = 8;
    let dir = tempfile::tempdir().unwrap();
    let report = run(&cfg, dir.path()).unwrap();
    for t in ["12.5", "25", "37.5", "50"] {
        assert!(report.metric(&format!("mean_rel_l2_t{t}")).unwrap().is_finite());
        assert!(report.metric(&format!("sigma_pearson_t{t}")).is_some());
    }
    let (_, data) = read_dataset(&dir.path().join("dataset.csv")).unwrap();
    assert_eq!((data.len(), data.y_dim()), (32, 128));
}

#[test]
fn single_cell_sweep_matches_run() {
    let base = quick(ExperimentId::AppendixBenchmark, 20);
    let spec = SweepSpec { grid: SweepGrid::Lambda { values: vec![1.5] }, seeds: vec![3] };
    let dir = tempfile::tempdir().unwrap();
    let result = sweep(&spec, &base, dir.path(), 1).unwrap();
    let mut cfg = base.clone();
    cfg.seed = 3;
    let direct = run(&cfg, tempfile::tempdir().unwrap().path()).unwrap();
    assert_eq!(result.cells[0].values, vec![direct.primary()]);
    assert_eq!(result.cells[0].median(), direct.primary());
}

#[test]
fn sweep_cells_are_order_independent() {
    let base = quick(ExperimentId::AppendixBenchmark, 10);
    let forward = SweepSpec { grid: SweepGrid::Lambda { values: vec![1.0, 2.0] }, seeds: vec![0, 1] };
    let reverse = SweepSpec { grid: SweepGrid::Lambda { values: vec![2.0, 1.0] }, seeds: vec![0, 1] };
    let a = sweep(&forward, &base, tempfile::tempdir().unwrap().path(), 2).unwrap();
    let b = sweep(&reverse, &base, tempfile::tempdir().unwrap().path(), 1).unwrap();
    assert_eq!(a.cells[0].values, b.cells[1].values);
    assert_eq!(a.cells[1].values, b.cells[0].values);
    let dir = tempfile::tempdir().unwrap();
    let files = a.write(dir.path(), &base).unwrap();
    let table = fs::read_to_string(&files[1]).unwrap();
    assert!(table.lines().nth(1).unwrap().starts_with("lambda,1,2"));
}

#[test]
fn empty_sweep_grid_is_rejected() {
    let base = quick(ExperimentId::AppendixBenchmark, 1);
    let spec = SweepSpec { grid: SweepGrid::KgKd { k_g: vec![], k_d: vec![1] }, seeds: vec![0] };
    assert!(matches!(sweep(&spec, &base, tempfile::tempdir().unwrap().path(), 1), Err(CliError::Schema(_))));
}

/// Generator `(x, y_L, z) ↦ y_L`.
fn pass_through() -> Surrogate {
    let generator = Mlp::from_layers(vec![Dense {
        weights: RealArray::matrix(3, 1, vec![0.0, 1.0, 0.0]).unwrap(),
        bias: RealArray::matrix(1, 1, vec![0.0]).unwrap(),
    }])
    .unwrap();
    let encoder = xavier_init(&[3, 4, 1], 0).unwrap();
    let discriminator = xavier_init(&[3, 4, 1], 1).unwrap();
    let model = CagmModel::from_parts(generator, encoder, discriminator, 1).unwrap();
    Surrogate::new(model, Standardization::identity(2, 1)).unwrap()
}

#[test]
fn pass_through_generator_reproduces_low_fidelity_moments() {
    let spec = MultiFidelitySpec::default();
    let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
    let mut rng = stream_rng(7, streams::PREDICTION);
    let (n_paths, n_mc) = (2500, 4);
    let samples = multifidelity_predict(&pass_through(), &spec, &grid, n_paths, n_mc, &mut rng).unwrap();
    assert_eq!(samples.shape(), &[n_paths * n_mc, grid.len()]);
    // repeated latents do not add variability, so the effective sample size is n_paths
    let var = spec.low.sigma_f2;
    let se_mean = (var / n_paths as f64).sqrt();
    let se_var = var * (2.0 / n_paths as f64).sqrt();
    for (j, &x) in grid.iter().enumerate() {
        let col = samples.column_values(j);
        let n = col.len() as f64;
        let m = col.iter().sum::<f64>() / n;
        let v = col.iter().map(|c| (c - m).powi(2)).sum::<f64>() / n;
        assert!((m - spec.low.mean.eval(x)).abs() < 3.0 * se_mean, "x={x}: mean {m}");
        assert!((v - var).abs() < 3.0 * se_var, "x={x}: var {v}");
    }
}

#[test]
fn single_path_single_sample_shape() {
    let spec = MultiFidelitySpec::default();
    let grid: Vec<f64> = (0..7).map(|i| i as f64 / 6.0).collect();
    let mut rng = stream_rng(0, streams::PREDICTION);
    let s = multifidelity_predict(&pass_through(), &spec, &grid, 1, 1, &mut rng).unwrap();
    assert_eq!(s.shape(), &[1, grid.len()]);
    let one_input = Surrogate::new(
        CagmModel::new(1, 1, 1, &cagm_core::cagm::Architecture::uniform(2, 3), 0).unwrap(),
        Standardization::identity(1, 1),
    )
    .unwrap();
    assert!(multifidelity_predict(&one_input, &spec, &grid, 1, 1, &mut rng).is_err());
}

#[test]
fn trained_checkpoint_predicts_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick(ExperimentId::RegressionIi, 40);
    let data = experiments::generate_data(&cfg).unwrap();
    let models = experiments::train_models(&cfg, &data, dir.path()).unwrap();
    let (ckpt, loaded) = load_checkpoint(&experiments::checkpoint_path(dir.path(), "model")).unwrap();
    assert_eq!(loaded, models[0].surrogate);
    assert_eq!(ckpt.train_config.unwrap().iterations, 40);
    let predict = |s: &Surrogate| s.predict_moments(&[0.3], 500, &mut stream_rng(1, streams::PREDICTION)).unwrap();
    assert_eq!(predict(&loaded), predict(&models[0].surrogate));

    let reloaded = experiments::load_models(&cfg, &data, dir.path()).unwrap();
    let (m1, _) = experiments::evaluate(&cfg, &data, &models, tempfile::tempdir().unwrap().path()).unwrap();
    let (m2, _) = experiments::evaluate(&cfg, &data, &reloaded, tempfile::tempdir().unwrap().path()).unwrap();
    for (k, v) in &m2 {
        assert_eq!(m1[k], *v, "{k}");
    }
}

#[test]
fn invalid_config_lists_offending_keys() {
    let mut cfg = quick(ExperimentId::RegressionI, 1);
    cfg.metric.n_test = 0;
    cfg.model.latent_dim = 0;
    let err = run(&cfg, tempfile::tempdir().unwrap().path()).unwrap_err().to_string();
    assert!(err.contains("metric.n_test") && err.contains("model.latent_dim"), "{err}");
}
