use cagm_core::data::{
    burgers_solve, burgers_solve_substeps, conditional_gp_ic, sample_gp, BenchmarkSpec, BurgersSpec, MultiFidelitySpec,
};
use cagm_core::data::gp::{empirical_covariance, relative_frobenius};
use cagm_core::metrics::{avg_marginal_kl_with, gauss_kl, uniform_grid, Gaussian1D, KlDirection};
use cagm_core::rng::{standard_normal, stream_rng};
use rand::Rng as _;

/// `∫ p log(p/q)` by composite Simpson over ±14 standard deviations of `p`.
fn kl_by_quadrature(p: &Gaussian1D, q: &Gaussian1D) -> f64 {
    let log_pdf = |g: &Gaussian1D, y: f64| -0.5 * (2.0 * std::f64::consts::PI * g.sigma2).ln() - (y - g.mu).powi(2) / (2.0 * g.sigma2);
    let f = |y: f64| log_pdf(p, y).exp() * (log_pdf(p, y) - log_pdf(q, y));
    let (a, b) = (p.mu - 14.0 * p.sigma(), p.mu + 14.0 * p.sigma());
    let n = 40_000;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn closed_form_kl_matches_quadrature() {
    let mut rng = stream_rng(2024, 0);
    for _ in 0..100 {
        let p = Gaussian1D::new(rng.random_range(-3.0..3.0), rng.random_range(0.05..4.0)).unwrap();
        let q = Gaussian1D::new(rng.random_range(-3.0..3.0), rng.random_range(0.05..4.0)).unwrap();
        let exact = gauss_kl(&p, &q).unwrap();
        let quad = kl_by_quadrature(&p, &q);
        assert!((exact - quad).abs() < 1e-8, "{p:?} {q:?}: {exact} vs {quad}");
    }
}

#[test]
fn multifidelity_draws_match_block_covariance() {
    let spec = MultiFidelitySpec::default();
    let xs = &spec.sensors;
    let cov = spec.joint_covariance(xs);
    let draws = sample_gp(&spec.joint_mean(xs), &cov, 10_000, &mut stream_rng(5, 20)).unwrap();
    let emp = empirical_covariance(&draws);
    assert!(relative_frobenius(&emp, &cov) < 0.1);
    let n = xs.len();
    for i in 0..n {
        let hh = emp.get(n + i, n + i);
        let lh = emp.get(i, n + i);
        assert!((hh - 0.564).abs() < 0.0564, "K_HH({}) = {hh}", xs[i]);
        assert!((lh - 0.08).abs() < 0.008, "K_LH({}) = {lh}", xs[i]);
    }
}

fn spatial_mean(row: &[f64]) -> f64 {
    row.iter().sum::<f64>() / row.len() as f64
}

#[test]
fn burgers_conserves_mean_and_dissipates_energy() {
    let spec = BurgersSpec::default();
    let ics = conditional_gp_ic(&spec, 3, &mut stream_rng(11, 20)).unwrap();
    for r in 0..3 {
        let u0 = ics.row(r);
        let sol = burgers_solve(u0, &spec).unwrap();
        assert_eq!(sol.snapshots.shape(), &[spec.n_t, spec.n_x]);
        let m0 = spatial_mean(u0);
        let mut energy = u0.iter().map(|v| v * v).sum::<f64>();
        for j in 0..spec.n_t {
            let row = sol.snapshots.row(j);
            assert!((spatial_mean(row) - m0).abs() < 1e-6, "mean drift at snapshot {j}");
            let e = row.iter().map(|v| v * v).sum::<f64>();
            assert!(e <= energy * (1.0 + 1e-12), "energy grew at snapshot {j}: {energy} -> {e}");
            energy = e;
        }
    }
}

#[test]
fn halving_the_time_step_changes_little() {
    let spec = BurgersSpec::default();
    let ic = conditional_gp_ic(&spec, 1, &mut stream_rng(3, 20)).unwrap();
    // a stronger initial condition exercises the nonlinearity
    let u0: Vec<f64> = ic.row(0).iter().map(|v| 20.0 * v).collect();
    let coarse = burgers_solve_substeps(&u0, &spec, spec.substeps).unwrap();
    let fine = burgers_solve_substeps(&u0, &spec, 2 * spec.substeps).unwrap();
    let last = spec.n_t - 1;
    let (a, b) = (coarse.snapshots.row(last), fine.snapshots.row(last));
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    assert!((num / den).sqrt() < 1e-6, "{}", (num / den).sqrt());
    // the early snapshots must differ from the initial state, or the check is vacuous
    let moved: f64 = coarse.snapshots.row(0).iter().zip(&u0).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(moved > 1e-3);
}

#[test]
fn exact_sampler_gives_near_zero_average_kl() {
    let spec = BenchmarkSpec::default();
    let xs = uniform_grid(0.0, 1.0, 50);
    let report = avg_marginal_kl_with(
        |x, n, rng| {
            let g = spec.exact_marginal(x);
            Ok((0..n).map(|_| g.mu + g.sigma() * standard_normal(rng)).collect())
        },
        |x| spec.exact_marginal(x),
        &xs,
        5000,
        KlDirection::Reverse,
        &mut stream_rng(1, 31),
    )
    .unwrap();
    // fitted-Gaussian KL from n samples concentrates at O(1/n)
    assert!(report.average_reverse() < 2e-3, "{}", report.average_reverse());
    assert_eq!(report.excluded_count(), 0);

    let shifted = avg_marginal_kl_with(
        |x, n, rng| {
            let g = spec.exact_marginal(x);
            Ok((0..n).map(|_| g.mu + 1.0 + g.sigma() * standard_normal(rng)).collect())
        },
        |x| spec.exact_marginal(x),
        &xs,
        5000,
        KlDirection::Reverse,
        &mut stream_rng(1, 31),
    )
    .unwrap();
    // unit mean shift with variance 0.5 gives KL = 1
    assert!((shifted.average_reverse() - 1.0).abs() < 0.05, "{}", shifted.average_reverse());
}
