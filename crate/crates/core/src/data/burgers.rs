//! Viscous Burgers equation `u_t + u u_x = ν u_xx` on a periodic grid,
//! with random initial fields pinned to zero near the boundaries.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::seq::index::sample;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::array::RealArray;
use crate::data::gp::sample_gp;
use crate::data::kernel::{GpSpec, MeanFunction};
use crate::dataset::PairedDataset;
use crate::error::{Error, Result};
use crate::linalg::Cholesky;
use crate::rng::Rng;

/// Points on the unit circle used for the φ-function contour averages.
const CONTOUR_POINTS: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BurgersSpec {
    pub nu: f64,
    pub domain: (f64, f64),
    pub n_x: usize,
    pub n_t: usize,
    pub t_final: f64,
    /// Prior of the initial condition before boundary conditioning.
    pub ic: GpSpec,
    /// Locations where the initial field is conditioned to zero.
    pub anchors: Vec<f64>,
    /// ETDRK4 steps per stored snapshot interval.
    pub substeps: usize,
    /// Snapshot times always kept out of the training split.
    pub reserved_times: Vec<f64>,
}

impl Default for BurgersSpec {
    fn default() -> Self {
        Self {
            nu: 0.5,
            domain: (-7.0, 3.0),
            n_x: 128,
            n_t: 256,
            t_final: 50.0,
            ic: GpSpec { sigma_f2: 0.005, l2: 1.0, mean: MeanFunction::Zero },
            anchors: vec![-7.0, -6.5, 2.5, 3.0],
            substeps: 4,
            reserved_times: vec![12.5, 25.0, 37.5, 50.0],
        }
    }
}

impl BurgersSpec {
    pub fn validate(&self) -> Result<()> {
        self.ic.validate()?;
        if !(self.nu > 0.0) {
            return Err(Error::Config("nu must be positive".into()));
        }
        if !(self.domain.1 > self.domain.0) {
            return Err(Error::Config("domain must have positive length".into()));
        }
        if self.n_x < 4 || !self.n_x.is_power_of_two() {
            return Err(Error::Config(format!("n_x must be a power of two ≥ 4, got {}", self.n_x)));
        }
        if self.n_t == 0 || self.substeps == 0 || !(self.t_final > 0.0) {
            return Err(Error::Config("n_t, substeps and t_final must be positive".into()));
        }
        let mut a = self.anchors.clone();
        a.sort_by(f64::total_cmp);
        if a.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("anchor points must be distinct".into()));
        }
        Ok(())
    }

    pub fn length(&self) -> f64 {
        self.domain.1 - self.domain.0
    }

    /// Uniform periodic grid `a + j L / n_x`, `j = 0..n_x`.
    pub fn grid(&self) -> Vec<f64> {
        let dx = self.length() / self.n_x as f64;
        (0..self.n_x).map(|j| self.domain.0 + j as f64 * dx).collect()
    }

    /// Stored snapshot times `j · t_final / n_t`, `j = 1..=n_t`.
    pub fn times(&self) -> Vec<f64> {
        let dt = self.t_final / self.n_t as f64;
        (1..=self.n_t).map(|j| j as f64 * dt).collect()
    }

    pub fn time_index(&self, t: f64) -> Option<usize> {
        let dt = self.t_final / self.n_t as f64;
        let j = (t / dt).round();
        if j >= 1.0 && j <= self.n_t as f64 && (j * dt - t).abs() < 1e-9 * self.t_final {
            Some(j as usize - 1)
        } else {
            None
        }
    }

    /// Affine map of `[0, t_final]` onto `[−1, 1]`.
    pub fn time_normalization(&self) -> TimeNormalization {
        TimeNormalization { center: 0.5 * self.t_final, half_width: 0.5 * self.t_final }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeNormalization {
    pub center: f64,
    pub half_width: f64,
}

impl TimeNormalization {
    pub fn apply(&self, t: f64) -> f64 {
        (t - self.center) / self.half_width
    }

    pub fn invert(&self, s: f64) -> f64 {
        s * self.half_width + self.center
    }
}

/// Mean and covariance of the boundary-conditioned initial field on the grid.
pub fn conditional_ic_moments(spec: &BurgersSpec) -> Result<(Vec<f64>, RealArray)> {
    spec.validate()?;
    let xs = spec.grid();
    let kbb = spec.ic.gram(&spec.anchors);
    let chol = Cholesky::strict(&kbb)?
        .ok_or_else(|| Error::IllConditioned("anchor Gram matrix is not positive definite".into()))?;
    let kxb = spec.ic.cross(&xs, &spec.anchors);
    let yb = vec![0.0; spec.anchors.len()];
    let alpha = chol.solve(&yb);
    let n = xs.len();
    let mean: Vec<f64> = (0..n).map(|i| kxb.row(i).iter().zip(&alpha).map(|(k, a)| k * a).sum()).collect();
    // V = L⁻¹ k_bx, Σ = K_xx − Vᵀ V
    let v: Vec<Vec<f64>> = (0..n).map(|i| chol.solve_lower(kxb.row(i))).collect();
    let mut cov = spec.ic.gram(&xs);
    for i in 0..n {
        for j in 0..n {
            let s: f64 = v[i].iter().zip(&v[j]).map(|(a, b)| a * b).sum();
            let c = cov.get(i, j) - s;
            cov.set(i, j, c);
        }
    }
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (cov.get(i, j) + cov.get(j, i));
            cov.set(i, j, avg);
            cov.set(j, i, avg);
        }
    }
    Ok((mean, cov))
}

/// Initial fields, one row per sample.
pub fn conditional_gp_ic(spec: &BurgersSpec, n_samples: usize, rng: &mut Rng) -> Result<RealArray> {
    let (mean, cov) = conditional_ic_moments(spec)?;
    sample_gp(&mean, &cov, n_samples, rng)
}

/// Output of one solve.
#[derive(Debug, Clone, PartialEq)]
pub struct BurgersSolution {
    pub times: Vec<f64>,
    /// `n_t × n_x`; row `j` is the field at `times[j]`.
    pub snapshots: RealArray,
    /// Largest `|u|` at the two grid points adjacent to the domain ends.
    pub boundary_max: f64,
}

/// Fourier-space ETDRK4 integrator for a fixed spec and step size.
pub struct BurgersSolver {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// `−i k / 2` with dealiased modes zeroed.
    nonlin: Vec<Complex64>,
    e: Vec<f64>,
    e2: Vec<f64>,
    q: Vec<f64>,
    f1: Vec<f64>,
    f2: Vec<f64>,
    f3: Vec<f64>,
}

impl BurgersSolver {
    pub fn new(spec: &BurgersSpec, h: f64) -> Result<Self> {
        spec.validate()?;
        let n = spec.n_x;
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let k0 = 2.0 * PI / spec.length();
        let cutoff = n / 3;
        let mut nonlin = vec![Complex64::new(0.0, 0.0); n];
        let mut lin = vec![0.0; n];
        for m in 0..n {
            let idx = if m < n / 2 { m as i64 } else if m == n / 2 { 0 } else { m as i64 - n as i64 };
            let k = k0 * idx as f64;
            lin[m] = -spec.nu * k * k;
            if m != n / 2 && idx.unsigned_abs() as usize <= cutoff {
                nonlin[m] = Complex64::new(0.0, -0.5 * k);
            }
        }
        let (mut e, mut e2, mut q, mut f1, mut f2, mut f3) =
            (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let roots: Vec<Complex64> = (1..=CONTOUR_POINTS)
            .map(|j| Complex64::from_polar(1.0, PI * (j as f64 - 0.5) / CONTOUR_POINTS as f64))
            .collect();
        for m in 0..n {
            let hl = h * lin[m];
            e[m] = hl.exp();
            e2[m] = (hl / 2.0).exp();
            let (mut sq, mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0, 0.0);
            for &r in &roots {
                let z = Complex64::new(hl, 0.0) + r;
                let ez = z.exp();
                let z3 = z * z * z;
                sq += (((z / 2.0).exp() - 1.0) / z).re;
                s1 += ((-4.0 - z + ez * (4.0 - 3.0 * z + z * z)) / z3).re;
                s2 += ((2.0 + z + ez * (z - 2.0)) / z3).re;
                s3 += ((-4.0 - 3.0 * z - z * z + ez * (4.0 - z)) / z3).re;
            }
            let m_f = CONTOUR_POINTS as f64;
            q[m] = h * sq / m_f;
            f1[m] = h * s1 / m_f;
            f2[m] = h * s2 / m_f;
            f3[m] = h * s3 / m_f;
        }
        Ok(Self { n, fwd, inv, nonlin, e, e2, q, f1, f2, f3 })
    }

    fn to_physical(&self, v: &[Complex64], buf: &mut Vec<Complex64>) {
        buf.clear();
        buf.extend_from_slice(v);
        self.inv.process(buf);
        let s = 1.0 / self.n as f64;
        for c in buf.iter_mut() {
            *c = Complex64::new(c.re * s, 0.0);
        }
    }

    /// `−½ i k · FFT(u²)` with 2/3 dealiasing.
    fn nonlinear(&self, v: &[Complex64], out: &mut [Complex64], buf: &mut Vec<Complex64>) {
        self.to_physical(v, buf);
        for c in buf.iter_mut() {
            *c = Complex64::new(c.re * c.re, 0.0);
        }
        self.fwd.process(buf);
        for ((o, b), g) in out.iter_mut().zip(buf.iter()).zip(&self.nonlin) {
            *o = b * g;
        }
    }

    fn step(&self, v: &mut [Complex64], ws: &mut Workspace) {
        let n = self.n;
        let Workspace { nv, na, nb, nc, a, b, c, buf } = ws;
        self.nonlinear(v, nv, buf);
        for m in 0..n {
            a[m] = v[m] * self.e2[m] + nv[m] * self.q[m];
        }
        self.nonlinear(a, na, buf);
        for m in 0..n {
            b[m] = v[m] * self.e2[m] + na[m] * self.q[m];
        }
        self.nonlinear(b, nb, buf);
        for m in 0..n {
            c[m] = a[m] * self.e2[m] + (nb[m] * 2.0 - nv[m]) * self.q[m];
        }
        self.nonlinear(c, nc, buf);
        for m in 0..n {
            v[m] = v[m] * self.e[m]
                + nv[m] * self.f1[m]
                + (na[m] + nb[m]) * (2.0 * self.f2[m])
                + nc[m] * self.f3[m];
        }
    }
}

struct Workspace {
    nv: Vec<Complex64>,
    na: Vec<Complex64>,
    nb: Vec<Complex64>,
    nc: Vec<Complex64>,
    a: Vec<Complex64>,
    b: Vec<Complex64>,
    c: Vec<Complex64>,
    buf: Vec<Complex64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); n];
        Self {
            nv: z.clone(),
            na: z.clone(),
            nb: z.clone(),
            nc: z.clone(),
            a: z.clone(),
            b: z.clone(),
            c: z.clone(),
            buf: Vec::with_capacity(n),
        }
    }
}

/// Integrates from `u0` and stores `n_t` snapshots.
pub fn burgers_solve(u0: &[f64], spec: &BurgersSpec) -> Result<BurgersSolution> {
    burgers_solve_substeps(u0, spec, spec.substeps)
}

/// As [`burgers_solve`] with an explicit number of steps per snapshot.
pub fn burgers_solve_substeps(u0: &[f64], spec: &BurgersSpec, substeps: usize) -> Result<BurgersSolution> {
    spec.validate()?;
    if substeps == 0 {
        return Err(Error::Config("substeps must be positive".into()));
    }
    let n = spec.n_x;
    if u0.len() != n {
        return Err(crate::error::dim_err("burgers initial condition", n, u0.len()));
    }
    let h = spec.t_final / (spec.n_t * substeps) as f64;
    let solver = BurgersSolver::new(spec, h)?;
    let mut ws = Workspace::new(n);
    let mut v: Vec<Complex64> = u0.iter().map(|&u| Complex64::new(u, 0.0)).collect();
    solver.fwd.process(&mut v);
    let mut data = Vec::with_capacity(spec.n_t * n);
    let mut boundary_max = u0[0].abs().max(u0[n - 1].abs());
    let mut phys = Vec::with_capacity(n);
    for j in 0..spec.n_t {
        for _ in 0..substeps {
            solver.step(&mut v, &mut ws);
        }
        solver.to_physical(&v, &mut phys);
        if phys.iter().any(|c| !c.re.is_finite()) {
            return Err(Error::SolverDivergence { time_index: j });
        }
        boundary_max = boundary_max.max(phys[0].re.abs()).max(phys[n - 1].re.abs());
        data.extend(phys.iter().map(|c| c.re));
    }
    Ok(BurgersSolution { times: spec.times(), snapshots: RealArray::matrix(spec.n_t, n, data)?, boundary_max })
}

/// Independent realizations of the full space-time field.
#[derive(Debug, Clone, PartialEq)]
pub struct BurgersEnsemble {
    pub grid: Vec<f64>,
    pub times: Vec<f64>,
    pub initial: RealArray,
    /// One `n_t × n_x` array per realization.
    pub fields: Vec<RealArray>,
    pub boundary_max: f64,
}

impl BurgersEnsemble {
    /// Snapshots at time index `j` across realizations, `n_real × n_x`.
    pub fn snapshots_at(&self, j: usize) -> RealArray {
        let rows: Vec<Vec<f64>> = self.fields.iter().map(|f| f.row(j).to_vec()).collect();
        RealArray::from_rows(&rows).expect("uniform rows")
    }
}

pub fn burgers_ensemble(spec: &BurgersSpec, n_realizations: usize, rng: &mut Rng) -> Result<BurgersEnsemble> {
    let initial = conditional_gp_ic(spec, n_realizations, rng)?;
    let mut fields = Vec::with_capacity(n_realizations);
    let mut boundary_max: f64 = 0.0;
    for r in 0..n_realizations {
        let sol = burgers_solve(initial.row(r), spec)?;
        boundary_max = boundary_max.max(sol.boundary_max);
        fields.push(sol.snapshots);
    }
    Ok(BurgersEnsemble { grid: spec.grid(), times: spec.times(), initial, fields, boundary_max })
}

/// Disjoint train / held-out snapshot indices, both sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotSplit {
    pub train: Vec<usize>,
    pub held_out: Vec<usize>,
}

/// Picks `n_train` snapshot indices uniformly among those not reserved.
pub fn snapshot_split(spec: &BurgersSpec, n_train: usize, rng: &mut Rng) -> Result<SnapshotSplit> {
    let reserved = spec
        .reserved_times
        .iter()
        .map(|&t| spec.time_index(t).ok_or_else(|| Error::Config(format!("reserved time {t} is not a stored snapshot"))))
        .collect::<Result<Vec<_>>>()?;
    let pool: Vec<usize> = (0..spec.n_t).filter(|j| !reserved.contains(j)).collect();
    if n_train > pool.len() {
        return Err(Error::Config(format!(
            "requested {n_train} training snapshots but only {} are available",
            pool.len()
        )));
    }
    let mut train: Vec<usize> = sample(rng, pool.len(), n_train).into_iter().map(|i| pool[i]).collect();
    train.sort_unstable();
    let held_out = (0..spec.n_t).filter(|j| train.binary_search(j).is_err()).collect();
    Ok(SnapshotSplit { train, held_out })
}

/// Training pairs `(normalized t, u(t, ·))` plus everything needed for evaluation.
#[derive(Debug, Clone)]
pub struct BurgersData {
    pub dataset: PairedDataset,
    pub ensemble: BurgersEnsemble,
    pub split: SnapshotSplit,
    pub time_normalization: TimeNormalization,
}

/// Builds the snapshot surrogate data. Initial conditions come from
/// `rng`; the snapshot split comes from `split_rng`, so it can be shared
/// across runs that differ only in their data or training seed.
pub fn burgers_dataset(
    spec: &BurgersSpec,
    n_realizations: usize,
    n_train_snapshots: usize,
    rng: &mut Rng,
    split_rng: &mut Rng,
) -> Result<BurgersData> {
    if n_train_snapshots > spec.n_t {
        return Err(Error::Config("n_train_snapshots exceeds n_t".into()));
    }
    let split = snapshot_split(spec, n_train_snapshots, split_rng)?;
    let ensemble = burgers_ensemble(spec, n_realizations, rng)?;
    let norm = spec.time_normalization();
    let mut xin = Vec::new();
    let mut labels = Vec::new();
    let mut rows = Vec::new();
    for field in &ensemble.fields {
        for &j in &split.train {
            let t = ensemble.times[j];
            labels.push(t);
            xin.push(norm.apply(t));
            rows.extend_from_slice(field.row(j));
        }
    }
    let n = labels.len();
    let dataset =
        PairedDataset::new(RealArray::column(xin)?, RealArray::matrix(n, spec.n_x, rows)?)?.with_labels(labels)?;
    Ok(BurgersData { dataset, ensemble, split, time_normalization: norm })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn zero_initial_condition_stays_zero() {
        let spec = BurgersSpec::default();
        let sol = burgers_solve(&vec![0.0; 128], &spec).unwrap();
        assert!(sol.snapshots.data().iter().all(|&u| u == 0.0));
    }

    #[test]
    fn ic_moments() {
        let spec = BurgersSpec::default();
        let (mean, cov) = conditional_ic_moments(&spec).unwrap();
        assert!(mean.iter().all(|&m| m == 0.0));
        // grid point 0 is the anchor −7
        assert!(cov.get(0, 0) <= 1e-8);
        let xs = spec.grid();
        let mid = xs.iter().position(|&x| (x + 2.0).abs() < 1e-9).unwrap();
        assert!((cov.get(mid, mid) / 0.005 - 1.0).abs() < 0.1);
    }

    #[test]
    fn times_and_reserved_indices() {
        let spec = BurgersSpec::default();
        let idx: Vec<usize> = spec.reserved_times.iter().map(|&t| spec.time_index(t).unwrap()).collect();
        assert_eq!(idx, vec![63, 127, 191, 255]);
        assert_eq!(spec.time_index(0.1), None);
        let norm = spec.time_normalization();
        assert_eq!(norm.apply(0.0), -1.0);
        assert_eq!(norm.apply(50.0), 1.0);
    }

    #[test]
    fn split_excludes_reserved() {
        let spec = BurgersSpec::default();
        let s = snapshot_split(&spec, 64, &mut stream_rng(1, 21)).unwrap();
        assert_eq!(s.train.len(), 64);
        assert_eq!(s.held_out.len(), 192);
        for j in [63, 127, 191, 255] {
            assert!(s.held_out.contains(&j));
        }
        assert!(snapshot_split(&spec, 253, &mut stream_rng(1, 21)).is_err());
    }
}
