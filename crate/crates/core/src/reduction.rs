//! Proper orthogonal decomposition of snapshot matrices and the intrusive
//! Galerkin reduced-order model `dx̂/dt = Vᵀ f(x̄ + V x̂, t; mu)`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integration::{self, Integrator, Recording, Rhs, TrajectoryResult};
use crate::linalg::{csr_mul_dense, Jacobian};
use crate::system::{DynamicalSystem, TimeGrid};

/// Where a snapshot column came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotTag {
    pub run: usize,
    pub t: f64,
    pub mu: Vec<f64>,
}

/// Full-order states stored as columns.
#[derive(Debug, Clone)]
pub struct SnapshotMatrix {
    pub data: DMatrix<f64>,
    pub tags: Vec<SnapshotTag>,
}

impl SnapshotMatrix {
    pub fn new(data: DMatrix<f64>, tags: Vec<SnapshotTag>) -> Result<Self> {
        if data.ncols() == 0 || data.nrows() == 0 {
            return Err(Error::arg("snapshot matrix is empty"));
        }
        if tags.len() != data.ncols() {
            return Err(Error::arg(format!(
                "{} snapshot tags for {} columns",
                tags.len(),
                data.ncols()
            )));
        }
        Ok(Self { data, tags })
    }

    /// Concatenates every recorded state of each run, in run order.
    pub fn from_runs(runs: &[(Vec<f64>, &TrajectoryResult)]) -> Result<Self> {
        let mut columns = Vec::new();
        let mut tags = Vec::new();
        for (run, (mu, traj)) in runs.iter().enumerate() {
            for (j, &t) in traj.times.iter().enumerate() {
                columns.push(traj.states.column(j).into_owned());
                tags.push(SnapshotTag {
                    run,
                    t,
                    mu: mu.clone(),
                });
            }
        }
        if columns.is_empty() {
            return Err(Error::arg("no snapshots in the given runs"));
        }
        Self::new(DMatrix::from_columns(&columns), tags)
    }

    pub fn n_states(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_snapshots(&self) -> usize {
        self.data.ncols()
    }
}

/// How many modes to keep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PodCriterion {
    Modes(usize),
    /// Smallest `n` whose retained energy fraction reaches the value.
    Energy(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PodOptions {
    pub criterion: PodCriterion,
    pub max_modes: Option<usize>,
    pub subtract_mean: bool,
}

impl Default for PodOptions {
    fn default() -> Self {
        Self {
            criterion: PodCriterion::Energy(0.9999),
            max_modes: Some(20),
            subtract_mean: false,
        }
    }
}

/// Orthonormal trial basis `V` with affine offset `x̄`.
#[derive(Debug, Clone)]
pub struct ReducedBasis {
    pub v: DMatrix<f64>,
    pub offset: DVector<f64>,
    /// Leading singular values of the (centered) snapshot matrix.
    pub singular_values: Vec<f64>,
    /// Squared Frobenius norm of the (centered) snapshot matrix.
    pub total_energy: f64,
}

impl ReducedBasis {
    /// Basis without offset. Columns are assumed orthonormal.
    pub fn from_columns(v: DMatrix<f64>) -> Self {
        let n = v.nrows();
        Self {
            v,
            offset: DVector::zeros(n),
            singular_values: Vec::new(),
            total_energy: 0.0,
        }
    }

    pub fn n_states(&self) -> usize {
        self.v.nrows()
    }

    pub fn n_modes(&self) -> usize {
        self.v.ncols()
    }

    /// Fraction of snapshot energy captured by the first `k` modes.
    pub fn energy_fraction(&self, k: usize) -> f64 {
        if self.total_energy == 0.0 {
            return 1.0;
        }
        let kept: f64 = self.singular_values.iter().take(k).map(|s| s * s).sum();
        (kept / self.total_energy).min(1.0)
    }

    /// `x̂ = Vᵀ (x - x̄)`.
    pub fn project(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.n_states() {
            return Err(Error::arg(format!(
                "cannot project length-{} state onto a basis with {} rows",
                x.len(),
                self.n_states()
            )));
        }
        Ok(self.v.tr_mul(&(x - &self.offset)))
    }

    /// `x = x̄ + V x̂`.
    pub fn lift(&self, xhat: &DVector<f64>) -> Result<DVector<f64>> {
        if xhat.len() != self.n_modes() {
            return Err(Error::arg(format!(
                "cannot lift length-{} reduced state with {} modes",
                xhat.len(),
                self.n_modes()
            )));
        }
        Ok(&self.offset + &self.v * xhat)
    }

    /// Projects every column of a trajectory.
    pub fn project_columns(&self, states: &DMatrix<f64>) -> DMatrix<f64> {
        let mut centered = states.clone();
        for mut c in centered.column_iter_mut() {
            c -= &self.offset;
        }
        self.v.tr_mul(&centered)
    }

    pub fn lift_columns(&self, reduced: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = &self.v * reduced;
        for mut c in out.column_iter_mut() {
            c += &self.offset;
        }
        out
    }

    /// `max |VᵀV - I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let n = self.n_modes();
        (self.v.tr_mul(&self.v) - DMatrix::identity(n, n)).amax()
    }

    /// Keeps the first `n` modes.
    pub fn truncate(&self, n: usize) -> Self {
        Self {
            v: self.v.columns(0, n.min(self.n_modes())).into_owned(),
            offset: self.offset.clone(),
            singular_values: self.singular_values.clone(),
            total_energy: self.total_energy,
        }
    }
}

/// What `pod_fit` decided.
#[derive(Debug, Clone, PartialEq)]
pub struct PodReport {
    pub requested: Option<usize>,
    pub modes: usize,
    pub numerical_rank: usize,
    pub energy_fraction: f64,
}

/// Matrices whose smaller side exceeds this use a randomized range finder
/// before the dense SVD.
const DENSE_SVD_LIMIT: usize = 1024;

/// Leading left singular vectors of the snapshot matrix (after optional mean
/// subtraction), selected by mode count or energy fraction.
pub fn pod_fit(snapshots: &SnapshotMatrix, options: &PodOptions) -> Result<(ReducedBasis, PodReport)> {
    let (rows, cols) = snapshots.data.shape();
    if rows == 0 || cols == 0 {
        return Err(Error::arg("cannot fit POD to an empty snapshot matrix"));
    }
    match options.criterion {
        PodCriterion::Modes(0) => return Err(Error::arg("POD needs at least one mode")),
        PodCriterion::Energy(eta) if !(eta > 0.0 && eta <= 1.0) => {
            return Err(Error::arg(format!("energy fraction must lie in (0, 1], got {eta}")))
        }
        _ => {}
    }
    let offset = if options.subtract_mean {
        snapshots.data.column_mean()
    } else {
        DVector::zeros(rows)
    };
    let mut centered = snapshots.data.clone();
    if options.subtract_mean {
        for mut c in centered.column_iter_mut() {
            c -= &offset;
        }
    }
    let total_energy = centered.norm_squared();
    let hint = match options.criterion {
        PodCriterion::Modes(n) => n,
        PodCriterion::Energy(_) => options.max_modes.unwrap_or(rows.min(cols)),
    };
    let (u, sigma) = leading_svd(&centered, hint)?;

    let sigma_max = sigma.first().copied().unwrap_or(0.0);
    let rank_tol = rows.max(cols) as f64 * f64::EPSILON * sigma_max;
    let rank = sigma.iter().take_while(|&&s| s > rank_tol).count();
    if rank == 0 {
        return Err(Error::arg("snapshot matrix is numerically zero"));
    }
    let cumulative: Vec<f64> = sigma
        .iter()
        .scan(0.0, |acc, s| {
            *acc += s * s;
            Some(*acc / total_energy)
        })
        .collect();
    let (requested, mut n) = match options.criterion {
        PodCriterion::Modes(n) => (Some(n), n),
        PodCriterion::Energy(eta) => {
            let k = cumulative
                .iter()
                .position(|&e| e >= eta * (1.0 - 1e-14))
                .map(|i| i + 1)
                .unwrap_or(rank);
            (None, k)
        }
    };
    if let Some(cap) = options.max_modes {
        n = n.min(cap.max(1));
    }
    if n > rank {
        log::warn!("POD: {n} modes requested but snapshot rank is {rank}; using {rank}");
        n = rank;
    }
    let basis = ReducedBasis {
        v: u.columns(0, n).into_owned(),
        offset,
        singular_values: sigma,
        total_energy,
    };
    let report = PodReport {
        requested,
        modes: n,
        numerical_rank: rank,
        energy_fraction: basis.energy_fraction(n),
    };
    Ok((basis, report))
}

/// Left singular vectors and singular values, sorted descending. When the
/// matrix is small enough this is the full thin SVD; otherwise a randomized
/// range finder (two power iterations) reduces it first, growing the sketch
/// until it comfortably exceeds `hint` modes.
fn leading_svd(a: &DMatrix<f64>, hint: usize) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let (rows, cols) = a.shape();
    let small = rows.min(cols);
    if small <= DENSE_SVD_LIMIT {
        return dense_svd(a);
    }
    let mut sketch = (2 * hint + 64).max(200).min(small);
    loop {
        let (u, s) = randomized_svd(a, sketch)?;
        let resolved = s.len() < sketch || s[s.len() - 1] <= 1e-10 * s[0] || sketch >= small;
        if resolved || hint * 2 < sketch {
            return Ok((u, s));
        }
        sketch = (sketch * 2).min(small);
    }
}

fn dense_svd(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let svd = a.clone().svd(true, false);
    let u = svd.u.ok_or_else(|| Error::Singular("SVD did not return U".into()))?;
    sort_svd(u, svd.singular_values.iter().copied().collect())
}

fn sort_svd(u: DMatrix<f64>, sigma: Vec<f64>) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]).then(i.cmp(&j)));
    let columns: Vec<_> = order.iter().map(|&i| u.column(i).into_owned()).collect();
    Ok((
        DMatrix::from_columns(&columns),
        order.iter().map(|&i| sigma[i]).collect(),
    ))
}

fn orthonormal_columns(y: DMatrix<f64>) -> DMatrix<f64> {
    y.qr().q()
}

fn randomized_svd(a: &DMatrix<f64>, sketch: usize) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0d0d);
    let omega = DMatrix::from_fn(a.ncols(), sketch, |_, _| rng.random_range(-1.0..1.0));
    let mut q = orthonormal_columns(a * omega);
    for _ in 0..2 {
        let z = orthonormal_columns(a.tr_mul(&q));
        q = orthonormal_columns(a * z);
    }
    let b = q.tr_mul(a);
    let (ub, sigma) = dense_svd(&b)?;
    Ok((q * ub, sigma))
}

/// Galerkin reduced-order model on a given basis.
pub struct GalerkinRom<'a> {
    system: &'a dyn DynamicalSystem,
    basis: &'a ReducedBasis,
}

impl<'a> GalerkinRom<'a> {
    pub fn new(system: &'a dyn DynamicalSystem, basis: &'a ReducedBasis) -> Result<Self> {
        if basis.n_states() != system.dim() {
            return Err(Error::arg(format!(
                "basis has {} rows but {} has dimension {}",
                basis.n_states(),
                system.name(),
                system.dim()
            )));
        }
        Ok(Self { system, basis })
    }

    pub fn system(&self) -> &dyn DynamicalSystem {
        self.system
    }

    pub fn basis(&self) -> &ReducedBasis {
        self.basis
    }

    pub fn n_modes(&self) -> usize {
        self.basis.n_modes()
    }

    /// `x̂(0) = Vᵀ (x0(mu) - x̄)`.
    pub fn initial_state(&self, mu: &[f64]) -> Result<DVector<f64>> {
        self.basis.project(&self.system.initial_state(mu)?)
    }

    /// Reduced velocity `f_r(x̂, t; mu) = Vᵀ f(x̄ + V x̂, t; mu)`.
    pub fn velocity(&self, xhat: &DVector<f64>, t: f64, mu: &[f64]) -> Result<DVector<f64>> {
        let x = self.basis.lift(xhat)?;
        Ok(self.basis.v.tr_mul(&self.system.velocity(&x, t, mu)?))
    }

    /// `Vᵀ J(x̄ + V x̂) V`.
    pub fn jacobian(&self, xhat: &DVector<f64>, t: f64, mu: &[f64]) -> Result<DMatrix<f64>> {
        let x = self.basis.lift(xhat)?;
        let jv = csr_mul_dense(&self.system.jacobian(&x, t, mu)?, &self.basis.v);
        Ok(self.basis.v.tr_mul(&jv))
    }

    pub fn solve(&self, grid: &TimeGrid, mu: &[f64], integrator: &Integrator) -> Result<TrajectoryResult> {
        galerkin_solve(self, grid, mu, integrator)
    }
}

impl Rhs for GalerkinRom<'_> {
    fn dim(&self) -> usize {
        self.n_modes()
    }

    fn eval(&self, x: &DVector<f64>, t: f64, mu: &[f64]) -> Result<DVector<f64>> {
        self.velocity(x, t, mu)
    }

    fn jacobian(&self, x: &DVector<f64>, t: f64, mu: &[f64]) -> Result<Jacobian> {
        GalerkinRom::jacobian(self, x, t, mu).map(Jacobian::Dense)
    }

    fn label(&self) -> String {
        "galerkin".into()
    }
}

/// Integrates the Galerkin ROM from `Vᵀ x0(mu)`, recording every step.
pub fn galerkin_solve(
    rom: &GalerkinRom<'_>,
    grid: &TimeGrid,
    mu: &[f64],
    integrator: &Integrator,
) -> Result<TrajectoryResult> {
    let x0 = rom.initial_state(mu)?;
    integration::solve(rom, integrator, &x0, grid, mu, Recording::All)
}
