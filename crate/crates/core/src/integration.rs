//! Fixed-step time integrators for full or reduced velocities: classical
//! RK4 and backward Euler with Newton or fixed-point inner iterations, plus
//! the timestep-verification study used to pick step counts.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Jacobian;
use crate::system::{DynamicalSystem, TimeGrid};

/// Right-hand side `dx/dt = f(x, t; mu)` of an ODE the integrators can step.
pub trait Rhs: Sync {
    fn dim(&self) -> usize;

    fn eval(&self, x: &DVector<f64>, t: f64, mu: &[f64]) -> Result<DVector<f64>>;

    /// State Jacobian, or a capability error for non-differentiable models.
    fn jacobian(&self, x: &DVector<f64>, t: f64, mu: &[f64]) -> Result<Jacobian>;

    fn label(&self) -> String {
        "model".to_string()
    }
}

impl<S: DynamicalSystem + ?Sized> Rhs for S {
    fn dim(&self) -> usize {
        DynamicalSystem::dim(self)
    }

    fn eval(&self, x: &DVector<f64>, t: f64, mu: &[f64]) -> Result<DVector<f64>> {
        self.velocity(x, t, mu)
    }

    fn jacobian(&self, x: &DVector<f64>, t: f64, mu: &[f64]) -> Result<Jacobian> {
        DynamicalSystem::jacobian(self, x, t, mu).map(Jacobian::Sparse)
    }

    fn label(&self) -> String {
        self.name().to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerSolver {
    Newton,
    FixedPoint,
}

impl InnerSolver {
    pub fn as_str(self) -> &'static str {
        match self {
            InnerSolver::Newton => "newton",
            InnerSolver::FixedPoint => "fixed_point",
        }
    }
}

/// Time-stepping scheme. Backward Euler always carries exactly one inner
/// solver; RK4 carries none.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum Integrator {
    Rk4,
    BackwardEuler {
        inner: InnerSolver,
        #[serde(default = "default_tol")]
        tol: f64,
        #[serde(default = "default_max_iter")]
        max_iter: usize,
    },
}

fn default_tol() -> f64 {
    1e-10
}

fn default_max_iter() -> usize {
    50
}

impl Integrator {
    pub fn backward_euler(inner: InnerSolver) -> Self {
        Integrator::BackwardEuler {
            inner,
            tol: default_tol(),
            max_iter: default_max_iter(),
        }
    }

    /// Nominal convergence order of the scheme.
    pub fn order(&self) -> f64 {
        match self {
            Integrator::Rk4 => 4.0,
            Integrator::BackwardEuler { .. } => 1.0,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Integrator::Rk4 => "rk4".into(),
            Integrator::BackwardEuler { inner, .. } => format!("be_{}", inner.as_str()),
        }
    }
}

/// Which states a solve keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recording {
    All,
    FinalOnly,
}

/// Output of one time integration.
#[derive(Debug, Clone)]
pub struct TrajectoryResult {
    pub times: Vec<f64>,
    /// One column per recorded time.
    pub states: DMatrix<f64>,
    /// Wall time of the time loop alone.
    pub wall_time: Duration,
    pub inner_iterations: usize,
}

impl TrajectoryResult {
    pub fn final_state(&self) -> DVector<f64> {
        self.states.column(self.states.ncols() - 1).into_owned()
    }

    pub fn state(&self, j: usize) -> DVector<f64> {
        self.states.column(j).into_owned()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

struct Recorder {
    mode: Recording,
    times: Vec<f64>,
    columns: Vec<DVector<f64>>,
}

impl Recorder {
    fn new(mode: Recording, steps: usize) -> Self {
        let cap = if mode == Recording::All { steps + 1 } else { 1 };
        Self {
            mode,
            times: Vec::with_capacity(cap),
            columns: Vec::with_capacity(cap),
        }
    }

    fn push(&mut self, t: f64, x: &DVector<f64>, last: bool) {
        if self.mode == Recording::All || last {
            self.times.push(t);
            self.columns.push(x.clone());
        }
    }

    fn finish(self, wall_time: Duration, inner_iterations: usize) -> TrajectoryResult {
        TrajectoryResult {
            times: self.times,
            states: DMatrix::from_columns(&self.columns),
            wall_time,
            inner_iterations,
        }
    }
}

fn check_start<R: Rhs + ?Sized>(rhs: &R, x0: &DVector<f64>) -> Result<()> {
    if x0.len() != rhs.dim() {
        return Err(Error::arg(format!(
            "initial state has length {}, model expects {}",
            x0.len(),
            rhs.dim()
        )));
    }
    Ok(())
}

fn diverged(step: usize) -> impl FnOnce(Error) -> Error {
    move |e| match e {
        Error::Evaluation { .. } => Error::Divergence { step },
        other => other,
    }
}

/// Classical fourth-order Runge–Kutta.
pub fn rk4_solve<R: Rhs + ?Sized>(
    rhs: &R,
    x0: &DVector<f64>,
    grid: &TimeGrid,
    mu: &[f64],
    recording: Recording,
) -> Result<TrajectoryResult> {
    check_start(rhs, x0)?;
    let h = grid.dt();
    let mut rec = Recorder::new(recording, grid.steps());
    let mut x = x0.clone();
    rec.push(0.0, &x, grid.steps() == 0);
    let start = Instant::now();
    for j in 0..grid.steps() {
        let step = j + 1;
        let t = grid.time(j);
        let k1 = rhs.eval(&x, t, mu).map_err(diverged(step))?;
        let k2 = rhs.eval(&(&x + &k1 * (0.5 * h)), t + 0.5 * h, mu).map_err(diverged(step))?;
        let k3 = rhs.eval(&(&x + &k2 * (0.5 * h)), t + 0.5 * h, mu).map_err(diverged(step))?;
        let k4 = rhs.eval(&(&x + &k3 * h), t + h, mu).map_err(diverged(step))?;
        x += (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { step });
        }
        rec.push(grid.time(step), &x, step == grid.steps());
    }
    Ok(rec.finish(start.elapsed(), 0))
}

/// One implicit Euler step `y = x + dt f(y, t_next)`, seeded at `x`.
/// Returns the new state and the number of inner iterations.
pub fn backward_euler_step<R: Rhs + ?Sized>(
    rhs: &R,
    x: &DVector<f64>,
    t_next: f64,
    dt: f64,
    mu: &[f64],
    inner: InnerSolver,
    tol: f64,
    max_iter: usize,
    step: usize,
) -> Result<(DVector<f64>, usize)> {
    let mut y = x.clone();
    let mut last = f64::INFINITY;
    match inner {
        InnerSolver::Newton => {
            for k in 0..max_iter {
                let f = rhs.eval(&y, t_next, mu).map_err(diverged(step))?;
                let r = &y - x - f * dt;
                let rnorm = r.norm();
                if k > 0 && rnorm <= tol * (1.0 + y.norm()) {
                    return Ok((y, k));
                }
                let jac = rhs.jacobian(&y, t_next, mu)?;
                let delta = jac.solve_shifted(dt, &r)?;
                y -= &delta;
                if y.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Divergence { step });
                }
                last = delta.norm();
                if last <= tol * (1.0 + y.norm()) {
                    return Ok((y, k + 1));
                }
            }
        }
        InnerSolver::FixedPoint => {
            for k in 0..max_iter {
                let f = rhs.eval(&y, t_next, mu).map_err(diverged(step))?;
                let next = x + f * dt;
                if next.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Divergence { step });
                }
                last = (&next - &y).norm();
                y = next;
                if last <= tol * (1.0 + y.norm()) {
                    return Ok((y, k + 1));
                }
            }
        }
    }
    Err(Error::NonConvergence {
        step,
        residual: last,
    })
}

/// Backward Euler with the chosen inner solver.
pub fn be_solve<R: Rhs + ?Sized>(
    rhs: &R,
    x0: &DVector<f64>,
    grid: &TimeGrid,
    mu: &[f64],
    inner: InnerSolver,
    tol: f64,
    max_iter: usize,
    recording: Recording,
) -> Result<TrajectoryResult> {
    check_start(rhs, x0)?;
    if inner == InnerSolver::Newton {
        // Surface a capability error before any work is timed.
        rhs.jacobian(x0, 0.0, mu)?;
    }
    let dt = grid.dt();
    let mut rec = Recorder::new(recording, grid.steps());
    let mut x = x0.clone();
    let mut iterations = 0;
    rec.push(0.0, &x, grid.steps() == 0);
    let start = Instant::now();
    for j in 0..grid.steps() {
        let step = j + 1;
        let (next, its) =
            backward_euler_step(rhs, &x, grid.time(step), dt, mu, inner, tol, max_iter, step)?;
        iterations += its;
        x = next;
        rec.push(grid.time(step), &x, step == grid.steps());
    }
    Ok(rec.finish(start.elapsed(), iterations))
}

/// Integrates with any [`Integrator`].
pub fn solve<R: Rhs + ?Sized>(
    rhs: &R,
    integrator: &Integrator,
    x0: &DVector<f64>,
    grid: &TimeGrid,
    mu: &[f64],
    recording: Recording,
) -> Result<TrajectoryResult> {
    match *integrator {
        Integrator::Rk4 => rk4_solve(rhs, x0, grid, mu, recording),
        Integrator::BackwardEuler {
            inner,
            tol,
            max_iter,
        } => be_solve(rhs, x0, grid, mu, inner, tol, max_iter, recording),
    }
}

/// Step counts swept by timestep verification.
pub const STUDY_COUNTS: [usize; 9] = [25, 50, 100, 200, 400, 800, 1600, 3200, 6400];

/// Self-convergence study against the finest run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub t_final: f64,
    pub counts: Vec<usize>,
    /// Relative final-state error against the finest count; `None` when the
    /// run failed (diverged or the inner solve did not converge).
    pub errors: Vec<Option<f64>>,
    /// `log2(err(N) / err(2N))`, attached to the coarser count `N`.
    pub orders: Vec<Option<f64>>,
    pub nominal_order: f64,
    pub selected: Option<usize>,
    /// False when the error sequence is not monotone decreasing.
    pub reliable: bool,
}

impl ConvergenceStudy {
    /// Builds the study from precomputed errors (the last entry is the
    /// reference and is conventionally zero).
    pub fn from_errors(
        t_final: f64,
        counts: Vec<usize>,
        errors: Vec<Option<f64>>,
        nominal_order: f64,
    ) -> Result<Self> {
        if counts.len() != errors.len() || counts.len() < 2 {
            return Err(Error::arg("study needs at least two counts with one error each"));
        }
        if counts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::arg("study counts must be strictly increasing"));
        }
        let mut orders = vec![None; counts.len()];
        for i in 0..counts.len() - 1 {
            if counts[i + 1] != 2 * counts[i] {
                continue;
            }
            if let (Some(a), Some(b)) = (errors[i], errors[i + 1]) {
                if a > 0.0 && b > 0.0 {
                    orders[i] = Some((a / b).log2());
                }
            }
        }
        let selected = orders
            .iter()
            .position(|o| o.is_some_and(|o| o >= 0.99 * nominal_order))
            .map(|i| counts[i]);
        let defined: Vec<f64> = errors[..errors.len() - 1].iter().flatten().copied().collect();
        let reliable = errors[..errors.len() - 1].iter().all(Option::is_some)
            && defined.windows(2).all(|w| w[1] < w[0]);
        if !reliable {
            log::warn!("timestep study: error sequence not monotone, selection unreliable");
        }
        Ok(Self {
            t_final,
            counts,
            errors,
            orders,
            nominal_order,
            selected,
            reliable,
        })
    }

    pub fn order_at(&self, count: usize) -> Option<f64> {
        self.counts
            .iter()
            .position(|&c| c == count)
            .and_then(|i| self.orders[i])
    }

    pub fn dt(&self, count: usize) -> f64 {
        self.t_final / count as f64
    }
}

/// Runs `rhs` from `x0` at every count in `counts` (ascending, finest last)
/// and measures the relative l2 error of the final state against the finest
/// run.
pub fn verify_timestep<R: Rhs + ?Sized>(
    rhs: &R,
    integrator: &Integrator,
    x0: &DVector<f64>,
    t_final: f64,
    mu: &[f64],
    counts: &[usize],
) -> Result<ConvergenceStudy> {
    let finals: Vec<Option<DVector<f64>>> = counts
        .par_iter()
        .map(|&nt| {
            let grid = TimeGrid::new(t_final, nt)?;
            match solve(rhs, integrator, x0, &grid, mu, Recording::FinalOnly) {
                Ok(traj) => Ok(Some(traj.final_state())),
                Err(Error::Divergence { .. }) | Err(Error::NonConvergence { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let reference = finals
        .last()
        .and_then(Clone::clone)
        .ok_or_else(|| Error::arg("finest run of the timestep study failed"))?;
    let scale = reference.norm();
    let errors = finals
        .iter()
        .map(|f| {
            f.as_ref().map(|x| {
                let diff = (x - &reference).norm();
                if scale > 0.0 {
                    diff / scale
                } else {
                    diff
                }
            })
        })
        .collect();
    ConvergenceStudy::from_errors(t_final, counts.to_vec(), errors, integrator.order())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::csr_from_dense;
    use crate::system::ParameterDomain;
    use nalgebra_sparse::CsrMatrix;

    /// dx/dt = lambda * x, componentwise.
    struct Decay {
        lambda: f64,
        dim: usize,
        domain: ParameterDomain,
    }

    impl Decay {
        fn new(lambda: f64, dim: usize) -> Self {
            Self {
                lambda,
                dim,
                domain: ParameterDomain::new(vec![0.0], vec![1.0]).unwrap(),
            }
        }
    }

    impl DynamicalSystem for Decay {
        fn name(&self) -> &str {
            "decay"
        }
        fn dim(&self) -> usize {
            self.dim
        }
        fn domain(&self) -> &ParameterDomain {
            &self.domain
        }
        fn velocity(&self, x: &DVector<f64>, _t: f64, _mu: &[f64]) -> Result<DVector<f64>> {
            Ok(x * self.lambda)
        }
        fn jacobian(&self, _x: &DVector<f64>, _t: f64, _mu: &[f64]) -> Result<CsrMatrix<f64>> {
            Ok(csr_from_dense(&(DMatrix::identity(self.dim, self.dim) * self.lambda)))
        }
        fn initial_state(&self, _mu: &[f64]) -> Result<DVector<f64>> {
            Ok(DVector::from_element(self.dim, 1.0))
        }
    }

    /// dx/dt = -x^3 + sin(t): nonlinear, mildly stiff-free.
    struct Cubic;

    impl Rhs for Cubic {
        fn dim(&self) -> usize {
            2
        }
        fn eval(&self, x: &DVector<f64>, t: f64, _mu: &[f64]) -> Result<DVector<f64>> {
            Ok(DVector::from_vec(vec![-x[0].powi(3) + t.sin(), -0.5 * x[1] + x[0]]))
        }
        fn jacobian(&self, x: &DVector<f64>, _t: f64, _mu: &[f64]) -> Result<Jacobian> {
            Ok(Jacobian::Dense(DMatrix::from_row_slice(
                2,
                2,
                &[-3.0 * x[0] * x[0], 0.0, 1.0, -0.5],
            )))
        }
    }

    #[test]
    fn rk4_single_step_on_decay() {
        let sys = Decay::new(-1.0, 1);
        let grid = TimeGrid::new(0.1, 1).unwrap();
        let traj = rk4_solve(&sys, &DVector::from_element(1, 1.0), &grid, &[0.5], Recording::All).unwrap();
        // Stages: k1=-1, k2=-0.95, k3=-0.9525, k4=-0.90475.
        let hand = 1.0 + 0.1 / 6.0 * (-1.0 + 2.0 * -0.95 + 2.0 * -0.9525 + -0.90475);
        assert!((traj.final_state()[0] - hand).abs() < 1e-15);
        assert!((traj.final_state()[0] - 0.9048375).abs() < 1e-7);
        assert_eq!(traj.times, vec![0.0, 0.1]);
    }

    #[test]
    fn rk4_matches_taylor_polynomial_per_step() {
        for &(lambda, h) in &[(-1.0, 0.1), (0.7, 0.3), (-3.0, 0.05), (2.0, 0.01)] {
            let sys = Decay::new(lambda, 1);
            let grid = TimeGrid::new(h * 7.0, 7).unwrap();
            let traj = rk4_solve(&sys, &DVector::from_element(1, 1.0), &grid, &[0.0], Recording::All).unwrap();
            let z: f64 = lambda * grid.dt();
            let r = 1.0 + z + z * z / 2.0 + z.powi(3) / 6.0 + z.powi(4) / 24.0;
            for j in 0..7 {
                let ratio = traj.states[(0, j + 1)] / traj.states[(0, j)];
                assert!((ratio - r).abs() < 1e-14, "lambda={lambda} step {j}");
            }
        }
    }

    #[test]
    fn rk4_zero_field_is_constant() {
        let sys = Decay::new(0.0, 3);
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let x0 = DVector::from_vec(vec![1.0, -2.0, 3.5]);
        let traj = rk4_solve(&sys, &x0, &grid, &[0.0], Recording::All).unwrap();
        assert!(traj.states.column_iter().all(|c| c == x0));
    }

    #[test]
    fn rk4_reports_divergence_step() {
        struct Blowup;
        impl Rhs for Blowup {
            fn dim(&self) -> usize {
                1
            }
            fn eval(&self, x: &DVector<f64>, _t: f64, _mu: &[f64]) -> Result<DVector<f64>> {
                Ok(x.map(|v| v * v * 1e150))
            }
            fn jacobian(&self, _: &DVector<f64>, _: f64, _: &[f64]) -> Result<Jacobian> {
                unreachable!()
            }
        }
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let err = rk4_solve(&Blowup, &DVector::from_element(1, 1.0), &grid, &[], Recording::All).unwrap_err();
        assert!(matches!(err, Error::Divergence { step: 1 }), "{err}");
    }

    #[test]
    fn backward_euler_closed_form_step() {
        let sys = Decay::new(-1.0, 1);
        let x = DVector::from_element(1, 1.0);
        let (y, its) =
            backward_euler_step(&sys, &x, 0.1, 0.1, &[0.0], InnerSolver::Newton, 1e-10, 50, 1).unwrap();
        assert!((y[0] - 1.0 / 1.1).abs() < 1e-15);
        assert_eq!(its, 1);
        let (y, _) = backward_euler_step(&sys, &x, 0.1, 0.1, &[0.0], InnerSolver::FixedPoint, 1e-12, 200, 1)
            .unwrap();
        assert!((y[0] - 1.0 / 1.1).abs() < 1e-11);
    }

    #[test]
    fn backward_euler_contracts_for_any_step() {
        for &h in &[1e-3, 0.1, 1.0, 10.0, 1e3] {
            let sys = Decay::new(-2.0, 1);
            let grid = TimeGrid::new(h * 5.0, 5).unwrap();
            let traj = be_solve(
                &sys,
                &DVector::from_element(1, 1.0),
                &grid,
                &[0.0],
                InnerSolver::Newton,
                1e-12,
                50,
                Recording::All,
            )
            .unwrap();
            for j in 0..5 {
                assert!(traj.states[(0, j + 1)].abs() < traj.states[(0, j)].abs());
            }
        }
    }

    #[test]
    fn newton_and_fixed_point_agree() {
        let grid = TimeGrid::new(1.0, 20).unwrap();
        let x0 = DVector::from_vec(vec![0.8, -0.3]);
        let run = |inner| be_solve(&Cubic, &x0, &grid, &[], inner, 1e-12, 200, Recording::All).unwrap();
        let newton = run(InnerSolver::Newton);
        let fixed = run(InnerSolver::FixedPoint);
        assert!((newton.states - fixed.states).amax() < 1e-9);
    }

    #[test]
    fn fixed_point_nonconvergence_is_reported() {
        let sys = Decay::new(-50.0, 1);
        let grid = TimeGrid::new(1.0, 2).unwrap();
        let err = be_solve(
            &sys,
            &DVector::from_element(1, 1.0),
            &grid,
            &[0.0],
            InnerSolver::FixedPoint,
            1e-10,
            50,
            Recording::All,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Divergence { step: 1 } | Error::NonConvergence { step: 1, .. }), "{err}");
    }

    #[test]
    fn synthetic_first_order_sequence() {
        let counts = vec![25, 50, 100, 200];
        let errors = counts.iter().map(|&n| Some(3.0 / n as f64)).collect();
        let study = ConvergenceStudy::from_errors(1.0, counts, errors, 1.0).unwrap();
        for o in &study.orders[..3] {
            assert!((o.unwrap() - 1.0).abs() < 1e-14);
        }
        assert_eq!(study.selected, Some(25));
        assert!(study.reliable);
    }

    #[test]
    fn nonmonotone_sequence_is_flagged() {
        let counts = vec![25, 50, 100, 200];
        let errors = vec![Some(0.1), Some(0.2), Some(0.01), Some(0.0)];
        let study = ConvergenceStudy::from_errors(1.0, counts, errors, 1.0).unwrap();
        assert!(!study.reliable);
        assert_eq!(study.selected, Some(50));
    }

    #[test]
    fn study_on_decay_recovers_orders() {
        let sys = Decay::new(-1.0, 1);
        let x0 = DVector::from_element(1, 1.0);
        let counts = [25, 50, 100, 200, 400, 800, 1600];
        let rk = verify_timestep(&sys, &Integrator::Rk4, &x0, 1.0, &[0.0], &counts).unwrap();
        assert!((rk.order_at(25).unwrap() - 4.0).abs() < 0.05);
        let be = verify_timestep(&sys, &Integrator::backward_euler(InnerSolver::Newton), &x0, 1.0, &[0.0], &counts)
            .unwrap();
        assert!((be.order_at(25).unwrap() - 1.0).abs() < 0.05);
        assert_eq!(be.selected, Some(25));
    }
}
