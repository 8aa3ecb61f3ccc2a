//! Trajectory error metrics, runtime ratios, Pareto frontiers and the
//! a-posteriori error bound `e^{KT}‖e_o‖∞ + e^{KT}‖e_i(0)‖ + (C/K)(e^{KT} − 1)`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integration::{Rhs, TrajectoryResult};
use crate::reduction::ReducedBasis;
use crate::regressors::FittedRegressor;
use crate::sampling::TrainingSet;

/// `‖a − b‖ / ‖b‖`, or `None` when `b` vanishes.
pub fn relative_l2(a: &DVector<f64>, b: &DVector<f64>) -> Option<f64> {
    let d = b.norm();
    (d > 0.0).then(|| (a - b).norm() / d)
}

/// Trapezoidal mean of a series. Intervals with an undefined endpoint are
/// left out of both the integral and the averaging length.
pub fn time_average(times: &[f64], values: &[Option<f64>]) -> Option<f64> {
    let mut integral = 0.0;
    let mut length = 0.0;
    for k in 1..times.len().min(values.len()) {
        if let (Some(a), Some(b)) = (values[k - 1], values[k]) {
            let h = times[k] - times[k - 1];
            integral += 0.5 * (a + b) * h;
            length += h;
        }
    }
    (length > 0.0).then(|| integral / length)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSeries {
    pub times: Vec<f64>,
    pub e_fom: Vec<Option<f64>>,
    pub e_rom: Vec<Option<f64>>,
    pub mean_fom: Option<f64>,
    pub mean_rom: Option<f64>,
}

impl ErrorSeries {
    pub fn from_parts(times: Vec<f64>, e_fom: Vec<Option<f64>>, e_rom: Vec<Option<f64>>) -> Self {
        let mean_fom = time_average(&times, &e_fom);
        let mean_rom = time_average(&times, &e_rom);
        Self {
            times,
            e_fom,
            e_rom,
            mean_fom,
            mean_rom,
        }
    }

    /// `e_ROM` at the recorded time closest to `t`.
    pub fn e_rom_at(&self, t: f64) -> Option<f64> {
        let k = self
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))?
            .0;
        self.e_rom[k]
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "e_fom", "e_rom"])?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:e}"));
        for k in 0..self.times.len() {
            w.write_record([format!("{:e}", self.times[k]), opt(self.e_fom[k]), opt(self.e_rom[k])])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn same_grid(a: &TrajectoryResult, b: &TrajectoryResult) -> bool {
    a.times.len() == b.times.len() && a.times.iter().zip(&b.times).all(|(x, y)| (x - y).abs() <= 1e-12 * (1.0 + y.abs()))
}

/// Relative errors of a reduced trajectory against the full-order one
/// (after lifting) and against the Galerkin reference (in reduced
/// coordinates).
pub fn error_series(
    surrogate: &TrajectoryResult,
    fom: &TrajectoryResult,
    galerkin: &TrajectoryResult,
    basis: &ReducedBasis,
) -> Result<ErrorSeries> {
    if !same_grid(surrogate, fom) || !same_grid(surrogate, galerkin) {
        return Err(Error::arg("error series needs trajectories on one shared time grid"));
    }
    if surrogate.states.nrows() != basis.n_modes() || galerkin.states.nrows() != basis.n_modes() {
        return Err(Error::arg("reduced trajectories do not match the basis dimension"));
    }
    let lifted = basis.lift_columns(&surrogate.states);
    let mut e_fom = Vec::with_capacity(fom.len());
    let mut e_rom = Vec::with_capacity(fom.len());
    for j in 0..fom.len() {
        e_fom.push(relative_l2(&lifted.column(j).into_owned(), &fom.state(j)));
        e_rom.push(relative_l2(&surrogate.state(j), &galerkin.state(j)));
    }
    Ok(ErrorSeries::from_parts(surrogate.times.clone(), e_fom, e_rom))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub label: String,
    pub time: f64,
    pub error: f64,
}

impl ParetoPoint {
    pub fn new(label: impl Into<String>, time: f64, error: f64) -> Self {
        Self {
            label: label.into(),
            time,
            error,
        }
    }
}

/// Non-dominated points sorted by time. Identical `(time, error)` pairs
/// keep only the alphabetically first label.
pub fn pareto_frontier(points: &[ParetoPoint]) -> Vec<ParetoPoint> {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| {
        a.time
            .total_cmp(&b.time)
            .then(a.error.total_cmp(&b.error))
            .then(a.label.cmp(&b.label))
    });
    let mut frontier: Vec<ParetoPoint> = Vec::new();
    for p in sorted {
        if frontier.last().is_none_or(|last| p.error < last.error) {
            frontier.push(p);
        }
    }
    frontier
}

pub fn write_pareto_csv(points: &[ParetoPoint], path: &Path) -> Result<()> {
    let frontier = pareto_frontier(points);
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["label", "relative_time", "relative_error", "on_frontier"])?;
    for p in points {
        let on = frontier.iter().any(|f| f == p);
        w.write_record([p.label.clone(), format!("{:e}", p.time), format!("{:e}", p.error), on.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Right-hand side of the error bound; the `K = 0` case uses the limit
/// `(C/K)(e^{KT} − 1) → C T`.
pub fn lemma_bound(k: f64, c: f64, eo_inf: f64, ei0: f64, t_final: f64) -> f64 {
    if k == 0.0 {
        eo_inf + ei0 + c * t_final
    } else {
        let g = (k * t_final).exp();
        g * eo_inf + g * ei0 + c / k * (k * t_final).exp_m1()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub lipschitz: f64,
    pub regression_error: f64,
    pub eo_inf: f64,
    pub ei0: f64,
    pub t_final: f64,
    pub bound: f64,
    pub measured: f64,
    pub holds: bool,
}

/// Largest `‖f(x1) − f(x2)‖ / ‖x1 − x2‖` over random pairs of `states`
/// (columns), each pair also compared against a small random perturbation
/// of its first member.
pub fn estimate_lipschitz<R: Rhs + ?Sized>(
    rhs: &R,
    states: &DMatrix<f64>,
    times: &[f64],
    mu: &[f64],
    pairs: usize,
    seed: u64,
) -> Result<f64> {
    let m = states.ncols();
    if m == 0 {
        return Err(Error::arg("Lipschitz estimate needs sample states"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: f64 = 0.0;
    let mut ratio = |a: &DVector<f64>, b: &DVector<f64>, t: f64| -> Result<()> {
        let dx = (a - b).norm();
        if dx > 0.0 {
            let df = (rhs.eval(a, t, mu)? - rhs.eval(b, t, mu)?).norm();
            best = best.max(df / dx);
        }
        Ok(())
    };
    for _ in 0..pairs {
        let i = rng.random_range(0..m);
        let j = rng.random_range(0..m);
        let t = times[i.min(times.len() - 1)];
        let a = states.column(i).into_owned();
        ratio(&a, &states.column(j).into_owned(), t)?;
        let scale = 1e-3 * (1.0 + a.amax());
        let b = a.map(|v| v + scale * rng.random_range(-1.0..1.0));
        ratio(&a, &b, t)?;
    }
    Ok(best)
}

/// Largest `‖f̂_r(z) − f_r(z)‖` over the rows of `data`.
pub fn regression_sup_error(model: &FittedRegressor, data: &TrainingSet) -> Result<f64> {
    let pred = model.predict_rows(&data.inputs)?;
    Ok((pred - &data.targets).row_iter().map(|r| r.norm()).fold(0.0, f64::max))
}

/// Evaluates the bound for a reduced trajectory. `times` of `fom` and
/// `surrogate` must coincide; `lipschitz` and `regression_error` are the
/// (estimated) constants.
pub fn evaluate_bound(
    fom: &TrajectoryResult,
    surrogate: &TrajectoryResult,
    basis: &ReducedBasis,
    lipschitz: f64,
    regression_error: f64,
) -> Result<BoundReport> {
    if !same_grid(fom, surrogate) {
        return Err(Error::arg("bound evaluation needs trajectories on one shared time grid"));
    }
    let projected = basis.lift_columns(&basis.project_columns(&fom.states));
    let lifted = basis.lift_columns(&surrogate.states);
    let mut eo_inf: f64 = 0.0;
    let mut measured: f64 = 0.0;
    for j in 0..fom.len() {
        eo_inf = eo_inf.max((fom.states.column(j) - projected.column(j)).norm());
        measured = measured.max((lifted.column(j) - fom.states.column(j)).norm());
    }
    let ei0 = (lifted.column(0) - projected.column(0)).norm();
    let t_final = fom.times.last().copied().unwrap_or(0.0) - fom.times.first().copied().unwrap_or(0.0);
    let bound = lemma_bound(lipschitz, regression_error, eo_inf, ei0, t_final);
    Ok(BoundReport {
        lipschitz,
        regression_error,
        eo_inf,
        ei0,
        t_final,
        bound,
        measured,
        holds: measured <= bound,
    })
}

/// One row of the method comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub integrator: String,
    pub online_seconds: f64,
    pub e_fom: Option<f64>,
    pub e_rom: Option<f64>,
    pub tau_fom: f64,
    pub tau_rom: f64,
    pub failure: Option<String>,
}

impl SummaryRow {
    /// Runtime ratios against the full-order and Galerkin time loops.
    pub fn new(
        method: impl Into<String>,
        integrator: impl Into<String>,
        online_seconds: f64,
        series: Option<&ErrorSeries>,
        fom_seconds: f64,
        galerkin_seconds: f64,
    ) -> Self {
        Self {
            method: method.into(),
            integrator: integrator.into(),
            online_seconds,
            e_fom: series.and_then(|s| s.mean_fom),
            e_rom: series.and_then(|s| s.mean_rom),
            tau_fom: online_seconds / fom_seconds,
            tau_rom: online_seconds / galerkin_seconds,
            failure: None,
        }
    }
}

pub fn write_summary_csv(rows: &[SummaryRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "method",
        "integrator",
        "online_seconds",
        "err_wrt_fom",
        "err_wrt_galerkin",
        "tau_fom",
        "tau_rom",
        "failure",
    ])?;
    let opt = |v: Option<f64>| v.filter(|v| v.is_finite()).map_or(String::new(), |v| format!("{v:e}"));
    for r in rows {
        w.write_record([
            r.method.clone(),
            r.integrator.clone(),
            opt(Some(r.online_seconds)),
            opt(r.e_fom),
            opt(r.e_rom),
            opt(Some(r.tau_fom)),
            opt(Some(r.tau_rom)),
            r.failure.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_by_hand() {
        let a = DVector::from_vec(vec![2.0, 0.0]);
        let b = DVector::from_vec(vec![1.0, 0.0]);
        assert_eq!(relative_l2(&a, &b), Some(1.0));
        assert_eq!(relative_l2(&a, &DVector::zeros(2)), None);
    }

    #[test]
    fn trapezoid_average() {
        let t = [0.0, 1.0, 2.0];
        assert_eq!(time_average(&t, &[Some(0.0), Some(2.0), Some(2.0)]), Some(1.5));
        // First interval is skipped: only [1, 2] counts.
        assert_eq!(time_average(&t, &[None, Some(1.0), Some(3.0)]), Some(2.0));
        assert_eq!(time_average(&t, &[None, None, None]), None);
    }

    #[test]
    fn frontier_examples() {
        let pts = vec![
            ParetoPoint::new("a", 1.0, 0.1),
            ParetoPoint::new("b", 2.0, 0.05),
            ParetoPoint::new("c", 3.0, 0.2),
        ];
        let f = pareto_frontier(&pts);
        assert_eq!(f, pts[..2].to_vec());
        assert_eq!(pareto_frontier(&pts[2..]), pts[2..].to_vec());
        let dup = vec![ParetoPoint::new("z", 1.0, 1.0), ParetoPoint::new("y", 1.0, 1.0)];
        assert_eq!(pareto_frontier(&dup), vec![ParetoPoint::new("y", 1.0, 1.0)]);
    }

    #[test]
    fn bound_formula() {
        assert!((lemma_bound(1.0, 0.0, 0.1, 0.0, 1.0) - 0.1 * std::f64::consts::E).abs() < 1e-15);
        assert_eq!(lemma_bound(0.0, 2.0, 0.1, 0.2, 3.0), 0.1 + 0.2 + 6.0);
        // Full basis: e_o = 0 and the bound is the regression term alone.
        let k: f64 = 0.7;
        assert!((lemma_bound(k, 0.3, 0.0, 0.0, 2.0) - 0.3 / k * ((k * 2.0).exp() - 1.0)).abs() < 1e-14);
        // Continuity at K -> 0.
        assert!((lemma_bound(1e-9, 0.5, 0.1, 0.0, 2.0) - lemma_bound(0.0, 0.5, 0.1, 0.0, 2.0)).abs() < 1e-8);
    }
}
