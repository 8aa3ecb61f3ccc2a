//! Plain-text artifact formats.
//!
//! Dense matrices are stored as one header line `rows cols` followed by the
//! entries in column-major order, whitespace separated (one column per
//! line). Bases carry a TOML sidecar, trajectories store their time row
//! above the states.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integration::{ConvergenceStudy, TrajectoryResult};
use crate::problems::{Burgers1D, ConvDiff2D, ProblemKind};
use crate::reduction::{PodReport, ReducedBasis};

pub fn matrix_to_string(m: &DMatrix<f64>) -> String {
    let mut out = format!("{} {}\n", m.nrows(), m.ncols());
    for col in m.column_iter() {
        let line: Vec<String> = col.iter().map(|v| format!("{v:e}")).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    out
}

pub fn matrix_from_str(text: &str, path: &Path) -> Result<DMatrix<f64>> {
    let mut tokens = text.split_whitespace();
    let mut dim = |what: &str| -> Result<usize> {
        tokens
            .next()
            .ok_or_else(|| Error::format(path, format!("missing {what} in header")))?
            .parse()
            .map_err(|e| Error::format(path, format!("bad {what}: {e}")))
    };
    let rows = dim("row count")?;
    let cols = dim("column count")?;
    let values = tokens
        .map(|t| t.parse::<f64>().map_err(|e| Error::format(path, format!("bad value `{t}`: {e}"))))
        .collect::<Result<Vec<f64>>>()?;
    if values.len() != rows * cols {
        return Err(Error::format(
            path,
            format!("header promises {rows}x{cols} values, found {}", values.len()),
        ));
    }
    Ok(DMatrix::from_vec(rows, cols, values))
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    std::fs::write(path, matrix_to_string(m))?;
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    matrix_from_str(&std::fs::read_to_string(path)?, path)
}

fn sidecar(path: &Path) -> PathBuf {
    path.with_extension("meta.toml")
}

fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = toml::to_string(value).map_err(|e| Error::format(path, e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(toml::from_str(&std::fs::read_to_string(path)?)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisMeta {
    pub modes: usize,
    #[serde(default)]
    pub requested: Option<usize>,
    pub energy_fraction: f64,
    pub numerical_rank: usize,
    pub total_energy: f64,
    pub singular_values: Vec<f64>,
    /// Parameters of the runs whose snapshots built the basis.
    pub source_runs: Vec<Vec<f64>>,
    pub offset: Vec<f64>,
}

/// Writes `V` to `path` and the metadata next to it (`*.meta.toml`).
pub fn write_basis(path: &Path, basis: &ReducedBasis, report: &PodReport, source_runs: &[Vec<f64>]) -> Result<()> {
    write_matrix(path, &basis.v)?;
    let meta = BasisMeta {
        modes: report.modes,
        requested: report.requested,
        energy_fraction: report.energy_fraction,
        numerical_rank: report.numerical_rank,
        total_energy: basis.total_energy,
        singular_values: basis.singular_values.clone(),
        source_runs: source_runs.to_vec(),
        offset: basis.offset.iter().copied().collect(),
    };
    write_toml(&sidecar(path), &meta)
}

pub fn read_basis(path: &Path) -> Result<(ReducedBasis, BasisMeta)> {
    let v = read_matrix(path)?;
    let meta: BasisMeta = read_toml(&sidecar(path))?;
    if meta.offset.len() != v.nrows() || meta.modes != v.ncols() {
        return Err(Error::format(path, "basis matrix does not match its metadata"));
    }
    let basis = ReducedBasis {
        v,
        offset: DVector::from_vec(meta.offset.clone()),
        singular_values: meta.singular_values.clone(),
        total_energy: meta.total_energy,
    };
    Ok((basis, meta))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub label: String,
    pub wall_seconds: f64,
    pub inner_iterations: usize,
    pub mu: Vec<f64>,
}

/// Stores the times as row 0 and the states below it.
pub fn write_trajectory(path: &Path, traj: &TrajectoryResult, label: &str, mu: &[f64]) -> Result<()> {
    let n = traj.states.nrows();
    let m = DMatrix::from_fn(n + 1, traj.len(), |r, c| if r == 0 { traj.times[c] } else { traj.states[(r - 1, c)] });
    write_matrix(path, &m)?;
    let meta = TrajectoryMeta {
        label: label.to_string(),
        wall_seconds: traj.wall_time.as_secs_f64(),
        inner_iterations: traj.inner_iterations,
        mu: mu.to_vec(),
    };
    write_toml(&sidecar(path), &meta)
}

pub fn read_trajectory(path: &Path) -> Result<(TrajectoryResult, TrajectoryMeta)> {
    let m = read_matrix(path)?;
    if m.nrows() < 2 {
        return Err(Error::format(path, "trajectory needs a time row and at least one state row"));
    }
    let meta: TrajectoryMeta = read_toml(&sidecar(path))?;
    let traj = TrajectoryResult {
        times: m.row(0).iter().copied().collect(),
        states: m.rows(1, m.nrows() - 1).into_owned(),
        wall_time: Duration::from_secs_f64(meta.wall_seconds),
        inner_iterations: meta.inner_iterations,
    };
    Ok((traj, meta))
}

pub fn write_convergence_csv(study: &ConvergenceStudy, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["nt", "dt", "error", "observed_order", "selected"])?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:e}"));
    for (i, &n) in study.counts.iter().enumerate() {
        w.write_record([
            n.to_string(),
            format!("{:e}", study.dt(n)),
            opt(study.errors[i]),
            opt(study.orders[i]),
            (study.selected == Some(n)).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Spatial profile of a full-order state: `(x, u)` for Burgers and
/// `(x, y, u)` for the convection-diffusion grid.
pub fn write_profile_csv(kind: ProblemKind, state: &DVector<f64>, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    match kind {
        ProblemKind::Burgers => {
            let p = Burgers1D::new();
            if state.len() != Burgers1D::NODES {
                return Err(Error::arg("profile length does not match the Burgers grid"));
            }
            w.write_record(["x", "u"])?;
            for (i, u) in state.iter().enumerate() {
                w.write_record([format!("{:e}", p.node(i)), format!("{u:e}")])?;
            }
        }
        ProblemKind::Convdiff => {
            let p = ConvDiff2D::new();
            if state.len() != p.side() * p.side() {
                return Err(Error::arg("profile length does not match the convection-diffusion grid"));
            }
            w.write_record(["x", "y", "u"])?;
            for (k, u) in state.iter().enumerate() {
                let (x, y) = p.coords(k);
                w.write_record([format!("{x:e}"), format!("{y:e}"), format!("{u:e}")])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
