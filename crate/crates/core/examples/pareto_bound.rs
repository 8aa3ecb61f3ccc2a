//! Pareto frontier of a finished run and the a-priori error bound on a
//! small linear system whose Lipschitz constant is known exactly.
//!
//! ```text
//! cargo run --release --example pareto_bound -- runs/burgers/reports/summary.csv
//! ```

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use nirom::analysis::{evaluate_bound, pareto_frontier, ParetoPoint};
use nirom::integration::{solve, Integrator, Recording, Rhs};
use nirom::linalg::Jacobian;
use nirom::reduction::{pod_fit, PodCriterion, PodOptions, SnapshotMatrix};
use nirom::system::TimeGrid;

struct Affine {
    a: DMatrix<f64>,
    c: DVector<f64>,
}

impl Rhs for Affine {
    fn dim(&self) -> usize {
        self.a.nrows()
    }
    fn eval(&self, x: &DVector<f64>, _t: f64, _mu: &[f64]) -> nirom::Result<DVector<f64>> {
        Ok(&self.a * x + &self.c)
    }
    fn jacobian(&self, _x: &DVector<f64>, _t: f64, _mu: &[f64]) -> nirom::Result<Jacobian> {
        Ok(Jacobian::Dense(self.a.clone()))
    }
}

fn frontier_from_summary(path: &PathBuf) -> Result<(), Box<dyn std::error::Error>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut points = Vec::new();
    for record in reader.records() {
        let r = record?;
        let (Ok(time), Ok(error)) = (r[2].parse::<f64>(), r[3].parse::<f64>()) else {
            continue;
        };
        points.push(ParetoPoint::new(format!("{} / {}", &r[0], &r[1]), time, error));
    }
    println!("{} finished runs in {}", points.len(), path.display());
    for p in pareto_frontier(&points) {
        println!("  frontier: {:<36} {:>10.4e} s  e_FOM {:.4e}", p.label, p.time, p.error);
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    if let Some(path) = std::env::args().nth(1).map(PathBuf::from) {
        frontier_from_summary(&path)?;
    }

    let a = DMatrix::from_row_slice(4, 4, &[
        -1.0, 0.3, 0.0, 0.0,
        -0.3, -1.0, 0.2, 0.0,
        0.0, -0.2, -0.5, 0.1,
        0.0, 0.0, -0.1, -2.0,
    ]);
    let k = a.clone().svd(false, false).singular_values.max();
    let full = Affine { a: a.clone(), c: DVector::zeros(4) };
    let x0 = DVector::from_vec(vec![1.0, -0.5, 0.25, 0.8]);
    let grid = TimeGrid::new(2.0, 400)?;
    let fom = solve(&full, &Integrator::Rk4, &x0, &grid, &[], Recording::All)?;
    let snapshots = SnapshotMatrix::from_runs(&[(vec![0.0], &fom)])?;
    let options = PodOptions {
        criterion: PodCriterion::Modes(2),
        max_modes: None,
        subtract_mean: false,
    };
    let (basis, _) = pod_fit(&snapshots, &options)?;
    let reduced_a = basis.v.transpose() * &a * &basis.v;
    let xr0 = basis.project(&x0)?;
    println!("\nlinear system, K = {k:.4}, n = 2 of 4");
    println!("{:>8} {:>12} {:>12} {:>6}", "C", "measured", "bound", "holds");
    for c in [0.0, 0.01, 0.1] {
        let rhs = Affine {
            a: reduced_a.clone(),
            c: DVector::from_vec(vec![c, 0.0]),
        };
        let traj = solve(&rhs, &Integrator::Rk4, &xr0, &grid, &[], Recording::All)?;
        let report = evaluate_bound(&fom, &traj, &basis, k, c)?;
        println!("{c:>8} {:>12.4e} {:>12.4e} {:>6}", report.measured, report.bound, report.holds);
    }
    Ok(())
}
