//! Validation sweeps of every regressor family on a reduced Burgers
//! velocity with six POD modes.
//!
//! ```text
//! cargo run --release --example regressor_sweep
//! ```

use nirom::integration::{solve, InnerSolver, Integrator, Recording};
use nirom::problems::ProblemKind;
use nirom::reduction::{pod_fit, GalerkinRom, PodCriterion, PodOptions, SnapshotMatrix};
use nirom::regressors::{cross_validate, RegressorSpec, SvrKernel};
use nirom::sampling::{build_training_set, joint_box, lhs_maximin, state_box, LhsConfig, TargetMode};
use nirom::system::TimeGrid;

fn main() -> nirom::Result<()> {
    let kind = ProblemKind::Burgers;
    let system = kind.build();
    let grid = TimeGrid::new(kind.final_time(), 400)?;
    let be = Integrator::backward_euler(InnerSolver::Newton);
    let mut runs = Vec::new();
    for mu in system.domain().corners() {
        let x0 = system.initial_state(&mu)?;
        runs.push((mu.clone(), solve(system.as_ref(), &be, &x0, &grid, &mu, Recording::All)?));
    }
    let refs: Vec<_> = runs.iter().map(|(mu, t)| (mu.clone(), t)).collect();
    let snapshots = SnapshotMatrix::from_runs(&refs)?;
    let options = PodOptions {
        criterion: PodCriterion::Modes(6),
        ..PodOptions::default()
    };
    let (basis, _) = pod_fit(&snapshots, &options)?;
    let rom = GalerkinRom::new(system.as_ref(), &basis)?;

    let (lo, hi) = state_box(&basis.project_columns(&snapshots.data), 0.1)?;
    let (lower, upper) = joint_box(&lo, &hi, kind.final_time(), system.domain());
    let design = |count, seed| lhs_maximin(&LhsConfig::new(count, lower.clone(), upper.clone(), seed));
    let train = build_training_set(&rom, &design(400, 0)?.points, TargetMode::Velocity, None)?;
    let valid = build_training_set(&rom, &design(200, 1)?.points, TargetMode::Velocity, None)?;

    let mut specs = vec![
        RegressorSpec::sindy(2, 0.0),
        RegressorSpec::sindy(2, 1e-3),
        RegressorSpec::svr(SvrKernel::Poly2, 1e-4, 0.0),
    ];
    specs.extend([0.01, 0.1, 1.0].map(|g| RegressorSpec::vkoga(g, 200)));
    specs.extend([1, 3, 6, 10].map(RegressorSpec::knn));
    specs.extend([5, 15, 40].map(|t| RegressorSpec::forest(t, 0)));
    specs.extend([10, 40, 100].map(RegressorSpec::boosting));

    let report = cross_validate(&specs, &train, &valid)?;
    println!("{:<28} {:>11} {:>11} {:>9}", "model", "train err", "valid err", "fit");
    for (i, e) in report.entries.iter().enumerate() {
        let fmt = |v: Option<f64>| v.map_or("failed".to_string(), |v| format!("{v:.3e}"));
        let mark = if report.chosen == Some(i) { "  <- best" } else { "" };
        println!(
            "{:<28} {:>11} {:>11} {:>9.2?}{mark}",
            e.spec.label(),
            fmt(e.train_error),
            fmt(e.valid_error),
            e.fit_time
        );
    }
    Ok(())
}
