//! Online solves with learned reduced velocities on Burgers' equation,
//! compared with the Galerkin ROM they replace.
//!
//! ```text
//! cargo run --release --example surrogate_rom
//! ```

use nirom::analysis::error_series;
use nirom::integration::{solve, InnerSolver, Integrator, Recording};
use nirom::problems::ProblemKind;
use nirom::reduction::{pod_fit, GalerkinRom, PodCriterion, PodOptions, SnapshotMatrix};
use nirom::regressors::{fit, RegressorSpec, Surrogate};
use nirom::sampling::{build_training_set, joint_box, lhs_maximin, state_box, LhsConfig, TargetMode};
use nirom::system::TimeGrid;

fn main() -> nirom::Result<()> {
    let kind = ProblemKind::Burgers;
    let system = kind.build();
    let grid = TimeGrid::new(kind.final_time(), 800)?;
    let newton = Integrator::backward_euler(InnerSolver::Newton);
    let fixed_point = Integrator::backward_euler(InnerSolver::FixedPoint);
    let mut runs = Vec::new();
    for mu in system.domain().corners() {
        let x0 = system.initial_state(&mu)?;
        runs.push((mu.clone(), solve(system.as_ref(), &newton, &x0, &grid, &mu, Recording::All)?));
    }
    let refs: Vec<_> = runs.iter().map(|(mu, t)| (mu.clone(), t)).collect();
    let snapshots = SnapshotMatrix::from_runs(&refs)?;
    let options = PodOptions {
        criterion: PodCriterion::Modes(8),
        ..PodOptions::default()
    };
    let (basis, _) = pod_fit(&snapshots, &options)?;
    let rom = GalerkinRom::new(system.as_ref(), &basis)?;

    let (lo, hi) = state_box(&basis.project_columns(&snapshots.data), 0.1)?;
    let (lower, upper) = joint_box(&lo, &hi, kind.final_time(), system.domain());
    let points = lhs_maximin(&LhsConfig::new(1000, lower, upper, 0))?.points;
    let train = build_training_set(&rom, &points, TargetMode::Velocity, None)?;

    let mu = kind.test_parameter();
    let fom = solve(system.as_ref(), &newton, &system.initial_state(&mu)?, &grid, &mu, Recording::All)?;
    let x0 = rom.initial_state(&mu)?;
    let galerkin = solve(&rom, &newton, &x0, &grid, &mu, Recording::All)?;
    let gal_fom = error_series(&galerkin, &fom, &galerkin, &basis)?.mean_fom.unwrap_or(f64::NAN);
    println!("galerkin: loop {:.2?}  e_FOM {gal_fom:.4e}", galerkin.wall_time);

    for spec in [RegressorSpec::sindy(2, 0.0), RegressorSpec::vkoga(0.1, 500), RegressorSpec::knn(6)] {
        let model = fit(&spec, &train)?;
        let integrator = if model.differentiable() { newton } else { fixed_point };
        let surrogate = Surrogate::new(&model);
        match solve(&surrogate, &integrator, &x0, &grid, &mu, Recording::All) {
            Ok(traj) => {
                let s = error_series(&traj, &fom, &galerkin, &basis)?;
                println!(
                    "{:<24} {:<15} loop {:>9.2?}  e_FOM {:.4e}  e_ROM {:.4e}  outside box {}",
                    spec.label(),
                    integrator.label(),
                    traj.wall_time,
                    s.mean_fom.unwrap_or(f64::NAN),
                    s.mean_rom.unwrap_or(f64::NAN),
                    surrogate.extrapolations()
                );
            }
            Err(e) => println!("{:<24} {:<15} failed: {e}", spec.label(), integrator.label()),
        }
    }
    Ok(())
}
