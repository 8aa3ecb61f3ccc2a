//! POD basis from the four corner runs of Burgers' equation and the
//! Galerkin ROM at the test parameter, for a few basis sizes.
//!
//! ```text
//! cargo run --release --example pod_galerkin
//! ```

use nirom::analysis::error_series;
use nirom::integration::{solve, InnerSolver, Integrator, Recording};
use nirom::problems::ProblemKind;
use nirom::reduction::{pod_fit, GalerkinRom, PodOptions, SnapshotMatrix};
use nirom::system::TimeGrid;

fn main() -> nirom::Result<()> {
    let kind = ProblemKind::Burgers;
    let system = kind.build();
    let be = Integrator::backward_euler(InnerSolver::Newton);
    let grid = TimeGrid::new(kind.final_time(), 800)?;

    let mut runs = Vec::new();
    for mu in system.domain().corners() {
        let x0 = system.initial_state(&mu)?;
        runs.push((mu.clone(), solve(system.as_ref(), &be, &x0, &grid, &mu, Recording::All)?));
    }
    let refs: Vec<_> = runs.iter().map(|(mu, t)| (mu.clone(), t)).collect();
    let snapshots = SnapshotMatrix::from_runs(&refs)?;
    let (basis, report) = pod_fit(&snapshots, &PodOptions::default())?;
    println!(
        "{} snapshots of dimension {}; energy criterion keeps n = {}",
        snapshots.n_snapshots(),
        snapshots.n_states(),
        report.modes
    );
    let leading: Vec<String> = basis.singular_values.iter().take(8).map(|s| format!("{s:.3e}")).collect();
    println!("leading singular values: {}", leading.join(" "));

    let mu = kind.test_parameter();
    let fom = solve(system.as_ref(), &be, &system.initial_state(&mu)?, &grid, &mu, Recording::All)?;
    println!("\n{:>3} {:>10} {:>12} {:>10}", "n", "energy", "mean e_FOM", "loop");
    for n in [2, 5, 10, basis.n_modes()] {
        let sub = basis.truncate(n);
        let rom = GalerkinRom::new(system.as_ref(), &sub)?;
        let traj = rom.solve(&grid, &mu, &be)?;
        let series = error_series(&traj, &fom, &traj, &sub)?;
        println!(
            "{n:>3} {:>10.6} {:>12.4e} {:>10.2?}",
            basis.energy_fraction(n),
            series.mean_fom.unwrap_or(f64::NAN),
            traj.wall_time
        );
    }
    println!("full-order loop: {:.2?}", fom.wall_time);
    Ok(())
}
