//! Full-order solves of both benchmark problems at their test parameters.
//!
//! ```text
//! cargo run --release --example fom_profiles
//! ```

use nirom::integration::{solve, InnerSolver, Integrator, Recording};
use nirom::problems::ProblemKind;
use nirom::system::TimeGrid;

fn main() -> nirom::Result<()> {
    let be = Integrator::backward_euler(InnerSolver::Newton);
    for kind in [ProblemKind::Burgers, ProblemKind::Convdiff] {
        let system = kind.build();
        let mu = kind.test_parameter();
        let x0 = system.initial_state(&mu)?;
        let grid = TimeGrid::new(kind.final_time(), 800)?;
        let traj = solve(system.as_ref(), &be, &x0, &grid, &mu, Recording::All)?;
        let last = traj.final_state();
        println!(
            "{:<9} N={:<5} mu={:?}  T={}  time loop {:.2?}  newton iterations {}",
            kind.as_str(),
            system.dim(),
            mu,
            kind.final_time(),
            traj.wall_time,
            traj.inner_iterations
        );
        println!(
            "          final state: min {:.4}  max {:.4}  mean {:.4}",
            last.min(),
            last.max(),
            last.mean()
        );
        for frac in [0.25, 0.5, 0.75, 1.0] {
            let j = (frac * grid.steps() as f64) as usize;
            println!("          t={:>6.3}  |x|={:.4}", grid.time(j), traj.state(j).norm());
        }
    }
    Ok(())
}
