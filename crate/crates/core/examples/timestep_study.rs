//! Self-convergence study of a full-order model under one integrator.
//!
//! ```text
//! cargo run --example timestep_study -- burgers rk4
//! cargo run --example timestep_study -- convdiff be_newton
//! ```

use std::time::Instant;

use nirom::integration::{verify_timestep, InnerSolver, Integrator, STUDY_COUNTS};
use nirom::problems::ProblemKind;

fn main() -> nirom::Result<()> {
    let mut args = std::env::args().skip(1);
    let problem: ProblemKind = args.next().as_deref().unwrap_or("burgers").parse()?;
    let integrator = match args.next().as_deref().unwrap_or("rk4") {
        "rk4" => Integrator::Rk4,
        "be_fixed_point" => Integrator::backward_euler(InnerSolver::FixedPoint),
        _ => Integrator::backward_euler(InnerSolver::Newton),
    };
    let system = problem.build();
    let mu = problem.test_parameter();
    let x0 = system.initial_state(&mu)?;
    let start = Instant::now();
    let study = verify_timestep(
        system.as_ref(),
        &integrator,
        &x0,
        problem.final_time(),
        &mu,
        &STUDY_COUNTS,
    )?;
    println!("{} / {}  ({:.1?})", problem.as_str(), integrator.label(), start.elapsed());
    println!("{:>6} {:>10} {:>12} {:>8}", "Nt", "dt", "error", "order");
    for (i, &nt) in study.counts.iter().enumerate() {
        let fmt = |v: Option<f64>, p: usize| v.map_or("-".to_string(), |v| format!("{v:.p$e}"));
        println!(
            "{nt:>6} {:>10.3e} {:>12} {:>8}",
            study.dt(nt),
            fmt(study.errors[i], 3),
            study.orders[i].map_or("-".into(), |o| format!("{o:.3}")),
        );
    }
    println!("selected Nt = {:?} (reliable: {})", study.selected, study.reliable);
    Ok(())
}
