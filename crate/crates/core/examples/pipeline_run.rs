//! A reduced-size end-to-end pipeline on Burgers' equation, stage by stage.
//!
//! ```text
//! cargo run --release --example pipeline_run -- /tmp/nirom-demo
//! ```

use std::path::PathBuf;

use nirom::integration::{InnerSolver, Integrator};
use nirom::pipeline::{ExperimentConfig, IntegratorConfig, ModelConfig, Pipeline, Stage};
use nirom::problems::ProblemKind;
use nirom::regressors::RegressorSpec;

fn main() -> nirom::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("nirom-demo"));
    let mut config = ExperimentConfig::for_problem(ProblemKind::Burgers);
    config.output = Some(out.clone());
    config.snapshots.nt = 400;
    config.sampling.training = 300;
    config.sampling.validation = 150;
    config.models = vec![
        ModelConfig::selected("sindy", vec![RegressorSpec::sindy(2, 0.0), RegressorSpec::sindy(2, 1e-3)]),
        ModelConfig::fixed("knn", RegressorSpec::knn(6), Vec::new()),
    ];
    config.integrators = vec![
        IntegratorConfig::new(Integrator::backward_euler(InnerSolver::Newton), 400),
        IntegratorConfig::new(Integrator::backward_euler(InnerSolver::FixedPoint), 400),
        IntegratorConfig::new(Integrator::Rk4, 400),
    ];

    let pipeline = Pipeline::new(config)?;
    for stage in [Stage::FomSolve, Stage::Pod, Stage::Sample, Stage::Train, Stage::RomSolve] {
        pipeline.run(stage)?;
    }
    let report = pipeline.report()?;
    let manifest = pipeline.manifest()?;
    println!("artifacts in {} (n = {:?})", out.display(), manifest.modes);
    for (stage, secs) in &manifest.stage_seconds {
        println!("  {stage:<10} {secs:>7.2} s");
    }
    println!("\n{:<9} {:<22} {:>10} {:>11} {:>11}", "method", "integrator", "seconds", "e_FOM", "e_ROM");
    for r in &report.rows {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.3e}"));
        match &r.failure {
            Some(why) => println!("{:<9} {:<22} failed: {why}", r.method, r.integrator),
            None => println!(
                "{:<9} {:<22} {:>10.4} {:>11} {:>11}",
                r.method,
                r.integrator,
                r.online_seconds,
                fmt(r.e_fom),
                fmt(r.e_rom)
            ),
        }
    }
    Ok(())
}
