use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nirom::integration::{InnerSolver, Integrator};
use nirom::pipeline::{ExperimentConfig, Pipeline, Stage};
use nirom::problems::ProblemKind;
use nirom::Error;

/// Non-intrusive reduced-order modelling pipeline.
#[derive(Parser)]
#[command(name = "nirom", version)]
struct Cli {
    /// Experiment configuration (TOML). Defaults for `--problem` otherwise.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Stage to run: fom-solve, verify-dt, pod, sample, train, rom-solve,
    /// report or all.
    #[arg(long, global = true)]
    stage: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Artifact directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Problem used when no configuration file is given.
    #[arg(long, global = true, default_value = "burgers")]
    problem: String,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Corner snapshot runs and full-order reference trajectories.
    FomSolve,
    /// Timestep self-convergence study of the full-order model.
    VerifyDt {
        /// burgers or convdiff.
        problem: Option<String>,
        /// rk4, backward_euler (Newton), be_newton or be_fixed_point.
        scheme: Option<String>,
    },
    /// POD basis from the corner snapshots.
    Pod,
    /// Latin-hypercube training and validation sets.
    Sample,
    /// Hyperparameter sweeps and the online models.
    Train,
    /// Galerkin and surrogate online solves at the test parameter.
    RomSolve,
    /// Error series, summary table, Pareto fronts and error bounds.
    Report,
    /// Every stage in order, including verify-dt.
    All,
}

fn parse_scheme(s: &str) -> nirom::Result<Integrator> {
    match s {
        "rk4" => Ok(Integrator::Rk4),
        "backward_euler" | "be" | "be_newton" => Ok(Integrator::backward_euler(InnerSolver::Newton)),
        "be_fixed_point" => Ok(Integrator::backward_euler(InnerSolver::FixedPoint)),
        other => Err(Error::Argument(format!("unknown scheme `{other}`"))),
    }
}

fn run(cli: Cli) -> nirom::Result<()> {
    let mut problem: ProblemKind = cli.problem.parse()?;
    let mut scheme = None;
    let mut stage = cli.stage.as_deref().map(str::parse).transpose()?;
    if let Some(cmd) = &cli.command {
        let named = match cmd {
            Command::FomSolve => Stage::FomSolve,
            Command::VerifyDt { problem: p, scheme: s } => {
                if let Some(p) = p {
                    problem = p.parse()?;
                }
                scheme = s.as_deref().map(parse_scheme).transpose()?;
                Stage::VerifyDt
            }
            Command::Pod => Stage::Pod,
            Command::Sample => Stage::Sample,
            Command::Train => Stage::Train,
            Command::RomSolve => Stage::RomSolve,
            Command::Report => Stage::Report,
            Command::All => Stage::All,
        };
        if stage.is_some_and(|s| s != named) {
            return Err(Error::Argument("--stage and the subcommand name different stages".into()));
        }
        stage = Some(named);
    }
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::for_problem(problem),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = cli.out {
        config.output = Some(out);
    }
    let pipeline = Pipeline::new(config)?;
    match stage.unwrap_or(Stage::All) {
        Stage::VerifyDt if scheme.is_some() => {
            let studies = pipeline
                .verify_dt(scheme)
                .map_err(|e| Error::Stage { stage: "verify-dt", source: Box::new(e) })?;
            for study in studies {
                for (i, &nt) in study.counts.iter().enumerate() {
                    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4e}"));
                    println!("{nt:>6}  dt={:.4e}  error={}  order={}", study.dt(nt), fmt(study.errors[i]), fmt(study.orders[i]));
                }
                println!("selected Nt = {:?} (reliable: {})", study.selected, study.reliable);
            }
            Ok(())
        }
        s => pipeline.run(s),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
