//! Config-driven experiment pipeline over an artifact tree.
//!
//! ```text
//! <out>/config.toml            experiment configuration as run
//! <out>/manifest.toml          seeds, chosen n, per-stage wall times
//! <out>/snapshots/run_<k>.txt  full-order corner runs
//! <out>/basis/                 POD basis (+ sidecar) and reduced snapshots
//! <out>/training/              train.csv, valid.csv, design.toml
//! <out>/models/<name>.model    chosen regressor per model entry
//! <out>/trajectories/          FOM, Galerkin and surrogate trajectories, runs.toml
//! <out>/reports/               CSV tables
//! ```
//!
//! Every stage reads only the tree, so stages can be rerun one at a time.

pub mod config;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{
    AnalysisConfig, ExperimentConfig, IntegratorConfig, ModelConfig, SamplingConfig, SnapshotConfig, StudyConfig,
};

use crate::analysis::{
    error_series, estimate_lipschitz, evaluate_bound, regression_sup_error, write_pareto_csv, write_summary_csv,
    BoundReport, ErrorSeries, ParetoPoint, SummaryRow,
};
use crate::error::{Error, Result};
use crate::integration::{solve, verify_timestep, ConvergenceStudy, Integrator, Recording, TrajectoryResult};
use crate::io::{
    read_basis, read_matrix, read_trajectory, write_basis, write_convergence_csv, write_matrix, write_profile_csv,
    write_trajectory, BasisMeta,
};
use crate::reduction::{pod_fit, GalerkinRom, SnapshotMatrix};
use crate::regressors::{
    cross_validate, fit, iterate_flow_map, learning_curve, persist, validation::write_learning_curve, FittedRegressor,
    RegressorSpec, Surrogate, ValidationReport,
};
use crate::sampling::{build_training_set, joint_box, lhs_maximin, state_box, LhsConfig, TargetMode, TrainingSet};
use crate::system::{DynamicalSystem, TimeGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stage {
    FomSolve,
    VerifyDt,
    Pod,
    Sample,
    Train,
    RomSolve,
    Report,
    All,
}

impl Stage {
    /// Stages run by [`Stage::All`], in order.
    pub const SEQUENCE: [Stage; 7] = [
        Stage::FomSolve,
        Stage::VerifyDt,
        Stage::Pod,
        Stage::Sample,
        Stage::Train,
        Stage::RomSolve,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::FomSolve => "fom-solve",
            Stage::VerifyDt => "verify-dt",
            Stage::Pod => "pod",
            Stage::Sample => "sample",
            Stage::Train => "train",
            Stage::RomSolve => "rom-solve",
            Stage::Report => "report",
            Stage::All => "all",
        }
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::SEQUENCE
            .iter()
            .chain(&[Stage::All])
            .find(|st| st.name() == s)
            .copied()
            .ok_or_else(|| Error::arg(format!("unknown stage `{s}`")))
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Bookkeeping shared by all stages.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub problem: String,
    pub seed: u64,
    pub training_seed: u64,
    pub validation_seed: u64,
    pub test_mu: Vec<f64>,
    pub modes: Option<usize>,
    /// Wall seconds of the last completed run of each stage.
    pub stage_seconds: BTreeMap<String, f64>,
    /// Chosen candidate label per model entry.
    #[serde(default)]
    pub chosen: BTreeMap<String, String>,
}

/// Outcome of one online surrogate solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: String,
    pub integrator: String,
    /// Label of the FOM and Galerkin references this run is compared to.
    pub reference: String,
    pub online_seconds: Option<f64>,
    pub extrapolations: usize,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct RunLog {
    runs: Vec<RunRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DesignMeta {
    lower: Vec<f64>,
    upper: Vec<f64>,
    training_seed: u64,
    validation_seed: u64,
    training_score: f64,
    validation_score: f64,
    mode: TargetMode,
    flow_dt: Option<f64>,
}

/// Training outcome of one model entry.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub name: String,
    /// Spec of the stored online model; `None` when no sweep candidate
    /// was admissible.
    pub online: Option<RegressorSpec>,
    /// Sweep results, when the entry has a sweep.
    pub report: Option<ValidationReport>,
}

/// One bound evaluation in the report.
#[derive(Debug, Clone)]
pub struct BoundRow {
    pub method: String,
    pub integrator: String,
    pub report: BoundReport,
}

/// Everything `report` derives from the persisted trajectories.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub rows: Vec<SummaryRow>,
    /// `(method, integrator label, series)` of every successful run.
    pub series: Vec<(String, String, ErrorSeries)>,
    pub bounds: Vec<BoundRow>,
}

impl Report {
    pub fn row(&self, method: &str, integrator: &str) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.method == method && r.integrator == integrator)
    }

    pub fn series(&self, method: &str, integrator: &str) -> Option<&ErrorSeries> {
        self.series
            .iter()
            .find(|(m, i, _)| m == method && i == integrator)
            .map(|(_, _, s)| s)
    }
}

pub struct Pipeline {
    config: ExperimentConfig,
    root: PathBuf,
    system: Box<dyn DynamicalSystem>,
}

fn need(path: PathBuf, stage: &'static str) -> Result<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::MissingArtifact { path, stage })
    }
}

fn tagged<T>(stage: Stage, result: Result<T>) -> Result<T> {
    result.map_err(|e| match e {
        Error::Stage { .. } => e,
        other => Error::Stage {
            stage: stage.name(),
            source: Box::new(other),
        },
    })
}

/// Solves `repeats` times and keeps the fastest wall time.
fn timed<F>(repeats: usize, mut run: F) -> Result<TrajectoryResult>
where
    F: FnMut() -> Result<TrajectoryResult>,
{
    let mut best = run()?;
    for _ in 1..repeats {
        let again = run()?;
        best.wall_time = best.wall_time.min(again.wall_time);
    }
    Ok(best)
}

/// Failures that belong in the results table and not in an abort.
fn recordable(e: &Error) -> bool {
    matches!(
        e,
        Error::Capability { .. } | Error::NonConvergence { .. } | Error::Divergence { .. } | Error::Evaluation { .. }
    )
}

impl Pipeline {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let root = config.output_dir();
        let system = config.problem.build();
        Ok(Self { config, root, system })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn dir(&self, name: &str) -> Result<PathBuf> {
        let d = self.root.join(name);
        std::fs::create_dir_all(&d)?;
        Ok(d)
    }

    fn mu(&self) -> Vec<f64> {
        self.config.test_parameter()
    }

    fn grid(&self, nt: usize) -> Result<TimeGrid> {
        TimeGrid::new(self.config.problem.final_time(), nt)
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.root.join("manifest.toml")
    }

    pub fn manifest(&self) -> Result<Manifest> {
        let path = self.manifest_path();
        if path.exists() {
            Ok(toml::from_str(&std::fs::read_to_string(&path)?)?)
        } else {
            Ok(Manifest {
                problem: self.config.problem.as_str().to_string(),
                seed: self.config.seed,
                training_seed: self.config.seed,
                validation_seed: self.config.seed + 1,
                test_mu: self.mu(),
                ..Manifest::default()
            })
        }
    }

    fn update_manifest(&self, edit: impl FnOnce(&mut Manifest)) -> Result<()> {
        let mut m = self.manifest()?;
        m.problem = self.config.problem.as_str().to_string();
        m.seed = self.config.seed;
        m.training_seed = self.config.seed;
        m.validation_seed = self.config.seed + 1;
        m.test_mu = self.mu();
        edit(&mut m);
        let text = toml::to_string(&m).map_err(|e| Error::format(self.manifest_path(), e.to_string()))?;
        std::fs::write(self.manifest_path(), text)?;
        Ok(())
    }

    /// Runs one stage (or all of them) and records its wall time. Errors
    /// carry the stage name; artifacts of earlier stages stay on disk.
    pub fn run(&self, stage: Stage) -> Result<()> {
        if stage == Stage::All {
            for s in Stage::SEQUENCE {
                self.run(s)?;
            }
            return Ok(());
        }
        tagged(stage, std::fs::create_dir_all(&self.root).map_err(Error::from))?;
        tagged(stage, std::fs::write(self.root.join("config.toml"), self.config.to_toml()?).map_err(Error::from))?;
        let start = Instant::now();
        let outcome = match stage {
            Stage::FomSolve => self.fom_solve(),
            Stage::VerifyDt => self.verify_dt(None).map(drop),
            Stage::Pod => self.pod().map(drop),
            Stage::Sample => self.sample().map(drop),
            Stage::Train => self.train().map(drop),
            Stage::RomSolve => self.rom_solve().map(drop),
            Stage::Report => self.report().map(drop),
            Stage::All => unreachable!(),
        };
        tagged(stage, outcome)?;
        let secs = start.elapsed().as_secs_f64();
        log::info!("{stage} finished in {secs:.2} s");
        tagged(
            stage,
            self.update_manifest(|m| {
                m.stage_seconds.insert(stage.name().to_string(), secs);
            }),
        )
    }

    /// Distinct reference configurations, in first-use order.
    fn references(&self) -> Vec<IntegratorConfig> {
        let mut out: Vec<IntegratorConfig> = Vec::new();
        for ic in &self.config.integrators {
            let r = ic.reference();
            if !out.contains(&r) {
                out.push(r);
            }
        }
        out
    }

    fn snapshot_path(&self, k: usize) -> PathBuf {
        self.root.join("snapshots").join(format!("run_{k}.txt"))
    }

    fn trajectory_path(&self, method: &str, label: &str) -> PathBuf {
        self.root.join("trajectories").join(format!("{method}_{label}.txt"))
    }

    /// Corner snapshot runs and full-order reference trajectories at the
    /// test parameter.
    pub fn fom_solve(&self) -> Result<()> {
        self.dir("snapshots")?;
        self.dir("trajectories")?;
        let reports = self.dir("reports")?;
        let snap = &self.config.snapshots;
        let grid = self.grid(snap.nt)?;
        let sys = self.system.as_ref();
        let corners = sys.domain().corners();
        corners
            .par_iter()
            .enumerate()
            .map(|(k, mu)| {
                let x0 = sys.initial_state(mu)?;
                let traj = solve(sys, &snap.integrator, &x0, &grid, mu, Recording::All)?;
                write_trajectory(&self.snapshot_path(k), &traj, &format!("fom corner {k}"), mu)
            })
            .collect::<Result<Vec<()>>>()?;
        let mu = self.mu();
        let x0 = sys.initial_state(&mu)?;
        for r in self.references() {
            let traj = solve(sys, &r.integrator, &x0, &self.grid(r.nt)?, &mu, Recording::All)?;
            write_trajectory(&self.trajectory_path("fom", &r.label()), &traj, "fom", &mu)?;
            write_profile_csv(
                self.config.problem,
                &traj.final_state(),
                &reports.join(format!("profile_fom_{}.csv", r.label())),
            )?;
        }
        Ok(())
    }

    /// Self-convergence studies of the full-order model at the test
    /// parameter, for `scheme` or for every configured scheme.
    pub fn verify_dt(&self, scheme: Option<Integrator>) -> Result<Vec<ConvergenceStudy>> {
        let reports = self.dir("reports")?;
        let schemes = scheme.map_or_else(|| self.config.study.schemes.clone(), |s| vec![s]);
        let mu = self.mu();
        let sys = self.system.as_ref();
        let x0 = sys.initial_state(&mu)?;
        let mut out = Vec::new();
        for s in schemes {
            let study = verify_timestep(sys, &s, &x0, self.config.problem.final_time(), &mu, &self.config.study.counts)?;
            write_convergence_csv(&study, &reports.join(format!("convergence_{}.csv", s.label())))?;
            log::info!("verify-dt {}: selected {:?}", s.label(), study.selected);
            out.push(study);
        }
        Ok(out)
    }

    /// POD of all corner snapshots.
    pub fn pod(&self) -> Result<BasisMeta> {
        let corners = self.system.domain().corners();
        let mut runs = Vec::with_capacity(corners.len());
        for k in 0..corners.len() {
            let (traj, meta) = read_trajectory(&need(self.snapshot_path(k), "fom-solve")?)?;
            runs.push((meta.mu, traj));
        }
        let refs: Vec<(Vec<f64>, &TrajectoryResult)> = runs.iter().map(|(mu, t)| (mu.clone(), t)).collect();
        let snapshots = SnapshotMatrix::from_runs(&refs)?;
        let (basis, report) = pod_fit(&snapshots, &self.config.pod)?;
        let dir = self.dir("basis")?;
        let mus: Vec<Vec<f64>> = runs.iter().map(|(mu, _)| mu.clone()).collect();
        write_basis(&dir.join("basis.txt"), &basis, &report, &mus)?;
        write_matrix(&dir.join("reduced_snapshots.txt"), &basis.project_columns(&snapshots.data))?;
        self.update_manifest(|m| m.modes = Some(report.modes))?;
        let (_, meta) = read_basis(&dir.join("basis.txt"))?;
        Ok(meta)
    }

    fn load_basis(&self) -> Result<crate::reduction::ReducedBasis> {
        Ok(read_basis(&need(self.root.join("basis/basis.txt"), "pod")?)?.0)
    }

    /// LHS maximin designs over the inflated state box and the Galerkin
    /// targets at their points.
    pub fn sample(&self) -> Result<(TrainingSet, TrainingSet)> {
        let basis = self.load_basis()?;
        let reduced = read_matrix(&need(self.root.join("basis/reduced_snapshots.txt"), "pod")?)?;
        let s = &self.config.sampling;
        let (lo, hi) = state_box(&reduced, s.inflate)?;
        let (lower, upper) = joint_box(&lo, &hi, self.config.problem.final_time(), self.system.domain());
        let design = |count: usize, seed: u64| {
            let mut cfg = LhsConfig::new(count, lower.clone(), upper.clone(), seed);
            cfg.candidate_rounds = s.candidate_rounds;
            lhs_maximin(&cfg)
        };
        let (train_seed, valid_seed) = (self.config.seed, self.config.seed + 1);
        let train_design = design(s.training, train_seed)?;
        let valid_design = design(s.validation, valid_seed)?;
        let rom = GalerkinRom::new(self.system.as_ref(), &basis)?;
        let train = build_training_set(&rom, &train_design.points, s.mode, s.flow_dt)?;
        let valid = build_training_set(&rom, &valid_design.points, s.mode, s.flow_dt)?;
        let dir = self.dir("training")?;
        train.write_csv(&dir.join("train.csv"))?;
        valid.write_csv(&dir.join("valid.csv"))?;
        let meta = DesignMeta {
            lower,
            upper,
            training_seed: train_seed,
            validation_seed: valid_seed,
            training_score: train_design.score,
            validation_score: valid_design.score,
            mode: s.mode,
            flow_dt: s.flow_dt,
        };
        let path = dir.join("design.toml");
        std::fs::write(&path, toml::to_string(&meta).map_err(|e| Error::format(&path, e.to_string()))?)?;
        Ok((train, valid))
    }

    fn load_sets(&self) -> Result<(TrainingSet, TrainingSet)> {
        let mode = self.config.sampling.mode;
        let train = TrainingSet::read_csv(&need(self.root.join("training/train.csv"), "sample")?, mode)?;
        let valid = TrainingSet::read_csv(&need(self.root.join("training/valid.csv"), "sample")?, mode)?;
        Ok((train, valid))
    }

    fn model_path(&self, name: &str) -> PathBuf {
        self.root.join("models").join(format!("{name}.model"))
    }

    /// Cross-validates every sweep and stores the online model of every
    /// entry, fitted on the training set. An entry relying on a sweep
    /// without admissible candidates stores no model.
    pub fn train(&self) -> Result<Vec<TrainedModel>> {
        let (train, valid) = self.load_sets()?;
        self.dir("models")?;
        let reports = self.dir("reports")?;
        let mut out = Vec::new();
        let mut chosen = BTreeMap::new();
        for m in &self.config.models {
            let report = if m.sweep.is_empty() {
                None
            } else {
                let r = cross_validate(&m.sweep, &train, &valid)?;
                r.write_csv(&reports.join(format!("validation_{}.csv", m.name)))?;
                Some(r)
            };
            let online = m.spec.as_ref().or_else(|| report.as_ref().and_then(|r| r.chosen_spec()));
            let path = self.model_path(&m.name);
            match online {
                Some(spec) => {
                    persist::save(&fit(spec, &train)?, &path)?;
                    chosen.insert(m.name.clone(), spec.label());
                    if !m.learning_curve.is_empty() {
                        let curve = learning_curve(spec, &train, &m.learning_curve, &valid)?;
                        write_learning_curve(&curve, &reports.join(format!("learning_curve_{}.csv", m.name)))?;
                    }
                }
                None => {
                    log::warn!("model `{}`: no admissible candidate", m.name);
                    if path.exists() {
                        std::fs::remove_file(&path)?;
                    }
                }
            }
            out.push(TrainedModel {
                name: m.name.clone(),
                online: online.cloned(),
                report,
            });
        }
        self.update_manifest(|man| man.chosen = chosen)?;
        Ok(out)
    }

    fn load_models(&self) -> Result<Vec<(String, FittedRegressor)>> {
        let mut out = Vec::new();
        for m in &self.config.models {
            let path = self.model_path(&m.name);
            if path.exists() {
                out.push((m.name.clone(), persist::load(&path)?));
            }
        }
        if out.is_empty() && !self.config.models.is_empty() {
            return Err(Error::MissingArtifact {
                path: self.root.join("models"),
                stage: "train",
            });
        }
        Ok(out)
    }

    /// Galerkin references and every (model, integrator) surrogate solve at
    /// the test parameter. Solver failures are recorded in `runs.toml`.
    pub fn rom_solve(&self) -> Result<Vec<RunRecord>> {
        let basis = self.load_basis()?;
        let models = self.load_models()?;
        self.dir("trajectories")?;
        let rom = GalerkinRom::new(self.system.as_ref(), &basis)?;
        let mu = self.mu();
        let x0 = rom.initial_state(&mu)?;
        let repeats = self.config.analysis.timing_repeats;
        for r in self.references() {
            let grid = self.grid(r.nt)?;
            let traj = timed(repeats, || solve(&rom, &r.integrator, &x0, &grid, &mu, Recording::All))?;
            write_trajectory(&self.trajectory_path("galerkin", &r.label()), &traj, "galerkin", &mu)?;
        }
        let pairs: Vec<(&String, &FittedRegressor, &IntegratorConfig)> = models
            .iter()
            .flat_map(|(name, model)| self.config.integrators.iter().map(move |ic| (name, model, ic)))
            .collect();
        let sampling = &self.config.sampling;
        let records = pairs
            .par_iter()
            .map(|&(name, model, ic)| {
                let grid = self.grid(ic.nt)?;
                let surrogate = Surrogate::new(model);
                let outcome = timed(repeats, || match sampling.mode {
                    TargetMode::Velocity => solve(&surrogate, &ic.integrator, &x0, &grid, &mu, Recording::All),
                    TargetMode::FlowMap => {
                        iterate_flow_map(model, &x0, &grid, sampling.flow_dt.unwrap_or(f64::NAN), &mu)
                    }
                });
                let label = ic.label();
                let path = self.trajectory_path(name, &label);
                let mut record = RunRecord {
                    method: name.clone(),
                    integrator: label.clone(),
                    reference: ic.reference().label(),
                    online_seconds: None,
                    extrapolations: surrogate.extrapolations() / repeats,
                    failure: None,
                };
                match outcome {
                    Ok(traj) => {
                        write_trajectory(&path, &traj, name, &mu)?;
                        record.online_seconds = Some(traj.wall_time.as_secs_f64());
                    }
                    Err(e) if recordable(&e) => {
                        log::warn!("{name} with {label}: {e}");
                        if path.exists() {
                            std::fs::remove_file(&path)?;
                        }
                        record.failure = Some(e.to_string());
                    }
                    Err(e) => return Err(e),
                }
                Ok(record)
            })
            .collect::<Result<Vec<RunRecord>>>()?;
        let path = self.root.join("trajectories/runs.toml");
        let log = RunLog { runs: records.clone() };
        std::fs::write(&path, toml::to_string(&log).map_err(|e| Error::format(&path, e.to_string()))?)?;
        Ok(records)
    }

    /// Error series, summary table, Pareto points and bound diagnostics,
    /// computed from persisted artifacts only.
    pub fn report(&self) -> Result<Report> {
        let basis = self.load_basis()?;
        let runs_path = need(self.root.join("trajectories/runs.toml"), "rom-solve")?;
        let log: RunLog = toml::from_str(&std::fs::read_to_string(&runs_path)?)?;
        let reports = self.dir("reports")?;
        let velocity = self.config.sampling.mode == TargetMode::Velocity;
        let valid = if velocity { Some(self.load_sets()?.1) } else { None };
        let mut out = Report::default();
        let mut loaded = BTreeMap::new();
        for r in self.references() {
            let label = r.label();
            let (fom, _) = read_trajectory(&need(self.trajectory_path("fom", &label), "fom-solve")?)?;
            let (gal, _) = read_trajectory(&need(self.trajectory_path("galerkin", &label), "rom-solve")?)?;
            let series = error_series(&gal, &fom, &gal, &basis)?;
            series.write_csv(&reports.join(format!("errors_galerkin_{label}.csv")))?;
            let (fs, gs) = (fom.wall_time.as_secs_f64(), gal.wall_time.as_secs_f64());
            out.rows.push(SummaryRow::new("galerkin", &label, gs, Some(&series), fs, gs));
            out.series.push(("galerkin".into(), label.clone(), series));
            loaded.insert(label, (fom, gal));
        }
        let mu = self.mu();
        for run in &log.runs {
            let (fom, gal) = loaded
                .get(&run.reference)
                .ok_or_else(|| Error::arg(format!("run {} refers to unknown reference {}", run.method, run.reference)))?;
            let (fs, gs) = (fom.wall_time.as_secs_f64(), gal.wall_time.as_secs_f64());
            let Some(online) = run.online_seconds else {
                let mut row = SummaryRow::new(&run.method, &run.integrator, f64::NAN, None, fs, gs);
                row.failure = run.failure.clone();
                out.rows.push(row);
                continue;
            };
            let path = need(self.trajectory_path(&run.method, &run.integrator), "rom-solve")?;
            let (traj, _) = read_trajectory(&path)?;
            let series = error_series(&traj, fom, gal, &basis)?;
            series.write_csv(&reports.join(format!("errors_{}_{}.csv", run.method, run.integrator)))?;
            out.rows.push(SummaryRow::new(&run.method, &run.integrator, online, Some(&series), fs, gs));
            out.series.push((run.method.clone(), run.integrator.clone(), series));
            if let Some(valid) = &valid {
                let model = persist::load(&need(self.model_path(&run.method), "train")?)?;
                let c = regression_sup_error(&model, valid)?;
                let k = self.lipschitz(fom, &traj, &basis, &mu)?;
                out.bounds.push(BoundRow {
                    method: run.method.clone(),
                    integrator: run.integrator.clone(),
                    report: evaluate_bound(fom, &traj, &basis, k, c)?,
                });
            }
        }
        write_summary_csv(&out.rows, &reports.join("summary.csv"))?;
        for r in self.references() {
            let label = r.label();
            let in_group = |row: &SummaryRow| {
                if row.method == "galerkin" {
                    row.integrator == label
                } else {
                    log.runs
                        .iter()
                        .any(|x| x.method == row.method && x.integrator == row.integrator && x.reference == label)
                }
            };
            let members: Vec<&SummaryRow> = out
                .rows
                .iter()
                .filter(|row| in_group(row) && row.online_seconds.is_finite())
                .collect();
            let point = |row: &&SummaryRow, time: f64, err: Option<f64>| {
                err.map(|e| ParetoPoint::new(format!("{}/{}", row.method, row.integrator), time, e))
            };
            let fom_pts: Vec<ParetoPoint> = members.iter().filter_map(|r| point(r, r.tau_fom, r.e_fom)).collect();
            let rom_pts: Vec<ParetoPoint> = members
                .iter()
                .filter(|r| r.method != "galerkin")
                .filter_map(|r| point(r, r.tau_rom, r.e_rom))
                .collect();
            write_pareto_csv(&fom_pts, &reports.join(format!("pareto_fom_{label}.csv")))?;
            write_pareto_csv(&rom_pts, &reports.join(format!("pareto_rom_{label}.csv")))?;
        }
        write_bound_csv(&out.bounds, &reports.join("bound.csv"))?;
        Ok(out)
    }

    /// Sampled Lipschitz constant of the full-order velocity over the FOM
    /// trajectory and the lifted surrogate trajectory.
    fn lipschitz(
        &self,
        fom: &TrajectoryResult,
        surrogate: &TrajectoryResult,
        basis: &crate::reduction::ReducedBasis,
        mu: &[f64],
    ) -> Result<f64> {
        let lifted = basis.lift_columns(&surrogate.states);
        let states = DMatrix::from_fn(fom.states.nrows(), fom.len() + lifted.ncols(), |r, c| {
            if c < fom.len() {
                fom.states[(r, c)]
            } else {
                lifted[(r, c - fom.len())]
            }
        });
        let times: Vec<f64> = fom.times.iter().chain(&surrogate.times).copied().collect();
        estimate_lipschitz(self.system.as_ref(), &states, &times, mu, self.config.analysis.lipschitz_pairs, self.config.seed)
    }
}

fn write_bound_csv(rows: &[BoundRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "method", "integrator", "lipschitz", "regression_error", "eo_inf", "ei0", "t_final", "bound", "measured", "holds",
    ])?;
    for r in rows {
        let b = &r.report;
        w.write_record([
            r.method.clone(),
            r.integrator.clone(),
            format!("{:e}", b.lipschitz),
            format!("{:e}", b.regression_error),
            format!("{:e}", b.eo_inf),
            format!("{:e}", b.ei0),
            format!("{:e}", b.t_final),
            format!("{:e}", b.bound),
            format!("{:e}", b.measured),
            b.holds.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
