use std::path::Path;

use nirom::integration::{InnerSolver, Integrator};
use nirom::pipeline::{ExperimentConfig, IntegratorConfig, ModelConfig, Pipeline, Stage};
use nirom::problems::ProblemKind;
use nirom::reduction::PodCriterion;
use nirom::regressors::RegressorSpec;
use nirom::Error;

fn small_config(out: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::for_problem(ProblemKind::Burgers);
    c.output = Some(out.to_path_buf());
    c.seed = 3;
    c.snapshots.nt = 200;
    c.pod.criterion = PodCriterion::Modes(4);
    c.sampling.training = 80;
    c.sampling.validation = 40;
    c.sampling.candidate_rounds = 4;
    c.models = vec![
        ModelConfig::selected("sindy", vec![RegressorSpec::sindy(2, 0.0), RegressorSpec::sindy(2, 1e-3)]),
        ModelConfig::fixed("knn", RegressorSpec::knn(3), vec![RegressorSpec::knn(1), RegressorSpec::knn(3)]),
    ];
    c.integrators = vec![
        IntegratorConfig::new(Integrator::backward_euler(InnerSolver::Newton), 200),
        IntegratorConfig::new(Integrator::Rk4, 400),
    ];
    c.analysis.lipschitz_pairs = 50;
    c.analysis.timing_repeats = 1;
    c
}

fn run_offline(p: &Pipeline) {
    for s in [Stage::FomSolve, Stage::Pod, Stage::Sample, Stage::Train] {
        p.run(s).unwrap();
    }
}

#[test]
fn missing_upstream_artifacts_name_the_prior_stage() {
    let dir = tempfile::tempdir().unwrap();
    let p = Pipeline::new(small_config(dir.path())).unwrap();
    let expect = |stage: Stage, needed: &str| match p.run(stage) {
        Err(Error::Stage { stage: s, source }) => {
            assert_eq!(s, stage.name());
            match *source {
                Error::MissingArtifact { stage: prior, .. } => assert_eq!(prior, needed),
                other => panic!("{stage}: expected missing artifact, got {other}"),
            }
        }
        other => panic!("{stage}: expected a stage error, got {other:?}"),
    };
    expect(Stage::Pod, "fom-solve");
    expect(Stage::Sample, "pod");
    expect(Stage::Train, "sample");
    expect(Stage::Report, "pod");
}

#[test]
fn full_run_records_failures_and_reports_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let p = Pipeline::new(small_config(dir.path())).unwrap();
    run_offline(&p);
    let runs = p.rom_solve().unwrap();
    assert_eq!(runs.len(), 4);
    let knn_be = runs
        .iter()
        .find(|r| r.method == "knn" && r.integrator == "be_newton_nt200")
        .unwrap();
    let failure = knn_be.failure.as_deref().unwrap();
    assert!(failure.contains("not differentiable") && failure.contains("fixed_point"), "{failure}");
    assert!(knn_be.online_seconds.is_none());

    let report = p.report().unwrap();
    let sindy = report.row("sindy", "be_newton_nt200").unwrap();
    let galerkin = report.row("galerkin", "be_newton_nt200").unwrap();
    assert_eq!(galerkin.e_rom, Some(0.0));
    assert!(sindy.e_rom.unwrap() < 1e-2);
    assert_eq!(report.row("knn", "be_newton_nt200").unwrap().failure.as_deref(), Some(failure));
    assert!(report.series("knn", "rk4_nt400").is_some());
    assert_eq!(report.bounds.len(), 3);

    let reports = dir.path().join("reports");
    for f in [
        "summary.csv",
        "bound.csv",
        "pareto_fom_be_newton_nt200.csv",
        "pareto_rom_rk4_nt400.csv",
        "errors_sindy_rk4_nt400.csv",
        "validation_knn.csv",
        "validation_sindy.csv",
        "profile_fom_rk4_nt400.csv",
    ] {
        assert!(reports.join(f).exists(), "{f} missing");
    }
    let summary = std::fs::read_to_string(reports.join("summary.csv")).unwrap();
    assert!(summary.starts_with("method,integrator,online_seconds,err_wrt_fom,err_wrt_galerkin,tau_fom,tau_rom,failure"));
    // The report is a function of the tree alone.
    let again = p.report().unwrap();
    // Failed runs carry NaN timings, so compare the rendered rows.
    assert_eq!(format!("{:?}", again.rows), format!("{:?}", report.rows));
    assert_eq!(std::fs::read_to_string(reports.join("summary.csv")).unwrap(), summary);

    let manifest = p.manifest().unwrap();
    assert_eq!(manifest.modes, Some(4));
    assert_eq!((manifest.training_seed, manifest.validation_seed), (3, 4));
    assert_eq!(manifest.chosen["knn"], "knn_k3");
    for s in ["fom-solve", "pod", "sample", "train"] {
        assert!(manifest.stage_seconds.contains_key(s), "{s}");
    }
}

#[test]
fn reruns_are_bit_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        run_offline(&Pipeline::new(small_config(d.path())).unwrap());
    }
    for f in [
        "training/train.csv",
        "training/valid.csv",
        "basis/basis.txt",
        "models/sindy.model",
        "models/knn.model",
    ] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert!(x == y, "{f} differs between runs");
    }
    let mut other = small_config(b.path());
    other.seed = 4;
    Pipeline::new(other).unwrap().run(Stage::Sample).unwrap();
    let x = std::fs::read(a.path().join("training/train.csv")).unwrap();
    let y = std::fs::read(b.path().join("training/train.csv")).unwrap();
    assert!(x != y);
}

#[test]
fn written_config_reloads() {
    let dir = tempfile::tempdir().unwrap();
    let c = small_config(dir.path());
    let p = Pipeline::new(c.clone()).unwrap();
    p.run(Stage::FomSolve).unwrap();
    let back = ExperimentConfig::load(&dir.path().join("config.toml")).unwrap();
    assert_eq!(back, c);
    assert!("nonsense".parse::<Stage>().is_err());
    assert_eq!("rom-solve".parse::<Stage>().unwrap(), Stage::RomSolve);
}
