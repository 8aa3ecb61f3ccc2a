use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CsrMatrix;
use nirom::integration::{be_solve, solve, InnerSolver, Integrator, Recording};
use nirom::linalg::csr_from_dense;
use nirom::problems::ProblemKind;
use nirom::reduction::{pod_fit, GalerkinRom, PodOptions, ReducedBasis, SnapshotMatrix};
use nirom::sampling::{build_training_set, lhs_maximin, LhsConfig, TargetMode};
use nirom::system::{DynamicalSystem, ParameterDomain, TimeGrid};
use proptest::prelude::*;

fn burgers_basis() -> (Box<dyn DynamicalSystem>, ReducedBasis) {
    let sys = ProblemKind::Burgers.build();
    let grid = TimeGrid::new(ProblemKind::Burgers.final_time(), 800).unwrap();
    let be = Integrator::backward_euler(InnerSolver::Newton);
    let runs: Vec<_> = sys
        .domain()
        .corners()
        .into_iter()
        .map(|mu| {
            let x0 = sys.initial_state(&mu).unwrap();
            let traj = solve(sys.as_ref(), &be, &x0, &grid, &mu, Recording::All).unwrap();
            (mu, traj)
        })
        .collect();
    let refs: Vec<_> = runs.iter().map(|(mu, t)| (mu.clone(), t)).collect();
    let snaps = SnapshotMatrix::from_runs(&refs).unwrap();
    let (basis, report) = pod_fit(&snaps, &PodOptions::default()).unwrap();
    assert!(report.modes <= 20);
    (sys, basis)
}

#[test]
fn burgers_pod_basis_is_orthonormal_and_galerkin_inner_solvers_agree() {
    let (sys, basis) = burgers_basis();
    assert!(basis.orthonormality_error() <= 1e-10);
    let rom = GalerkinRom::new(sys.as_ref(), &basis).unwrap();
    let mu = ProblemKind::Burgers.test_parameter();
    let x0 = rom.initial_state(&mu).unwrap();
    let grid = TimeGrid::new(10.0 * 25.0 / 800.0, 10).unwrap();
    let run = |inner| be_solve(&rom, &x0, &grid, &mu, inner, 1e-12, 200, Recording::All).unwrap();
    let newton = run(InnerSolver::Newton);
    let fixed = run(InnerSolver::FixedPoint);
    for j in 0..=10 {
        let diff = (newton.state(j) - fixed.state(j)).norm();
        assert!(diff <= 1e-9 * (1.0 + newton.state(j).norm()), "step {j}: {diff:e}");
    }
}

/// `dx/dt = -x` in three dimensions with a one-dimensional parameter.
struct Decay {
    domain: ParameterDomain,
}

impl DynamicalSystem for Decay {
    fn name(&self) -> &str {
        "decay"
    }
    fn dim(&self) -> usize {
        3
    }
    fn domain(&self) -> &ParameterDomain {
        &self.domain
    }
    fn velocity(&self, x: &DVector<f64>, _t: f64, _mu: &[f64]) -> nirom::Result<DVector<f64>> {
        Ok(-x)
    }
    fn jacobian(&self, _x: &DVector<f64>, _t: f64, _mu: &[f64]) -> nirom::Result<CsrMatrix<f64>> {
        Ok(csr_from_dense(&(-DMatrix::identity(3, 3))))
    }
    fn initial_state(&self, _mu: &[f64]) -> nirom::Result<DVector<f64>> {
        Ok(DVector::from_element(3, 1.0))
    }
}

#[test]
fn identity_basis_training_targets_are_the_velocity() {
    let sys = Decay {
        domain: ParameterDomain::new(vec![0.0], vec![1.0]).unwrap(),
    };
    let basis = ReducedBasis::from_columns(DMatrix::identity(3, 3));
    let rom = GalerkinRom::new(&sys, &basis).unwrap();
    let cfg = LhsConfig::new(40, vec![-1.0, -2.0, 0.5, 0.0, 0.0], vec![1.0, 2.0, 1.5, 3.0, 1.0], 5);
    let design = lhs_maximin(&cfg).unwrap();
    let set = build_training_set(&rom, &design.points, TargetMode::Velocity, None).unwrap();
    assert_eq!((set.n_state, set.n_param), (3, 1));
    for i in 0..40 {
        for c in 0..3 {
            assert_eq!(set.targets[(i, c)], -design.points[(i, c)]);
        }
    }
    let dt = 0.25;
    let flow = build_training_set(&rom, &design.points, TargetMode::FlowMap, Some(dt)).unwrap();
    for i in 0..40 {
        for c in 0..3 {
            let exact = design.points[(i, c)] / (1.0 + dt);
            assert!((flow.targets[(i, c)] - exact).abs() <= 1e-12);
        }
    }
    assert!(build_training_set(&rom, &design.points, TargetMode::FlowMap, None).is_err());
    let again = build_training_set(&rom, &lhs_maximin(&cfg).unwrap().points, TargetMode::Velocity, None).unwrap();
    assert_eq!(again, set);
}

fn stratum_counts(points: &DMatrix<f64>, lower: &[f64], upper: &[f64]) -> Vec<Vec<usize>> {
    let n = points.nrows();
    (0..points.ncols())
        .map(|k| {
            let mut counts = vec![0; n];
            for i in 0..n {
                let u = (points[(i, k)] - lower[k]) / (upper[k] - lower[k]);
                counts[((u * n as f64).floor() as usize).min(n - 1)] += 1;
            }
            counts
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn every_design_is_latin(count in 1usize..120, dim in 1usize..6, seed in 0u64..1000, rounds in 1usize..8) {
        let lower: Vec<f64> = (0..dim).map(|k| -(k as f64)).collect();
        let upper: Vec<f64> = (0..dim).map(|k| 1.0 + 2.0 * k as f64).collect();
        let mut cfg = LhsConfig::new(count, lower.clone(), upper.clone(), seed);
        cfg.candidate_rounds = rounds;
        let design = lhs_maximin(&cfg).unwrap();
        prop_assert_eq!(design.points.nrows(), count);
        for counts in stratum_counts(&design.points, &lower, &upper) {
            prop_assert!(counts.iter().all(|&c| c == 1));
        }
        prop_assert!(design.candidate_scores.iter().all(|&s| s <= design.score));
        let again = lhs_maximin(&cfg).unwrap();
        prop_assert_eq!(again.points, design.points);
    }
}
