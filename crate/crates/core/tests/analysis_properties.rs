use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CsrMatrix;
use nirom::analysis::*;
use nirom::integration::{solve, Integrator, Recording, Rhs, TrajectoryResult};
use nirom::linalg::{csr_from_dense, Jacobian};
use nirom::reduction::{pod_fit, GalerkinRom, PodCriterion, PodOptions, ReducedBasis, SnapshotMatrix};
use nirom::system::{DynamicalSystem, ParameterDomain, TimeGrid};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Brute-force O(m^2) dominance check.
fn dominated(p: &ParetoPoint, all: &[ParetoPoint]) -> bool {
    all.iter()
        .any(|q| q.time <= p.time && q.error <= p.error && (q.time < p.time || q.error < p.error))
}

fn point_strategy(max: usize) -> impl Strategy<Value = Vec<ParetoPoint>> {
    // Coarse integer grids force many exact ties.
    prop::collection::vec((0u32..40, 0u32..40, 0u8..26), 1..max).prop_map(|raw| {
        raw.into_iter()
            .map(|(t, e, c)| ParetoPoint::new(((b'a' + c) as char).to_string(), t as f64, e as f64 / 8.0))
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn frontier_matches_brute_force(points in point_strategy(1000)) {
        let frontier = pareto_frontier(&points);
        for f in &frontier {
            prop_assert!(!dominated(f, &points));
        }
        prop_assert!(frontier.windows(2).all(|w| w[0].time < w[1].time && w[0].error > w[1].error));
        for p in &points {
            if !dominated(p, &points) {
                // Exactly one representative of each non-dominated value pair.
                let reps: Vec<&ParetoPoint> =
                    frontier.iter().filter(|f| f.time == p.time && f.error == p.error).collect();
                prop_assert_eq!(reps.len(), 1);
                let first = points
                    .iter()
                    .filter(|q| q.time == p.time && q.error == p.error)
                    .map(|q| q.label.as_str())
                    .min()
                    .unwrap();
                prop_assert_eq!(reps[0].label.as_str(), first);
            }
        }
    }

    #[test]
    fn time_average_is_trapezoid_over_horizon(values in prop::collection::vec(0.0f64..10.0, 2..200), t_final in 0.5f64..50.0) {
        let n = values.len() - 1;
        let times: Vec<f64> = (0..=n).map(|j| t_final * j as f64 / n as f64).collect();
        let series: Vec<Option<f64>> = values.iter().copied().map(Some).collect();
        let h = t_final / n as f64;
        let integral = h * (values.iter().sum::<f64>() - 0.5 * (values[0] + values[n]));
        let mean = time_average(&times, &series).unwrap();
        prop_assert!((mean - integral / t_final).abs() <= 1e-12 * (1.0 + mean.abs()));
    }
}

#[test]
fn single_point_frontier_is_itself() {
    let p = vec![ParetoPoint::new("only", 0.3, 0.7)];
    assert_eq!(pareto_frontier(&p), p);
}

/// `dx/dt = A x` with `x(0) = x0`.
struct Linear {
    a: DMatrix<f64>,
    x0: DVector<f64>,
    domain: ParameterDomain,
}

impl DynamicalSystem for Linear {
    fn name(&self) -> &str {
        "linear"
    }
    fn dim(&self) -> usize {
        self.a.nrows()
    }
    fn domain(&self) -> &ParameterDomain {
        &self.domain
    }
    fn velocity(&self, x: &DVector<f64>, _t: f64, _mu: &[f64]) -> nirom::Result<DVector<f64>> {
        Ok(&self.a * x)
    }
    fn jacobian(&self, _x: &DVector<f64>, _t: f64, _mu: &[f64]) -> nirom::Result<CsrMatrix<f64>> {
        Ok(csr_from_dense(&self.a))
    }
    fn initial_state(&self, _mu: &[f64]) -> nirom::Result<DVector<f64>> {
        Ok(self.x0.clone())
    }
}

fn linear_system(n: usize, seed: u64) -> Linear {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-0.5..0.5));
    let x0 = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    Linear {
        a,
        x0,
        domain: ParameterDomain::new(vec![0.0], vec![1.0]).unwrap(),
    }
}

/// Reduced velocity shifted by a constant vector of norm `C`.
struct Shifted<'a> {
    rom: GalerkinRom<'a>,
    shift: DVector<f64>,
}

impl Rhs for Shifted<'_> {
    fn dim(&self) -> usize {
        self.rom.n_modes()
    }
    fn eval(&self, x: &DVector<f64>, t: f64, mu: &[f64]) -> nirom::Result<DVector<f64>> {
        Ok(self.rom.velocity(x, t, mu)? + &self.shift)
    }
    fn jacobian(&self, x: &DVector<f64>, t: f64, mu: &[f64]) -> nirom::Result<Jacobian> {
        self.rom.jacobian(x, t, mu).map(Jacobian::Dense)
    }
}

fn basis_for(sys: &Linear, grid: &TimeGrid, modes: usize) -> (ReducedBasis, TrajectoryResult) {
    let fom = solve(sys, &Integrator::Rk4, &sys.x0, grid, &[0.5], Recording::All).unwrap();
    let snaps = SnapshotMatrix::from_runs(&[(vec![0.5], &fom)]).unwrap();
    let options = PodOptions {
        criterion: PodCriterion::Modes(modes),
        max_modes: None,
        subtract_mean: false,
    };
    (pod_fit(&snaps, &options).unwrap().0, fom)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn lemma_holds_with_analytic_lipschitz(seed in 0u64..10_000, modes in 1usize..6, shift in 0.0f64..0.2) {
        let sys = linear_system(8, seed);
        // Spectral norm of A is the exact Lipschitz constant of x -> A x.
        let k = sys.a.clone().svd(false, false).singular_values.max();
        let grid = TimeGrid::new(1.0, 400).unwrap();
        let (basis, fom) = basis_for(&sys, &grid, modes);
        let rom = GalerkinRom::new(&sys, &basis).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
        let dir = DVector::from_fn(modes, |_, _| rng.random_range(-1.0..1.0));
        let shift_vec = dir.normalize() * shift;
        let surrogate = Shifted { rom, shift: shift_vec };
        let x0 = basis.project(&sys.x0).unwrap();
        let traj = solve(&surrogate, &Integrator::Rk4, &x0, &grid, &[0.5], Recording::All).unwrap();
        let report = evaluate_bound(&fom, &traj, &basis, k, shift).unwrap();
        prop_assert_eq!(report.ei0, 0.0);
        prop_assert!(report.holds, "measured {} > bound {}", report.measured, report.bound);
    }
}

#[test]
fn exact_galerkin_error_is_bounded_by_projection_error() {
    let sys = linear_system(10, 42);
    let k = sys.a.clone().svd(false, false).singular_values.max();
    let grid = TimeGrid::new(2.0, 800).unwrap();
    let (basis, fom) = basis_for(&sys, &grid, 3);
    let rom = GalerkinRom::new(&sys, &basis).unwrap();
    let x0 = basis.project(&sys.x0).unwrap();
    let gal = solve(&rom, &Integrator::Rk4, &x0, &grid, &[0.5], Recording::All).unwrap();
    let report = evaluate_bound(&fom, &gal, &basis, k, 0.0).unwrap();
    assert!(report.eo_inf > 0.0);
    assert!(report.measured <= (k * 2.0).exp() * report.eo_inf);
    assert_eq!(report.bound, lemma_bound(k, 0.0, report.eo_inf, 0.0, 2.0));
}

#[test]
fn full_basis_leaves_only_the_regression_term() {
    let sys = linear_system(4, 7);
    let grid = TimeGrid::new(1.0, 200).unwrap();
    let basis = ReducedBasis::from_columns(DMatrix::identity(4, 4));
    let fom = solve(&sys, &Integrator::Rk4, &sys.x0, &grid, &[0.5], Recording::All).unwrap();
    let report = evaluate_bound(&fom, &fom, &basis, 1.0, 0.1).unwrap();
    assert!(report.eo_inf < 1e-15);
    assert_eq!(report.measured, 0.0);
    assert!((report.bound - 0.1 * (1f64.exp() - 1.0)).abs() < 1e-12);
}

#[test]
fn identical_trajectories_have_zero_rom_error() {
    let sys = linear_system(6, 3);
    let grid = TimeGrid::new(1.0, 50).unwrap();
    let (basis, fom) = basis_for(&sys, &grid, 2);
    let rom = GalerkinRom::new(&sys, &basis).unwrap();
    let x0 = basis.project(&sys.x0).unwrap();
    let gal = solve(&rom, &Integrator::Rk4, &x0, &grid, &[0.5], Recording::All).unwrap();
    let series = error_series(&gal, &fom, &gal, &basis).unwrap();
    assert!(series.e_rom.iter().all(|e| *e == Some(0.0)));
    assert!(series.e_fom.iter().all(|e| e.is_some_and(|e| e >= 0.0)));
    let coarse = TimeGrid::new(1.0, 25).unwrap();
    let other = solve(&rom, &Integrator::Rk4, &x0, &coarse, &[0.5], Recording::All).unwrap();
    assert!(error_series(&other, &fom, &gal, &basis).is_err());
}

#[test]
fn sampled_lipschitz_never_exceeds_the_spectral_norm() {
    let sys = linear_system(8, 11);
    let k = sys.a.clone().svd(false, false).singular_values.max();
    let grid = TimeGrid::new(1.0, 100).unwrap();
    let fom = solve(&sys, &Integrator::Rk4, &sys.x0, &grid, &[0.5], Recording::All).unwrap();
    let est = estimate_lipschitz(&sys, &fom.states, &fom.times, &[0.5], 500, 0).unwrap();
    assert!(est > 0.0 && est <= k * (1.0 + 1e-12));
}
