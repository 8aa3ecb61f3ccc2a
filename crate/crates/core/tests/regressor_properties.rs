use nalgebra::{DMatrix, DVector};
use nirom::regressors::persist;
use nirom::regressors::sindy::{library_matrix, library_terms, stls, stls_pass};
use nirom::regressors::tree::{Node, Table, Tree, TreeParams};
use nirom::regressors::*;
use nirom::sampling::{TargetMode, TrainingSet};
use nirom::system::fd_jacobian_of;
use nirom::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Smooth synthetic data with 2 state columns, time and one parameter.
fn smooth_set(rows: usize, seed: u64) -> TrainingSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs = DMatrix::<f64>::from_fn(rows, 4, |_, c| match c {
        2 => rng.random_range(0.0..2.0),
        3 => rng.random_range(1.0..3.0),
        _ => rng.random_range(-1.0..1.0),
    });
    let targets = DMatrix::from_fn(rows, 2, |r, o| {
        let z: Vec<f64> = inputs.row(r).iter().copied().collect();
        if o == 0 {
            (z[0] * z[3]).sin() + 0.3 * z[1] * z[2]
        } else {
            (-z[1] * z[1]).exp() - 0.5 * z[0] + 0.1 * z[2]
        }
    });
    TrainingSet::new(inputs, targets, 2, TargetMode::Velocity).unwrap()
}

fn differentiable_specs() -> Vec<RegressorSpec> {
    vec![
        RegressorSpec::sindy(2, 0.0),
        RegressorSpec::sindy(1, 0.05),
        RegressorSpec::vkoga(2.0, 40),
        RegressorSpec::svr(SvrKernel::Poly2, 1e-3, 0.0),
        RegressorSpec::svr(SvrKernel::Poly3, 1e-3, 0.0),
        RegressorSpec::svr(SvrKernel::Rbf, 1e-3, 1.5),
    ]
}

#[test]
fn analytic_jacobians_match_central_differences() {
    let data = smooth_set(120, 7);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for spec in differentiable_specs() {
        let model = fit(&spec, &data).unwrap();
        for _ in 0..20 {
            let z = DVector::from_fn(4, |c, _| match c {
                2 => rng.random_range(0.0..2.0),
                3 => rng.random_range(1.0..3.0),
                _ => rng.random_range(-1.0..1.0),
            });
            let analytic = model.jacobian(z.as_slice()).unwrap();
            // Richardson-extrapolated central differences.
            let coarse = fd_jacobian_of(|y| model.predict(y.as_slice()), &z, Some(2e-4)).unwrap();
            let fine = fd_jacobian_of(|y| model.predict(y.as_slice()), &z, Some(1e-4)).unwrap();
            let fd = (fine * 4.0 - coarse) / 3.0;
            let err = (&analytic - &fd).norm() / fd.norm().max(1.0);
            assert!(err <= 1e-6, "{}: relative Jacobian mismatch {err:e}", spec.label());
        }
    }
}

#[test]
fn non_differentiable_families_refuse_jacobians() {
    let data = smooth_set(30, 1);
    for spec in [RegressorSpec::knn(3), RegressorSpec::forest(3, 0), RegressorSpec::boosting(5)] {
        let model = fit(&spec, &data).unwrap();
        assert!(!model.differentiable());
        match model.jacobian(&[0.0, 0.0, 1.0, 2.0]) {
            Err(Error::Capability { alternative, .. }) => assert_eq!(alternative, "fixed_point"),
            other => panic!("{}: expected capability error, got {other:?}", spec.label()),
        }
    }
}

#[test]
fn knn_with_one_neighbor_memorizes() {
    let data = smooth_set(50, 3);
    let model = fit(&RegressorSpec::knn(1), &data).unwrap();
    let pred = model.predict_rows(&data.inputs).unwrap();
    assert_eq!(pred, data.targets);
}

#[test]
fn knn_with_all_rows_predicts_the_mean() {
    let data = smooth_set(25, 4);
    let model = fit(&RegressorSpec::knn(25), &data).unwrap();
    let mean = data.targets.row_mean();
    for z in [[0.3, -0.2, 1.0, 2.0], [5.0, 5.0, -3.0, 9.0]] {
        let p = model.predict(&z).unwrap();
        assert!((p.transpose() - &mean).amax() < 1e-12);
    }
}

#[test]
fn tree_leaves_hold_training_means() {
    let data = smooth_set(80, 5);
    let inputs: Vec<f64> = data.inputs.transpose().iter().copied().collect();
    let targets: Vec<f64> = data.targets.transpose().iter().copied().collect();
    let table = Table {
        inputs: &inputs,
        dim: 4,
        targets: &targets,
        outputs: 2,
    };
    let params = TreeParams {
        max_depth: Some(3),
        min_leaf: 2,
        max_features: 4,
    };
    let tree = Tree::fit(&table, (0..80).collect(), &params, &mut ChaCha8Rng::seed_from_u64(0));
    for (leaf, node) in tree.nodes.iter().enumerate() {
        let Node::Leaf { value } = node else { continue };
        let members: Vec<usize> = (0..80).filter(|&i| tree.leaf_index(&inputs[i * 4..i * 4 + 4]) == leaf).collect();
        assert!(!members.is_empty());
        for o in 0..2 {
            let mean = members.iter().map(|&i| targets[i * 2 + o]).sum::<f64>() / members.len() as f64;
            assert!((value[o] - mean).abs() < 1e-12);
        }
    }
}

#[test]
fn sindy_recovers_linear_decay() {
    let x: Vec<f64> = (0..20).map(|i| -1.0 + 0.1 * i as f64).collect();
    let terms = library_terms(1, 2, true);
    let lib = library_matrix(&terms, &x, 1);
    let y = DMatrix::from_iterator(20, 1, x.iter().map(|v| -2.0 * v));
    for threshold in [0.01, 0.5, 1.9] {
        let theta = stls(&lib, &y, threshold, 0.0).unwrap();
        assert_eq!(theta[(0, 0)], 0.0, "intercept survives at {threshold}");
        assert!((theta[(1, 0)] + 2.0).abs() < 1e-12);
        assert_eq!(theta[(2, 0)], 0.0, "quadratic term survives at {threshold}");
    }
}

#[test]
fn stls_support_is_a_fixed_point() {
    let data = smooth_set(60, 6);
    let terms = library_terms(4, 2, true);
    let inputs: Vec<f64> = data.inputs.transpose().iter().copied().collect();
    let lib = library_matrix(&terms, &inputs, 4);
    for threshold in [0.0, 0.01, 0.1] {
        let theta = stls(&lib, &data.targets, threshold, 0.0).unwrap();
        for o in 0..2 {
            let support: Vec<usize> = (0..terms.len()).filter(|&j| theta[(j, o)] != 0.0).collect();
            let y = data.targets.column(o).into_owned();
            // Independent refit on the support via SVD.
            let sub = lib.select_columns(&support);
            let refit = sub.clone().svd(true, true).solve(&y, 1e-14).unwrap();
            for (k, &j) in support.iter().enumerate() {
                assert!((refit[k] - theta[(j, o)]).abs() < 1e-8 * (1.0 + refit[k].abs()));
                assert!(theta[(j, o)].abs() >= threshold);
            }
            let column = theta.column(o).into_owned();
            let (kept, again) = stls_pass(&lib, &y, &column, &support, threshold, 0.0).unwrap();
            assert_eq!(kept, support);
            assert_eq!(again, column);
        }
    }
}

#[test]
fn vkoga_training_error_never_increases_with_more_centers() {
    let data = smooth_set(100, 8);
    let mut previous = f64::INFINITY;
    for m in [1, 2, 4, 8, 16, 32, 64] {
        let model = fit(&RegressorSpec::vkoga(1.0, m), &data).unwrap();
        let err = relative_error(&model, &data).unwrap();
        assert!(err <= previous * (1.0 + 1e-9), "m={m}: {err} > {previous}");
        previous = err;
    }
}

#[test]
fn persisted_models_predict_identically() {
    let data = smooth_set(60, 9);
    let dir = tempfile::tempdir().unwrap();
    let mut specs = differentiable_specs();
    specs.extend([RegressorSpec::knn(4), RegressorSpec::forest(4, 11), RegressorSpec::boosting(6)]);
    for spec in specs {
        let model = fit(&spec, &data).unwrap();
        let path = dir.path().join(format!("{}.model", spec.label()));
        persist::save(&model, &path).unwrap();
        let back = persist::load(&path).unwrap();
        assert_eq!(back, model, "{}", spec.label());
        assert_eq!(back.predict_rows(&data.inputs).unwrap(), model.predict_rows(&data.inputs).unwrap());
    }
}

#[test]
fn corrupted_model_files_are_rejected() {
    let data = smooth_set(10, 2);
    let text = persist::encode(&fit(&RegressorSpec::knn(2), &data).unwrap()).unwrap();
    let p = std::path::Path::new("bad.model");
    assert!(persist::decode(&text.replacen("nirom-model knn", "nirom-model sindy", 1), p).is_err());
    assert!(persist::decode(&text[..text.len() / 2], p).is_err());
    assert!(persist::decode("hello", p).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn predictions_are_deterministic(seed in 0u64..1000, k in 1usize..6) {
        let data = smooth_set(30, seed);
        let a = fit(&RegressorSpec::knn(k), &data).unwrap();
        let b = fit(&RegressorSpec::knn(k), &data).unwrap();
        let z = data.inputs.row(0).iter().map(|v| v * 0.9).collect::<Vec<_>>();
        prop_assert_eq!(a.predict(&z).unwrap(), b.predict(&z).unwrap());
        let f1 = fit(&RegressorSpec::forest(3, seed), &data).unwrap();
        let f2 = fit(&RegressorSpec::forest(3, seed), &data).unwrap();
        prop_assert_eq!(f1, f2);
    }

    #[test]
    fn sindy_linear_library_has_constant_jacobian(seed in 0u64..1000) {
        let data = smooth_set(40, seed);
        let model = fit(&RegressorSpec::sindy(1, 0.0), &data).unwrap();
        let j0 = model.jacobian(&[0.0, 0.0, 1.0, 2.0]).unwrap();
        let j1 = model.jacobian(&[0.7, -0.4, 0.3, 1.1]).unwrap();
        prop_assert!((j0 - j1).amax() < 1e-12);
    }
}
