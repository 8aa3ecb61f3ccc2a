use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::tree::{Table, Tree, TreeParams};

/// Bagged trees with per-split feature subsampling.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
}

impl ForestModel {
    /// Tree `k` draws its bootstrap sample and feature subsets from stream
    /// `k` of a generator seeded with `seed`, so the result does not depend
    /// on how trees are scheduled.
    pub fn fit(table: &Table<'_>, n_trees: usize, params: &TreeParams, seed: u64) -> Self {
        let rows = table.targets.len() / table.outputs;
        let trees = (0..n_trees)
            .into_par_iter()
            .map(|k| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(k as u64);
                let sample: Vec<usize> = (0..rows).map(|_| rng.random_range(0..rows)).collect();
                Tree::fit(table, sample, params, &mut rng)
            })
            .collect();
        Self { trees }
    }

    pub fn predict(&self, z: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for tree in &self.trees {
            for (o, v) in out.iter_mut().zip(tree.leaf_value(z)) {
                *o += v;
            }
        }
        let inv = 1.0 / self.trees.len() as f64;
        out.iter_mut().for_each(|v| *v *= inv);
    }
}

/// Gradient boosting on squared loss: a constant start plus shrunken trees
/// fitted to successive residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct BoostingModel {
    pub initial: Vec<f64>,
    pub learning_rate: f64,
    pub learners: Vec<Tree>,
}

impl BoostingModel {
    pub fn fit(table: &Table<'_>, n_learners: usize, learning_rate: f64, depth: usize) -> Self {
        let q = table.outputs;
        let rows = table.targets.len() / q;
        let mut initial = vec![0.0; q];
        for i in 0..rows {
            for o in 0..q {
                initial[o] += table.targets[i * q + o];
            }
        }
        initial.iter_mut().for_each(|v| *v /= rows as f64);
        let mut fitted: Vec<f64> = (0..rows).flat_map(|_| initial.clone()).collect();
        let params = TreeParams {
            max_depth: Some(depth),
            min_leaf: 1,
            max_features: usize::MAX,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut learners = Vec::with_capacity(n_learners);
        let mut residual = vec![0.0; rows * q];
        for _ in 0..n_learners {
            for (r, (t, f)) in residual.iter_mut().zip(table.targets.iter().zip(&fitted)) {
                *r = t - f;
            }
            let sub = Table {
                inputs: table.inputs,
                dim: table.dim,
                targets: &residual,
                outputs: q,
            };
            let tree = Tree::fit(&sub, (0..rows).collect(), &params, &mut rng);
            for i in 0..rows {
                let z = &table.inputs[i * table.dim..(i + 1) * table.dim];
                for (f, v) in fitted[i * q..(i + 1) * q].iter_mut().zip(tree.leaf_value(z)) {
                    *f += learning_rate * v;
                }
            }
            learners.push(tree);
        }
        Self {
            initial,
            learning_rate,
            learners,
        }
    }

    pub fn predict(&self, z: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.initial);
        for tree in &self.learners {
            for (o, v) in out.iter_mut().zip(tree.leaf_value(z)) {
                *o += self.learning_rate * v;
            }
        }
    }
}
