use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Memorized training table on scaled inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    pub k: usize,
    pub dim: usize,
    pub outputs: usize,
    /// Scaled inputs, row-major.
    pub inputs: Vec<f64>,
    /// Targets, row-major.
    pub targets: Vec<f64>,
}

impl KnnModel {
    pub fn fit(k: usize, dim: usize, outputs: usize, inputs: Vec<f64>, targets: Vec<f64>) -> Result<Self> {
        let rows = inputs.len() / dim.max(1);
        if k == 0 || k > rows {
            return Err(Error::arg(format!("kNN needs 1 <= K <= {rows}, got {k}")));
        }
        Ok(Self {
            k,
            dim,
            outputs,
            inputs,
            targets,
        })
    }

    pub fn rows(&self) -> usize {
        self.targets.len() / self.outputs
    }

    /// Indices of the `k` nearest rows; equal distances prefer lower indices.
    pub fn neighbors(&self, z: &[f64]) -> Vec<usize> {
        let d = self.dim;
        let mut dist: Vec<(f64, usize)> = self
            .inputs
            .chunks_exact(d)
            .enumerate()
            .map(|(i, row)| {
                let s: f64 = row.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
                (s, i)
            })
            .collect();
        let order = |a: &(f64, usize), b: &(f64, usize)| -> Ordering { a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)) };
        if self.k < dist.len() {
            dist.select_nth_unstable_by(self.k - 1, order);
            dist.truncate(self.k);
        }
        dist.sort_by(order);
        dist.into_iter().map(|(_, i)| i).collect()
    }

    pub fn predict(&self, z: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let q = self.outputs;
        for i in self.neighbors(z) {
            for (o, t) in out.iter_mut().zip(&self.targets[i * q..(i + 1) * q]) {
                *o += t;
            }
        }
        let inv = 1.0 / self.k as f64;
        out.iter_mut().for_each(|v| *v *= inv);
    }
}
