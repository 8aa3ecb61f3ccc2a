use nalgebra::{DMatrix, DMatrixView, DVector};

use crate::error::{Error, Result};
use crate::linalg::least_squares;

/// Candidates whose squared power function falls below this are treated as
/// duplicates of already selected centers.
pub const POWER_FLOOR: f64 = 1e-12;
pub const RESIDUAL_STOP: f64 = 1e-12;

#[inline]
pub fn gaussian(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * s).exp()
}

/// Kernel expansion `h(z) = sum_i alpha_i K(c_i, z)` with shared centers.
#[derive(Debug, Clone, PartialEq)]
pub struct VkogaModel {
    pub gamma: f64,
    pub dim: usize,
    /// Centers (scaled), row-major.
    pub centers: Vec<f64>,
    /// One row per center, one column per output.
    pub alpha: DMatrix<f64>,
    /// Training rows of the centers, in selection order.
    pub selected: Vec<usize>,
    /// Largest pointwise residual norm before each selection.
    pub greedy_residuals: Vec<f64>,
    /// Centers stored coordinate-major (`by_dim[j * m + i]` is coordinate
    /// `j` of center `i`) for the distance loop.
    by_dim: Vec<f64>,
}

impl VkogaModel {
    pub fn new(
        gamma: f64,
        dim: usize,
        centers: Vec<f64>,
        alpha: DMatrix<f64>,
        selected: Vec<usize>,
        greedy_residuals: Vec<f64>,
    ) -> Self {
        let m = selected.len();
        let mut by_dim = vec![0.0; centers.len()];
        for (i, c) in centers.chunks_exact(dim).enumerate() {
            for (j, v) in c.iter().enumerate() {
                by_dim[j * m + i] = *v;
            }
        }
        Self {
            gamma,
            dim,
            centers,
            alpha,
            selected,
            greedy_residuals,
            by_dim,
        }
    }

    pub fn n_centers(&self) -> usize {
        self.selected.len()
    }

    fn kernel_vector(&self, z: &[f64]) -> DVector<f64> {
        let m = self.selected.len();
        let mut acc = vec![0.0; m];
        for (coord, zj) in self.by_dim.chunks_exact(m).zip(z) {
            for (a, c) in acc.iter_mut().zip(coord) {
                let d = c - zj;
                *a += d * d;
            }
        }
        for a in &mut acc {
            *a = (-self.gamma * *a).exp();
        }
        DVector::from_vec(acc)
    }

    pub fn predict(&self, z: &[f64], out: &mut [f64]) {
        let h = self.alpha.tr_mul(&self.kernel_vector(z));
        out.copy_from_slice(h.as_slice());
    }

    /// `dh/dz = -2 gamma sum_i alpha_i K(c_i, z) (z - c_i)^T`.
    pub fn jacobian(&self, z: &[f64]) -> DMatrix<f64> {
        let k = self.kernel_vector(z);
        let m = self.selected.len();
        let mut w = self.alpha.clone();
        for o in 0..w.ncols() {
            for (wi, ki) in w.column_mut(o).as_mut_slice().iter_mut().zip(k.as_slice()) {
                *wi *= ki;
            }
        }
        let centers_t = DMatrixView::from_slice(&self.centers, self.dim, m);
        let cw = centers_t * &w;
        let totals: Vec<f64> = w.column_iter().map(|c| c.as_slice().iter().sum()).collect();
        DMatrix::from_fn(w.ncols(), self.dim, |o, j| -2.0 * self.gamma * (z[j] * totals[o] - cw[(j, o)]))
    }

    /// Largest coefficient magnitude relative to `target_scale`; a measure
    /// of how strongly rounding in the kernel values is amplified.
    pub fn coefficient_amplification(&self, target_scale: f64) -> f64 {
        self.alpha.amax() / target_scale.max(f64::MIN_POSITIVE)
    }
}

/// Greedy selection of up to `max_centers` training inputs, each time
/// taking the candidate with the largest residual norm (over all outputs)
/// of the current kernel interpolant, followed by a least-squares fit of
/// the coefficients to every training target.
pub fn vkoga_fit(inputs: &[f64], targets: &DMatrix<f64>, dim: usize, gamma: f64, max_centers: usize) -> Result<VkogaModel> {
    let n = targets.nrows();
    let q = targets.ncols();
    if n == 0 || inputs.len() != n * dim {
        return Err(Error::arg("VKOGA needs matching, nonempty inputs and targets"));
    }
    if max_centers == 0 || max_centers > n {
        return Err(Error::arg(format!("VKOGA centers must lie in 1..={n}, got {max_centers}")));
    }
    if !(gamma > 0.0) {
        return Err(Error::arg(format!("kernel width must be positive, got {gamma}")));
    }
    let row = |i: usize| &inputs[i * dim..(i + 1) * dim];
    // Residual, row-major, and the squared power function at every sample.
    let mut residual: Vec<f64> = (0..n).flat_map(|i| targets.row(i).iter().copied().collect::<Vec<_>>()).collect();
    let mut power = vec![1.0; n];
    // Newton basis values: column m holds v_m at all samples.
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut selected = Vec::new();
    let mut taken = vec![false; n];
    let mut greedy_residuals = Vec::new();
    let mut excluded = false;

    while selected.len() < max_centers {
        let mut best: Option<(usize, f64)> = None;
        let mut max_norm: f64 = 0.0;
        for i in 0..n {
            let norm = residual[i * q..(i + 1) * q].iter().map(|v| v * v).sum::<f64>().sqrt();
            max_norm = max_norm.max(norm);
            if taken[i] {
                continue;
            }
            if power[i] < POWER_FLOOR {
                excluded = true;
                continue;
            }
            if best.is_none_or(|(_, b)| norm > b) {
                best = Some((i, norm));
            }
        }
        greedy_residuals.push(max_norm);
        if max_norm <= RESIDUAL_STOP {
            break;
        }
        let Some((pick, _)) = best else { break };
        taken[pick] = true;
        let p = power[pick].sqrt();
        let mut v: Vec<f64> = (0..n).map(|i| gaussian(gamma, row(i), row(pick))).collect();
        for b in &basis {
            let w = b[pick];
            for i in 0..n {
                v[i] -= b[i] * w;
            }
        }
        v.iter_mut().for_each(|x| *x /= p);
        let coef: Vec<f64> = residual[pick * q..(pick + 1) * q].iter().map(|r| r / p).collect();
        for i in 0..n {
            for o in 0..q {
                residual[i * q + o] -= v[i] * coef[o];
            }
            power[i] -= v[i] * v[i];
        }
        basis.push(v);
        selected.push(pick);
    }
    if excluded {
        log::warn!("VKOGA: skipped candidates with vanishing power (duplicate inputs)");
    }
    if selected.len() < max_centers {
        log::warn!("VKOGA stopped at {} of {max_centers} centers", selected.len());
    }

    let m = selected.len();
    let newton = DMatrix::from_fn(n, m, |i, j| basis[j][i]);
    let beta = least_squares(&newton, targets, 0.0)?;
    // Newton basis values at the centers form the lower-triangular Cholesky
    // factor L of the center kernel matrix, so alpha = L^{-T} beta.
    let l = DMatrix::from_fn(m, m, |i, j| if j <= i { basis[j][selected[i]] } else { 0.0 });
    let alpha = l
        .transpose()
        .solve_upper_triangular(&beta)
        .ok_or_else(|| Error::Singular("VKOGA triangular factor".into()))?;
    let centers = selected.iter().flat_map(|&i| row(i).to_vec()).collect();
    Ok(VkogaModel::new(gamma, dim, centers, alpha, selected, greedy_residuals))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_is_one_on_the_diagonal() {
        assert_eq!(gaussian(3.0, &[0.2, 0.4], &[0.2, 0.4]), 1.0);
    }

    #[test]
    fn single_point_is_interpolated() {
        let model = vkoga_fit(&[0.3, 0.7], &DMatrix::from_row_slice(1, 2, &[1.5, -2.0]), 2, 1.0, 1).unwrap();
        let mut out = [0.0; 2];
        model.predict(&[0.3, 0.7], &mut out);
        assert_eq!(model.n_centers(), 1);
        assert!((out[0] - 1.5).abs() < 1e-14 && (out[1] + 2.0).abs() < 1e-14);
    }

    #[test]
    fn first_center_is_largest_target() {
        // Three collinear points, the middle one an outlier.
        let inputs = [0.0, 0.5, 1.0];
        let targets = DMatrix::from_column_slice(3, 1, &[0.1, 5.0, -0.2]);
        let model = vkoga_fit(&inputs, &targets, 1, 2.0, 1).unwrap();
        let brute = (0..3)
            .max_by(|&a, &b| targets[(a, 0)].abs().total_cmp(&targets[(b, 0)].abs()))
            .unwrap();
        assert_eq!(model.selected[0], brute);
    }

    #[test]
    fn duplicate_inputs_are_not_selected_twice() {
        let inputs = [0.0, 0.0, 1.0];
        let targets = DMatrix::from_column_slice(3, 1, &[1.0, 1.0, 0.0]);
        let model = vkoga_fit(&inputs, &targets, 1, 1.0, 3).unwrap();
        let mut rows = model.selected.clone();
        rows.sort();
        assert!(!(rows.contains(&0) && rows.contains(&1)));
    }
}
