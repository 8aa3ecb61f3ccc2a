use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SvrKernel {
    Poly2,
    Poly3,
    Rbf,
}

impl SvrKernel {
    pub fn as_str(self) -> &'static str {
        match self {
            SvrKernel::Poly2 => "poly2",
            SvrKernel::Poly3 => "poly3",
            SvrKernel::Rbf => "rbf",
        }
    }

    pub fn eval(self, gamma: f64, a: &[f64], b: &[f64]) -> f64 {
        match self {
            SvrKernel::Poly2 => (dot(a, b) + 1.0).powi(2),
            SvrKernel::Poly3 => (dot(a, b) + 1.0).powi(3),
            SvrKernel::Rbf => {
                let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * s).exp()
            }
        }
    }

    /// Gradient of `K(c, z)` with respect to `z`, accumulated as `scale * dK` into `out`.
    fn add_gradient(self, gamma: f64, c: &[f64], z: &[f64], scale: f64, out: &mut [f64]) {
        match self {
            SvrKernel::Poly2 | SvrKernel::Poly3 => {
                let deg = if self == SvrKernel::Poly2 { 2 } else { 3 };
                let f = scale * deg as f64 * (dot(c, z) + 1.0).powi(deg - 1);
                for (o, ci) in out.iter_mut().zip(c) {
                    *o += f * ci;
                }
            }
            SvrKernel::Rbf => {
                let k = self.eval(gamma, c, z);
                for ((o, ci), zi) in out.iter_mut().zip(c).zip(z) {
                    *o += scale * -2.0 * gamma * (zi - ci) * k;
                }
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Kernel expansion of one output.
#[derive(Debug, Clone, PartialEq)]
pub struct SvrOutput {
    /// Support vectors (scaled), row-major.
    pub support: Vec<f64>,
    pub coef: Vec<f64>,
    pub bias: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvrModel {
    pub kernel: SvrKernel,
    pub gamma: f64,
    pub dim: usize,
    pub outputs: Vec<SvrOutput>,
}

impl SvrModel {
    pub fn predict(&self, z: &[f64], out: &mut [f64]) {
        for (o, m) in out.iter_mut().zip(&self.outputs) {
            *o = m.bias
                + m.support
                    .chunks_exact(self.dim)
                    .zip(&m.coef)
                    .map(|(c, b)| b * self.kernel.eval(self.gamma, c, z))
                    .sum::<f64>();
        }
    }

    pub fn jacobian(&self, z: &[f64]) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(self.outputs.len(), self.dim);
        let mut row = vec![0.0; self.dim];
        for (o, m) in self.outputs.iter().enumerate() {
            row.iter_mut().for_each(|v| *v = 0.0);
            for (c, b) in m.support.chunks_exact(self.dim).zip(&m.coef) {
                self.kernel.add_gradient(self.gamma, c, z, *b, &mut row);
            }
            for (j, v) in row.iter().enumerate() {
                jac[(o, j)] = *v;
            }
        }
        jac
    }
}

pub struct SvrSettings {
    pub kernel: SvrKernel,
    pub gamma: f64,
    pub epsilon: f64,
    pub c_box: f64,
    pub tol: f64,
    pub max_iter: usize,
}

/// Fits one epsilon-SVR per output by sequential minimal optimization on
/// the `2l`-variable dual, with second-order working-set selection.
pub fn svr_fit(inputs: &[f64], targets: &DMatrix<f64>, dim: usize, s: &SvrSettings) -> Result<SvrModel> {
    let l = targets.nrows();
    if l == 0 {
        return Err(Error::arg("SVR needs training data"));
    }
    if !(s.c_box > 0.0 && s.epsilon >= 0.0 && s.tol > 0.0) {
        return Err(Error::arg("SVR needs C > 0, epsilon >= 0 and a positive tolerance"));
    }
    let row = |i: usize| &inputs[i * dim..(i + 1) * dim];
    let gram = DMatrix::from_fn(l, l, |i, j| s.kernel.eval(s.gamma, row(i), row(j)));
    let outputs = (0..targets.ncols())
        .map(|o| {
            let y: Vec<f64> = targets.column(o).iter().copied().collect();
            let (beta, bias) = smo(&gram, &y, s);
            let mut support = Vec::new();
            let mut coef = Vec::new();
            for (i, b) in beta.iter().enumerate() {
                if *b != 0.0 {
                    support.extend_from_slice(row(i));
                    coef.push(*b);
                }
            }
            SvrOutput { support, coef, bias }
        })
        .collect();
    Ok(SvrModel {
        kernel: s.kernel,
        gamma: s.gamma,
        dim,
        outputs,
    })
}

const TAU: f64 = 1e-12;

fn smo(gram: &DMatrix<f64>, target: &[f64], s: &SvrSettings) -> (Vec<f64>, f64) {
    let l = target.len();
    let n = 2 * l;
    let c = s.c_box;
    let sign = |t: usize| if t < l { 1.0 } else { -1.0 };
    let k = |t: usize, u: usize| gram[(t % l, u % l)];
    let q = |t: usize, u: usize| sign(t) * sign(u) * k(t, u);
    let mut alpha = vec![0.0; n];
    let mut grad: Vec<f64> = (0..n)
        .map(|t| if t < l { s.epsilon - target[t] } else { s.epsilon + target[t - l] })
        .collect();
    let at_upper = |a: f64| a >= c;
    let at_lower = |a: f64| a <= 0.0;
    let mut converged = false;
    for _ in 0..s.max_iter {
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            if sign(t) > 0.0 {
                if !at_upper(alpha[t]) && -grad[t] >= gmax {
                    gmax = -grad[t];
                    i = t;
                }
            } else if !at_lower(alpha[t]) && grad[t] >= gmax {
                gmax = grad[t];
                i = t;
            }
        }
        if i == usize::MAX {
            converged = true;
            break;
        }
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        let qii = k(i, i);
        for t in 0..n {
            let (grad_diff, eligible) = if sign(t) > 0.0 {
                if at_lower(alpha[t]) {
                    continue;
                }
                gmax2 = gmax2.max(grad[t]);
                (gmax + grad[t], true)
            } else {
                if at_upper(alpha[t]) {
                    continue;
                }
                gmax2 = gmax2.max(-grad[t]);
                (gmax - grad[t], true)
            };
            if eligible && grad_diff > 0.0 {
                let quad = qii + k(t, t) - 2.0 * sign(i) * q(i, t);
                let quad = if quad > 0.0 { quad } else { TAU };
                let obj = -grad_diff * grad_diff / quad;
                if obj <= best {
                    best = obj;
                    j = t;
                }
            }
        }
        if gmax + gmax2 < s.tol || j == usize::MAX {
            converged = true;
            break;
        }
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if sign(i) != sign(j) {
            let quad = (qii + k(j, j) + 2.0 * q(i, j)).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (qii + k(j, j) - 2.0 * q(i, j)).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += q(t, i) * di + q(t, j) * dj;
        }
    }
    if !converged {
        log::warn!("SVR: SMO stopped after {} iterations without reaching tolerance {}", s.max_iter, s.tol);
    }
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut sum_free) = (0usize, 0.0);
    for t in 0..n {
        let yg = sign(t) * grad[t];
        if at_upper(alpha[t]) {
            if sign(t) < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if at_lower(alpha[t]) {
            if sign(t) > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum_free += yg;
        }
    }
    let rho = if free > 0 { sum_free / free as f64 } else { 0.5 * (ub + lb) };
    let beta = (0..l).map(|i| alpha[i] - alpha[i + l]).collect();
    (beta, -rho)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings(kernel: SvrKernel) -> SvrSettings {
        SvrSettings {
            kernel,
            gamma: 1.0,
            epsilon: 1e-4,
            c_box: 1e3,
            tol: 1e-8,
            max_iter: 200_000,
        }
    }

    #[test]
    fn quadratic_is_fitted_by_poly2() {
        let xs: Vec<f64> = (0..15).map(|i| i as f64 / 14.0).collect();
        let y = DMatrix::from_iterator(15, 1, xs.iter().map(|x| 1.0 - 2.0 * x + 3.0 * x * x));
        let model = svr_fit(&xs, &y, 1, &settings(SvrKernel::Poly2)).unwrap();
        let mut out = [0.0];
        for x in [0.1, 0.55, 0.93] {
            model.predict(&[x], &mut out);
            assert!((out[0] - (1.0 - 2.0 * x + 3.0 * x * x)).abs() < 1e-3, "{x}: {}", out[0]);
        }
    }

    #[test]
    fn targets_inside_the_tube_give_a_flat_model() {
        let xs = [0.0, 0.5, 1.0];
        let y = DMatrix::from_column_slice(3, 1, &[2.0, 2.0 + 5e-5, 2.0 - 5e-5]);
        let model = svr_fit(&xs, &y, 1, &settings(SvrKernel::Rbf)).unwrap();
        let mut out = [0.0];
        model.predict(&[0.25], &mut out);
        assert!((out[0] - 2.0).abs() <= 1e-4 + 1e-9);
    }
}
