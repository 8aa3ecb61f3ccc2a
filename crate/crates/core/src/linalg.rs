//! Small linear-algebra helpers: sparse Jacobian plumbing, banded LU for
//! shifted full-order systems, and least squares.

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CsrMatrix};

use crate::error::{Error, Result};

pub fn csr_from_dense(a: &DMatrix<f64>) -> CsrMatrix<f64> {
    let mut coo = CooMatrix::new(a.nrows(), a.ncols());
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            if a[(i, j)] != 0.0 {
                coo.push(i, j, a[(i, j)]);
            }
        }
    }
    CsrMatrix::from(&coo)
}

pub fn csr_to_dense(a: &CsrMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows(), a.ncols());
    for (i, j, v) in a.triplet_iter() {
        out[(i, j)] += *v;
    }
    out
}

/// `a * b` for sparse `a` and dense `b`.
pub fn csr_mul_dense(a: &CsrMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows(), b.ncols());
    for (i, row) in a.row_iter().enumerate() {
        for (&j, &v) in row.col_indices().iter().zip(row.values()) {
            for c in 0..b.ncols() {
                out[(i, c)] += v * b[(j, c)];
            }
        }
    }
    out
}

/// State Jacobian of a velocity, either dense (reduced models) or sparse
/// (full-order models).
#[derive(Debug, Clone)]
pub enum Jacobian {
    Dense(DMatrix<f64>),
    Sparse(CsrMatrix<f64>),
}

impl Jacobian {
    pub fn nrows(&self) -> usize {
        match self {
            Jacobian::Dense(m) => m.nrows(),
            Jacobian::Sparse(m) => m.nrows(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Jacobian::Dense(m) => m.clone(),
            Jacobian::Sparse(m) => csr_to_dense(m),
        }
    }

    /// Solves `(I - dt * J) x = rhs`.
    pub fn solve_shifted(&self, dt: f64, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        match self {
            Jacobian::Dense(j) => dense_shifted_solve(j, dt, rhs),
            Jacobian::Sparse(j) => {
                let (kl, ku) = bandwidths(j);
                let n = j.nrows();
                if (kl + ku + 1) * 4 > n {
                    dense_shifted_solve(&csr_to_dense(j), dt, rhs)
                } else {
                    match BandLu::factor_shifted(j, dt, kl, ku) {
                        Some(lu) => Ok(lu.solve(rhs)),
                        None => dense_shifted_solve(&csr_to_dense(j), dt, rhs),
                    }
                }
            }
        }
    }
}

fn dense_shifted_solve(j: &DMatrix<f64>, dt: f64, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let n = j.nrows();
    let a = DMatrix::identity(n, n) - j * dt;
    a.lu()
        .solve(rhs)
        .ok_or_else(|| Error::Singular(format!("shifted {n}x{n} system is singular")))
}

fn bandwidths(a: &CsrMatrix<f64>) -> (usize, usize) {
    let mut kl = 0;
    let mut ku = 0;
    for (i, j, _) in a.triplet_iter() {
        if j < i {
            kl = kl.max(i - j);
        } else {
            ku = ku.max(j - i);
        }
    }
    (kl, ku)
}

/// LU factors of a banded matrix without pivoting, stored row by row.
struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    band: Vec<f64>,
}

impl BandLu {
    fn width(&self) -> usize {
        self.kl + self.ku + 1
    }

    fn at(&self, i: usize, j: usize) -> usize {
        i * self.width() + j + self.kl - i
    }

    /// Factors `I - dt * J`; `None` when a pivot is too small to proceed
    /// without row exchanges.
    fn factor_shifted(j: &CsrMatrix<f64>, dt: f64, kl: usize, ku: usize) -> Option<Self> {
        let n = j.nrows();
        let mut lu = BandLu {
            n,
            kl,
            ku,
            band: vec![0.0; n * (kl + ku + 1)],
        };
        for i in 0..n {
            let idx = lu.at(i, i);
            lu.band[idx] = 1.0;
        }
        for (i, c, v) in j.triplet_iter() {
            let idx = lu.at(i, c);
            lu.band[idx] -= dt * v;
        }
        let scale = lu.band.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let w = lu.width();
        for k in 0..n {
            let pivot = lu.band[lu.at(k, k)];
            if pivot.abs() <= 1e-13 * scale {
                return None;
            }
            let jmax = (k + ku).min(n - 1);
            for i in k + 1..=(k + kl).min(n - 1) {
                let ik = lu.at(i, k);
                let l = lu.band[ik] / pivot;
                if l == 0.0 {
                    continue;
                }
                lu.band[ik] = l;
                let (upper, lower) = lu.band.split_at_mut(i * w);
                let krow = &upper[k * w..(k + 1) * w];
                let irow = &mut lower[..w];
                for c in k + 1..=jmax {
                    irow[c + kl - i] -= l * krow[c + kl - k];
                }
            }
        }
        Some(lu)
    }

    fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        let mut x = rhs.clone();
        for i in 0..n {
            let mut s = x[i];
            for c in i.saturating_sub(self.kl)..i {
                s -= self.band[self.at(i, c)] * x[c];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for c in i + 1..=(i + self.ku).min(n - 1) {
                s -= self.band[self.at(i, c)] * x[c];
            }
            x[i] = s / self.band[self.at(i, i)];
        }
        x
    }
}

/// Least-squares solution of `a x ≈ b` (multiple right-hand sides) with an
/// optional ridge weight. Falls back to a `1e-10` ridge when `a` is
/// numerically rank deficient.
pub fn least_squares(a: &DMatrix<f64>, b: &DMatrix<f64>, ridge: f64) -> Result<DMatrix<f64>> {
    let (m, k) = a.shape();
    if b.nrows() != m {
        return Err(Error::arg(format!(
            "least squares: {m} equations but {} right-hand-side rows",
            b.nrows()
        )));
    }
    if k == 0 {
        return Ok(DMatrix::zeros(0, b.ncols()));
    }
    let solve = |ridge: f64| -> Option<DMatrix<f64>> {
        let (aa, bb) = if ridge > 0.0 || m < k {
            let r = ridge.max(1e-10).sqrt();
            let mut aa = DMatrix::zeros(m + k, k);
            aa.view_mut((0, 0), (m, k)).copy_from(a);
            for i in 0..k {
                aa[(m + i, i)] = r;
            }
            let mut bb = DMatrix::zeros(m + k, b.ncols());
            bb.view_mut((0, 0), (m, b.ncols())).copy_from(b);
            (aa, bb)
        } else {
            (a.clone(), b.clone())
        };
        let qr = aa.qr();
        let r = qr.r();
        let rmax = r.diagonal().amax();
        if rmax == 0.0 || r.diagonal().iter().any(|d| d.abs() <= 1e-12 * rmax) {
            return None;
        }
        let mut qtb = bb;
        qr.q_tr_mul(&mut qtb);
        let qtb = qtb.rows(0, k).into_owned();
        r.solve_upper_triangular(&qtb)
    };
    if let Some(x) = solve(ridge) {
        return Ok(x);
    }
    log::warn!("least squares: rank-deficient {m}x{k} system, retrying with ridge 1e-10");
    let scale = a.column_iter().map(|c| c.norm_squared()).fold(0.0, f64::max).max(1.0);
    solve(1e-10 * scale).ok_or_else(|| Error::Singular(format!("{m}x{k} least-squares system")))
}
