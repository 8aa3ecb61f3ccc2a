use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::linalg::least_squares;

pub const MAX_STLS_ITERATIONS: usize = 20;

/// One candidate function of the polynomial library.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Term {
    Constant,
    Linear(usize),
    /// `z_k z_l` with `k <= l`.
    Quadratic(usize, usize),
}

impl Term {
    pub fn name(&self) -> String {
        match self {
            Term::Constant => "1".into(),
            Term::Linear(k) => format!("z{k}"),
            Term::Quadratic(k, l) => format!("z{k}*z{l}"),
        }
    }
}

/// `{1, z_k, z_k z_l}` truncated at `degree`, constant optional.
pub fn library_terms(dim: usize, degree: usize, intercept: bool) -> Vec<Term> {
    let mut terms = Vec::new();
    if intercept {
        terms.push(Term::Constant);
    }
    terms.extend((0..dim).map(Term::Linear));
    if degree >= 2 {
        for k in 0..dim {
            for l in k..dim {
                terms.push(Term::Quadratic(k, l));
            }
        }
    }
    terms
}

pub fn evaluate_terms(terms: &[Term], z: &[f64], out: &mut [f64]) {
    for (o, t) in out.iter_mut().zip(terms) {
        *o = match *t {
            Term::Constant => 1.0,
            Term::Linear(k) => z[k],
            Term::Quadratic(k, l) => z[k] * z[l],
        };
    }
}

/// Library matrix with one row per sample of the row-major `inputs`.
pub fn library_matrix(terms: &[Term], inputs: &[f64], dim: usize) -> DMatrix<f64> {
    let rows = inputs.len() / dim;
    let mut lib = DMatrix::zeros(rows, terms.len());
    let mut buf = vec![0.0; terms.len()];
    for (i, z) in inputs.chunks_exact(dim).enumerate() {
        evaluate_terms(terms, z, &mut buf);
        for (j, v) in buf.iter().enumerate() {
            lib[(i, j)] = *v;
        }
    }
    lib
}

/// Fitted sparse polynomial model; `theta` has one row per term and one
/// column per output.
#[derive(Debug, Clone, PartialEq)]
pub struct SindyModel {
    pub terms: Vec<Term>,
    pub theta: DMatrix<f64>,
}

impl SindyModel {
    pub fn predict(&self, z: &[f64], out: &mut [f64]) {
        let mut p = vec![0.0; self.terms.len()];
        evaluate_terms(&self.terms, z, &mut p);
        for (o, v) in out.iter_mut().enumerate() {
            *v = self.theta.column(o).as_slice().iter().zip(&p).map(|(a, b)| a * b).sum();
        }
    }

    /// Derivative of each output with respect to each (scaled) input.
    pub fn jacobian(&self, z: &[f64]) -> DMatrix<f64> {
        let q = self.theta.ncols();
        let mut jac = DMatrix::zeros(q, z.len());
        for (t, term) in self.terms.iter().enumerate() {
            let row = self.theta.row(t);
            match *term {
                Term::Constant => {}
                Term::Linear(k) => {
                    for o in 0..q {
                        jac[(o, k)] += row[o];
                    }
                }
                Term::Quadratic(k, l) => {
                    for o in 0..q {
                        jac[(o, k)] += row[o] * z[l];
                        jac[(o, l)] += row[o] * z[k];
                    }
                }
            }
        }
        jac
    }

    pub fn nonzeros(&self) -> usize {
        self.theta.iter().filter(|v| **v != 0.0).count()
    }
}

fn solve_on_support(lib: &DMatrix<f64>, y: &DVector<f64>, support: &[usize], ridge: f64) -> Result<DVector<f64>> {
    let sub = lib.select_columns(support);
    let rhs = DMatrix::from_column_slice(y.len(), 1, y.as_slice());
    let coef = least_squares(&sub, &rhs, ridge)?;
    let mut full = DVector::zeros(lib.ncols());
    for (k, &j) in support.iter().enumerate() {
        full[j] = coef[(k, 0)];
    }
    Ok(full)
}

/// One thresholding pass: drops support entries with `|theta| < threshold`
/// and refits on what remains. Returns the new support and coefficients.
pub fn stls_pass(
    lib: &DMatrix<f64>,
    y: &DVector<f64>,
    theta: &DVector<f64>,
    support: &[usize],
    threshold: f64,
    ridge: f64,
) -> Result<(Vec<usize>, DVector<f64>)> {
    let kept: Vec<usize> = support.iter().copied().filter(|&j| theta[j].abs() >= threshold).collect();
    if kept.is_empty() {
        return Ok((kept, DVector::zeros(lib.ncols())));
    }
    if kept.len() == support.len() {
        return Ok((kept, theta.clone()));
    }
    let refit = solve_on_support(lib, y, &kept, ridge)?;
    Ok((kept, refit))
}

/// Sequentially thresholded least squares, independently per output.
pub fn stls(lib: &DMatrix<f64>, targets: &DMatrix<f64>, threshold: f64, ridge: f64) -> Result<DMatrix<f64>> {
    let full = least_squares(lib, targets, ridge)?;
    let mut theta = DMatrix::zeros(lib.ncols(), targets.ncols());
    for o in 0..targets.ncols() {
        let y = targets.column(o).into_owned();
        let mut coef = full.column(o).into_owned();
        let mut support: Vec<usize> = (0..lib.ncols()).collect();
        let mut fixed = false;
        for _ in 0..MAX_STLS_ITERATIONS {
            let (next, refit) = stls_pass(lib, &y, &coef, &support, threshold, ridge)?;
            let unchanged = next.len() == support.len();
            support = next;
            coef = refit;
            if unchanged || support.is_empty() {
                fixed = true;
                break;
            }
        }
        if support.is_empty() {
            log::warn!("SINDy: every coefficient of output {o} fell below the threshold {threshold}");
        } else if !fixed {
            log::warn!("SINDy: support of output {o} still changing after {MAX_STLS_ITERATIONS} passes");
        }
        theta.set_column(o, &coef);
    }
    Ok(theta)
}
