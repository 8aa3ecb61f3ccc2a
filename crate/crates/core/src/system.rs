//! Shared abstractions: parameter domains, time grids and the full-order
//! dynamical-system contract `dx/dt = f(x, t; mu)`, `x(0) = x0(mu)`.

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CsrMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box of admissible parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ParameterDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::arg(format!(
                "domain bounds must be nonempty and of equal length ({} vs {})",
                lower.len(),
                upper.len()
            )));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::arg(format!("domain lower {lower:?} exceeds upper {upper:?}")));
        }
        Ok(Self { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, mu: &[f64]) -> bool {
        mu.len() == self.dim()
            && mu
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(m, (l, u))| l <= m && m <= u)
    }

    /// Returns `Ok(())` when `mu` lies in the box, a domain error otherwise.
    pub fn check(&self, mu: &[f64]) -> Result<()> {
        if self.contains(mu) {
            Ok(())
        } else {
            Err(Error::Domain {
                values: mu.to_vec(),
                lower: self.lower.clone(),
                upper: self.upper.clone(),
            })
        }
    }

    /// All `2^p` corners, ordered as binary counting with the first
    /// coordinate varying slowest.
    pub fn corners(&self) -> Vec<Vec<f64>> {
        let p = self.dim();
        (0..1usize << p)
            .map(|mask| {
                (0..p)
                    .map(|i| {
                        if mask & (1 << (p - 1 - i)) != 0 {
                            self.upper[i]
                        } else {
                            self.lower[i]
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

/// Uniform time grid on `[0, T]` with `steps` intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t_final: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(t_final: f64, steps: usize) -> Result<Self> {
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(Error::arg(format!("final time must be positive, got {t_final}")));
        }
        if steps == 0 {
            return Err(Error::arg("time grid needs at least one step"));
        }
        Ok(Self { t_final, steps })
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.steps as f64
    }

    /// Time of grid point `j`; exact at both ends.
    pub fn time(&self, j: usize) -> f64 {
        if j == self.steps {
            self.t_final
        } else {
            j as f64 * self.dt()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|j| self.time(j)).collect()
    }
}

/// Parameterized full-order model `dx/dt = f(x, t; mu)`.
///
/// Implementations must be deterministic: identical arguments give
/// bit-identical results.
pub trait DynamicalSystem: Send + Sync {
    fn name(&self) -> &str;

    /// State dimension `N`.
    fn dim(&self) -> usize;

    fn domain(&self) -> &ParameterDomain;

    fn velocity(&self, x: &DVector<f64>, t: f64, mu: &[f64]) -> Result<DVector<f64>>;

    /// Analytic state Jacobian `df/dx`.
    fn jacobian(&self, x: &DVector<f64>, t: f64, mu: &[f64]) -> Result<CsrMatrix<f64>>;

    fn initial_state(&self, mu: &[f64]) -> Result<DVector<f64>>;
}

/// Fails with an evaluation error naming the first non-finite entry.
pub fn ensure_finite(values: &[f64], context: &'static str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::Evaluation { index, context }),
        None => Ok(()),
    }
}

pub(crate) fn check_len(x: &DVector<f64>, expected: usize, what: &str) -> Result<()> {
    if x.len() == expected {
        Ok(())
    } else {
        Err(Error::arg(format!("{what} has length {}, expected {expected}", x.len())))
    }
}

/// Central-difference Jacobian of an arbitrary vector function.
///
/// With `step = None` each column uses `h_j = 1e-6 * (1 + |x_j|)`.
pub fn fd_jacobian_of<F>(f: F, x: &DVector<f64>, step: Option<f64>) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    if let Some(h) = step {
        if !(h > 0.0) {
            return Err(Error::arg(format!("finite-difference step must be positive, got {h}")));
        }
    }
    let mut probe = x.clone();
    let mut columns: Option<DMatrix<f64>> = None;
    for j in 0..x.len() {
        let h = step.unwrap_or(1e-6 * (1.0 + x[j].abs()));
        probe[j] = x[j] + h;
        let plus = f(&probe)?;
        probe[j] = x[j] - h;
        let minus = f(&probe)?;
        probe[j] = x[j];
        let col = (plus - minus) / (2.0 * h);
        ensure_finite(col.as_slice(), "finite-difference jacobian")?;
        let jac = columns.get_or_insert_with(|| DMatrix::zeros(col.len(), x.len()));
        jac.set_column(j, &col);
    }
    Ok(columns.unwrap_or_else(|| DMatrix::zeros(0, 0)))
}

/// Central-difference approximation of a system's state Jacobian.
pub fn fd_jacobian<S: DynamicalSystem + ?Sized>(
    system: &S,
    x: &DVector<f64>,
    t: f64,
    mu: &[f64],
    step: Option<f64>,
) -> Result<DMatrix<f64>> {
    fd_jacobian_of(|y| system.velocity(y, t, mu), x, step)
}
