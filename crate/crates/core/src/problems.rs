//! Concrete full-order models: the parameterized inviscid Burgers' equation
//! on a 501-node finite-volume grid and the 2D nonlinear heat
//! (convection–diffusion) equation on a 51×51 finite-difference grid.

use std::f64::consts::PI;

use nalgebra::DVector;
use nalgebra_sparse::{CooMatrix, CsrMatrix};

use crate::error::Result;
use crate::system::{check_len, ensure_finite, DynamicalSystem, ParameterDomain};

/// Which benchmark problem an experiment runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Burgers,
    Convdiff,
}

impl ProblemKind {
    pub fn build(self) -> Box<dyn DynamicalSystem> {
        match self {
            ProblemKind::Burgers => Box::new(Burgers1D::new()),
            ProblemKind::Convdiff => Box::new(ConvDiff2D::new()),
        }
    }

    pub fn final_time(self) -> f64 {
        match self {
            ProblemKind::Burgers => Burgers1D::FINAL_TIME,
            ProblemKind::Convdiff => ConvDiff2D::FINAL_TIME,
        }
    }

    pub fn test_parameter(self) -> Vec<f64> {
        match self {
            ProblemKind::Burgers => vec![1.8, 0.0232],
            ProblemKind::Convdiff => vec![9.5, 9.5],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ProblemKind::Burgers => "burgers",
            ProblemKind::Convdiff => "convdiff",
        }
    }
}

impl std::str::FromStr for ProblemKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "burgers" => Ok(ProblemKind::Burgers),
            "convdiff" => Ok(ProblemKind::Convdiff),
            other => Err(crate::Error::arg(format!(
                "unknown problem `{other}` (expected burgers or convdiff)"
            ))),
        }
    }
}

/// Inviscid Burgers' equation `u_t + (u^2/2)_x = 0.02 exp(b x)` on
/// `[0, 100]` with inflow `u(0, t) = a` and `u(x, 0) = 1`; `mu = (a, b)`.
///
/// First-order upwind finite volumes: cell `i` receives flux
/// `F_{i-1} = u_{i-1}^2 / 2` from the left, with the inflow ghost flux
/// `F_0 = a^2 / 2`. Node 0 carries the Dirichlet value and has zero velocity.
#[derive(Debug, Clone)]
pub struct Burgers1D {
    domain: ParameterDomain,
    nodes: usize,
    dx: f64,
    source: f64,
}

impl Burgers1D {
    pub const NODES: usize = 501;
    pub const LENGTH: f64 = 100.0;
    pub const FINAL_TIME: f64 = 25.0;

    pub fn new() -> Self {
        Self::with_domain(ParameterDomain::new(vec![1.5, 0.02], vec![2.0, 0.025]).unwrap())
    }

    /// Same discretization with a different admissible parameter box.
    pub fn with_domain(domain: ParameterDomain) -> Self {
        Self {
            domain,
            nodes: Self::NODES,
            dx: Self::LENGTH / (Self::NODES - 1) as f64,
            source: 0.02,
        }
    }

    pub fn node(&self, i: usize) -> f64 {
        i as f64 * self.dx
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..self.nodes).map(|i| self.node(i)).collect()
    }

    fn check_args(&self, u: &DVector<f64>, mu: &[f64]) -> Result<()> {
        check_len(u, self.nodes, "Burgers' state")?;
        self.domain.check(mu)?;
        ensure_finite(u.as_slice(), "Burgers' state")
    }
}

impl Default for Burgers1D {
    fn default() -> Self {
        Self::new()
    }
}

impl DynamicalSystem for Burgers1D {
    fn name(&self) -> &str {
        "burgers"
    }

    fn dim(&self) -> usize {
        self.nodes
    }

    fn domain(&self) -> &ParameterDomain {
        &self.domain
    }

    fn velocity(&self, u: &DVector<f64>, _t: f64, mu: &[f64]) -> Result<DVector<f64>> {
        self.check_args(u, mu)?;
        let (a, b) = (mu[0], mu[1]);
        let mut out = DVector::zeros(self.nodes);
        let mut flux_left = 0.5 * a * a;
        for i in 1..self.nodes {
            let flux = 0.5 * u[i] * u[i];
            out[i] = -(flux - flux_left) / self.dx + self.source * (b * self.node(i)).exp();
            flux_left = flux;
        }
        ensure_finite(out.as_slice(), "Burgers' velocity")?;
        Ok(out)
    }

    fn jacobian(&self, u: &DVector<f64>, _t: f64, mu: &[f64]) -> Result<CsrMatrix<f64>> {
        self.check_args(u, mu)?;
        let mut coo = CooMatrix::new(self.nodes, self.nodes);
        for i in 1..self.nodes {
            if i >= 2 {
                coo.push(i, i - 1, u[i - 1] / self.dx);
            }
            coo.push(i, i, -u[i] / self.dx);
        }
        Ok(CsrMatrix::from(&coo))
    }

    fn initial_state(&self, mu: &[f64]) -> Result<DVector<f64>> {
        self.domain.check(mu)?;
        Ok(DVector::from_element(self.nodes, 1.0))
    }
}

/// Nonlinear heat equation on `[0, 1]^2`:
/// `u_t = -mu0 L u - (mu0 mu1 / mu2)(exp(mu2 u) - 1) + cos(2 pi x) cos(2 pi y)`
/// with `L` the positive five-point operator `(4u_c - u_n - u_s - u_e - u_w)/h^2`,
/// zero Dirichlet boundary values, `u(x, y, 0) = 0` and `mu = (mu1, mu2)`.
///
/// States are stored row-major: index `k = iy * 51 + ix` for the node at
/// `(x, y) = (ix / 50, iy / 50)`.
#[derive(Debug, Clone)]
pub struct ConvDiff2D {
    domain: ParameterDomain,
    side: usize,
    h: f64,
    mu0: f64,
    forcing: Vec<f64>,
}

impl ConvDiff2D {
    pub const SIDE: usize = 51;
    pub const MU0: f64 = 0.01;
    pub const FINAL_TIME: f64 = 2.0;

    pub fn new() -> Self {
        Self::with_domain(ParameterDomain::new(vec![9.0, 9.0], vec![10.0, 10.0]).unwrap())
    }

    pub fn with_domain(domain: ParameterDomain) -> Self {
        let side = Self::SIDE;
        let h = 1.0 / (side - 1) as f64;
        let mut forcing = vec![0.0; side * side];
        for iy in 0..side {
            for ix in 0..side {
                forcing[iy * side + ix] =
                    (2.0 * PI * ix as f64 * h).cos() * (2.0 * PI * iy as f64 * h).cos();
            }
        }
        Self {
            domain,
            side,
            h,
            mu0: Self::MU0,
            forcing,
        }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.side + ix
    }

    pub fn coords(&self, k: usize) -> (f64, f64) {
        ((k % self.side) as f64 * self.h, (k / self.side) as f64 * self.h)
    }

    pub fn is_boundary(&self, k: usize) -> bool {
        let (ix, iy) = (k % self.side, k / self.side);
        ix == 0 || iy == 0 || ix == self.side - 1 || iy == self.side - 1
    }

    pub fn forcing(&self) -> &[f64] {
        &self.forcing
    }

    fn check_args(&self, u: &DVector<f64>, mu: &[f64]) -> Result<()> {
        check_len(u, self.side * self.side, "heat-equation state")?;
        self.domain.check(mu)?;
        ensure_finite(u.as_slice(), "heat-equation state")
    }
}

impl Default for ConvDiff2D {
    fn default() -> Self {
        Self::new()
    }
}

impl DynamicalSystem for ConvDiff2D {
    fn name(&self) -> &str {
        "convdiff"
    }

    fn dim(&self) -> usize {
        self.side * self.side
    }

    fn domain(&self) -> &ParameterDomain {
        &self.domain
    }

    fn velocity(&self, u: &DVector<f64>, _t: f64, mu: &[f64]) -> Result<DVector<f64>> {
        self.check_args(u, mu)?;
        let (mu1, mu2) = (mu[0], mu[1]);
        let s = self.side;
        let diff = self.mu0 / (self.h * self.h);
        let react = self.mu0 * mu1 / mu2;
        let mut out = DVector::zeros(s * s);
        for iy in 1..s - 1 {
            for ix in 1..s - 1 {
                let k = iy * s + ix;
                let lap = 4.0 * u[k] - u[k - 1] - u[k + 1] - u[k - s] - u[k + s];
                out[k] = -diff * lap - react * (mu2 * u[k]).exp_m1() + self.forcing[k];
            }
        }
        ensure_finite(out.as_slice(), "heat-equation velocity")?;
        Ok(out)
    }

    fn jacobian(&self, u: &DVector<f64>, _t: f64, mu: &[f64]) -> Result<CsrMatrix<f64>> {
        self.check_args(u, mu)?;
        let (mu1, mu2) = (mu[0], mu[1]);
        let s = self.side;
        let diff = self.mu0 / (self.h * self.h);
        let mut coo = CooMatrix::new(s * s, s * s);
        for iy in 1..s - 1 {
            for ix in 1..s - 1 {
                let k = iy * s + ix;
                coo.push(k, k - s, diff);
                coo.push(k, k - 1, diff);
                coo.push(k, k, -4.0 * diff - self.mu0 * mu1 * (mu2 * u[k]).exp());
                coo.push(k, k + 1, diff);
                coo.push(k, k + s, diff);
            }
        }
        Ok(CsrMatrix::from(&coo))
    }

    fn initial_state(&self, mu: &[f64]) -> Result<DVector<f64>> {
        self.domain.check(mu)?;
        Ok(DVector::zeros(self.side * self.side))
    }
}
