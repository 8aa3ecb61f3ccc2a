//! Non-intrusive reduced-order modelling: full-order benchmark problems,
//! POD and Galerkin projection, regression surrogates for the reduced
//! velocity, time integration, and error/runtime analysis.

pub mod analysis;
pub mod error;
pub mod integration;
pub mod io;
pub mod linalg;
pub mod pipeline;
pub mod problems;
pub mod reduction;
pub mod regressors;
pub mod sampling;
pub mod system;

pub use error::{Error, Result};
