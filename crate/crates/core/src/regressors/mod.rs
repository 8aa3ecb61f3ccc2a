//! Regression surrogates for the reduced velocity `f_r(x̂, t; mu)`.
//!
//! Every family consumes inputs `z = (x̂, t, mu)` scaled to `[0, 1]^d` by the
//! training box and predicts a vector in `R^n`. SINDy, VKOGA and SVR are
//! differentiable and expose analytic Jacobians; kNN and the tree ensembles
//! are not and can only drive explicit or fixed-point integration.

pub mod ensemble;
pub mod knn;
pub mod persist;
pub mod scaling;
pub mod sindy;
pub mod svr;
pub mod tree;
pub mod validation;
pub mod vkoga;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integration::{Rhs, TrajectoryResult};
use crate::linalg::Jacobian;
use crate::sampling::TrainingSet;
use crate::system::{ensure_finite, TimeGrid};

pub use ensemble::{BoostingModel, ForestModel};
pub use knn::KnnModel;
pub use scaling::InputScaler;
pub use sindy::SindyModel;
pub use svr::{SvrKernel, SvrModel};
pub use validation::{
    cross_validate, learning_curve, relative_error, LearningPoint, ValidationEntry, ValidationReport, MAX_AMPLIFICATION,
};
pub use vkoga::VkogaModel;

fn yes() -> bool {
    true
}

fn default_min_leaf() -> usize {
    1
}

fn default_tol() -> f64 {
    1e-8
}

/// Family tag plus hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum RegressorSpec {
    Knn {
        k: usize,
    },
    Sindy {
        degree: usize,
        /// Ridge weight of every least-squares solve.
        #[serde(default)]
        alpha: f64,
        /// STLS threshold.
        threshold: f64,
        #[serde(default = "yes")]
        intercept: bool,
        #[serde(default = "yes")]
        scale_inputs: bool,
    },
    Vkoga {
        gamma: f64,
        centers: usize,
    },
    Forest {
        trees: usize,
        #[serde(default)]
        max_depth: Option<usize>,
        #[serde(default = "default_min_leaf")]
        min_leaf: usize,
        /// Features per split; a third of the inputs when absent.
        #[serde(default)]
        max_features: Option<usize>,
        #[serde(default)]
        seed: u64,
    },
    Boosting {
        learners: usize,
        learning_rate: f64,
        depth: usize,
    },
    Svr {
        kernel: SvrKernel,
        epsilon: f64,
        c_box: f64,
        #[serde(default)]
        gamma: f64,
        #[serde(default = "default_tol")]
        tol: f64,
    },
}

impl RegressorSpec {
    pub fn knn(k: usize) -> Self {
        Self::Knn { k }
    }

    pub fn sindy(degree: usize, threshold: f64) -> Self {
        Self::Sindy {
            degree,
            alpha: 0.0,
            threshold,
            intercept: true,
            scale_inputs: true,
        }
    }

    pub fn vkoga(gamma: f64, centers: usize) -> Self {
        Self::Vkoga { gamma, centers }
    }

    pub fn forest(trees: usize, seed: u64) -> Self {
        Self::Forest {
            trees,
            max_depth: None,
            min_leaf: 1,
            max_features: None,
            seed,
        }
    }

    pub fn boosting(learners: usize) -> Self {
        Self::Boosting {
            learners,
            learning_rate: 0.1,
            depth: 3,
        }
    }

    pub fn svr(kernel: SvrKernel, epsilon: f64, gamma: f64) -> Self {
        Self::Svr {
            kernel,
            epsilon,
            c_box: 1e3,
            gamma,
            tol: 1e-8,
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            Self::Knn { .. } => "knn",
            Self::Sindy { .. } => "sindy",
            Self::Vkoga { .. } => "vkoga",
            Self::Forest { .. } => "forest",
            Self::Boosting { .. } => "boosting",
            Self::Svr { .. } => "svr",
        }
    }

    /// Short name used in reports and file names.
    pub fn label(&self) -> String {
        match self {
            Self::Knn { k } => format!("knn_k{k}"),
            Self::Sindy { degree, threshold, .. } => format!("sindy{degree}_thr{threshold:e}"),
            Self::Vkoga { gamma, centers } => format!("vkoga_{centers}_g{gamma:e}"),
            Self::Forest { trees, .. } => format!("forest_{trees}"),
            Self::Boosting { learners, .. } => format!("boosting_{learners}"),
            Self::Svr { kernel, epsilon, .. } => format!("svr_{}_eps{epsilon:e}", kernel.as_str()),
        }
    }

    pub fn differentiable(&self) -> bool {
        matches!(self, Self::Sindy { .. } | Self::Vkoga { .. } | Self::Svr { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::arg(format!("{}: {what}", self.label())));
        match *self {
            Self::Knn { k } if k == 0 => bad("K must be at least 1"),
            Self::Sindy { degree, .. } if !(1..=2).contains(&degree) => bad("library degree must be 1 or 2"),
            Self::Sindy { alpha, threshold, .. } if !(alpha >= 0.0 && threshold >= 0.0) => {
                bad("alpha and threshold must be nonnegative")
            }
            Self::Vkoga { gamma, centers } if !(gamma > 0.0) || centers == 0 => {
                bad("needs a positive width and at least one center")
            }
            Self::Forest {
                trees,
                min_leaf,
                max_features,
                ..
            } if trees == 0 || min_leaf == 0 || max_features == Some(0) => bad("counts must be at least 1"),
            Self::Boosting {
                learners,
                learning_rate,
                depth,
            } if learners == 0 || depth == 0 || !(learning_rate > 0.0) => {
                bad("needs learners, depth >= 1 and a positive learning rate")
            }
            Self::Svr {
                kernel,
                epsilon,
                c_box,
                gamma,
                tol,
            } if !(epsilon >= 0.0 && c_box > 0.0 && tol > 0.0) || (kernel == SvrKernel::Rbf && !(gamma > 0.0)) => {
                bad("needs epsilon >= 0, C > 0, tol > 0 and a positive rbf width")
            }
            _ => Ok(()),
        }
    }
}

/// Family-specific fitted payload.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Knn(KnnModel),
    Sindy(SindyModel),
    Vkoga(VkogaModel),
    Forest(ForestModel),
    Boosting(BoostingModel),
    Svr(SvrModel),
}

/// A trained regressor with fixed input and output dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedRegressor {
    pub spec: RegressorSpec,
    pub scaler: InputScaler,
    pub input_dim: usize,
    pub output_dim: usize,
    pub model: Model,
}

/// Trains `spec` on `data`; deterministic in `(spec, data)`.
pub fn fit(spec: &RegressorSpec, data: &TrainingSet) -> Result<FittedRegressor> {
    spec.validate()?;
    if data.is_empty() {
        return Err(Error::arg("cannot fit a regressor to an empty training set"));
    }
    let d = data.input_dim();
    let q = data.output_dim();
    let scaler = match spec {
        RegressorSpec::Sindy {
            scale_inputs: false, ..
        } => InputScaler::identity(d),
        _ => InputScaler::fit(&data.inputs),
    };
    let inputs = scaler.scale_rows(&data.inputs);
    let targets = scaling::row_major(&data.targets);
    let table = tree::Table {
        inputs: &inputs,
        dim: d,
        targets: &targets,
        outputs: q,
    };
    let model = match *spec {
        RegressorSpec::Knn { k } => Model::Knn(KnnModel::fit(k, d, q, inputs.clone(), targets.clone())?),
        RegressorSpec::Sindy {
            degree,
            alpha,
            threshold,
            intercept,
            ..
        } => {
            let terms = sindy::library_terms(d, degree, intercept);
            let lib = sindy::library_matrix(&terms, &inputs, d);
            let theta = sindy::stls(&lib, &data.targets, threshold, alpha)?;
            Model::Sindy(SindyModel { terms, theta })
        }
        RegressorSpec::Vkoga { gamma, centers } => {
            Model::Vkoga(vkoga::vkoga_fit(&inputs, &data.targets, d, gamma, centers.min(data.len()))?)
        }
        RegressorSpec::Forest {
            trees,
            max_depth,
            min_leaf,
            max_features,
            seed,
        } => {
            let params = tree::TreeParams {
                max_depth,
                min_leaf,
                max_features: max_features.unwrap_or((d / 3).max(1)),
            };
            Model::Forest(ForestModel::fit(&table, trees, &params, seed))
        }
        RegressorSpec::Boosting {
            learners,
            learning_rate,
            depth,
        } => Model::Boosting(BoostingModel::fit(&table, learners, learning_rate, depth)),
        RegressorSpec::Svr {
            kernel,
            epsilon,
            c_box,
            gamma,
            tol,
        } => {
            let settings = svr::SvrSettings {
                kernel,
                gamma,
                epsilon,
                c_box,
                tol,
                max_iter: 100_000.max(200 * data.len()),
            };
            Model::Svr(svr::svr_fit(&inputs, &data.targets, d, &settings)?)
        }
    };
    Ok(FittedRegressor {
        spec: spec.clone(),
        scaler,
        input_dim: d,
        output_dim: q,
        model,
    })
}

impl FittedRegressor {
    pub fn label(&self) -> String {
        self.spec.label()
    }

    pub fn differentiable(&self) -> bool {
        self.spec.differentiable()
    }

    fn check_input(&self, z: &[f64]) -> Result<()> {
        if z.len() == self.input_dim {
            Ok(())
        } else {
            Err(Error::arg(format!(
                "{} expects {} inputs, got {}",
                self.label(),
                self.input_dim,
                z.len()
            )))
        }
    }

    /// Prediction into a caller-provided buffer of length `output_dim`.
    pub fn predict_into(&self, z: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_input(z)?;
        let s = self.scaler.scale(z);
        match &self.model {
            Model::Knn(m) => m.predict(&s, out),
            Model::Sindy(m) => m.predict(&s, out),
            Model::Vkoga(m) => m.predict(&s, out),
            Model::Forest(m) => m.predict(&s, out),
            Model::Boosting(m) => m.predict(&s, out),
            Model::Svr(m) => m.predict(&s, out),
        }
        Ok(())
    }

    pub fn predict(&self, z: &[f64]) -> Result<DVector<f64>> {
        let mut out = DVector::zeros(self.output_dim);
        self.predict_into(z, out.as_mut_slice())?;
        Ok(out)
    }

    /// Predictions for every row of `inputs`, one output per row.
    pub fn predict_rows(&self, inputs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(inputs.nrows(), self.output_dim);
        let mut buf = vec![0.0; self.output_dim];
        let mut z = vec![0.0; inputs.ncols()];
        for i in 0..inputs.nrows() {
            for (k, v) in z.iter_mut().enumerate() {
                *v = inputs[(i, k)];
            }
            self.predict_into(&z, &mut buf)?;
            for (o, v) in buf.iter().enumerate() {
                out[(i, o)] = *v;
            }
        }
        Ok(out)
    }

    /// `output_dim x input_dim` derivative of the prediction with respect
    /// to the unscaled input.
    pub fn jacobian(&self, z: &[f64]) -> Result<DMatrix<f64>> {
        self.check_input(z)?;
        let s = self.scaler.scale(z);
        let mut jac = match &self.model {
            Model::Sindy(m) => m.jacobian(&s),
            Model::Vkoga(m) => m.jacobian(&s),
            Model::Svr(m) => m.jacobian(&s),
            _ => {
                return Err(Error::Capability {
                    model: self.label(),
                    alternative: "fixed_point",
                })
            }
        };
        for (k, w) in self.scaler.width.iter().enumerate() {
            jac.column_mut(k).scale_mut(1.0 / w);
        }
        Ok(jac)
    }

    pub fn in_training_box(&self, z: &[f64]) -> bool {
        self.scaler.contains(z)
    }
}

/// Reduced-order model whose velocity is a fitted regressor evaluated at
/// `(x̂, t, mu)`. Counts queries outside the training box.
pub struct Surrogate<'a> {
    model: &'a FittedRegressor,
    extrapolations: AtomicUsize,
}

impl<'a> Surrogate<'a> {
    pub fn new(model: &'a FittedRegressor) -> Self {
        Self {
            model,
            extrapolations: AtomicUsize::new(0),
        }
    }

    pub fn model(&self) -> &FittedRegressor {
        self.model
    }

    pub fn extrapolations(&self) -> usize {
        self.extrapolations.load(Ordering::Relaxed)
    }

    fn input(&self, x: &DVector<f64>, t: f64, mu: &[f64]) -> Result<Vec<f64>> {
        let mut z = Vec::with_capacity(self.model.input_dim);
        z.extend_from_slice(x.as_slice());
        z.push(t);
        z.extend_from_slice(mu);
        if z.len() != self.model.input_dim {
            return Err(Error::arg(format!(
                "state {} + time + {} parameters does not match model input {}",
                x.len(),
                mu.len(),
                self.model.input_dim
            )));
        }
        if !self.model.in_training_box(&z) {
            self.extrapolations.fetch_add(1, Ordering::Relaxed);
        }
        Ok(z)
    }
}

impl Rhs for Surrogate<'_> {
    fn dim(&self) -> usize {
        self.model.output_dim
    }

    fn eval(&self, x: &DVector<f64>, t: f64, mu: &[f64]) -> Result<DVector<f64>> {
        let z = self.input(x, t, mu)?;
        let mut out = DVector::zeros(self.model.output_dim);
        self.model.predict_into(&z, out.as_mut_slice())?;
        Ok(out)
    }

    fn jacobian(&self, x: &DVector<f64>, t: f64, mu: &[f64]) -> Result<Jacobian> {
        let z = self.input(x, t, mu)?;
        let full = self.model.jacobian(&z)?;
        Ok(Jacobian::Dense(full.columns(0, x.len()).into_owned()))
    }

    fn label(&self) -> String {
        self.model.label()
    }
}

/// Online solve of a flow-map surrogate: `x̂^{j+1} = g(x̂^j, t^j, mu)`,
/// recording every step. The grid step must equal the step the targets
/// were generated with.
pub fn iterate_flow_map(
    model: &FittedRegressor,
    x0: &DVector<f64>,
    grid: &TimeGrid,
    flow_dt: f64,
    mu: &[f64],
) -> Result<TrajectoryResult> {
    if (grid.dt() - flow_dt).abs() > 1e-9 * flow_dt {
        return Err(Error::arg(format!(
            "flow map was trained with step {flow_dt:e}, grid step is {:e}",
            grid.dt()
        )));
    }
    if x0.len() != model.output_dim || x0.len() + 1 + mu.len() != model.input_dim {
        return Err(Error::arg("initial state and parameters do not match the flow-map model"));
    }
    let n = x0.len();
    let mut states = DMatrix::zeros(n, grid.steps() + 1);
    states.set_column(0, x0);
    let mut z = vec![0.0; model.input_dim];
    z[n + 1..].copy_from_slice(mu);
    let mut next = vec![0.0; n];
    let start = Instant::now();
    for j in 0..grid.steps() {
        z[..n].copy_from_slice(states.column(j).as_slice());
        z[n] = grid.time(j);
        model.predict_into(&z, &mut next)?;
        ensure_finite(&next, "flow-map step").map_err(|_| Error::Divergence { step: j + 1 })?;
        states.column_mut(j + 1).copy_from_slice(&next);
    }
    Ok(TrajectoryResult {
        times: grid.times(),
        states,
        wall_time: start.elapsed(),
        inner_iterations: 0,
    })
}
