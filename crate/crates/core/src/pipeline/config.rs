use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integration::{InnerSolver, Integrator, STUDY_COUNTS};
use crate::problems::ProblemKind;
use crate::reduction::PodOptions;
use crate::regressors::RegressorSpec;
use crate::sampling::{TargetMode, DEFAULT_CANDIDATE_ROUNDS, DEFAULT_TRAINING_SIZE, DEFAULT_VALIDATION_SIZE};

/// Full description of one experiment, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemKind,
    /// Test parameter; the problem's standard test point when absent.
    #[serde(default)]
    pub test_mu: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
    /// Artifact root; `runs/<problem>` when absent.
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub snapshots: SnapshotConfig,
    #[serde(default)]
    pub pod: PodOptions,
    #[serde(default)]
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub models: Vec<ModelConfig>,
    #[serde(default)]
    pub integrators: Vec<IntegratorConfig>,
    #[serde(default)]
    pub study: StudyConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotConfig {
    pub nt: usize,
    pub integrator: Integrator,
}

impl Default for SnapshotConfig {
    fn default() -> Self {
        Self {
            nt: 800,
            integrator: Integrator::backward_euler(InnerSolver::Newton),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    pub training: usize,
    pub validation: usize,
    pub candidate_rounds: usize,
    /// Relative inflation of the reduced-state box on each side.
    pub inflate: f64,
    pub mode: TargetMode,
    /// Step of the flow-map targets.
    pub flow_dt: Option<f64>,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            training: DEFAULT_TRAINING_SIZE,
            validation: DEFAULT_VALIDATION_SIZE,
            candidate_rounds: DEFAULT_CANDIDATE_ROUNDS,
            inflate: 0.1,
            mode: TargetMode::Velocity,
            flow_dt: None,
        }
    }
}

/// One surrogate of the comparison. The online model uses `spec`; without
/// it, the validation-error minimizer of `sweep` is used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: String,
    #[serde(default)]
    pub spec: Option<RegressorSpec>,
    /// Candidates cross-validated and reported.
    #[serde(default)]
    pub sweep: Vec<RegressorSpec>,
    /// Training sizes for a learning curve of the online spec.
    #[serde(default)]
    pub learning_curve: Vec<usize>,
}

impl ModelConfig {
    /// Fixed hyperparameters, optionally with a reported sweep.
    pub fn fixed(name: &str, spec: RegressorSpec, sweep: Vec<RegressorSpec>) -> Self {
        Self {
            name: name.to_string(),
            spec: Some(spec),
            sweep,
            learning_curve: Vec::new(),
        }
    }

    /// Hyperparameters chosen by validation over `sweep`.
    pub fn selected(name: &str, sweep: Vec<RegressorSpec>) -> Self {
        Self {
            name: name.to_string(),
            spec: None,
            sweep,
            learning_curve: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    pub integrator: Integrator,
    pub nt: usize,
}

impl IntegratorConfig {
    pub fn new(integrator: Integrator, nt: usize) -> Self {
        Self { integrator, nt }
    }

    /// File-name label, e.g. `be_newton_nt800`.
    pub fn label(&self) -> String {
        format!("{}_nt{}", self.integrator.label(), self.nt)
    }

    /// Integrator of the full-order and Galerkin references for this
    /// configuration: Newton for any backward Euler variant.
    pub fn reference(&self) -> IntegratorConfig {
        let integrator = match self.integrator {
            Integrator::Rk4 => Integrator::Rk4,
            Integrator::BackwardEuler { tol, max_iter, .. } => Integrator::BackwardEuler {
                inner: InnerSolver::Newton,
                tol,
                max_iter,
            },
        };
        IntegratorConfig { integrator, nt: self.nt }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub counts: Vec<usize>,
    pub schemes: Vec<Integrator>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            counts: STUDY_COUNTS.to_vec(),
            schemes: vec![Integrator::Rk4, Integrator::backward_euler(InnerSolver::Newton)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Random state pairs of the Lipschitz estimate.
    pub lipschitz_pairs: usize,
    /// Each online solve is repeated this often and the fastest wall time
    /// is reported.
    pub timing_repeats: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            lipschitz_pairs: 1000,
            timing_repeats: 3,
        }
    }
}

pub const FOREST_SWEEP: [usize; 9] = [1, 5, 10, 15, 20, 25, 30, 40, 50];
pub const BOOSTING_SWEEP: [usize; 8] = [10, 20, 30, 40, 50, 60, 80, 100];
pub const KNN_SWEEP: [usize; 12] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12];

fn default_models(problem: ProblemKind) -> Vec<ModelConfig> {
    let curve = vec![50, 100, 200, 500, 1000];
    let mut sindy = ModelConfig::selected(
        "sindy",
        [0.0, 1e-4, 1e-3, 1e-2].iter().map(|&l| RegressorSpec::sindy(2, l)).collect(),
    );
    sindy.learning_curve = curve.clone();
    let mut vkoga = ModelConfig::selected(
        "vkoga",
        [1e-3, 3e-3, 1e-2, 3e-2, 0.1, 0.3, 1.0, 3.0]
            .iter()
            .map(|&g| RegressorSpec::vkoga(g, 500))
            .collect(),
    );
    vkoga.learning_curve = curve;
    let k = match problem {
        ProblemKind::Burgers => 6,
        ProblemKind::Convdiff => 4,
    };
    let knn = ModelConfig::fixed("knn", RegressorSpec::knn(k), KNN_SWEEP.map(RegressorSpec::knn).to_vec());
    let forest = ModelConfig::fixed(
        "forest",
        RegressorSpec::forest(15, 0),
        FOREST_SWEEP.iter().map(|&t| RegressorSpec::forest(t, 0)).collect(),
    );
    let boosting = ModelConfig::fixed(
        "boosting",
        RegressorSpec::boosting(40),
        BOOSTING_SWEEP.map(RegressorSpec::boosting).to_vec(),
    );
    vec![sindy, vkoga, knn, forest, boosting]
}

impl ExperimentConfig {
    /// Defaults for one problem: corner snapshots at `Nt = 800`, energy
    /// POD and 1000/500 LHS rows. kNN (K = 6 in 1D, 4 in 2D), forest (15
    /// trees) and boosting (40 learners) are fixed and their sweeps only
    /// reported; SINDy thresholds and VKOGA widths are chosen by
    /// validation. Both backward Euler variants and RK4 run at the verified
    /// steps.
    pub fn for_problem(problem: ProblemKind) -> Self {
        let rk4_nt = match problem {
            ProblemKind::Burgers => 400,
            ProblemKind::Convdiff => 200,
        };
        Self {
            problem,
            test_mu: None,
            seed: 0,
            output: None,
            snapshots: SnapshotConfig::default(),
            pod: PodOptions::default(),
            sampling: SamplingConfig::default(),
            models: default_models(problem),
            integrators: vec![
                IntegratorConfig::new(Integrator::backward_euler(InnerSolver::Newton), 800),
                IntegratorConfig::new(Integrator::backward_euler(InnerSolver::FixedPoint), 800),
                IntegratorConfig::new(Integrator::Rk4, rk4_nt),
            ],
            study: StudyConfig::default(),
            analysis: AnalysisConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let config: Self = toml::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::arg(format!("cannot encode config: {e}")))
    }

    pub fn test_parameter(&self) -> Vec<f64> {
        self.test_mu.clone().unwrap_or_else(|| self.problem.test_parameter())
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output
            .clone()
            .unwrap_or_else(|| PathBuf::from("runs").join(self.problem.as_str()))
    }

    pub fn validate(&self) -> Result<()> {
        let system = self.problem.build();
        system.domain().check(&self.test_parameter())?;
        if self.snapshots.nt == 0 {
            return Err(Error::arg("snapshot step count must be positive"));
        }
        if self.sampling.training == 0 || self.sampling.validation == 0 || self.sampling.candidate_rounds == 0 {
            return Err(Error::arg("sampling sizes and candidate rounds must be positive"));
        }
        if !(self.sampling.inflate >= 0.0) {
            return Err(Error::arg("state-box inflation must be nonnegative"));
        }
        if self.sampling.mode == TargetMode::FlowMap && !self.sampling.flow_dt.is_some_and(|dt| dt > 0.0) {
            return Err(Error::arg("flow-map sampling needs a positive flow_dt"));
        }
        let mut names = std::collections::HashSet::new();
        for m in &self.models {
            if m.spec.is_none() && m.sweep.is_empty() {
                return Err(Error::arg(format!("model `{}` needs a spec or a sweep", m.name)));
            }
            if m.name.is_empty() || !m.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(Error::arg(format!("model name `{}` must be a plain identifier", m.name)));
            }
            if m.name == "fom" || m.name == "galerkin" {
                return Err(Error::arg(format!("model name `{}` is reserved", m.name)));
            }
            if !names.insert(m.name.as_str()) {
                return Err(Error::arg(format!("model name `{}` used twice", m.name)));
            }
            for spec in m.spec.iter().chain(&m.sweep) {
                spec.validate()?;
            }
            if m.learning_curve.iter().any(|&s| s == 0 || s > self.sampling.training) {
                return Err(Error::arg(format!(
                    "learning-curve sizes of `{}` must lie in 1..={}",
                    m.name, self.sampling.training
                )));
            }
        }
        if self.integrators.iter().any(|i| i.nt == 0) {
            return Err(Error::arg("integrator step counts must be positive"));
        }
        if self.study.counts.len() < 2 {
            return Err(Error::arg("timestep study needs at least two counts"));
        }
        if self.analysis.timing_repeats == 0 {
            return Err(Error::arg("timing repeats must be at least 1"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        for p in [ProblemKind::Burgers, ProblemKind::Convdiff] {
            let c = ExperimentConfig::for_problem(p);
            c.validate().unwrap();
            let back = ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap();
            assert_eq!(back, c);
        }
    }

    #[test]
    fn minimal_file_gets_defaults() {
        let c = ExperimentConfig::from_toml("problem = \"burgers\"\n").unwrap();
        assert_eq!(c.test_parameter(), vec![1.8, 0.0232]);
        assert_eq!(c.sampling.training, 1000);
        assert_eq!(c.output_dir(), PathBuf::from("runs/burgers"));
    }

    #[test]
    fn hand_written_sections_parse() {
        let text = r#"
            problem = "convdiff"
            seed = 7
            test_mu = [9.2, 9.9]

            [pod]
            criterion = { modes = 4 }

            [[models]]
            name = "knn"
            sweep = [{ family = "knn", k = 3 }, { family = "knn", k = 4 }]

            [[models]]
            name = "forest"
            spec = { family = "forest", trees = 15 }

            [[integrators]]
            nt = 200
            integrator = { scheme = "rk4" }

            [[integrators]]
            nt = 800
            integrator = { scheme = "backward_euler", inner = "fixed_point" }
        "#;
        let c = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(c.models[0].sweep[1], RegressorSpec::knn(4));
        assert_eq!(c.models[0].spec, None);
        assert_eq!(c.models[1].spec, Some(RegressorSpec::forest(15, 0)));
        assert_eq!(c.integrators[1].label(), "be_fixed_point_nt800");
        assert_eq!(c.integrators[1].reference().label(), "be_newton_nt800");
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(ExperimentConfig::from_toml("problem = \"burgers\"\ntest_mu = [9.0, 9.0]\n").is_err());
        assert!(ExperimentConfig::from_toml("problem = \"heat\"\n").is_err());
        assert!(ExperimentConfig::from_toml("problem = \"burgers\"\nbogus = 1\n").is_err());
        let dup = "problem = \"burgers\"\n[[models]]\nname = \"a\"\nsweep = [{ family = \"knn\", k = 1 }]\n\
                   [[models]]\nname = \"a\"\nsweep = [{ family = \"knn\", k = 2 }]\n";
        assert!(ExperimentConfig::from_toml(dup).is_err());
        let zero = "problem = \"burgers\"\n[[models]]\nname = \"a\"\nspec = { family = \"knn\", k = 0 }\n";
        assert!(ExperimentConfig::from_toml(zero).is_err());
        let empty = "problem = \"burgers\"\n[[models]]\nname = \"a\"\n";
        assert!(ExperimentConfig::from_toml(empty).is_err());
        let reserved = "problem = \"burgers\"\n[[models]]\nname = \"galerkin\"\nspec = { family = \"knn\", k = 1 }\n";
        assert!(ExperimentConfig::from_toml(reserved).is_err());
    }
}
