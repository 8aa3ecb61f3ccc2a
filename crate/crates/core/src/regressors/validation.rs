use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use super::{fit, FittedRegressor, Model, RegressorSpec};
use crate::error::{Error, Result};
use crate::sampling::TrainingSet;

/// `‖prediction − target‖ / ‖target‖` over the stacked rows of `data`.
pub fn relative_error(model: &FittedRegressor, data: &TrainingSet) -> Result<f64> {
    let pred = model.predict_rows(&data.inputs)?;
    let denom = data.targets.norm();
    let num = (pred - &data.targets).norm();
    Ok(if denom > 0.0 { num / denom } else { num })
}

#[derive(Debug, Clone)]
pub struct ValidationEntry {
    pub spec: RegressorSpec,
    pub train_error: Option<f64>,
    pub valid_error: Option<f64>,
    pub fit_time: Duration,
    /// Why the fit failed, if it did.
    pub failure: Option<String>,
    /// Kernel coefficient amplification (VKOGA only); entries above
    /// [`MAX_AMPLIFICATION`] are never chosen.
    pub amplification: Option<f64>,
}

/// Largest admissible `max|alpha| / max|target|` for kernel models. Beyond
/// it, rounding in the kernel evaluations is amplified past the inner
/// solver tolerance and implicit steps stall.
pub const MAX_AMPLIFICATION: f64 = 1e6;

impl ValidationEntry {
    pub fn admissible(&self) -> bool {
        self.valid_error.is_some() && self.amplification.is_none_or(|a| a <= MAX_AMPLIFICATION)
    }
}

fn amplification(model: &FittedRegressor, data: &TrainingSet) -> Option<f64> {
    match &model.model {
        Model::Vkoga(v) => Some(v.coefficient_amplification(data.targets.amax())),
        _ => None,
    }
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub entries: Vec<ValidationEntry>,
    /// Index of the validation-error minimizer; the earliest entry wins ties.
    pub chosen: Option<usize>,
}

impl ValidationReport {
    pub fn chosen_spec(&self) -> Option<&RegressorSpec> {
        self.chosen.map(|i| &self.entries[i].spec)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "label",
            "train_error",
            "valid_error",
            "fit_seconds",
            "amplification",
            "chosen",
            "failure",
        ])?;
        for (i, e) in self.entries.iter().enumerate() {
            let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:e}"));
            w.write_record([
                e.spec.label(),
                opt(e.train_error),
                opt(e.valid_error),
                format!("{:.6}", e.fit_time.as_secs_f64()),
                opt(e.amplification),
                (self.chosen == Some(i)).to_string(),
                e.failure.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Fits every spec on `train` and scores it on both sets. A failing fit is
/// recorded and the sweep continues. The chosen entry minimizes the
/// validation error among admissible entries; the earliest wins ties.
pub fn cross_validate(specs: &[RegressorSpec], train: &TrainingSet, valid: &TrainingSet) -> Result<ValidationReport> {
    if train.is_empty() || valid.is_empty() {
        return Err(Error::arg("cross-validation needs nonempty training and validation sets"));
    }
    let entries: Vec<ValidationEntry> = specs
        .par_iter()
        .map(|spec| {
            let start = Instant::now();
            let scored = fit(spec, train)
                .and_then(|m| Ok((relative_error(&m, train)?, relative_error(&m, valid)?, amplification(&m, train))));
            let fit_time = start.elapsed();
            match scored {
                Ok((tr, va, amp)) => ValidationEntry {
                    spec: spec.clone(),
                    train_error: Some(tr),
                    valid_error: Some(va),
                    fit_time,
                    failure: None,
                    amplification: amp,
                },
                Err(e) => ValidationEntry {
                    spec: spec.clone(),
                    train_error: None,
                    valid_error: None,
                    fit_time,
                    failure: Some(e.to_string()),
                    amplification: None,
                },
            }
        })
        .collect();
    let mut chosen: Option<usize> = None;
    for (i, e) in entries.iter().enumerate().filter(|(_, e)| e.admissible()) {
        if let Some(v) = e.valid_error {
            if chosen.is_none_or(|c| v < entries[c].valid_error.unwrap_or(f64::INFINITY)) {
                chosen = Some(i);
            }
        }
    }
    Ok(ValidationReport { entries, chosen })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningPoint {
    pub size: usize,
    pub train_error: f64,
    pub valid_error: f64,
}

/// Fits on the first `size` rows of `data` for each size.
pub fn learning_curve(
    spec: &RegressorSpec,
    data: &TrainingSet,
    sizes: &[usize],
    valid: &TrainingSet,
) -> Result<Vec<LearningPoint>> {
    if let Some(&s) = sizes.iter().find(|&&s| s == 0 || s > data.len()) {
        return Err(Error::arg(format!("learning-curve size {s} outside 1..={}", data.len())));
    }
    sizes
        .par_iter()
        .map(|&size| {
            let head = data.head(size);
            let model = fit(spec, &head)?;
            Ok(LearningPoint {
                size,
                train_error: relative_error(&model, &head)?,
                valid_error: relative_error(&model, valid)?,
            })
        })
        .collect()
}

pub fn write_learning_curve(points: &[LearningPoint], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["size", "train_error", "valid_error"])?;
    for p in points {
        w.write_record([p.size.to_string(), format!("{:e}", p.train_error), format!("{:e}", p.valid_error)])?;
    }
    w.flush()?;
    Ok(())
}
