//! Latin-hypercube maximin designs over the joint `(x̂, t, mu)` box and the
//! regression datasets built from them.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integration::{backward_euler_step, InnerSolver};
use crate::reduction::GalerkinRom;
use crate::system::ParameterDomain;

pub const DEFAULT_TRAINING_SIZE: usize = 1000;
pub const DEFAULT_VALIDATION_SIZE: usize = 500;
pub const DEFAULT_CANDIDATE_ROUNDS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LhsConfig {
    pub count: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub candidate_rounds: usize,
    pub seed: u64,
}

impl LhsConfig {
    pub fn new(count: usize, lower: Vec<f64>, upper: Vec<f64>, seed: u64) -> Self {
        Self {
            count,
            lower,
            upper,
            candidate_rounds: DEFAULT_CANDIDATE_ROUNDS,
            seed,
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    fn validate(&self) -> Result<()> {
        if self.count < 1 {
            return Err(Error::arg("LHS count must be at least 1"));
        }
        if self.candidate_rounds < 1 {
            return Err(Error::arg("LHS needs at least one candidate round"));
        }
        ParameterDomain::new(self.lower.clone(), self.upper.clone())?;
        Ok(())
    }
}

/// Winning design plus the scores of every candidate it beat.
#[derive(Debug, Clone)]
pub struct LhsDesign {
    /// One point per row.
    pub points: DMatrix<f64>,
    pub score: f64,
    pub round: usize,
    pub candidate_scores: Vec<f64>,
}

/// Random Latin design: in each coordinate the `count` points occupy the
/// `count` equal-width strata exactly once, jittered uniformly inside.
fn latin_design(cfg: &LhsConfig, round: usize) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(round as u64);
    let n = cfg.count;
    let mut points = DMatrix::zeros(n, cfg.dim());
    let mut strata: Vec<usize> = (0..n).collect();
    for k in 0..cfg.dim() {
        strata.shuffle(&mut rng);
        let (lo, hi) = (cfg.lower[k], cfg.upper[k]);
        for (i, &s) in strata.iter().enumerate() {
            let u: f64 = rng.random();
            points[(i, k)] = lo + (hi - lo) * (s as f64 + u) / n as f64;
        }
    }
    points
}

/// Minimum pairwise Euclidean distance after scaling every coordinate of
/// the box to `[0, 1]` (degenerate coordinates are ignored).
pub fn maximin_score(points: &DMatrix<f64>, lower: &[f64], upper: &[f64]) -> f64 {
    let (n, d) = points.shape();
    if n < 2 {
        return f64::INFINITY;
    }
    let unit = unit_rows(points, lower, upper);
    let mut best = f64::INFINITY;
    for i in 0..n {
        let a = &unit[i * d..(i + 1) * d];
        for j in i + 1..n {
            let b = &unit[j * d..(j + 1) * d];
            let mut s = 0.0;
            for k in 0..d {
                let diff = a[k] - b[k];
                s += diff * diff;
            }
            best = best.min(s);
        }
    }
    best.sqrt()
}

fn unit_rows(points: &DMatrix<f64>, lower: &[f64], upper: &[f64]) -> Vec<f64> {
    let (n, d) = points.shape();
    let mut out = vec![0.0; n * d];
    for k in 0..d {
        let w = upper[k] - lower[k];
        for i in 0..n {
            out[i * d + k] = if w > 0.0 {
                (points[(i, k)] - lower[k]) / w
            } else {
                0.0
            };
        }
    }
    out
}

/// Best of `candidate_rounds` random Latin designs under the maximin
/// criterion; ties go to the lowest round.
pub fn lhs_maximin(cfg: &LhsConfig) -> Result<LhsDesign> {
    cfg.validate()?;
    let scored: Vec<(DMatrix<f64>, f64)> = (0..cfg.candidate_rounds)
        .into_par_iter()
        .map(|round| {
            let design = latin_design(cfg, round);
            let score = maximin_score(&design, &cfg.lower, &cfg.upper);
            (design, score)
        })
        .collect();
    let candidate_scores: Vec<f64> = scored.iter().map(|(_, s)| *s).collect();
    let mut round = 0;
    for (r, &s) in candidate_scores.iter().enumerate() {
        if s > candidate_scores[round] {
            round = r;
        }
    }
    let score = candidate_scores[round];
    let points = scored.into_iter().nth(round).map(|(p, _)| p).unwrap_or_default();
    Ok(LhsDesign {
        points,
        score,
        round,
        candidate_scores,
    })
}

/// Componentwise bounding box of reduced states (one state per column),
/// widened on each side by `inflate` times its width.
pub fn state_box(reduced: &DMatrix<f64>, inflate: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if reduced.ncols() == 0 {
        return Err(Error::arg("state box needs at least one reduced state"));
    }
    let mut lower = Vec::with_capacity(reduced.nrows());
    let mut upper = Vec::with_capacity(reduced.nrows());
    for row in reduced.row_iter() {
        let lo = row.min();
        let hi = row.max();
        let width = hi - lo;
        let pad = if width > 0.0 {
            inflate * width
        } else {
            inflate * lo.abs().max(1.0)
        };
        lower.push(lo - pad);
        upper.push(hi + pad);
    }
    Ok((lower, upper))
}

/// Joint `(x̂, t, mu)` box from a state box, the time horizon and the
/// parameter domain.
pub fn joint_box(
    state_lower: &[f64],
    state_upper: &[f64],
    t_final: f64,
    domain: &ParameterDomain,
) -> (Vec<f64>, Vec<f64>) {
    let mut lower = state_lower.to_vec();
    let mut upper = state_upper.to_vec();
    lower.push(0.0);
    upper.push(t_final);
    lower.extend_from_slice(domain.lower());
    upper.extend_from_slice(domain.upper());
    (lower, upper)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetMode {
    /// Target is the reduced velocity.
    Velocity,
    /// Target is the reduced state one implicit Euler step later.
    FlowMap,
}

/// Regression dataset: inputs `(x̂, t, mu)` and targets in `R^n`, one
/// sample per row.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub inputs: DMatrix<f64>,
    pub targets: DMatrix<f64>,
    pub n_state: usize,
    pub n_param: usize,
    pub mode: TargetMode,
}

impl TrainingSet {
    pub fn new(
        inputs: DMatrix<f64>,
        targets: DMatrix<f64>,
        n_state: usize,
        mode: TargetMode,
    ) -> Result<Self> {
        if inputs.nrows() != targets.nrows() {
            return Err(Error::arg(format!(
                "{} input rows but {} target rows",
                inputs.nrows(),
                targets.nrows()
            )));
        }
        if inputs.ncols() < n_state + 1 {
            return Err(Error::arg("inputs must hold the reduced state and time"));
        }
        Ok(Self {
            n_param: inputs.ncols() - n_state - 1,
            inputs,
            targets,
            n_state,
            mode,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.nrows() == 0
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.targets.ncols()
    }

    /// The first `size` rows.
    pub fn head(&self, size: usize) -> Self {
        let size = size.min(self.len());
        Self {
            inputs: self.inputs.rows(0, size).into_owned(),
            targets: self.targets.rows(0, size).into_owned(),
            ..self.clone()
        }
    }

    pub fn header(&self) -> Vec<String> {
        let mut cols: Vec<String> = (0..self.n_state).map(|i| format!("xhat_{i}")).collect();
        cols.push("t".into());
        cols.extend((0..self.n_param).map(|i| format!("mu_{i}")));
        cols.extend((0..self.output_dim()).map(|i| format!("target_{i}")));
        cols
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(self.header())?;
        for i in 0..self.len() {
            let row = self
                .inputs
                .row(i)
                .iter()
                .chain(self.targets.row(i).iter())
                .map(|v| format!("{v:e}"))
                .collect::<Vec<_>>();
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a CSV written by [`TrainingSet::write_csv`].
    pub fn read_csv(path: &Path, mode: TargetMode) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let header = r.headers()?.clone();
        let n_state = header.iter().filter(|h| h.starts_with("xhat_")).count();
        let n_param = header.iter().filter(|h| h.starts_with("mu_")).count();
        let n_out = header.iter().filter(|h| h.starts_with("target_")).count();
        let d = n_state + 1 + n_param;
        if header.len() != d + n_out || header.get(n_state) != Some("t") {
            return Err(Error::format(path, "unexpected training-set header"));
        }
        let mut values = Vec::new();
        let mut rows = 0;
        for record in r.records() {
            let record = record?;
            for field in record.iter() {
                values.push(
                    field
                        .trim()
                        .parse::<f64>()
                        .map_err(|e| Error::format(path, format!("row {rows}: {e}")))?,
                );
            }
            rows += 1;
        }
        let all = DMatrix::from_row_slice(rows, d + n_out, &values);
        Self::new(
            all.columns(0, d).into_owned(),
            all.columns(d, n_out).into_owned(),
            n_state,
            mode,
        )
    }
}

/// Evaluates the Galerkin ROM at every design point.
///
/// In flow-map mode each target is one Newton backward-Euler step of size
/// `dt` taken from the sampled `(x̂, t)`.
pub fn build_training_set(
    rom: &GalerkinRom<'_>,
    points: &DMatrix<f64>,
    mode: TargetMode,
    dt: Option<f64>,
) -> Result<TrainingSet> {
    let n = rom.n_modes();
    let p = rom.system().domain().dim();
    if points.ncols() != n + 1 + p {
        return Err(Error::arg(format!(
            "design has {} columns, expected {} (state {n}, time, {p} parameters)",
            points.ncols(),
            n + 1 + p
        )));
    }
    let dt = match (mode, dt) {
        (TargetMode::FlowMap, Some(dt)) if dt > 0.0 => dt,
        (TargetMode::FlowMap, _) => return Err(Error::arg("flow-map targets need a positive dt")),
        (TargetMode::Velocity, _) => 0.0,
    };
    let rows: Vec<DVector<f64>> = (0..points.nrows())
        .into_par_iter()
        .map(|i| {
            let row = points.row(i);
            let xhat = DVector::from_iterator(n, row.iter().take(n).copied());
            let t = row[n];
            let mu: Vec<f64> = row.iter().skip(n + 1).copied().collect();
            match mode {
                TargetMode::Velocity => rom.velocity(&xhat, t, &mu),
                TargetMode::FlowMap => {
                    backward_euler_step(rom, &xhat, t + dt, dt, &mu, InnerSolver::Newton, 1e-10, 50, i)
                        .map(|(y, _)| y)
                }
            }
        })
        .collect::<Result<_>>()?;
    let mut targets = DMatrix::zeros(points.nrows(), n);
    for (i, r) in rows.iter().enumerate() {
        targets.set_row(i, &r.transpose());
    }
    TrainingSet::new(points.clone(), targets, n, mode)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_cfg(count: usize, dim: usize, seed: u64) -> LhsConfig {
        LhsConfig::new(count, vec![0.0; dim], vec![1.0; dim], seed)
    }

    fn is_latin(points: &DMatrix<f64>, lower: &[f64], upper: &[f64]) -> bool {
        let n = points.nrows();
        (0..points.ncols()).all(|k| {
            let mut seen = vec![false; n];
            for i in 0..n {
                let u = (points[(i, k)] - lower[k]) / (upper[k] - lower[k]);
                let s = ((u * n as f64).floor() as usize).min(n - 1);
                if seen[s] {
                    return false;
                }
                seen[s] = true;
            }
            true
        })
    }

    #[test]
    fn four_points_fill_each_quartile() {
        let design = lhs_maximin(&unit_cfg(4, 2, 7)).unwrap();
        assert_eq!(design.points.nrows(), 4);
        assert!(is_latin(&design.points, &[0.0, 0.0], &[1.0, 1.0]));
    }

    #[test]
    fn two_points_land_in_opposite_corner_strata() {
        let mut cfg = unit_cfg(2, 2, 3);
        cfg.candidate_rounds = 500;
        let design = lhs_maximin(&cfg).unwrap();
        let stratum = |v: f64| (v >= 0.5) as usize;
        let p = &design.points;
        assert_ne!(stratum(p[(0, 0)]), stratum(p[(1, 0)]));
        assert_ne!(stratum(p[(0, 1)]), stratum(p[(1, 1)]));
        // Brute force over every candidate the call generated.
        for round in 0..cfg.candidate_rounds {
            let cand = latin_design(&cfg, round);
            let d = (cand.row(0) - cand.row(1)).norm();
            assert!(d <= design.score + 1e-15);
        }
    }

    #[test]
    fn winner_scores_at_least_every_candidate() {
        let design = lhs_maximin(&unit_cfg(30, 3, 11)).unwrap();
        assert!(design.candidate_scores.iter().all(|&s| s <= design.score));
        assert_eq!(design.candidate_scores[design.round], design.score);
        let first_best = design
            .candidate_scores
            .iter()
            .position(|&s| s == design.score)
            .unwrap();
        assert_eq!(first_best, design.round);
    }

    #[test]
    fn design_is_deterministic_and_seed_dependent() {
        let a = lhs_maximin(&unit_cfg(50, 4, 1)).unwrap();
        let b = lhs_maximin(&unit_cfg(50, 4, 1)).unwrap();
        let c = lhs_maximin(&unit_cfg(50, 4, 2)).unwrap();
        assert_eq!(a.points, b.points);
        assert_ne!(a.points, c.points);
    }

    #[test]
    fn rejects_empty_design() {
        assert!(lhs_maximin(&unit_cfg(0, 2, 1)).is_err());
        assert!(lhs_maximin(&LhsConfig::new(3, vec![1.0], vec![0.0], 1)).is_err());
    }

    #[test]
    fn state_box_inflates_by_width() {
        let reduced = DMatrix::from_row_slice(2, 3, &[0.0, 1.0, 2.0, -1.0, -1.0, -1.0]);
        let (lo, hi) = state_box(&reduced, 0.1).unwrap();
        assert_eq!(lo, vec![-0.2, -1.1]);
        assert_eq!(hi, vec![2.2, -0.9]);
    }

    #[test]
    fn joint_box_layout() {
        let domain = ParameterDomain::new(vec![1.5, 0.02], vec![2.0, 0.025]).unwrap();
        let (lo, hi) = joint_box(&[-1.0], &[1.0], 25.0, &domain);
        assert_eq!(lo, vec![-1.0, 0.0, 1.5, 0.02]);
        assert_eq!(hi, vec![1.0, 25.0, 2.0, 0.025]);
    }

    #[test]
    fn csv_round_trip() {
        let inputs = DMatrix::from_row_slice(2, 4, &[0.1, 0.2, 0.5, 1.7, -3.0, 1e-9, 0.25, 1.6]);
        let targets = DMatrix::from_row_slice(2, 2, &[1.0 / 3.0, -2.0, 7.5e10, 0.0]);
        let set = TrainingSet::new(inputs, targets, 2, TargetMode::Velocity).unwrap();
        assert_eq!(set.n_param, 1);
        assert_eq!(set.header(), ["xhat_0", "xhat_1", "t", "mu_0", "target_0", "target_1"]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("set.csv");
        set.write_csv(&path).unwrap();
        assert_eq!(TrainingSet::read_csv(&path, TargetMode::Velocity).unwrap(), set);
    }
}
