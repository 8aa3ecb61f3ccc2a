//! Plain-text model files: a family tag, the regressor settings as an inline TOML table,
//! the dimensions, then named matrices (`matrix <name> <rows> <cols>`
//! followed by one whitespace-separated line per row).

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::ensemble::{BoostingModel, ForestModel};
use super::knn::KnnModel;
use super::scaling::{row_major, InputScaler};
use super::sindy::{SindyModel, Term};
use super::svr::{SvrModel, SvrOutput};
use super::tree::{Node, Tree};
use super::vkoga::VkogaModel;
use super::{FittedRegressor, Model, RegressorSpec};
use crate::error::{Error, Result};

const MAGIC: &str = "nirom-model";

#[derive(Serialize, Deserialize)]
struct SpecLine {
    spec: RegressorSpec,
}

fn spec_line(spec: &RegressorSpec) -> Result<String> {
    let body = toml::to_string(spec).map_err(|e| Error::arg(format!("cannot encode spec: {e}")))?;
    let fields: Vec<&str> = body.lines().filter(|l| !l.trim().is_empty()).collect();
    Ok(format!("spec = {{ {} }}", fields.join(", ")))
}

fn push_matrix(out: &mut String, name: &str, m: &DMatrix<f64>) {
    let _ = writeln!(out, "matrix {name} {} {}", m.nrows(), m.ncols());
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
}

fn from_rows(data: &[f64], cols: usize) -> DMatrix<f64> {
    let rows = if cols == 0 { 0 } else { data.len() / cols };
    DMatrix::from_row_slice(rows, cols, data)
}

fn tree_matrix(tree: &Tree) -> DMatrix<f64> {
    let q = tree.outputs;
    let mut m = DMatrix::zeros(tree.nodes.len(), 4 + q);
    for (i, node) in tree.nodes.iter().enumerate() {
        match node {
            Node::Leaf { value } => {
                m[(i, 0)] = -1.0;
                for (o, v) in value.iter().enumerate() {
                    m[(i, 4 + o)] = *v;
                }
            }
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                m[(i, 0)] = *feature as f64;
                m[(i, 1)] = *threshold;
                m[(i, 2)] = *left as f64;
                m[(i, 3)] = *right as f64;
            }
        }
    }
    m
}

fn tree_from_matrix(m: &DMatrix<f64>) -> Tree {
    let q = m.ncols() - 4;
    let nodes = m
        .row_iter()
        .map(|r| {
            if r[0] < 0.0 {
                Node::Leaf {
                    value: (0..q).map(|o| r[4 + o]).collect(),
                }
            } else {
                Node::Split {
                    feature: r[0] as usize,
                    threshold: r[1],
                    left: r[2] as usize,
                    right: r[3] as usize,
                }
            }
        })
        .collect();
    Tree { nodes, outputs: q }
}

/// Serializes a fitted model to the text format.
pub fn encode(model: &FittedRegressor) -> Result<String> {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC} {}", model.spec.family());
    let _ = writeln!(out, "{}", spec_line(&model.spec)?);
    let _ = writeln!(out, "dims {} {}", model.input_dim, model.output_dim);
    let scaler = DMatrix::from_fn(2, model.input_dim, |r, c| {
        if r == 0 {
            model.scaler.lower[c]
        } else {
            model.scaler.width[c]
        }
    });
    push_matrix(&mut out, "scaler", &scaler);
    match &model.model {
        Model::Knn(m) => {
            push_matrix(&mut out, "inputs", &from_rows(&m.inputs, m.dim));
            push_matrix(&mut out, "targets", &from_rows(&m.targets, m.outputs));
        }
        Model::Sindy(m) => {
            let names: Vec<String> = m.terms.iter().map(Term::name).collect();
            let _ = writeln!(out, "terms {}", names.join(" "));
            push_matrix(&mut out, "theta", &m.theta);
        }
        Model::Vkoga(m) => {
            push_matrix(&mut out, "centers", &from_rows(&m.centers, m.dim));
            push_matrix(&mut out, "alpha", &m.alpha);
            let sel: Vec<f64> = m.selected.iter().map(|&i| i as f64).collect();
            push_matrix(&mut out, "selected", &DMatrix::from_row_slice(1, sel.len(), &sel));
            push_matrix(
                &mut out,
                "greedy",
                &DMatrix::from_row_slice(1, m.greedy_residuals.len(), &m.greedy_residuals),
            );
        }
        Model::Forest(m) => {
            for (k, t) in m.trees.iter().enumerate() {
                push_matrix(&mut out, &format!("tree_{k}"), &tree_matrix(t));
            }
        }
        Model::Boosting(m) => {
            push_matrix(&mut out, "initial", &DMatrix::from_row_slice(1, m.initial.len(), &m.initial));
            for (k, t) in m.learners.iter().enumerate() {
                push_matrix(&mut out, &format!("tree_{k}"), &tree_matrix(t));
            }
        }
        Model::Svr(m) => {
            for (o, s) in m.outputs.iter().enumerate() {
                push_matrix(&mut out, &format!("support_{o}"), &from_rows(&s.support, m.dim));
                push_matrix(&mut out, &format!("coef_{o}"), &DMatrix::from_row_slice(1, s.coef.len(), &s.coef));
                push_matrix(&mut out, &format!("bias_{o}"), &DMatrix::from_element(1, 1, s.bias));
            }
        }
    }
    Ok(out)
}

struct Reader<'a> {
    lines: std::iter::Peekable<std::str::Lines<'a>>,
    path: &'a Path,
}

impl Reader<'_> {
    fn fail<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::format(self.path, msg))
    }

    fn line(&mut self, what: &str) -> Result<&str> {
        match self.lines.next() {
            Some(l) => Ok(l),
            None => self.fail(format!("unexpected end of file, expected {what}")),
        }
    }

    fn at_matrix(&mut self) -> bool {
        self.lines.peek().is_some_and(|l| l.starts_with("matrix "))
    }

    fn matrix(&mut self, name: &str) -> Result<DMatrix<f64>> {
        let path = self.path;
        let head = self.line(name)?.to_string();
        let parts: Vec<&str> = head.split_whitespace().collect();
        if parts.len() != 4 || parts[0] != "matrix" || parts[1] != name {
            return self.fail(format!("expected matrix `{name}`, found `{head}`"));
        }
        let parse_dim = |s: &str| s.parse::<usize>().map_err(|e| Error::format(path, format!("{name}: {e}")));
        let (rows, cols) = (parse_dim(parts[2])?, parse_dim(parts[3])?);
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            let line = self.line(name)?.to_string();
            let before = data.len();
            for tok in line.split_whitespace() {
                data.push(
                    tok.parse::<f64>()
                        .map_err(|e| Error::format(path, format!("{name} row {r}: {e}")))?,
                );
            }
            if data.len() - before != cols {
                return self.fail(format!("{name} row {r} has {} values, expected {cols}", data.len() - before));
            }
        }
        Ok(DMatrix::from_row_slice(rows, cols, &data))
    }
}

fn parse_term(s: &str) -> Option<Term> {
    if s == "1" {
        return Some(Term::Constant);
    }
    let idx = |p: &str| p.strip_prefix('z')?.parse::<usize>().ok();
    match s.split_once('*') {
        Some((a, b)) => Some(Term::Quadratic(idx(a)?, idx(b)?)),
        None => Some(Term::Linear(idx(s)?)),
    }
}

/// Parses the text format; `path` is only used in error messages.
pub fn decode(text: &str, path: &Path) -> Result<FittedRegressor> {
    let mut r = Reader {
        lines: text.lines().peekable(),
        path,
    };
    let magic = r.line("header")?;
    let family = match magic.strip_prefix(MAGIC) {
        Some(f) => f.trim().to_string(),
        None => return r.fail("not a model file"),
    };
    let spec_text = r.line("spec")?.to_string();
    let spec = toml::from_str::<SpecLine>(&spec_text)
        .map_err(|e| Error::format(path, format!("bad spec line: {e}")))?
        .spec;
    if spec.family() != family {
        return r.fail(format!("family tag {family} does not match spec {}", spec.family()));
    }
    let dims = r.line("dims")?.to_string();
    let nums: Vec<usize> = dims
        .strip_prefix("dims")
        .unwrap_or("")
        .split_whitespace()
        .filter_map(|t| t.parse().ok())
        .collect();
    let [input_dim, output_dim] = nums[..] else {
        return r.fail(format!("bad dims line `{dims}`"));
    };
    let sc = r.matrix("scaler")?;
    let scaler = InputScaler {
        lower: sc.row(0).iter().copied().collect(),
        width: sc.row(1).iter().copied().collect(),
    };
    let model = match spec {
        RegressorSpec::Knn { k } => {
            let inputs = r.matrix("inputs")?;
            let targets = r.matrix("targets")?;
            Model::Knn(KnnModel::fit(k, input_dim, output_dim, row_major(&inputs), row_major(&targets))?)
        }
        RegressorSpec::Sindy { .. } => {
            let line = r.line("terms")?.to_string();
            let terms = line
                .strip_prefix("terms")
                .unwrap_or("")
                .split_whitespace()
                .map(|t| parse_term(t).ok_or_else(|| Error::format(path, format!("bad term `{t}`"))))
                .collect::<Result<Vec<_>>>()?;
            Model::Sindy(SindyModel {
                terms,
                theta: r.matrix("theta")?,
            })
        }
        RegressorSpec::Vkoga { gamma, .. } => {
            let centers = r.matrix("centers")?;
            let alpha = r.matrix("alpha")?;
            let selected = r.matrix("selected")?.iter().map(|v| *v as usize).collect();
            let greedy_residuals = r.matrix("greedy")?.iter().copied().collect();
            Model::Vkoga(VkogaModel::new(
                gamma,
                input_dim,
                row_major(&centers),
                alpha,
                selected,
                greedy_residuals,
            ))
        }
        RegressorSpec::Forest { trees, .. } => Model::Forest(ForestModel {
            trees: (0..trees)
                .map(|k| r.matrix(&format!("tree_{k}")).map(|m| tree_from_matrix(&m)))
                .collect::<Result<_>>()?,
        }),
        RegressorSpec::Boosting {
            learners,
            learning_rate,
            ..
        } => {
            let initial = r.matrix("initial")?.iter().copied().collect();
            Model::Boosting(BoostingModel {
                initial,
                learning_rate,
                learners: (0..learners)
                    .map(|k| r.matrix(&format!("tree_{k}")).map(|m| tree_from_matrix(&m)))
                    .collect::<Result<_>>()?,
            })
        }
        RegressorSpec::Svr { kernel, gamma, .. } => {
            let mut outputs = Vec::with_capacity(output_dim);
            for o in 0..output_dim {
                let support = row_major(&r.matrix(&format!("support_{o}"))?);
                let coef = r.matrix(&format!("coef_{o}"))?.iter().copied().collect();
                let bias = r.matrix(&format!("bias_{o}"))?[(0, 0)];
                outputs.push(SvrOutput { support, coef, bias });
            }
            Model::Svr(SvrModel {
                kernel,
                gamma,
                dim: input_dim,
                outputs,
            })
        }
    };
    if r.at_matrix() {
        return r.fail("trailing matrices after the model payload");
    }
    Ok(FittedRegressor {
        spec,
        scaler,
        input_dim,
        output_dim,
        model,
    })
}

pub fn save(model: &FittedRegressor, path: &Path) -> Result<()> {
    std::fs::write(path, encode(model)?)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<FittedRegressor> {
    decode(&std::fs::read_to_string(path)?, path)
}
