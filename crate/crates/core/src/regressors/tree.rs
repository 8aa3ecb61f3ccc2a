use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

/// Growth limits for one regression tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Features examined per split; the full set when `>= dim`.
    pub max_features: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf { value: Vec<f64> },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// Vector-valued CART regression tree; samples with `x[feature] <=
/// threshold` go left.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
    pub outputs: usize,
}

/// Borrowed training table (row-major).
pub struct Table<'a> {
    pub inputs: &'a [f64],
    pub dim: usize,
    pub targets: &'a [f64],
    pub outputs: usize,
}

impl Table<'_> {
    fn x(&self, i: usize, f: usize) -> f64 {
        self.inputs[i * self.dim + f]
    }

    fn y(&self, i: usize) -> &[f64] {
        &self.targets[i * self.outputs..(i + 1) * self.outputs]
    }

    fn mean(&self, samples: &[usize]) -> Vec<f64> {
        let mut m = vec![0.0; self.outputs];
        for &i in samples {
            for (a, b) in m.iter_mut().zip(self.y(i)) {
                *a += b;
            }
        }
        let inv = 1.0 / samples.len() as f64;
        m.iter_mut().for_each(|v| *v *= inv);
        m
    }
}

impl Tree {
    /// Grows a tree on `samples` (indices into `table`, repeats allowed).
    pub fn fit(table: &Table<'_>, samples: Vec<usize>, params: &TreeParams, rng: &mut ChaCha8Rng) -> Tree {
        let mut nodes = Vec::new();
        let mut stack = vec![(samples, 0usize, usize::MAX, false)];
        let min_leaf = params.min_leaf.max(1);
        let mut features: Vec<usize> = (0..table.dim).collect();
        while let Some((samples, depth, parent, is_left)) = stack.pop() {
            let id = nodes.len();
            let can_split = params.max_depth.is_none_or(|d| depth < d) && samples.len() >= 2 * min_leaf;
            let split = if can_split {
                let pool = if params.max_features < table.dim {
                    features.shuffle(rng);
                    &features[..params.max_features.max(1)]
                } else {
                    features.sort_unstable();
                    &features[..]
                };
                best_split(table, &samples, pool, min_leaf)
            } else {
                None
            };
            match split {
                Some((feature, threshold)) => {
                    let (left, right): (Vec<usize>, Vec<usize>) =
                        samples.iter().partition(|&&i| table.x(i, feature) <= threshold);
                    nodes.push(Node::Split {
                        feature,
                        threshold,
                        left: usize::MAX,
                        right: usize::MAX,
                    });
                    stack.push((right, depth + 1, id, false));
                    stack.push((left, depth + 1, id, true));
                }
                None => nodes.push(Node::Leaf {
                    value: table.mean(&samples),
                }),
            }
            if parent != usize::MAX {
                if let Node::Split { left, right, .. } = &mut nodes[parent] {
                    if is_left {
                        *left = id;
                    } else {
                        *right = id;
                    }
                }
            }
        }
        Tree {
            nodes,
            outputs: table.outputs,
        }
    }

    pub fn leaf_index(&self, z: &[f64]) -> usize {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Leaf { .. } => return id,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if z[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn leaf_value(&self, z: &[f64]) -> &[f64] {
        match &self.nodes[self.leaf_index(z)] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!("leaf_index returns leaves"),
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], id: usize) -> usize {
            match &nodes[id] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Split maximizing the summed-over-outputs variance reduction; ties keep
/// the first feature in `pool` order and the leftmost position.
fn best_split(table: &Table<'_>, samples: &[usize], pool: &[usize], min_leaf: usize) -> Option<(usize, f64)> {
    let m = samples.len();
    let q = table.outputs;
    let mut total = vec![0.0; q];
    for &i in samples {
        for (t, y) in total.iter_mut().zip(table.y(i)) {
            *t += y;
        }
    }
    let parent: f64 = total.iter().map(|t| t * t).sum::<f64>() / m as f64;
    let mut best_score = parent + 1e-12 * parent.abs().max(1e-300);
    let mut best = None;
    let mut order = samples.to_vec();
    let mut left = vec![0.0; q];
    for &f in pool {
        order.sort_by(|&a, &b| table.x(a, f).total_cmp(&table.x(b, f)).then(a.cmp(&b)));
        left.iter_mut().for_each(|v| *v = 0.0);
        for p in 1..m {
            let prev = order[p - 1];
            for (l, y) in left.iter_mut().zip(table.y(prev)) {
                *l += y;
            }
            if p < min_leaf || m - p < min_leaf {
                continue;
            }
            let (xa, xb) = (table.x(prev, f), table.x(order[p], f));
            if xa >= xb {
                continue;
            }
            let nl = p as f64;
            let nr = (m - p) as f64;
            let score: f64 = left
                .iter()
                .zip(&total)
                .map(|(l, t)| l * l / nl + (t - l) * (t - l) / nr)
                .sum();
            if score > best_score {
                best_score = score;
                let mid = 0.5 * (xa + xb);
                best = Some((f, if mid < xb { mid } else { xa }));
            }
        }
    }
    best
}
