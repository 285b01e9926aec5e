//! CART regression tree with variance-reduction splits.
//!
//! A node is split on the (feature, threshold) pair that minimizes the summed
//! within-child squared error, provided both children keep at least
//! `min_leaf` rows and the split strictly reduces the node's squared error.
//! Leaves predict their response mean. The same builder serves the random
//! forest, which passes a feature subsample size and an RNG.

use ndarray::{ArrayView1, ArrayView2};
use rand_chacha::ChaCha8Rng;

use crate::learners::Dataset;
use crate::seeding;

#[derive(Debug, Clone)]
enum Node {
    Leaf { value: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// A fitted regression tree. Exposed so forest members can be inspected.
#[derive(Debug, Clone)]
pub struct TreeModel {
    nodes: Vec<Node>,
}

impl TreeModel {
    pub fn predict(&self, x: &ArrayView1<'_, f64>) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right } => {
                    at = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    /// Number of rows in the smallest leaf; used to verify the min_leaf
    /// contract from outside.
    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

pub(crate) struct BuildParams {
    pub(crate) min_leaf: usize,
    pub(crate) max_depth: usize,
    /// Features examined per split; `None` means all of them.
    pub(crate) mtry: Option<usize>,
}

pub(crate) fn fit(train: &Dataset, min_leaf: usize, max_depth: usize) -> TreeModel {
    let rows: Vec<usize> = (0..train.n()).collect();
    build(
        &train.features(),
        &train.responses(),
        rows,
        &BuildParams { min_leaf, max_depth, mtry: None },
        &mut seeding::rng(0),
    )
}

pub(crate) fn build(
    x: &ArrayView2<'_, f64>,
    y: &ArrayView1<'_, f64>,
    rows: Vec<usize>,
    params: &BuildParams,
    rng: &mut ChaCha8Rng,
) -> TreeModel {
    let mut nodes = Vec::new();
    grow(x, y, rows, params, rng, &mut nodes, 0);
    TreeModel { nodes }
}

fn grow(
    x: &ArrayView2<'_, f64>,
    y: &ArrayView1<'_, f64>,
    rows: Vec<usize>,
    params: &BuildParams,
    rng: &mut ChaCha8Rng,
    nodes: &mut Vec<Node>,
    depth: usize,
) -> usize {
    let n = rows.len();
    let sum: f64 = rows.iter().map(|&r| y[r]).sum();
    let mean = sum / n as f64;

    let id = nodes.len();
    nodes.push(Node::Leaf { value: mean });

    if depth >= params.max_depth || n < 2 * params.min_leaf {
        return id;
    }
    let sum2: f64 = rows.iter().map(|&r| y[r] * y[r]).sum();
    let node_sse = (sum2 - sum * sum / n as f64).max(0.0);
    if node_sse <= 0.0 {
        return id;
    }

    let candidates = candidate_features(x.ncols(), params.mtry, rng);
    let Some(split) = best_split(x, y, &rows, &candidates, params.min_leaf, node_sse) else {
        return id;
    };

    let (mut left_rows, mut right_rows) = (Vec::new(), Vec::new());
    for &r in &rows {
        if x[[r, split.feature]] <= split.threshold {
            left_rows.push(r);
        } else {
            right_rows.push(r);
        }
    }
    let left = grow(x, y, left_rows, params, rng, nodes, depth + 1);
    let right = grow(x, y, right_rows, params, rng, nodes, depth + 1);
    nodes[id] = Node::Split { feature: split.feature, threshold: split.threshold, left, right };
    id
}

fn candidate_features(d: usize, mtry: Option<usize>, rng: &mut ChaCha8Rng) -> Vec<usize> {
    match mtry {
        None => (0..d).collect(),
        Some(m) if m >= d => (0..d).collect(),
        Some(m) => seeding::sample_without_replacement(d, m, rng),
    }
}

struct SplitChoice {
    feature: usize,
    threshold: f64,
}

fn best_split(
    x: &ArrayView2<'_, f64>,
    y: &ArrayView1<'_, f64>,
    rows: &[usize],
    features: &[usize],
    min_leaf: usize,
    node_sse: f64,
) -> Option<SplitChoice> {
    let n = rows.len();
    let mut best_cost = node_sse;
    let mut best: Option<SplitChoice> = None;

    let mut order: Vec<(f64, f64)> = Vec::with_capacity(n);
    for &feature in features {
        order.clear();
        order.extend(rows.iter().map(|&r| (x[[r, feature]], y[r])));
        order.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());

        let total_sum: f64 = order.iter().map(|&(_, v)| v).sum();
        let total_sum2: f64 = order.iter().map(|&(_, v)| v * v).sum();
        let mut left_sum = 0.0;
        let mut left_sum2 = 0.0;
        for p in 1..n {
            let (xv, yv) = order[p - 1];
            left_sum += yv;
            left_sum2 += yv * yv;
            if p < min_leaf || n - p < min_leaf {
                continue;
            }
            if xv == order[p].0 {
                continue; // cannot separate equal feature values
            }
            let nl = p as f64;
            let nr = (n - p) as f64;
            let right_sum = total_sum - left_sum;
            let right_sum2 = total_sum2 - left_sum2;
            let cost = (left_sum2 - left_sum * left_sum / nl).max(0.0)
                + (right_sum2 - right_sum * right_sum / nr).max(0.0);
            if cost < best_cost {
                best_cost = cost;
                best = Some(SplitChoice { feature, threshold: 0.5 * (xv + order[p].0) });
            }
        }
    }
    best
}
