//! Random forest: bootstrap resampling over rows, per-split feature
//! subsampling, fully grown member trees, mean-of-trees prediction.

use ndarray::ArrayView1;
use rand::Rng;

use crate::learners::tree::{self, BuildParams, TreeModel};
use crate::learners::Dataset;
use crate::seeding;

#[derive(Debug, Clone)]
pub struct ForestModel {
    trees: Vec<TreeModel>,
}

impl ForestModel {
    pub(crate) fn predict(&self, x: &ArrayView1<'_, f64>) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn trees(&self) -> &[TreeModel] {
        &self.trees
    }
}

pub(crate) fn fit(
    train: &Dataset,
    n_trees: usize,
    mtry: usize,
    min_leaf: usize,
    seed: u64,
) -> ForestModel {
    let n = train.n();
    let params = BuildParams { min_leaf, max_depth: usize::MAX, mtry: Some(mtry) };
    let trees = (0..n_trees)
        .map(|t| {
            let mut rng = seeding::rng(seeding::derive(seed, t as u64));
            let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            tree::build(&train.features(), &train.responses(), rows, &params, &mut rng)
        })
        .collect();
    ForestModel { trees }
}
