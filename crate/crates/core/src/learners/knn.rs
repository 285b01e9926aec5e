//! Brute-force k-nearest-neighbor regression on standardized features.

use ndarray::{Array1, Array2, ArrayView1};

use crate::learners::{Dataset, Standardizer};

#[derive(Debug, Clone)]
pub(crate) struct KnnModel {
    standardizer: Standardizer,
    x: Array2<f64>,
    y: Array1<f64>,
    k: usize,
}

pub(crate) fn fit(train: &Dataset, k: usize) -> KnnModel {
    let k = if k > train.n() {
        log::warn!("knn: k = {k} exceeds the {} training rows, clamping", train.n());
        train.n()
    } else {
        k
    };
    let standardizer = Standardizer::fit(&train.features());
    let x = standardizer.transform(&train.features());
    KnnModel { standardizer, x, y: train.responses().to_owned(), k }
}

impl KnnModel {
    /// Mean response of the k nearest rows under Euclidean distance, ties
    /// broken by the lowest row index.
    pub(crate) fn predict(&self, query: &ArrayView1<'_, f64>) -> f64 {
        let q = self.standardizer.transform_row(query);
        let mut dist: Vec<(f64, usize)> = self
            .x
            .rows()
            .into_iter()
            .enumerate()
            .map(|(i, row)| {
                let d2: f64 = row.iter().zip(q.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                (d2, i)
            })
            .collect();
        dist.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        dist.iter().take(self.k).map(|&(_, i)| self.y[i]).sum::<f64>() / self.k as f64
    }
}
