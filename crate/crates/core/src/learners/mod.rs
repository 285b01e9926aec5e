//! Base regression machines behind a single fit/predict contract.
//!
//! Five self-contained learners: ridge and lasso (standardized features,
//! intercept by centering, penalty level tuned by internal 5-fold CV when not
//! given), brute-force kNN on standardized features, a CART regression tree
//! with variance-reduction splits, and a bootstrap random forest built from
//! the same tree code with per-split feature subsampling.
//!
//! Fitted learners are immutable; prediction is safe to call concurrently.

mod forest;
mod knn;
mod linear;
mod tree;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

pub use forest::ForestModel;
pub use tree::TreeModel;

// ============================================================================
// Dataset
// ============================================================================

/// Rows of (feature vector, response) pairs; the raw currency of training
/// and evaluation.
#[derive(Debug, Clone)]
pub struct Dataset {
    features: Array2<f64>,
    responses: Array1<f64>,
}

impl Dataset {
    pub fn new(features: Array2<f64>, responses: Array1<f64>) -> Result<Self> {
        if features.nrows() == 0 || features.ncols() == 0 {
            return Err(Error::InvalidArgument(format!(
                "dataset must have n >= 1 and d >= 1, got {} x {}",
                features.nrows(),
                features.ncols()
            )));
        }
        if features.nrows() != responses.len() {
            return Err(Error::DimensionMismatch {
                context: "dataset rows vs responses",
                expected: features.nrows(),
                got: responses.len(),
            });
        }
        if features.iter().any(|v| !v.is_finite()) || responses.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dataset entries"));
        }
        Ok(Dataset { features, responses })
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn responses(&self) -> ArrayView1<'_, f64> {
        self.responses.view()
    }

    /// New dataset made of the given rows, in the given order.
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidArgument("empty row subset".into()));
        }
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.n()) {
            return Err(Error::InvalidArgument(format!(
                "row index {bad} out of range for dataset of {} rows",
                self.n()
            )));
        }
        let features = self.features.select(Axis(0), rows);
        let responses = self.responses.select(Axis(0), rows);
        Ok(Dataset { features, responses })
    }
}

// ============================================================================
// Feature standardization
// ============================================================================

/// Zero-mean unit-variance scaling learned on training data and applied to
/// queries. Uses the population (1/n) variance; constant columns keep scale 1.
#[derive(Debug, Clone)]
pub(crate) struct Standardizer {
    mean: Array1<f64>,
    scale: Array1<f64>,
}

impl Standardizer {
    pub(crate) fn fit(x: &ArrayView2<'_, f64>) -> Self {
        let n = x.nrows() as f64;
        let mean = x.sum_axis(Axis(0)) / n;
        let mut scale = Array1::zeros(x.ncols());
        for (j, col) in x.axis_iter(Axis(1)).enumerate() {
            let m = mean[j];
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            scale[j] = if var > 0.0 { var.sqrt() } else { 1.0 };
        }
        Standardizer { mean, scale }
    }

    pub(crate) fn transform(&self, x: &ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = x.to_owned();
        for mut row in out.axis_iter_mut(Axis(0)) {
            for j in 0..row.len() {
                row[j] = (row[j] - self.mean[j]) / self.scale[j];
            }
        }
        out
    }

    pub(crate) fn transform_row(&self, x: &ArrayView1<'_, f64>) -> Array1<f64> {
        let mut out = Array1::zeros(x.len());
        for j in 0..x.len() {
            out[j] = (x[j] - self.mean[j]) / self.scale[j];
        }
        out
    }

    pub(crate) fn mean(&self) -> &Array1<f64> {
        &self.mean
    }

    pub(crate) fn scale(&self) -> &Array1<f64> {
        &self.scale
    }
}

// ============================================================================
// Learner configuration
// ============================================================================

/// Which machine to fit, with its hyperparameters. `lambda: None` means the
/// penalty is selected by internal 5-fold cross-validation over a 50-point
/// logarithmic grid in [1e-4, 1e2].
#[derive(Debug, Clone, PartialEq)]
pub enum LearnerKind {
    Ridge {
        lambda: Option<f64>,
    },
    Lasso {
        lambda: Option<f64>,
        tol: f64,
        max_iter: usize,
    },
    Knn {
        k: usize,
    },
    Tree {
        min_leaf: usize,
        max_depth: usize,
    },
    RandomForest {
        n_trees: usize,
        /// Features tried per split; `None` means ceil(d / 3).
        mtry: Option<usize>,
        min_leaf: usize,
        seed: u64,
    },
}

impl LearnerKind {
    pub fn ridge() -> Self {
        LearnerKind::Ridge { lambda: None }
    }

    pub fn lasso() -> Self {
        LearnerKind::Lasso { lambda: None, tol: 1e-7, max_iter: 10_000 }
    }

    pub fn knn(k: usize) -> Self {
        LearnerKind::Knn { k }
    }

    pub fn tree() -> Self {
        LearnerKind::Tree { min_leaf: 5, max_depth: 12 }
    }

    pub fn random_forest(n_trees: usize) -> Self {
        LearnerKind::RandomForest { n_trees, mtry: None, min_leaf: 5, seed: 0 }
    }

    /// Name used for config files and result-table columns.
    pub fn name(&self) -> &'static str {
        match self {
            LearnerKind::Ridge { .. } => "ridge",
            LearnerKind::Lasso { .. } => "lasso",
            LearnerKind::Knn { .. } => "knn",
            LearnerKind::Tree { .. } => "tree",
            LearnerKind::RandomForest { .. } => "rf",
        }
    }

    fn validate(&self, train: &Dataset) -> Result<()> {
        match *self {
            LearnerKind::Ridge { lambda } => {
                if let Some(l) = lambda {
                    if !(l >= 0.0 && l.is_finite()) {
                        return Err(Error::InvalidArgument(format!(
                            "ridge lambda must be finite and >= 0, got {l}"
                        )));
                    }
                }
            }
            LearnerKind::Lasso { lambda, tol, max_iter } => {
                if let Some(l) = lambda {
                    if !(l >= 0.0 && l.is_finite()) {
                        return Err(Error::InvalidArgument(format!(
                            "lasso lambda must be finite and >= 0, got {l}"
                        )));
                    }
                }
                if tol <= 0.0 || tol.is_nan() || max_iter == 0 {
                    return Err(Error::InvalidArgument(
                        "lasso needs tol > 0 and max_iter >= 1".into(),
                    ));
                }
            }
            LearnerKind::Knn { k } => {
                if k == 0 {
                    return Err(Error::InvalidArgument("knn needs k >= 1".into()));
                }
            }
            LearnerKind::Tree { min_leaf, .. } => {
                if min_leaf == 0 {
                    return Err(Error::InvalidArgument("tree needs min_leaf >= 1".into()));
                }
            }
            LearnerKind::RandomForest { n_trees, mtry, min_leaf, .. } => {
                if n_trees == 0 || min_leaf == 0 {
                    return Err(Error::InvalidArgument(
                        "random forest needs n_trees >= 1 and min_leaf >= 1".into(),
                    ));
                }
                if let Some(m) = mtry {
                    if m == 0 || m > train.dim() {
                        return Err(Error::InvalidArgument(format!(
                            "mtry must be in 1..=d, got {m} with d = {}",
                            train.dim()
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

// ============================================================================
// Fitted learner
// ============================================================================

#[derive(Debug, Clone)]
pub(crate) enum FittedModel {
    Linear(linear::LinearModel),
    Knn(knn::KnnModel),
    Tree(TreeModel),
    Forest(ForestModel),
}

/// A fitted base machine. Immutable; prediction is deterministic.
#[derive(Debug, Clone)]
pub struct BaseLearner {
    kind: LearnerKind,
    dim: usize,
    model: FittedModel,
}

impl BaseLearner {
    pub fn kind(&self) -> &LearnerKind {
        &self.kind
    }

    /// Training-space dimensionality this learner expects at prediction time.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Predicts the response at a single point.
    pub fn predict(&self, x: &ArrayView1<'_, f64>) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "predict input",
                expected: self.dim,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("predict input"));
        }
        Ok(match &self.model {
            FittedModel::Linear(m) => m.predict(x),
            FittedModel::Knn(m) => m.predict(x),
            FittedModel::Tree(m) => m.predict(x),
            FittedModel::Forest(m) => m.predict(x),
        })
    }

    /// Raw-scale linear coefficients `(slopes, intercept)` for ridge and
    /// lasso fits, such that the prediction at x is `intercept + slopes . x`.
    pub fn linear_coefficients(&self) -> Option<(Array1<f64>, f64)> {
        match &self.model {
            FittedModel::Linear(m) => Some(m.raw_coefficients()),
            _ => None,
        }
    }

    /// The member trees of a random-forest fit (empty for other learners).
    pub fn member_trees(&self) -> &[TreeModel] {
        match &self.model {
            FittedModel::Forest(m) => m.trees(),
            _ => &[],
        }
    }

    /// The penalty level actually used by a ridge or lasso fit (the config
    /// value, or the CV choice when the config left it unset).
    pub fn fitted_lambda(&self) -> Option<f64> {
        match &self.model {
            FittedModel::Linear(m) => Some(m.lambda()),
            _ => None,
        }
    }
}

/// Fits a base machine on the training data. `seed` fixes every source of
/// randomness in the fit (forest bootstraps and feature draws, internal CV
/// fold assignment); fitting never mutates `train`.
pub fn fit(kind: &LearnerKind, train: &Dataset, seed: u64) -> Result<BaseLearner> {
    kind.validate(train)?;
    let model = match *kind {
        LearnerKind::Ridge { lambda } => {
            FittedModel::Linear(linear::fit_ridge(train, lambda, seed)?)
        }
        LearnerKind::Lasso { lambda, tol, max_iter } => {
            FittedModel::Linear(linear::fit_lasso(train, lambda, tol, max_iter, seed)?)
        }
        LearnerKind::Knn { k } => FittedModel::Knn(knn::fit(train, k)),
        LearnerKind::Tree { min_leaf, max_depth } => {
            FittedModel::Tree(tree::fit(train, min_leaf, max_depth))
        }
        LearnerKind::RandomForest { n_trees, mtry, min_leaf, seed: kind_seed } => {
            let mtry = mtry.unwrap_or_else(|| train.dim().div_ceil(3));
            FittedModel::Forest(forest::fit(
                train,
                n_trees,
                mtry,
                min_leaf,
                kind_seed.wrapping_add(seed),
            ))
        }
    };
    Ok(BaseLearner { kind: kind.clone(), dim: train.dim(), model })
}

/// Predictions of every learner at every point: row i holds
/// `(r_1(x_i), ..., r_M(x_i))` with column order following `learners`.
pub fn predict_all(
    learners: &[BaseLearner],
    points: &ArrayView2<'_, f64>,
) -> Result<Array2<f64>> {
    if learners.is_empty() {
        return Err(Error::InvalidArgument("empty learner list".into()));
    }
    let dim = learners[0].dim;
    if let Some(l) = learners.iter().find(|l| l.dim != dim) {
        return Err(Error::DimensionMismatch {
            context: "learner ensemble dimensionality",
            expected: dim,
            got: l.dim,
        });
    }
    let mut out = Array2::zeros((points.nrows(), learners.len()));
    for (i, point) in points.axis_iter(Axis(0)).enumerate() {
        for (m, learner) in learners.iter().enumerate() {
            out[[i, m]] = learner.predict(&point)?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn line_dataset() -> Dataset {
        // y = 2 x + 1, 20 noiseless points
        let xs: Vec<f64> = (0..20).map(|i| -1.0 + 0.1 * i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        Dataset::new(
            Array2::from_shape_vec((20, 1), xs).unwrap(),
            Array1::from_vec(ys),
        )
        .unwrap()
    }

    #[test]
    fn ridge_without_penalty_recovers_the_line() {
        let data = line_dataset();
        let learner = fit(&LearnerKind::Ridge { lambda: Some(0.0) }, &data, 0).unwrap();
        let (slopes, intercept) = learner.linear_coefficients().unwrap();
        assert_abs_diff_eq!(slopes[0], 2.0, epsilon = 1e-8);
        assert_abs_diff_eq!(intercept, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn ridge_with_huge_penalty_predicts_the_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = Array2::from_shape_fn((30, 3), |_| rng.random_range(-1.0..1.0));
        let y = Array1::from_shape_fn(30, |_| rng.random_range(-2.0..2.0));
        let mean_y = y.mean().unwrap();
        let data = Dataset::new(x, y).unwrap();
        let learner = fit(&LearnerKind::Ridge { lambda: Some(1e12) }, &data, 0).unwrap();
        let p = learner.predict(&array![0.3, -0.4, 0.9].view()).unwrap();
        assert_abs_diff_eq!(p, mean_y, epsilon = 1e-9);
    }

    #[test]
    fn lasso_above_lambda_max_zeroes_every_coefficient() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let x = Array2::from_shape_fn((25, 4), |_| rng.random_range(-1.0..1.0));
        let y = Array1::from_shape_fn(25, |i| x[[i, 0]] - 0.5 * x[[i, 2]]);
        let data = Dataset::new(x.clone(), y.clone()).unwrap();

        // lambda_max on the standardized design, computed independently.
        let std = Standardizer::fit(&x.view());
        let xs = std.transform(&x.view());
        let yc = &y - y.mean().unwrap();
        let n = x.nrows() as f64;
        let lambda_max = (0..x.ncols())
            .map(|j| xs.column(j).dot(&yc).abs() / n)
            .fold(0.0f64, f64::max);

        let kind = LearnerKind::Lasso {
            lambda: Some(lambda_max * 1.0001),
            tol: 1e-9,
            max_iter: 10_000,
        };
        let learner = fit(&kind, &data, 0).unwrap();
        let (slopes, intercept) = learner.linear_coefficients().unwrap();
        for s in slopes.iter() {
            assert_abs_diff_eq!(*s, 0.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(intercept, y.mean().unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn knn_with_k_one_memorizes_training_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = Array2::from_shape_fn((40, 3), |_| rng.random_range(-1.0..1.0));
        let y = Array1::from_shape_fn(40, |_| rng.random_range(-1.0..1.0));
        let data = Dataset::new(x.clone(), y.clone()).unwrap();
        let learner = fit(&LearnerKind::Knn { k: 1 }, &data, 0).unwrap();
        for i in 0..data.n() {
            let p = learner.predict(&x.row(i)).unwrap();
            assert_eq!(p, y[i]);
        }
    }

    #[test]
    fn knn_clamps_k_to_the_sample_size() {
        let data = line_dataset();
        let learner = fit(&LearnerKind::Knn { k: 500 }, &data, 0).unwrap();
        // With k clamped to n the prediction is the global mean.
        let p = learner.predict(&array![0.0].view()).unwrap();
        assert_abs_diff_eq!(p, data.responses().mean().unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn knn_matches_a_brute_force_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 200;
        let d = 4;
        let x = Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0));
        let y = Array1::from_shape_fn(n, |_| rng.random_range(-3.0..3.0));
        let data = Dataset::new(x.clone(), y.clone()).unwrap();
        let k = 7;
        let learner = fit(&LearnerKind::Knn { k }, &data, 0).unwrap();

        // Independent oracle: population-sd standardization, full distance
        // scan, ties broken by the lowest row index.
        let mean = x.sum_axis(Axis(0)) / n as f64;
        let sd = Array1::from_shape_fn(d, |j| {
            let v = x.column(j).iter().map(|v| (v - mean[j]).powi(2)).sum::<f64>() / n as f64;
            if v > 0.0 { v.sqrt() } else { 1.0 }
        });
        for _ in 0..25 {
            let q = Array1::from_shape_fn(d, |_| rng.random_range(-1.0..1.0));
            let mut dists: Vec<(f64, usize)> = (0..n)
                .map(|i| {
                    let d2: f64 = (0..d)
                        .map(|j| {
                            let a = (x[[i, j]] - mean[j]) / sd[j];
                            let b = (q[j] - mean[j]) / sd[j];
                            (a - b) * (a - b)
                        })
                        .sum();
                    (d2, i)
                })
                .collect();
            dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let expected: f64 = dists.iter().take(k).map(|&(_, i)| y[i]).sum::<f64>() / k as f64;
            let got = learner.predict(&q.view()).unwrap();
            assert_abs_diff_eq!(got, expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn tree_on_constant_responses_is_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Array2::from_shape_fn((50, 2), |_| rng.random_range(-1.0..1.0));
        let y = Array1::from_elem(50, 4.25);
        let data = Dataset::new(x, y).unwrap();
        let learner = fit(&LearnerKind::tree(), &data, 0).unwrap();
        for _ in 0..10 {
            let q = array![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            assert_eq!(learner.predict(&q.view()).unwrap(), 4.25);
        }
    }

    #[test]
    fn tree_and_forest_predictions_stay_in_the_response_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = Array2::from_shape_fn((80, 3), |_| rng.random_range(-1.0..1.0));
        let y = Array1::from_shape_fn(80, |i| x[[i, 0]] * 2.0 + rng.random_range(-0.1f64..0.1));
        let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
        let data = Dataset::new(x, y).unwrap();
        for kind in [LearnerKind::tree(), LearnerKind::random_forest(20)] {
            let learner = fit(&kind, &data, 17).unwrap();
            for _ in 0..30 {
                let q = Array1::from_shape_fn(3, |_| rng.random_range(-3.0..3.0));
                let p = learner.predict(&q.view()).unwrap();
                assert!(p >= lo && p <= hi, "{} out of [{lo}, {hi}]: {p}", kind.name());
            }
        }
    }

    #[test]
    fn forest_is_deterministic_under_a_fixed_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let x: Array2<f64> = Array2::from_shape_fn((60, 4), |_| rng.random_range(-1.0..1.0));
        let y: Array1<f64> = Array1::from_shape_fn(60, |i| x[[i, 1]].sin() + x[[i, 3]]);
        let data = Dataset::new(x, y).unwrap();
        let kind = LearnerKind::RandomForest { n_trees: 1, mtry: None, min_leaf: 5, seed: 9 };
        let a = fit(&kind, &data, 123).unwrap();
        let b = fit(&kind, &data, 123).unwrap();
        for _ in 0..20 {
            let q = Array1::from_shape_fn(4, |_| rng.random_range(-1.0..1.0));
            assert_eq!(a.predict(&q.view()).unwrap(), b.predict(&q.view()).unwrap());
        }
    }

    #[test]
    fn forest_prediction_is_the_mean_of_its_member_trees() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let x: Array2<f64> = Array2::from_shape_fn((50, 3), |_| rng.random_range(-1.0..1.0));
        let y: Array1<f64> = Array1::from_shape_fn(50, |i| x[[i, 0]] - x[[i, 2]].powi(2));
        let data = Dataset::new(x, y).unwrap();
        let learner = fit(&LearnerKind::random_forest(15), &data, 4).unwrap();
        let trees = learner.member_trees();
        assert_eq!(trees.len(), 15);
        for _ in 0..20 {
            let q = Array1::from_shape_fn(3, |_| rng.random_range(-1.0..1.0));
            let by_hand: f64 =
                trees.iter().map(|t| t.predict(&q.view())).sum::<f64>() / trees.len() as f64;
            assert_abs_diff_eq!(learner.predict(&q.view()).unwrap(), by_hand, epsilon = 1e-12);
        }
    }

    #[test]
    fn predict_rejects_wrong_dimensions() {
        let data = line_dataset();
        let learner = fit(&LearnerKind::knn(3), &data, 0).unwrap();
        assert!(matches!(
            learner.predict(&array![0.0, 1.0].view()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn predict_all_has_the_contract_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let x = Array2::from_shape_fn((30, 2), |_| rng.random_range(-1.0..1.0));
        let y: Array1<f64> = Array1::from_shape_fn(30, |i| x[[i, 0]] + x[[i, 1]]);
        let data = Dataset::new(x, y).unwrap();

        let single = vec![fit(&LearnerKind::knn(3), &data, 0).unwrap()];
        let pts = Array2::from_shape_fn((1, 2), |_| 0.25);
        let m = predict_all(&single, &pts.view()).unwrap();
        assert_eq!(m.shape(), &[1, 1]);
        assert_eq!(m[[0, 0]], single[0].predict(&pts.row(0)).unwrap());

        let learners: Vec<BaseLearner> = [
            LearnerKind::ridge(),
            LearnerKind::lasso(),
            LearnerKind::knn(3),
            LearnerKind::tree(),
            LearnerKind::random_forest(5),
        ]
        .iter()
        .map(|kind| fit(kind, &data, 1).unwrap())
        .collect();
        let pts = Array2::from_shape_fn((10, 2), |_| rng.random_range(-1.0..1.0));
        let m = predict_all(&learners, &pts.view()).unwrap();
        assert_eq!(m.shape(), &[10, 5]);
        for (col, learner) in learners.iter().enumerate() {
            for i in 0..10 {
                assert_eq!(m[[i, col]], learner.predict(&pts.row(i)).unwrap());
            }
        }

        assert!(predict_all(&[], &pts.view()).is_err());
    }

    #[test]
    fn predict_all_commutes_with_row_permutations() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let x: Array2<f64> = Array2::from_shape_fn((25, 2), |_| rng.random_range(-1.0..1.0));
        let y: Array1<f64> = Array1::from_shape_fn(25, |i| x[[i, 0]].cos());
        let data = Dataset::new(x, y).unwrap();
        let learners = vec![
            fit(&LearnerKind::knn(3), &data, 0).unwrap(),
            fit(&LearnerKind::tree(), &data, 0).unwrap(),
        ];
        let pts = Array2::from_shape_fn((12, 2), |_| rng.random_range(-1.0..1.0));
        let base = predict_all(&learners, &pts.view()).unwrap();
        for _ in 0..5 {
            let mut perm: Vec<usize> = (0..12).collect();
            perm.shuffle(&mut rng);
            let permuted = pts.select(Axis(0), &perm);
            let out = predict_all(&learners, &permuted.view()).unwrap();
            for (new_row, &old_row) in perm.iter().enumerate() {
                assert_eq!(out.row(new_row), base.row(old_row));
            }
        }
    }
}
