//! Combination weights and the aggregated predictor.
//!
//! All schemes weight the rows of a [`PredictionMatrix`] by how closely the
//! base machines' predictions at those rows agree with the predictions at the
//! query point, then average the stored responses:
//!
//! - `CobraFull`: a row counts only if *every* machine's prediction is
//!   within `h` of the query's (strict inequality; the naive box kernel under
//!   the divisive bandwidth implements the same rule with `<=` at the
//!   boundary, so the two coincide off the boundary).
//! - `CobraRelaxed`: a row counts if at least a fraction `alpha` of the
//!   machines agree within `h`.
//! - `KernelVector`: the kernel is applied to the whole M-dimensional
//!   prediction-difference vector at once.
//! - `KernelPerCoord`: a univariate kernel is applied per machine and the
//!   values are summed.
//!
//! Weights are normalized to sum to one; when every raw mass is zero the
//! weight vector is all zeros (the 0/0 = 0 convention) and prediction falls
//! back per [`ZeroWeightPolicy`].

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::kernels::{BandwidthParam, KernelSpec};
use crate::learners::{predict_all, BaseLearner};

// ============================================================================
// Prediction matrix
// ============================================================================

/// Base-machine predictions on the aggregation split, one row per retained
/// data point and one column per machine, with the responses row-aligned.
#[derive(Debug, Clone)]
pub struct PredictionMatrix {
    values: Array2<f64>,
    responses: Array1<f64>,
}

impl PredictionMatrix {
    pub fn new(values: Array2<f64>, responses: Array1<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::InvalidArgument(format!(
                "prediction matrix must be at least 1 x 1, got {} x {}",
                values.nrows(),
                values.ncols()
            )));
        }
        if values.nrows() != responses.len() {
            return Err(Error::DimensionMismatch {
                context: "prediction matrix rows vs responses",
                expected: values.nrows(),
                got: responses.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) || responses.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("prediction matrix entries"));
        }
        Ok(PredictionMatrix { values, responses })
    }

    /// Number of stored points (the combination sample size).
    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        false // construction requires at least one row
    }

    /// Number of base machines M.
    pub fn width(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn responses(&self) -> ArrayView1<'_, f64> {
        self.responses.view()
    }

    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidArgument("empty prediction-matrix subset".into()));
        }
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.len()) {
            return Err(Error::InvalidArgument(format!(
                "row index {bad} out of range for prediction matrix of {} rows",
                self.len()
            )));
        }
        Ok(PredictionMatrix {
            values: self.values.select(Axis(0), rows),
            responses: self.responses.select(Axis(0), rows),
        })
    }
}

// ============================================================================
// Weight schemes
// ============================================================================

/// A fully specified weighting rule (bandwidth bound).
#[derive(Debug, Clone, PartialEq)]
pub enum WeightScheme {
    CobraFull { h: f64 },
    CobraRelaxed { h: f64, alpha: f64 },
    KernelVector { spec: KernelSpec, bw: BandwidthParam },
    KernelPerCoord { spec: KernelSpec, bw: BandwidthParam },
}

impl WeightScheme {
    /// Config-facing name of the scheme family.
    pub fn name(&self) -> &'static str {
        match self {
            WeightScheme::CobraFull { .. } => "cobra",
            WeightScheme::CobraRelaxed { .. } => "cobra-relaxed",
            WeightScheme::KernelVector { .. } => "kernel",
            WeightScheme::KernelPerCoord { .. } => "kernel-percoord",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            WeightScheme::CobraFull { h } => check_h(*h),
            WeightScheme::CobraRelaxed { h, alpha } => {
                check_h(*h)?;
                if !(*alpha > 0.0 && *alpha <= 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "alpha must lie in (0, 1], got {alpha}"
                    )));
                }
                Ok(())
            }
            WeightScheme::KernelVector { spec, bw } | WeightScheme::KernelPerCoord { spec, bw } => {
                check_h(bw.h)?;
                bw.check_compatible(spec)
            }
        }
    }

    /// Raw (unnormalized) mass this scheme gives a stored row against a query
    /// prediction vector. Non-negative.
    pub(crate) fn mass(&self, row: ArrayView1<'_, f64>, query: ArrayView1<'_, f64>) -> f64 {
        match self {
            WeightScheme::CobraFull { h } => {
                let all = row.iter().zip(query.iter()).all(|(a, b)| (a - b).abs() < *h);
                if all {
                    1.0
                } else {
                    0.0
                }
            }
            WeightScheme::CobraRelaxed { h, alpha } => {
                let m = row.len();
                let agree = row
                    .iter()
                    .zip(query.iter())
                    .filter(|(a, b)| (*a - *b).abs() < *h)
                    .count();
                if agree as f64 >= alpha * m as f64 {
                    1.0
                } else {
                    0.0
                }
            }
            WeightScheme::KernelVector { spec, bw } => {
                let mut sq = 0.0;
                let mut max_abs = 0.0f64;
                for (a, b) in row.iter().zip(query.iter()) {
                    let d = a - b;
                    sq += d * d;
                    max_abs = max_abs.max(d.abs());
                }
                spec.eval_h_from_stats(bw, sq, max_abs)
            }
            WeightScheme::KernelPerCoord { spec, bw } => row
                .iter()
                .zip(query.iter())
                .map(|(a, b)| {
                    let d = a - b;
                    spec.eval_h_from_stats(bw, d * d, d.abs())
                })
                .sum(),
        }
    }
}

fn check_h(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "bandwidth must be a positive finite real, got {h}"
        )))
    }
}

/// Combination weights of every stored row at the given query predictions.
/// The result is non-negative and sums to 1, except when every raw mass is
/// zero, in which case it is identically zero.
pub fn weights(
    scheme: &WeightScheme,
    pm: &PredictionMatrix,
    query_preds: &ArrayView1<'_, f64>,
) -> Result<Vec<f64>> {
    scheme.validate()?;
    if query_preds.len() != pm.width() {
        return Err(Error::DimensionMismatch {
            context: "query prediction vector",
            expected: pm.width(),
            got: query_preds.len(),
        });
    }
    if query_preds.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("query predictions"));
    }
    let mut w: Vec<f64> = pm
        .values
        .rows()
        .into_iter()
        .map(|row| scheme.mass(row, *query_preds))
        .collect();
    let total: f64 = w.iter().sum();
    if total > 0.0 {
        for v in &mut w {
            *v /= total;
        }
    }
    Ok(w)
}

// ============================================================================
// Aggregated predictor
// ============================================================================

/// What to return when no stored row receives positive mass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZeroWeightPolicy {
    /// Mean of the stored responses (sane default for uncentered data).
    #[default]
    MeanResponse,
    /// Literal 0/0 = 0 convention.
    Zero,
}

/// A prediction together with the flag marking that no stored row was in
/// consensus and the fallback value was returned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub value: f64,
    pub no_consensus: bool,
}

/// Combination in prediction space: weights the stored responses by the
/// scheme's masses at the query prediction vector.
pub fn aggregate_at(
    pm: &PredictionMatrix,
    scheme: &WeightScheme,
    query_preds: &ArrayView1<'_, f64>,
    policy: ZeroWeightPolicy,
) -> Result<Prediction> {
    let w = weights(scheme, pm, query_preds)?;
    let total: f64 = w.iter().sum();
    if total == 0.0 {
        let value = match policy {
            ZeroWeightPolicy::MeanResponse => pm.responses.mean().unwrap(),
            ZeroWeightPolicy::Zero => 0.0,
        };
        return Ok(Prediction { value, no_consensus: true });
    }
    let value = w.iter().zip(pm.responses.iter()).map(|(w, y)| w * y).sum();
    Ok(Prediction { value, no_consensus: false })
}

/// Frozen base machines plus the stored prediction matrix and weighting
/// scheme: the deployable aggregated predictor.
#[derive(Debug, Clone)]
pub struct AggregatorModel {
    learners: Vec<BaseLearner>,
    pm: PredictionMatrix,
    scheme: WeightScheme,
    policy: ZeroWeightPolicy,
}

impl AggregatorModel {
    pub fn new(
        learners: Vec<BaseLearner>,
        pm: PredictionMatrix,
        scheme: WeightScheme,
        policy: ZeroWeightPolicy,
    ) -> Result<Self> {
        if learners.is_empty() {
            return Err(Error::InvalidArgument("empty learner list".into()));
        }
        if pm.width() != learners.len() {
            return Err(Error::DimensionMismatch {
                context: "prediction matrix width vs learner count",
                expected: learners.len(),
                got: pm.width(),
            });
        }
        scheme.validate()?;
        Ok(AggregatorModel { learners, pm, scheme, policy })
    }

    pub fn scheme(&self) -> &WeightScheme {
        &self.scheme
    }

    pub fn prediction_matrix(&self) -> &PredictionMatrix {
        &self.pm
    }

    pub fn learners(&self) -> &[BaseLearner] {
        &self.learners
    }

    /// Predicts at a feature-space point by first collecting the base
    /// machines' predictions, then combining in prediction space.
    pub fn predict(&self, x: &ArrayView1<'_, f64>) -> Result<Prediction> {
        let mut preds = Array1::zeros(self.learners.len());
        for (m, learner) in self.learners.iter().enumerate() {
            preds[m] = learner.predict(x)?;
        }
        aggregate_at(&self.pm, &self.scheme, &preds.view(), self.policy)
    }

    /// Element-wise application of `predict` over the rows of `points`.
    pub fn predict_batch(&self, points: &ArrayView2<'_, f64>) -> Result<Vec<Prediction>> {
        let preds = predict_all(&self.learners, points)?;
        preds
            .rows()
            .into_iter()
            .map(|row| aggregate_at(&self.pm, &self.scheme, &row, self.policy))
            .collect()
    }
}
