//! Test-set error metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Mse,
    Rmse,
}

impl MetricKind {
    pub fn name(&self) -> &'static str {
        match self {
            MetricKind::Mse => "mse",
            MetricKind::Rmse => "rmse",
        }
    }

    pub fn compute(&self, predictions: &[f64], truth: &[f64]) -> Result<f64> {
        match self {
            MetricKind::Mse => metric_mse(predictions, truth),
            MetricKind::Rmse => metric_rmse(predictions, truth),
        }
    }
}

/// Mean squared prediction error.
pub fn metric_mse(predictions: &[f64], truth: &[f64]) -> Result<f64> {
    if predictions.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            context: "metric inputs",
            expected: truth.len(),
            got: predictions.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::InvalidArgument("metric needs at least one point".into()));
    }
    let sum: f64 = predictions
        .iter()
        .zip(truth.iter())
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sum / predictions.len() as f64)
}

/// Root mean squared prediction error.
pub fn metric_rmse(predictions: &[f64], truth: &[f64]) -> Result<f64> {
    metric_mse(predictions, truth).map(f64::sqrt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn perfect_predictions_score_zero() {
        let v = [1.0, -2.0, 0.5];
        assert_eq!(metric_mse(&v, &v).unwrap(), 0.0);
        assert_eq!(metric_rmse(&v, &v).unwrap(), 0.0);
    }

    #[test]
    fn worked_example() {
        let mse = metric_mse(&[0.0, 0.0], &[1.0, 3.0]).unwrap();
        assert_eq!(mse, 5.0);
        let rmse = metric_rmse(&[0.0, 0.0], &[1.0, 3.0]).unwrap();
        assert_abs_diff_eq!(rmse, 5.0f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        assert!(metric_mse(&[0.0], &[1.0, 2.0]).is_err());
        assert!(metric_mse(&[], &[]).is_err());
    }
}
