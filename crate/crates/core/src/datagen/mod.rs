//! Synthetic benchmark generators, dataset splitting, and CSV ingestion.
//!
//! Ten regression models with fixed (n, d) sizes are generated in two input
//! regimes: i.i.d. Uniform(-1, 1) coordinates (*uncorrelated*) or rows drawn
//! from N(0, Sigma) with `Sigma_ij = 2^{-|i-j|}` (*correlated*), sampled
//! through the Cholesky factor of Sigma. Noise terms written `N(0, s)` are
//! sampled with standard deviation `s` (the `rnorm` convention of the
//! reference implementations), using the ziggurat sampler of `rand_distr`.
//!
//! Responses are computed in double precision; rows whose response is not
//! finite (large-magnitude correlated inputs raised to high powers can
//! overflow) are rejected and redrawn so the generated size stays exact, with
//! a bounded retry budget per row.

mod csv;

pub use csv::{load_csv, CsvLoad};

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::learners::Dataset;
use crate::seeding;

/// Redraw budget per row before generation gives up.
const MAX_ROW_RETRIES: usize = 200;

// ============================================================================
// Input sampling
// ============================================================================

/// Distribution of the design matrix rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// i.i.d. Uniform(-1, 1) coordinates.
    Uncorrelated,
    /// Rows from N(0, Sigma), Sigma_ij = 2^{-|i-j|}.
    Correlated,
}

impl Regime {
    pub fn name(&self) -> &'static str {
        match self {
            Regime::Uncorrelated => "uncorrelated",
            Regime::Correlated => "correlated",
        }
    }
}

/// The AR-structured covariance `Sigma_ij = 2^{-|i-j|}`.
pub(crate) fn ar_covariance(d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |i, j| 2f64.powi(-((i as i64 - j as i64).unsigned_abs() as i32)))
}

/// Cached Cholesky factor of [`ar_covariance`]; the factor depends only on d.
fn ar_cholesky(d: usize) -> Arc<DMatrix<f64>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<DMatrix<f64>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    guard
        .entry(d)
        .or_insert_with(|| {
            let chol = ar_covariance(d)
                .cholesky()
                .expect("AR covariance is positive definite");
            Arc::new(chol.l())
        })
        .clone()
}

struct RowSampler {
    regime: Regime,
    d: usize,
    chol: Option<Arc<DMatrix<f64>>>,
    scratch: Vec<f64>,
}

impl RowSampler {
    fn new(regime: Regime, d: usize) -> Self {
        let chol = match regime {
            Regime::Uncorrelated => None,
            Regime::Correlated => Some(ar_cholesky(d)),
        };
        RowSampler { regime, d, chol, scratch: vec![0.0; d] }
    }

    fn draw_into(&mut self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        match self.regime {
            Regime::Uncorrelated => {
                for v in out.iter_mut() {
                    *v = rng.random_range(-1.0..1.0);
                }
            }
            Regime::Correlated => {
                for z in self.scratch.iter_mut() {
                    *z = StandardNormal.sample(rng);
                }
                let l = self.chol.as_ref().unwrap();
                for i in 0..self.d {
                    let mut acc = 0.0;
                    for j in 0..=i {
                        acc += l[(i, j)] * self.scratch[j];
                    }
                    out[i] = acc;
                }
            }
        }
    }
}

/// An n x d design matrix drawn from the given regime.
pub fn sample_inputs(regime: Regime, n: usize, d: usize, seed: u64) -> Result<Array2<f64>> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidArgument(format!(
            "need n >= 1 and d >= 1, got {n} x {d}"
        )));
    }
    let mut rng = seeding::rng(seed);
    let mut sampler = RowSampler::new(regime, d);
    let mut x = Array2::zeros((n, d));
    for mut row in x.rows_mut() {
        sampler.draw_into(&mut rng, row.as_slice_mut().unwrap());
    }
    Ok(x)
}

// ============================================================================
// Synthetic models
// ============================================================================

/// One of the ten benchmark regression models plus the input regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticModelId {
    pub id: u8,
    pub regime: Regime,
}

impl SyntheticModelId {
    pub fn new(id: u8, regime: Regime) -> Result<Self> {
        if !(1..=10).contains(&id) {
            return Err(Error::InvalidArgument(format!(
                "synthetic model id must be 1..=10, got {id}"
            )));
        }
        Ok(SyntheticModelId { id, regime })
    }

    /// The (n, d) this model is defined with.
    pub fn size(&self) -> (usize, usize) {
        match self.id {
            1 => (800, 50),
            2 => (600, 100),
            3 => (600, 100),
            4 => (600, 100),
            5 => (700, 20),
            6 => (500, 30),
            7 => (600, 300),
            8 => (600, 50),
            9 => (500, 1000),
            10 => (500, 1500),
            _ => unreachable!("validated at construction"),
        }
    }
}

/// The deterministic part of the response: the model formula with every
/// noise term set to zero.
pub(crate) fn signal(id: u8, x: &ArrayView1<'_, f64>) -> f64 {
    use std::f64::consts::PI;
    match id {
        1 => x[0] * x[0] + (-x[1] * x[1]).exp(),
        2 => x[0] * x[1] + x[2] * x[2] - x[3] * x[6] + x[7] * x[9] - x[5] * x[5],
        3 => -(2.0 * x[0]).sin() + x[1] * x[1] + x[2] - (-x[3]).exp(),
        4 => {
            let s3 = (2.0 * PI * x[2]).sin();
            let s4 = (2.0 * PI * x[3]).sin();
            let c4 = (2.0 * PI * x[3]).cos();
            x[0] + (2.0 * x[1] - 1.0).powi(2) + s3 / (2.0 - s3)
                + s4
                + 2.0 * c4
                + 3.0 * (s4 * s4)
                + 4.0 * (c4 * c4)
        }
        5 => {
            let ind1 = if x[0] > 0.0 { 1.0 } else { 0.0 };
            let ind2 = if x[3] + x[5] - x[7] - x[8] > 1.0 + x[13] { 1.0 } else { 0.0 };
            ind1 + x[1].powi(3) + ind2 + (-x[1] * x[1]).exp()
        }
        6 => (0..10).map(|k| if x[k] < 0.0 { 1.0 } else { 0.0 }).sum(),
        7 => x[0] * x[0] + x[1] * x[1] * x[2] * (-x[3].abs()).exp() + x[5] - x[7],
        8 => {
            if model8_argument(x) > 0.38 {
                1.0
            } else {
                0.0
            }
        }
        9 => x[0] + 3.0 * (x[2] * x[2]) - 2.0 * (-x[4]).exp() + x[5],
        10 => {
            let mut acc = x[0].exp() + (-x[0]).exp();
            for j in 2..=x.len() {
                let v = x[j - 1];
                let t = v.powi(j as i32);
                acc += t.cos() - 2.0 * t.sin() - (-v.abs()).exp();
            }
            acc
        }
        _ => unreachable!(),
    }
}

fn model8_argument(x: &ArrayView1<'_, f64>) -> f64 {
    x[0] + x[3].powi(3) + x[8] + (x[11] * x[17]).sin()
}

/// Response and its noise-free part for one input row; draws whatever noise
/// the model declares from `rng`.
fn response(id: u8, x: &ArrayView1<'_, f64>, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let normal = |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };
    let s = signal(id, x);
    let y = match id {
        1 | 9 | 10 => s,
        2 | 3 | 4 | 7 => s + 0.5 * normal(rng),
        5 => s + 0.05 * normal(rng),
        6 => s - if normal(rng) > 1.25 { 1.0 } else { 0.0 },
        8 => {
            if model8_argument(x) + 0.01 * normal(rng) > 0.38 {
                1.0
            } else {
                0.0
            }
        }
        _ => unreachable!(),
    };
    (y, s)
}

/// Generates the model at its declared (n, d), returning the dataset and the
/// noise-free response column.
pub fn gen_model_detailed(model: SyntheticModelId, seed: u64) -> Result<(Dataset, Array1<f64>)> {
    let (n, d) = model.size();
    let mut rng = seeding::rng(seed);
    let mut sampler = RowSampler::new(model.regime, d);
    let mut x = Array2::zeros((n, d));
    let mut y = Array1::zeros(n);
    let mut signals = Array1::zeros(n);
    let mut row_buf = vec![0.0; d];
    for i in 0..n {
        let mut attempts = 0;
        loop {
            sampler.draw_into(&mut rng, &mut row_buf);
            let (yi, si) = response(model.id, &ArrayView1::from(&row_buf[..]), &mut rng);
            if yi.is_finite() && si.is_finite() {
                x.row_mut(i).assign(&ArrayView1::from(&row_buf[..]));
                y[i] = yi;
                signals[i] = si;
                break;
            }
            attempts += 1;
            if attempts >= MAX_ROW_RETRIES {
                return Err(Error::InvalidArgument(format!(
                    "model {} ({}) kept producing non-finite responses after {MAX_ROW_RETRIES} \
                     redraws of row {i}; the formula overflows double precision in this regime",
                    model.id,
                    model.regime.name(),
                )));
            }
        }
    }
    Ok((Dataset::new(x, y)?, signals))
}

/// Generates the model at its declared (n, d).
pub fn gen_model(model: SyntheticModelId, seed: u64) -> Result<Dataset> {
    gen_model_detailed(model, seed).map(|(data, _)| data)
}

// ============================================================================
// Splitting
// ============================================================================

/// Proportions of the three-way split into machine-fitting data, aggregation
/// data, and test data.
#[derive(Debug, Clone, Copy)]
pub struct SplitSpec {
    /// Fraction of all rows held out for testing (default 0.2).
    pub test_fraction: f64,
    /// Fraction of the remaining training rows used for machine fitting
    /// (default 0.5: equal halves).
    pub dk_fraction_of_train: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(seed: u64) -> Self {
        SplitSpec { test_fraction: 0.2, dk_fraction_of_train: 0.5, seed }
    }

    fn validate(&self) -> Result<()> {
        let interior = |f: f64| f > 0.0 && f < 1.0;
        if !interior(self.test_fraction) || !interior(self.dk_fraction_of_train) {
            return Err(Error::InvalidConfig(format!(
                "split fractions must lie strictly inside (0, 1), got test {} and dk {}",
                self.test_fraction, self.dk_fraction_of_train
            )));
        }
        Ok(())
    }
}

/// Row indices of each split part; a disjoint partition of 0..n.
#[derive(Debug, Clone)]
pub struct SplitIndices {
    pub train_k: Vec<usize>,
    pub train_l: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded three-way partition: |test| = round(test_fraction * n), then of
/// the remainder, k = ceil(dk_fraction * rest) rows for machine fitting and
/// the rest for aggregation.
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<SplitIndices> {
    spec.validate()?;
    let n_test = (spec.test_fraction * n as f64).round() as usize;
    let rest = n.saturating_sub(n_test);
    let n_k = (spec.dk_fraction_of_train * rest as f64).ceil() as usize;
    let n_l = rest.saturating_sub(n_k);
    if n_test == 0 || n_k == 0 || n_l == 0 {
        return Err(Error::InvalidConfig(format!(
            "degenerate split of {n} rows: test {n_test}, machine-fitting {n_k}, aggregation {n_l}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    seeding::shuffle(&mut order, spec.seed);
    let test = order[..n_test].to_vec();
    let train_k = order[n_test..n_test + n_k].to_vec();
    let train_l = order[n_test + n_k..].to_vec();
    Ok(SplitIndices { train_k, train_l, test })
}

#[derive(Debug, Clone)]
pub struct SplitResult {
    pub train_k: Dataset,
    pub train_l: Dataset,
    pub test: Dataset,
}

pub fn split(dataset: &Dataset, spec: &SplitSpec) -> Result<SplitResult> {
    let idx = split_indices(dataset.n(), spec)?;
    Ok(SplitResult {
        train_k: dataset.subset(&idx.train_k)?,
        train_l: dataset.subset(&idx.train_l)?,
        test: dataset.subset(&idx.test)?,
    })
}
