//! Ridge and lasso regression on standardized features.
//!
//! Both minimize `(1/2n) ||y - X b||^2 + P(b)` with `P = (lambda/2) ||b||^2`
//! for ridge and `P = lambda ||b||_1` for lasso, after standardizing the
//! columns of X and centering y (the intercept is the response mean). When
//! the penalty level is not supplied it is chosen by 5-fold cross-validation
//! over a 50-point logarithmic grid in [1e-4, 1e2].

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, ArrayView1};
#[cfg(test)]
use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::learners::{Dataset, Standardizer};
use crate::seeding;

const CV_FOLDS: usize = 5;
const GRID_POINTS: usize = 50;
const GRID_LOG_MIN: f64 = -4.0;
const GRID_LOG_MAX: f64 = 2.0;

#[derive(Debug, Clone)]
pub(crate) struct LinearModel {
    standardizer: Standardizer,
    /// Coefficients in the standardized feature space.
    beta: Array1<f64>,
    /// Response mean of the training data.
    intercept: f64,
    lambda: f64,
}

impl LinearModel {
    pub(crate) fn predict(&self, x: &ArrayView1<'_, f64>) -> f64 {
        let xs = self.standardizer.transform_row(x);
        self.intercept + self.beta.dot(&xs)
    }

    /// Coefficients on the raw feature scale: `(slopes, intercept)` with
    /// prediction `intercept + slopes . x`.
    pub(crate) fn raw_coefficients(&self) -> (Array1<f64>, f64) {
        let scale = self.standardizer.scale();
        let mean = self.standardizer.mean();
        let slopes = Array1::from_shape_fn(self.beta.len(), |j| self.beta[j] / scale[j]);
        let intercept = self.intercept
            - (0..self.beta.len())
                .map(|j| self.beta[j] * mean[j] / scale[j])
                .sum::<f64>();
        (slopes, intercept)
    }

    pub(crate) fn lambda(&self) -> f64 {
        self.lambda
    }
}

fn penalty_grid() -> Vec<f64> {
    (0..GRID_POINTS)
        .map(|i| {
            let t = i as f64 / (GRID_POINTS - 1) as f64;
            10f64.powf(GRID_LOG_MIN + t * (GRID_LOG_MAX - GRID_LOG_MIN))
        })
        .collect()
}

/// Round-robin fold assignment after one seeded shuffle.
fn cv_folds(n: usize, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    seeding::shuffle(&mut order, seed);
    let mut out = vec![Vec::new(); folds];
    for (pos, row) in order.into_iter().enumerate() {
        out[pos % folds].push(row);
    }
    out
}

// ============================================================================
// Ridge
// ============================================================================

pub(crate) fn fit_ridge(train: &Dataset, lambda: Option<f64>, seed: u64) -> Result<LinearModel> {
    let lambda = match lambda {
        Some(l) => l,
        None => select_lambda(train, seed, ridge_solve)?,
    };
    fit_linear(train, lambda, |xs, yc| ridge_solve(xs, yc, lambda))
}

/// Solves the ridge normal equations `(X'X + n lambda I) b = X'y` by
/// Cholesky, switching to the n x n dual system when d > n and to an SVD
/// least-squares solve when the factorization fails (lambda = 0 on a
/// rank-deficient design).
fn ridge_solve(xs: &Array2<f64>, yc: &Array1<f64>, lambda: f64) -> Result<Array1<f64>> {
    let (n, d) = (xs.nrows(), xs.ncols());
    let x = DMatrix::from_row_iterator(n, d, xs.iter().cloned());
    let y = DVector::from_iterator(n, yc.iter().cloned());
    let ridge = lambda * n as f64;

    let beta = if d <= n {
        let mut a = x.transpose() * &x;
        for i in 0..d {
            a[(i, i)] += ridge;
        }
        let b = x.transpose() * &y;
        match a.clone().cholesky() {
            Some(ch) => ch.solve(&b),
            None => svd_solve(a, b)?,
        }
    } else {
        let mut g = &x * x.transpose();
        for i in 0..n {
            g[(i, i)] += ridge;
        }
        let alpha = match g.clone().cholesky() {
            Some(ch) => ch.solve(&y),
            None => svd_solve(g, y.clone())?,
        };
        x.transpose() * alpha
    };
    Ok(Array1::from_iter(beta.iter().cloned()))
}

fn svd_solve(a: DMatrix<f64>, b: DVector<f64>) -> Result<DVector<f64>> {
    let svd = a.svd(true, true);
    svd.solve(&b, 1e-12)
        .map_err(|e| Error::InvalidArgument(format!("singular system: {e}")))
}

// ============================================================================
// Lasso
// ============================================================================

pub(crate) fn fit_lasso(
    train: &Dataset,
    lambda: Option<f64>,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<LinearModel> {
    let lambda = match lambda {
        Some(l) => l,
        None => select_lambda(train, seed, |xs, yc, l| {
            // Cold start per grid point.
            let init = Array1::zeros(xs.ncols());
            Ok(coordinate_descent(xs, yc, l, tol, max_iter, init).beta)
        })?,
    };
    fit_linear(train, lambda, |xs, yc| {
        let init = Array1::zeros(xs.ncols());
        Ok(coordinate_descent(xs, yc, lambda, tol, max_iter, init).beta)
    })
}

pub(crate) struct CdOutcome {
    pub(crate) beta: Array1<f64>,
    /// Full sweeps performed; exercised by the convergence tests.
    #[allow(dead_code)]
    pub(crate) sweeps: usize,
    /// Objective value after each full sweep; non-increasing by convexity.
    #[allow(dead_code)]
    pub(crate) objective_trace: Vec<f64>,
}

/// Cyclic coordinate descent with soft thresholding on a standardized design
/// and a centered response. Stops when the largest coefficient move in a
/// sweep falls below `tol` or after `max_iter` sweeps.
pub(crate) fn coordinate_descent(
    xs: &Array2<f64>,
    yc: &Array1<f64>,
    lambda: f64,
    tol: f64,
    max_iter: usize,
    mut beta: Array1<f64>,
) -> CdOutcome {
    let (n, d) = (xs.nrows(), xs.ncols());
    let n_f = n as f64;
    let col_sq: Vec<f64> = (0..d)
        .map(|j| xs.column(j).iter().map(|v| v * v).sum::<f64>() / n_f)
        .collect();

    // residual r = y - X beta
    let mut residual = yc.to_owned();
    for j in 0..d {
        if beta[j] != 0.0 {
            let bj = beta[j];
            residual.iter_mut().zip(xs.column(j)).for_each(|(r, x)| *r -= x * bj);
        }
    }

    let mut trace = Vec::new();
    let mut sweeps = 0;
    while sweeps < max_iter {
        sweeps += 1;
        let mut max_move = 0.0f64;
        for j in 0..d {
            if col_sq[j] == 0.0 {
                continue; // constant column carries no signal
            }
            let col = xs.column(j);
            let rho = col.dot(&residual) / n_f + col_sq[j] * beta[j];
            let new = soft_threshold(rho, lambda) / col_sq[j];
            let delta = beta[j] - new;
            if delta != 0.0 {
                residual.iter_mut().zip(col).for_each(|(r, x)| *r += x * delta);
                beta[j] = new;
                max_move = max_move.max(delta.abs());
            }
        }
        let obj = residual.iter().map(|r| r * r).sum::<f64>() / (2.0 * n_f)
            + lambda * beta.iter().map(|b| b.abs()).sum::<f64>();
        trace.push(obj);
        if max_move < tol {
            break;
        }
    }
    CdOutcome { beta, sweeps, objective_trace: trace }
}

#[inline]
fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

// ============================================================================
// Shared plumbing
// ============================================================================

fn fit_linear(
    train: &Dataset,
    lambda: f64,
    solver: impl Fn(&Array2<f64>, &Array1<f64>) -> Result<Array1<f64>>,
) -> Result<LinearModel> {
    let standardizer = Standardizer::fit(&train.features());
    let xs = standardizer.transform(&train.features());
    let intercept = train.responses().mean().unwrap();
    let yc = train.responses().to_owned() - intercept;
    let beta = solver(&xs, &yc)?;
    Ok(LinearModel { standardizer, beta, intercept, lambda })
}

/// 5-fold CV over the penalty grid with the one-standard-error rule: the
/// chosen penalty is the largest one whose CV error stays within one
/// standard error of the curve minimum (the reference stack's default
/// prediction choice).
fn select_lambda(
    train: &Dataset,
    seed: u64,
    solver: impl Fn(&Array2<f64>, &Array1<f64>, f64) -> Result<Array1<f64>>,
) -> Result<f64> {
    let grid = penalty_grid();
    let n = train.n();
    let folds = cv_folds(n, CV_FOLDS.min(n), seed);
    // Per-fold mean squared validation error at every grid point.
    let mut fold_mse: Vec<Vec<f64>> = Vec::new();

    for val_rows in folds.iter().filter(|f| !f.is_empty()) {
        let in_val = {
            let mut mask = vec![false; n];
            for &r in val_rows {
                mask[r] = true;
            }
            mask
        };
        let train_rows: Vec<usize> = (0..n).filter(|&r| !in_val[r]).collect();
        if train_rows.is_empty() {
            continue;
        }
        let fold_train = train.subset(&train_rows)?;
        let standardizer = Standardizer::fit(&fold_train.features());
        let xs = standardizer.transform(&fold_train.features());
        let mean_y = fold_train.responses().mean().unwrap();
        let yc = fold_train.responses().to_owned() - mean_y;

        let val = train.subset(val_rows)?;
        let xv = standardizer.transform(&val.features());

        let mut errors = Vec::with_capacity(grid.len());
        for &lambda in &grid {
            let beta = solver(&xs, &yc, lambda)?;
            let mut sse = 0.0;
            for (i, row) in xv.rows().into_iter().enumerate() {
                let err = mean_y + beta.dot(&row) - val.responses()[i];
                sse += err * err;
            }
            errors.push(sse / val_rows.len() as f64);
        }
        fold_mse.push(errors);
    }

    let kappa = fold_mse.len() as f64;
    let cv_mean: Vec<f64> = (0..grid.len())
        .map(|g| fold_mse.iter().map(|f| f[g]).sum::<f64>() / kappa)
        .collect();
    let best = cv_mean
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    let cv_se = if fold_mse.len() > 1 {
        let m = cv_mean[best];
        let var = fold_mse.iter().map(|f| (f[best] - m) * (f[best] - m)).sum::<f64>()
            / (kappa - 1.0);
        (var / kappa).sqrt()
    } else {
        0.0
    };
    // Largest penalty within one SE of the minimum; the grid ascends.
    let threshold = cv_mean[best] + cv_se;
    let chosen = (0..grid.len()).rev().find(|&g| cv_mean[g] <= threshold).unwrap_or(best);
    Ok(grid[chosen])
}

#[cfg(test)]
pub(crate) fn standardize_for_tests(
    x: &ArrayView2<'_, f64>,
) -> (Array2<f64>, Array1<f64>, Array1<f64>) {
    let s = Standardizer::fit(x);
    (s.transform(x), s.mean().clone(), s.scale().clone())
}
