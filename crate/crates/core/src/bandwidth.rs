//! Bandwidth selection: the k-fold cross-validation error, its gradient,
//! gradient descent, and the grid-search baseline.
//!
//! The CV objective for a candidate bandwidth h is
//!
//! ```text
//! phi(h) = (1/kappa) * sum_p sum_{j in F_p} (g(j) - y_j)^2
//! ```
//!
//! where the combined prediction `g(j)` for a held-out row j uses only the
//! rows outside j's fold. The hold-out objective splits the rows once into a
//! weighting half and a validation half and averages the squared error over
//! the validation rows; it exists to reproduce the classical indicator-scheme
//! tuning protocol.
//!
//! For Gaussian and 4-exponential kernels under the Multiplicative
//! parametrization the gradient of phi is available in closed form. Writing
//! `g = N/D` with per-row kernel masses `K_i`, the derivative
//! `g' = (N'D - ND')/D^2` equals the pairwise `(Y_i - Y_q)` double-sum
//! expansion but costs O(rows) instead of O(rows^2) per query; the pairwise
//! form is kept as a test oracle.

use ndarray::ArrayView1;

use crate::aggregation::{PredictionMatrix, WeightScheme, ZeroWeightPolicy};
use crate::error::{Error, Result};
use crate::kernels::{BandwidthParam, KernelSpec, Parametrization, MIN_BANDWIDTH};
use crate::seeding;

// ============================================================================
// Scheme families (bandwidth left unbound)
// ============================================================================

/// A weighting scheme with the bandwidth h left free for tuning.
#[derive(Debug, Clone, PartialEq)]
pub enum SchemeFamily {
    CobraFull,
    CobraRelaxed { alpha: f64 },
    KernelVector { spec: KernelSpec, parametrization: Parametrization },
    KernelPerCoord { spec: KernelSpec, parametrization: Parametrization },
}

impl SchemeFamily {
    pub fn name(&self) -> &'static str {
        match self {
            SchemeFamily::CobraFull => "cobra",
            SchemeFamily::CobraRelaxed { .. } => "cobra-relaxed",
            SchemeFamily::KernelVector { .. } => "kernel",
            SchemeFamily::KernelPerCoord { .. } => "kernel-percoord",
        }
    }

    /// Binds a bandwidth, yielding a concrete scheme.
    pub fn with_bandwidth(&self, h: f64) -> Result<WeightScheme> {
        let scheme = match self {
            SchemeFamily::CobraFull => WeightScheme::CobraFull { h },
            SchemeFamily::CobraRelaxed { alpha } => {
                WeightScheme::CobraRelaxed { h, alpha: *alpha }
            }
            SchemeFamily::KernelVector { spec, parametrization } => WeightScheme::KernelVector {
                spec: *spec,
                bw: BandwidthParam::new(h, *parametrization)?,
            },
            SchemeFamily::KernelPerCoord { spec, parametrization } => {
                WeightScheme::KernelPerCoord {
                    spec: *spec,
                    bw: BandwidthParam::new(h, *parametrization)?,
                }
            }
        };
        scheme.validate()?;
        Ok(scheme)
    }

    /// The kernel parts when the analytic h-derivative exists: a Gaussian or
    /// 4-exponential kernel under the Multiplicative parametrization. The
    /// bool marks the per-coordinate variant.
    fn analytic_parts(&self) -> Option<(KernelSpec, bool)> {
        match self {
            SchemeFamily::KernelVector { spec, parametrization }
                if *parametrization == Parametrization::Multiplicative
                    && spec.supports_multiplicative() =>
            {
                Some((*spec, false))
            }
            SchemeFamily::KernelPerCoord { spec, parametrization }
                if *parametrization == Parametrization::Multiplicative
                    && spec.supports_multiplicative() =>
            {
                Some((*spec, true))
            }
            _ => None,
        }
    }

    pub fn supports_analytic_gradient(&self) -> bool {
        self.analytic_parts().is_some()
    }
}

// ============================================================================
// Objectives
// ============================================================================

/// Anything that maps a bandwidth to a validation error; what grid search
/// minimizes.
pub trait BandwidthObjective: Sized {
    fn evaluate(&self, h: f64) -> Result<f64>;
    fn family(&self) -> &SchemeFamily;
    fn with_family(&self, family: SchemeFamily) -> Self;
}

/// Round-robin fold assignment over shuffled row indices.
pub fn make_folds(rows: usize, kappa: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if kappa < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 folds, got {kappa}")));
    }
    if kappa > rows {
        return Err(Error::InvalidConfig(format!(
            "cannot spread {rows} rows over {kappa} folds"
        )));
    }
    let mut order: Vec<usize> = (0..rows).collect();
    seeding::shuffle(&mut order, seed);
    let mut folds = vec![Vec::new(); kappa];
    for (pos, row) in order.into_iter().enumerate() {
        folds[pos % kappa].push(row);
    }
    Ok(folds)
}

/// The k-fold cross-validation error as a function of the bandwidth. Fold
/// assignment is fixed at construction, so the objective is a deterministic
/// function of h.
#[derive(Debug, Clone)]
pub struct CvObjective {
    pm: PredictionMatrix,
    folds: Vec<Vec<usize>>,
    /// Training rows for each fold (the complement of the fold).
    complements: Vec<Vec<usize>>,
    /// Fold index of every row.
    row_fold: Vec<usize>,
    family: SchemeFamily,
    policy: ZeroWeightPolicy,
}

impl CvObjective {
    pub fn new(
        pm: PredictionMatrix,
        family: SchemeFamily,
        kappa: usize,
        seed: u64,
        policy: ZeroWeightPolicy,
    ) -> Result<Self> {
        let folds = make_folds(pm.len(), kappa, seed)?;
        Self::from_folds(pm, family, folds, policy)
    }

    /// Builds the objective from an explicit fold partition.
    pub fn from_folds(
        pm: PredictionMatrix,
        family: SchemeFamily,
        folds: Vec<Vec<usize>>,
        policy: ZeroWeightPolicy,
    ) -> Result<Self> {
        let rows = pm.len();
        if folds.len() < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 folds, got {}",
                folds.len()
            )));
        }
        let mut row_fold = vec![usize::MAX; rows];
        for (p, fold) in folds.iter().enumerate() {
            if fold.is_empty() {
                return Err(Error::InvalidConfig(format!("fold {p} is empty")));
            }
            if fold.len() == rows {
                return Err(Error::InvalidConfig(format!(
                    "fold {p} holds every row, leaving no training side"
                )));
            }
            for &r in fold {
                if r >= rows {
                    return Err(Error::InvalidConfig(format!(
                        "fold {p} references row {r}, but there are only {rows} rows"
                    )));
                }
                if row_fold[r] != usize::MAX {
                    return Err(Error::InvalidConfig(format!(
                        "row {r} appears in folds {} and {p}",
                        row_fold[r]
                    )));
                }
                row_fold[r] = p;
            }
        }
        if let Some(r) = row_fold.iter().position(|&f| f == usize::MAX) {
            return Err(Error::InvalidConfig(format!("row {r} is missing from the folds")));
        }
        let complements = folds
            .iter()
            .enumerate()
            .map(|(p, _)| (0..rows).filter(|&r| row_fold[r] != p).collect())
            .collect();
        Ok(CvObjective { pm, folds, complements, row_fold, family, policy })
    }

    pub fn kappa(&self) -> usize {
        self.folds.len()
    }

    pub fn prediction_matrix(&self) -> &PredictionMatrix {
        &self.pm
    }

    pub fn policy(&self) -> ZeroWeightPolicy {
        self.policy
    }

    /// The CV error at bandwidth h. Per-row errors are accumulated in row
    /// order, so the value does not depend on how the folds are labelled.
    pub fn error(&self, h: f64) -> Result<f64> {
        let scheme = self.family.with_bandwidth(h)?;
        let values = self.pm.values();
        let responses = self.pm.responses();
        let mut acc = 0.0;
        for j in 0..self.pm.len() {
            let train = &self.complements[self.row_fold[j]];
            let g = predict_query(&self.pm, &scheme, train, values.row(j), self.policy);
            let e = g - responses[j];
            acc += e * e;
        }
        Ok(acc / self.folds.len() as f64)
    }

    /// The gradient of the CV error at h.
    pub fn gradient(&self, h: f64, mode: &GradMode) -> Result<f64> {
        match mode {
            GradMode::Analytic => Ok(self.error_and_gradient(h)?.1),
            GradMode::NumericalCentral { step } => {
                let s = effective_step(h, *step);
                let up = self.evaluate(h + s)?;
                let down = self.evaluate(h - s)?;
                Ok((up - down) / (2.0 * s))
            }
        }
    }

    /// Fused objective and analytic gradient; one pass over the kernel
    /// masses. Requires a Gaussian/Exp4 Multiplicative family.
    pub fn error_and_gradient(&self, h: f64) -> Result<(f64, f64)> {
        let Some((spec, per_coord)) = self.family.analytic_parts() else {
            return Err(Error::NotDifferentiable(format!(
                "analytic CV gradient requires a gaussian or exp4 kernel with the \
                 Multiplicative parametrization, got scheme family {:?}",
                self.family.name()
            )));
        };
        let bw = BandwidthParam::new(h, Parametrization::Multiplicative)?;
        let values = self.pm.values();
        let responses = self.pm.responses();
        let mut phi = 0.0;
        let mut dphi = 0.0;
        for j in 0..self.pm.len() {
            let train = &self.complements[self.row_fold[j]];
            let (g, dg) = predict_and_grad_query(
                &self.pm,
                &spec,
                &bw,
                per_coord,
                train,
                values.row(j),
                self.policy,
            );
            let e = g - responses[j];
            phi += e * e;
            dphi += 2.0 * e * dg;
        }
        let kappa = self.folds.len() as f64;
        Ok((phi / kappa, dphi / kappa))
    }
}

impl BandwidthObjective for CvObjective {
    fn evaluate(&self, h: f64) -> Result<f64> {
        self.error(h)
    }

    fn family(&self) -> &SchemeFamily {
        &self.family
    }

    fn with_family(&self, family: SchemeFamily) -> Self {
        CvObjective { family, ..self.clone() }
    }
}

/// The hold-out validation error: the stored rows are split once into a
/// weighting half and a validation half, and the error at h is the mean
/// squared prediction error over the validation rows.
#[derive(Debug, Clone)]
pub struct HoldoutObjective {
    pm: PredictionMatrix,
    fit_rows: Vec<usize>,
    val_rows: Vec<usize>,
    family: SchemeFamily,
    policy: ZeroWeightPolicy,
}

impl HoldoutObjective {
    /// Random half/half split of the rows (the weighting side gets the extra
    /// row when the count is odd).
    pub fn new(
        pm: PredictionMatrix,
        family: SchemeFamily,
        seed: u64,
        policy: ZeroWeightPolicy,
    ) -> Result<Self> {
        if pm.len() < 2 {
            return Err(Error::InvalidConfig(
                "hold-out tuning needs at least 2 rows".into(),
            ));
        }
        let mut order: Vec<usize> = (0..pm.len()).collect();
        seeding::shuffle(&mut order, seed);
        let fit_len = pm.len() - pm.len() / 2;
        let val_rows = order.split_off(fit_len);
        Self::from_rows(pm, family, order, val_rows, policy)
    }

    pub fn from_rows(
        pm: PredictionMatrix,
        family: SchemeFamily,
        fit_rows: Vec<usize>,
        val_rows: Vec<usize>,
        policy: ZeroWeightPolicy,
    ) -> Result<Self> {
        if fit_rows.is_empty() || val_rows.is_empty() {
            return Err(Error::InvalidConfig(
                "hold-out split needs non-empty weighting and validation sides".into(),
            ));
        }
        let mut seen = vec![false; pm.len()];
        for &r in fit_rows.iter().chain(val_rows.iter()) {
            if r >= pm.len() {
                return Err(Error::InvalidConfig(format!(
                    "row {r} out of range for {} rows",
                    pm.len()
                )));
            }
            if seen[r] {
                return Err(Error::InvalidConfig(format!("row {r} used twice in the split")));
            }
            seen[r] = true;
        }
        Ok(HoldoutObjective { pm, fit_rows, val_rows, family, policy })
    }

    /// Rows used for weighting (the combination side).
    pub fn fit_rows(&self) -> &[usize] {
        &self.fit_rows
    }

    pub fn val_rows(&self) -> &[usize] {
        &self.val_rows
    }
}

impl BandwidthObjective for HoldoutObjective {
    fn evaluate(&self, h: f64) -> Result<f64> {
        let scheme = self.family.with_bandwidth(h)?;
        let values = self.pm.values();
        let responses = self.pm.responses();
        let mut acc = 0.0;
        for &j in &self.val_rows {
            let g = predict_query(&self.pm, &scheme, &self.fit_rows, values.row(j), self.policy);
            let e = g - responses[j];
            acc += e * e;
        }
        Ok(acc / self.val_rows.len() as f64)
    }

    fn family(&self) -> &SchemeFamily {
        &self.family
    }

    fn with_family(&self, family: SchemeFamily) -> Self {
        HoldoutObjective { family, ..self.clone() }
    }
}

/// Combined prediction for one query row from the given training rows.
fn predict_query(
    pm: &PredictionMatrix,
    scheme: &WeightScheme,
    train: &[usize],
    query: ArrayView1<'_, f64>,
    policy: ZeroWeightPolicy,
) -> f64 {
    let values = pm.values();
    let responses = pm.responses();
    let mut num = 0.0;
    let mut den = 0.0;
    for &i in train {
        let mass = scheme.mass(values.row(i), query);
        num += mass * responses[i];
        den += mass;
    }
    if den > 0.0 {
        num / den
    } else {
        fallback(pm, train, policy)
    }
}

/// Prediction and its h-derivative in one pass (Multiplicative Gaussian/Exp4
/// kernels). In the no-consensus region the prediction is the constant
/// fallback, so the derivative is zero.
fn predict_and_grad_query(
    pm: &PredictionMatrix,
    spec: &KernelSpec,
    bw: &BandwidthParam,
    per_coord: bool,
    train: &[usize],
    query: ArrayView1<'_, f64>,
    policy: ZeroWeightPolicy,
) -> (f64, f64) {
    let values = pm.values();
    let responses = pm.responses();
    let mut num = 0.0;
    let mut den = 0.0;
    let mut dnum = 0.0;
    let mut dden = 0.0;
    for &i in train {
        let row = values.row(i);
        let (k, dk) = if per_coord {
            let mut ks = 0.0;
            let mut dks = 0.0;
            for (a, b) in row.iter().zip(query.iter()) {
                let d = a - b;
                let (k1, dk1) = spec.eval_and_grad_h_from_sq(bw, d * d);
                ks += k1;
                dks += dk1;
            }
            (ks, dks)
        } else {
            let sq: f64 = row
                .iter()
                .zip(query.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            spec.eval_and_grad_h_from_sq(bw, sq)
        };
        let y = responses[i];
        num += k * y;
        den += k;
        dnum += dk * y;
        dden += dk;
    }
    if den > 0.0 {
        let g = num / den;
        let dg = (dnum * den - num * dden) / (den * den);
        (g, dg)
    } else {
        (fallback(pm, train, policy), 0.0)
    }
}

fn fallback(pm: &PredictionMatrix, train: &[usize], policy: ZeroWeightPolicy) -> f64 {
    match policy {
        ZeroWeightPolicy::Zero => 0.0,
        ZeroWeightPolicy::MeanResponse => {
            let responses = pm.responses();
            train.iter().map(|&i| responses[i]).sum::<f64>() / train.len() as f64
        }
    }
}

fn effective_step(h: f64, step: Option<f64>) -> f64 {
    let s = step.unwrap_or(1e-5 * h.max(1.0));
    // keep h - s strictly positive
    if s >= h {
        h * 0.5
    } else {
        s
    }
}

// ============================================================================
// Gradient descent
// ============================================================================

/// How the objective gradient is obtained during descent.
#[derive(Debug, Clone, PartialEq)]
pub enum GradMode {
    Analytic,
    /// Central finite difference; `None` steps with `1e-5 * max(h, 1)`.
    NumericalCentral { step: Option<f64> },
}

#[derive(Debug, Clone)]
pub struct GdConfig {
    pub h0: f64,
    /// Initial step size.
    pub learning_rate: f64,
    /// Gradient magnitude below which the iteration stops.
    pub threshold: f64,
    pub max_iter: usize,
    pub grad_mode: GradMode,
    /// Backtracking halvings allowed per step when the objective increases.
    pub max_halvings: usize,
    /// Factor applied to the step size after every accepted step; 1.0 keeps
    /// the classical fixed-rate iteration. The growing step lets the descent
    /// cross the flat tail of the CV curve in a few dozen evaluations where
    /// the fixed rate would spend the whole iteration budget.
    pub lr_growth: f64,
}

impl Default for GdConfig {
    fn default() -> Self {
        GdConfig {
            h0: 1.0,
            learning_rate: 0.1,
            threshold: 1e-6,
            max_iter: 300,
            grad_mode: GradMode::Analytic,
            max_halvings: 20,
            lr_growth: 2.0,
        }
    }
}

impl GdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.h0 > 0.0 && self.h0.is_finite()) {
            return Err(Error::InvalidConfig(format!("h0 must be positive, got {}", self.h0)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.threshold <= 0.0 || self.threshold.is_nan() {
            return Err(Error::InvalidConfig(format!(
                "threshold must be positive, got {}",
                self.threshold
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
        }
        if !(self.lr_growth >= 1.0 && self.lr_growth.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "lr_growth must be at least 1, got {}",
                self.lr_growth
            )));
        }
        Ok(())
    }
}

/// One visited point of a descent run. `lr_used` is the (possibly halved)
/// learning rate that produced the next point, `None` on the final entry;
/// `projected` marks points that were clamped to the positive floor. Runs are
/// replayable: the next h is exactly `max(h - lr_used * grad, MIN_BANDWIDTH)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GdStep {
    pub h: f64,
    pub phi: f64,
    pub grad: f64,
    pub lr_used: Option<f64>,
    pub projected: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// |gradient| fell to or below the threshold.
    Converged,
    /// The iteration budget ran out.
    MaxIter,
    /// The run ended pinned at the positive projection floor.
    Projected,
}

#[derive(Debug, Clone)]
pub struct GdResult {
    pub h_star: f64,
    pub trace: Vec<GdStep>,
    pub stop_reason: StopReason,
}

impl GdResult {
    /// Number of accepted descent steps (trace entries minus the start).
    pub fn iterations(&self) -> usize {
        self.trace.len().saturating_sub(1)
    }
}

/// Plain gradient descent with backtracking on a 1-d objective given by a
/// fused (value, gradient) oracle. Steps that cross zero are projected to
/// [`MIN_BANDWIDTH`]. Non-finite objective values abort with the trace.
pub fn gradient_descent<F>(mut eval: F, cfg: &GdConfig) -> Result<GdResult>
where
    F: FnMut(f64) -> Result<(f64, f64)>,
{
    let mut h = cfg.h0;
    let (mut phi, mut grad) = eval(h)?;
    if !(phi.is_finite() && grad.is_finite()) {
        return Err(Error::GdDiverged { trace: Vec::new() });
    }
    let mut trace: Vec<GdStep> = Vec::new();
    let mut projected = false;
    let mut accepted = 0usize;
    let mut step_size = cfg.learning_rate;

    loop {
        if grad.abs() <= cfg.threshold || accepted >= cfg.max_iter {
            trace.push(GdStep { h, phi, grad, lr_used: None, projected });
            let stop_reason = if projected && h == MIN_BANDWIDTH {
                StopReason::Projected
            } else if grad.abs() <= cfg.threshold {
                StopReason::Converged
            } else {
                StopReason::MaxIter
            };
            return Ok(GdResult { h_star: h, trace, stop_reason });
        }

        let mut lr = step_size;
        let mut halvings = 0usize;
        let (next_h, next_phi, next_grad, next_projected) = loop {
            let raw = h - lr * grad;
            let (cand, proj) = if raw < MIN_BANDWIDTH { (MIN_BANDWIDTH, true) } else { (raw, false) };
            let (p, g) = eval(cand)?;
            if !(p.is_finite() && g.is_finite()) {
                trace.push(GdStep { h, phi, grad, lr_used: Some(lr), projected });
                return Err(Error::GdDiverged { trace });
            }
            if p <= phi || halvings >= cfg.max_halvings {
                break (cand, p, g, proj);
            }
            halvings += 1;
            lr *= 0.5;
        };

        trace.push(GdStep { h, phi, grad, lr_used: Some(lr), projected });
        h = next_h;
        phi = next_phi;
        grad = next_grad;
        projected = next_projected;
        accepted += 1;
        step_size = (lr * cfg.lr_growth).min(1e18);
    }
}

/// Tunes the bandwidth of a CV objective by gradient descent. Restricted to
/// scheme families with a closed-form gradient (Gaussian/Exp4 Multiplicative);
/// the indicator and compact-kernel objectives are piecewise constant or
/// non-smooth in h, and grid search is the supported path for them.
pub fn fit_bandwidth_gd(obj: &CvObjective, cfg: &GdConfig) -> Result<GdResult> {
    cfg.validate()?;
    if !obj.family().supports_analytic_gradient() {
        return Err(Error::NotDifferentiable(format!(
            "gradient descent is only supported for gaussian/exp4 kernels under the \
             Multiplicative parametrization; scheme family {:?} must be tuned by grid search",
            obj.family().name()
        )));
    }
    match cfg.grad_mode.clone() {
        GradMode::Analytic => gradient_descent(|h| obj.error_and_gradient(h), cfg),
        GradMode::NumericalCentral { step } => gradient_descent(
            |h| {
                let phi = obj.error(h)?;
                let grad = obj.gradient(h, &GradMode::NumericalCentral { step })?;
                Ok((phi, grad))
            },
            cfg,
        ),
    }
}

// ============================================================================
// Grid search
// ============================================================================

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridSpacing {
    Linear,
    Logarithmic,
}

#[derive(Debug, Clone)]
pub struct GridConfig {
    pub h_min: f64,
    pub h_max: f64,
    pub n_points: usize,
    pub spacing: GridSpacing,
}

impl Default for GridConfig {
    /// 500 uniformly spaced points on [1e-10, 10]. The lower endpoint is the
    /// smallest representable non-degenerate bandwidth of the benchmark
    /// protocol.
    fn default() -> Self {
        GridConfig { h_min: 1e-10, h_max: 10.0, n_points: 500, spacing: GridSpacing::Linear }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.h_min > 0.0 && self.h_min.is_finite() && self.h_max.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "grid bounds must be positive finite reals, got [{}, {}]",
                self.h_min, self.h_max
            )));
        }
        if self.h_min >= self.h_max {
            return Err(Error::InvalidConfig(format!(
                "grid needs h_min < h_max, got [{}, {}]",
                self.h_min, self.h_max
            )));
        }
        if self.n_points < 2 {
            return Err(Error::InvalidConfig(format!(
                "grid needs at least 2 points, got {}",
                self.n_points
            )));
        }
        Ok(())
    }

    /// Grid nodes in ascending order.
    pub fn nodes(&self) -> Vec<f64> {
        let n = self.n_points;
        (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                match self.spacing {
                    GridSpacing::Linear => self.h_min + t * (self.h_max - self.h_min),
                    GridSpacing::Logarithmic => {
                        let (a, b) = (self.h_min.log10(), self.h_max.log10());
                        10f64.powf(a + t * (b - a))
                    }
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct GridResult {
    pub h_star: f64,
    pub error: f64,
    /// Every (h, error) pair evaluated, in ascending h order.
    pub error_curve: Vec<(f64, f64)>,
}

/// Evaluates the objective at every grid node and returns the argmin, with
/// ties resolved toward the smallest h. Works with both objective kinds.
pub fn fit_bandwidth_grid<O: BandwidthObjective>(obj: &O, grid: &GridConfig) -> Result<GridResult> {
    grid.validate()?;
    let mut curve = Vec::with_capacity(grid.n_points);
    for h in grid.nodes() {
        curve.push((h, obj.evaluate(h)?));
    }
    let mut best: Option<(f64, f64)> = None;
    for &(h, err) in &curve {
        if !err.is_finite() {
            continue;
        }
        match best {
            // strict < keeps the earlier (smaller) h on ties
            Some((_, e)) if err >= e => {}
            _ => best = Some((h, err)),
        }
    }
    let (h_star, error) = best.ok_or_else(|| {
        Error::InvalidArgument("objective was non-finite on the whole grid".into())
    })?;
    Ok(GridResult { h_star, error, error_curve: curve })
}

#[derive(Debug, Clone)]
pub struct AlphaGridResult {
    pub alpha_star: f64,
    pub h_star: f64,
    pub error: f64,
}

/// Joint (alpha, h) search for the relaxed indicator scheme: for every
/// alpha in {1/M, 2/M, ..., 1} the bandwidth grid is scanned, and the overall
/// argmin is returned. Ties prefer the larger alpha, then the smaller h.
pub fn fit_alpha_grid<O: BandwidthObjective>(
    obj: &O,
    grid: &GridConfig,
    m: usize,
) -> Result<AlphaGridResult> {
    if !matches!(obj.family(), SchemeFamily::CobraRelaxed { .. }) {
        return Err(Error::InvalidArgument(format!(
            "alpha search applies to the cobra-relaxed family, got {:?}",
            obj.family().name()
        )));
    }
    if m == 0 {
        return Err(Error::InvalidArgument("need at least one machine".into()));
    }
    let mut best: Option<AlphaGridResult> = None;
    for j in 1..=m {
        let alpha = j as f64 / m as f64;
        let candidate = obj.with_family(SchemeFamily::CobraRelaxed { alpha });
        let result = fit_bandwidth_grid(&candidate, grid)?;
        let replace = match &best {
            None => true,
            // <= lets the larger alpha win exact ties (alphas ascend).
            Some(b) => result.error <= b.error,
        };
        if replace {
            best = Some(AlphaGridResult { alpha_star: alpha, h_star: result.h_star, error: result.error });
        }
    }
    Ok(best.unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array1, Array2};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn gaussian_family() -> SchemeFamily {
        SchemeFamily::KernelVector {
            spec: KernelSpec::gaussian(1.0).unwrap(),
            parametrization: Parametrization::Multiplicative,
        }
    }

    fn random_pm(rng: &mut ChaCha8Rng, rows: usize, m: usize) -> PredictionMatrix {
        let values = Array2::from_shape_fn((rows, m), |_| rng.random_range(-2.0..2.0));
        let responses = Array1::from_shape_fn(rows, |_| rng.random_range(-3.0..3.0));
        PredictionMatrix::new(values, responses).unwrap()
    }

    // ------------------------------------------------------------------
    // CV error
    // ------------------------------------------------------------------

    #[test]
    fn constant_responses_give_zero_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let values = Array2::from_shape_fn((12, 2), |_| rng.random_range(-1.0..1.0));
        let responses = Array1::from_elem(12, 3.5);
        let pm = PredictionMatrix::new(values, responses).unwrap();
        let obj =
            CvObjective::new(pm, gaussian_family(), 3, 9, ZeroWeightPolicy::MeanResponse).unwrap();
        for h in [0.05, 1.0, 7.0] {
            let phi = obj.error(h).unwrap();
            assert!(phi.abs() <= 1e-20, "phi({h}) = {phi}");
            let (_, grad) = obj.error_and_gradient(h).unwrap();
            assert!(grad.abs() <= 1e-12, "grad({h}) = {grad}");
            let num = obj
                .gradient(h, &GradMode::NumericalCentral { step: None })
                .unwrap();
            assert!(num.abs() <= 1e-12, "numerical grad({h}) = {num}");
        }
    }

    /// Independent transcription of the fold-by-fold CV error formula, kept
    /// deliberately naive. Written before the implementation; the frozen
    /// constant below came from this oracle.
    fn cv_oracle(
        pm: &PredictionMatrix,
        folds: &[Vec<usize>],
        h: f64,
        policy: ZeroWeightPolicy,
    ) -> f64 {
        let mut total = 0.0;
        for fold in folds {
            for &j in fold {
                let train: Vec<usize> =
                    (0..pm.len()).filter(|r| !fold.contains(r)).collect();
                let mut num = 0.0;
                let mut den = 0.0;
                for &i in &train {
                    let mut sq = 0.0;
                    for c in 0..pm.width() {
                        let d = pm.values()[[i, c]] - pm.values()[[j, c]];
                        sq += d * d;
                    }
                    let k = (-h * sq / 2.0).exp(); // sigma = 1
                    num += k * pm.responses()[i];
                    den += k;
                }
                let g = if den > 0.0 {
                    num / den
                } else {
                    match policy {
                        ZeroWeightPolicy::Zero => 0.0,
                        ZeroWeightPolicy::MeanResponse => {
                            train.iter().map(|&i| pm.responses()[i]).sum::<f64>()
                                / train.len() as f64
                        }
                    }
                };
                total += (g - pm.responses()[j]).powi(2);
            }
        }
        total / folds.len() as f64
    }

    #[test]
    fn four_row_instance_matches_the_hand_rolled_oracle() {
        // 4 x 1 prediction matrix, kappa = 2, Gaussian Multiplicative h = 1.
        let pm = PredictionMatrix::new(
            array![[0.0], [1.0], [2.0], [3.0]],
            array![0.5, -1.0, 2.0, 0.0],
        )
        .unwrap();
        let folds = vec![vec![0, 2], vec![1, 3]];
        let obj = CvObjective::from_folds(
            pm.clone(),
            gaussian_family(),
            folds.clone(),
            ZeroWeightPolicy::MeanResponse,
        )
        .unwrap();
        let got = obj.error(1.0).unwrap();
        let oracle = cv_oracle(&pm, &folds, 1.0, ZeroWeightPolicy::MeanResponse);
        assert_abs_diff_eq!(got, oracle, epsilon = 1e-12);
        // Frozen from the oracle above.
        assert_abs_diff_eq!(got, 8.700837748762389, epsilon = 1e-12);
    }

    #[test]
    fn cv_error_matches_the_oracle_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        for _ in 0..20 {
            let pm = random_pm(&mut rng, 12, 3);
            let folds = make_folds(12, 3, rng.random()).unwrap();
            for policy in [ZeroWeightPolicy::MeanResponse, ZeroWeightPolicy::Zero] {
                let obj = CvObjective::from_folds(
                    pm.clone(),
                    gaussian_family(),
                    folds.clone(),
                    policy,
                )
                .unwrap();
                let h = rng.random_range(0.05..4.0);
                assert_abs_diff_eq!(
                    obj.error(h).unwrap(),
                    cv_oracle(&pm, &folds, h, policy),
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn no_consensus_under_the_strict_convention_scores_the_raw_responses() {
        // Naive kernel, h below every pairwise gap: all predictions are 0,
        // and phi is the per-fold sum of squared responses averaged over
        // folds.
        let pm = PredictionMatrix::new(
            array![[0.0], [10.0], [20.0], [30.0]],
            array![1.0, -2.0, 3.0, 4.0],
        )
        .unwrap();
        let family = SchemeFamily::KernelVector {
            spec: KernelSpec::Naive,
            parametrization: Parametrization::Divisive,
        };
        let folds = vec![vec![0, 1], vec![2, 3]];
        let obj =
            CvObjective::from_folds(pm, family, folds, ZeroWeightPolicy::Zero).unwrap();
        let phi = obj.error(1.0).unwrap();
        let expected = (1.0f64 + 4.0 + 9.0 + 16.0) / 2.0;
        assert_abs_diff_eq!(phi, expected, epsilon = 1e-15);
    }

    #[test]
    fn cv_error_is_invariant_to_fold_relabeling() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pm = random_pm(&mut rng, 15, 2);
        let folds = make_folds(15, 5, 7).unwrap();
        let mut relabeled = folds.clone();
        relabeled.rotate_left(2);
        relabeled.swap(0, 3);
        let a = CvObjective::from_folds(
            pm.clone(),
            gaussian_family(),
            folds,
            ZeroWeightPolicy::MeanResponse,
        )
        .unwrap();
        let b = CvObjective::from_folds(
            pm,
            gaussian_family(),
            relabeled,
            ZeroWeightPolicy::MeanResponse,
        )
        .unwrap();
        for h in [0.1, 1.0, 3.0] {
            assert_eq!(a.error(h).unwrap(), b.error(h).unwrap());
        }
    }

    #[test]
    fn degenerate_fold_setups_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pm = random_pm(&mut rng, 6, 2);
        assert!(matches!(
            CvObjective::new(pm.clone(), gaussian_family(), 1, 0, ZeroWeightPolicy::Zero),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            CvObjective::new(pm.clone(), gaussian_family(), 7, 0, ZeroWeightPolicy::Zero),
            Err(Error::InvalidConfig(_))
        ));
        // A fold swallowing every row leaves nothing to train on.
        let folds = vec![vec![0, 1, 2, 3, 4, 5], vec![]];
        assert!(matches!(
            CvObjective::from_folds(pm, gaussian_family(), folds, ZeroWeightPolicy::Zero),
            Err(Error::InvalidConfig(_))
        ));
    }

    // ------------------------------------------------------------------
    // Gradients
    // ------------------------------------------------------------------

    /// The pairwise (Y_i - Y_q) double-sum form of the prediction derivative,
    /// transcribed literally as an oracle for the factored implementation.
    fn pairwise_grad_oracle(pm: &PredictionMatrix, folds: &[Vec<usize>], h: f64) -> f64 {
        let mut total = 0.0;
        for fold in folds {
            for &j in fold {
                let train: Vec<usize> =
                    (0..pm.len()).filter(|r| !fold.contains(r)).collect();
                let sq = |a: usize, b: usize| -> f64 {
                    (0..pm.width())
                        .map(|c| (pm.values()[[a, c]] - pm.values()[[b, c]]).powi(2))
                        .sum()
                };
                let kh = |s: f64| (-h * s / 2.0).exp();
                let den: f64 = train.iter().map(|&i| kh(sq(j, i))).sum();
                let g: f64 =
                    train.iter().map(|&i| kh(sq(j, i)) * pm.responses()[i]).sum::<f64>() / den;
                let mut dg = 0.0;
                for &i in &train {
                    for &q in &train {
                        let dk_i = -(sq(j, i) / 2.0) * kh(sq(j, i));
                        dg += (pm.responses()[i] - pm.responses()[q]) * dk_i * kh(sq(j, q))
                            / (den * den);
                    }
                }
                total += 2.0 * (g - pm.responses()[j]) * dg;
            }
        }
        total / folds.len() as f64
    }

    #[test]
    fn factored_gradient_equals_the_pairwise_double_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..10 {
            let pm = random_pm(&mut rng, 10, 2);
            let folds = make_folds(10, 2, rng.random()).unwrap();
            let obj = CvObjective::from_folds(
                pm.clone(),
                gaussian_family(),
                folds.clone(),
                ZeroWeightPolicy::MeanResponse,
            )
            .unwrap();
            let h = rng.random_range(0.1..3.0);
            let (_, factored) = obj.error_and_gradient(h).unwrap();
            let pairwise = pairwise_grad_oracle(&pm, &folds, h);
            let scale = factored.abs().max(pairwise.abs()).max(1e-12);
            assert!(
                (factored - pairwise).abs() / scale <= 1e-10,
                "factored {factored} vs pairwise {pairwise}"
            );
        }
    }

    #[test]
    fn analytic_and_numerical_gradients_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        for _ in 0..40 {
            let rows = rng.random_range(6..20);
            let m = rng.random_range(1..=3);
            let pm = random_pm(&mut rng, rows, m);
            let obj = CvObjective::new(
                pm,
                gaussian_family(),
                3.min(rows),
                rng.random(),
                ZeroWeightPolicy::MeanResponse,
            )
            .unwrap();
            let h = rng.random_range(0.01..10.0);
            let analytic = obj.gradient(h, &GradMode::Analytic).unwrap();
            let numeric = obj
                .gradient(h, &GradMode::NumericalCentral { step: Some(1e-5) })
                .unwrap();
            let scale = analytic.abs().max(numeric.abs());
            if scale > 1e-12 {
                assert!(
                    (analytic - numeric).abs() / scale <= 1e-4,
                    "h {h}: analytic {analytic} vs numeric {numeric}"
                );
            }
        }
    }

    #[test]
    fn duplicate_training_rows_pin_the_gradient_to_zero() {
        // Every training row is the same point in prediction space, so the
        // weights are uniform whatever h is and the prediction is constant.
        let pm = PredictionMatrix::new(
            array![[0.5, -0.5], [0.5, -0.5], [0.5, -0.5], [0.5, -0.5]],
            array![1.0, 3.0, -2.0, 0.5],
        )
        .unwrap();
        let folds = vec![vec![0, 1], vec![2, 3]];
        let obj = CvObjective::from_folds(
            pm,
            gaussian_family(),
            folds,
            ZeroWeightPolicy::MeanResponse,
        )
        .unwrap();
        let (_, grad) = obj.error_and_gradient(0.8).unwrap();
        assert!(grad.abs() <= 1e-13, "grad = {grad}");
    }

    #[test]
    fn analytic_gradient_refuses_unsupported_families() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pm = random_pm(&mut rng, 8, 2);
        let family = SchemeFamily::KernelVector {
            spec: KernelSpec::Epanechnikov,
            parametrization: Parametrization::Divisive,
        };
        let obj =
            CvObjective::new(pm, family, 2, 0, ZeroWeightPolicy::MeanResponse).unwrap();
        assert!(matches!(
            obj.gradient(1.0, &GradMode::Analytic),
            Err(Error::NotDifferentiable(_))
        ));
        // Numerical differencing of the piecewise-constant objective is still
        // allowed for diagnostics.
        assert!(obj.gradient(1.0, &GradMode::NumericalCentral { step: None }).is_ok());
    }

    // ------------------------------------------------------------------
    // Gradient descent
    // ------------------------------------------------------------------

    #[test]
    fn surrogate_parabola_converges_to_its_vertex() {
        // Fixed learning rate: the trajectory is the closed-form iteration
        // h <- 0.5 h + 1.
        let cfg = GdConfig {
            h0: 0.0,
            learning_rate: 0.25,
            threshold: 1e-9,
            max_iter: 300,
            lr_growth: 1.0,
            ..GdConfig::default()
        };
        let result = gradient_descent(
            |h| Ok(((h - 2.0) * (h - 2.0), 2.0 * (h - 2.0))),
            &cfg,
        )
        .unwrap();
        assert_eq!(result.stop_reason, StopReason::Converged);
        assert!((result.h_star - 2.0).abs() <= 5e-10, "h* = {}", result.h_star);
        // The iteration is h <- 0.5 h + 1: from 0 the first two points are 1
        // and 1.5.
        assert_eq!(result.trace[1].h, 1.0);
        assert_eq!(result.trace[2].h, 1.5);
    }

    #[test]
    fn huge_threshold_returns_the_start_point_untouched() {
        let cfg = GdConfig { threshold: 1e9, ..GdConfig::default() };
        let result = gradient_descent(|h| Ok((h * h, 2.0 * h)), &cfg).unwrap();
        assert_eq!(result.stop_reason, StopReason::Converged);
        assert_eq!(result.h_star, cfg.h0);
        assert_eq!(result.iterations(), 0);
        assert_eq!(result.trace.len(), 1);
    }

    #[test]
    fn descent_steps_replay_exactly_from_the_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let pm = random_pm(&mut rng, 20, 3);
        let obj = CvObjective::new(
            pm,
            gaussian_family(),
            4,
            11,
            ZeroWeightPolicy::MeanResponse,
        )
        .unwrap();
        let cfg = GdConfig { max_iter: 40, threshold: 1e-9, ..GdConfig::default() };
        let result = fit_bandwidth_gd(&obj, &cfg).unwrap();
        assert_eq!(result.h_star, result.trace.last().unwrap().h);
        for pair in result.trace.windows(2) {
            let lr = pair[0].lr_used.expect("non-final entries carry the step size");
            let raw = pair[0].h - lr * pair[0].grad;
            if raw < MIN_BANDWIDTH {
                assert!(pair[1].projected);
                assert_eq!(pair[1].h, MIN_BANDWIDTH);
            } else {
                assert_eq!(pair[1].h, raw);
                assert!(!pair[1].projected);
            }
        }
    }

    #[test]
    fn negative_steps_project_to_the_floor() {
        // Strongly increasing objective with huge gradient: the first step
        // shoots far below zero and must land on the floor. Backtracking is
        // disabled so the projected step is accepted as-is.
        let cfg = GdConfig {
            h0: 1.0,
            learning_rate: 10.0,
            threshold: 1e-12,
            max_iter: 3,
            max_halvings: 0,
            ..GdConfig::default()
        };
        let result = gradient_descent(|h| Ok((h, 1.0)), &cfg).unwrap();
        assert_eq!(result.stop_reason, StopReason::Projected);
        assert_eq!(result.h_star, MIN_BANDWIDTH);
        assert!(result.trace.last().unwrap().projected);
    }

    #[test]
    fn diverging_objective_reports_the_trace() {
        let cfg = GdConfig { h0: 1.0, learning_rate: 1.0, threshold: 1e-12, ..GdConfig::default() };
        let err = gradient_descent(
            |h| Ok(if h > 1.5 { (f64::NAN, f64::NAN) } else { (-h, -1.0) }),
            &cfg,
        )
        .unwrap_err();
        match err {
            Error::GdDiverged { trace } => assert!(!trace.is_empty()),
            other => panic!("expected GdDiverged, got {other:?}"),
        }
    }

    #[test]
    fn gd_refuses_non_differentiable_families() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let pm = random_pm(&mut rng, 10, 2);
        let family = SchemeFamily::KernelVector {
            spec: KernelSpec::Naive,
            parametrization: Parametrization::Divisive,
        };
        let obj = CvObjective::new(pm, family, 2, 0, ZeroWeightPolicy::Zero).unwrap();
        assert!(matches!(
            fit_bandwidth_gd(&obj, &GdConfig::default()),
            Err(Error::NotDifferentiable(_))
        ));
    }

    #[test]
    fn gd_lands_within_five_percent_of_the_grid_minimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..5 {
            let pm = random_pm(&mut rng, 40, 3);
            let obj = CvObjective::new(
                pm,
                gaussian_family(),
                5,
                rng.random(),
                ZeroWeightPolicy::MeanResponse,
            )
            .unwrap();
            let gd = fit_bandwidth_gd(&obj, &GdConfig::default()).unwrap();
            let grid = fit_bandwidth_grid(&obj, &GridConfig::default()).unwrap();
            let phi_gd = obj.error(gd.h_star).unwrap();
            assert!(
                phi_gd <= grid.error * 1.05,
                "gd {phi_gd} vs grid {}",
                grid.error
            );
        }
    }

    // ------------------------------------------------------------------
    // Grid search
    // ------------------------------------------------------------------

    /// Objective defined by a closure over h; test scaffolding only.
    #[derive(Clone)]
    struct FnObjective<F: Fn(f64) -> f64 + Clone> {
        f: F,
        family: SchemeFamily,
    }

    impl<F: Fn(f64) -> f64 + Clone> FnObjective<F> {
        fn new(f: F) -> Self {
            FnObjective { f, family: SchemeFamily::CobraRelaxed { alpha: 1.0 } }
        }
    }

    impl<F: Fn(f64) -> f64 + Clone> BandwidthObjective for FnObjective<F> {
        fn evaluate(&self, h: f64) -> Result<f64> {
            Ok((self.f)(h))
        }
        fn family(&self) -> &SchemeFamily {
            &self.family
        }
        fn with_family(&self, family: SchemeFamily) -> Self {
            FnObjective { f: self.f.clone(), family }
        }
    }

    #[test]
    fn grid_finds_a_unique_minimum_node() {
        let grid = GridConfig { h_min: 0.5, h_max: 5.0, n_points: 10, spacing: GridSpacing::Linear };
        let obj = FnObjective::new(|h: f64| (h - 2.0) * (h - 2.0));
        let result = fit_bandwidth_grid(&obj, &grid).unwrap();
        assert_abs_diff_eq!(result.h_star, 2.0, epsilon = 1e-12);
        assert_eq!(result.error_curve.len(), 10);
        // The reported minimum is exactly the minimum of the returned curve.
        let min = result
            .error_curve
            .iter()
            .cloned()
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        assert_eq!(result.error, min.1);
    }

    #[test]
    fn grid_ties_resolve_to_the_smaller_bandwidth() {
        // Grid nodes 1, 2, 3, 4 with exactly equal minima at 1 and 3.
        let grid = GridConfig { h_min: 1.0, h_max: 4.0, n_points: 4, spacing: GridSpacing::Linear };
        let obj = FnObjective::new(|h: f64| ((h - 1.0) * (h - 3.0)).powi(2));
        let result = fit_bandwidth_grid(&obj, &grid).unwrap();
        assert_eq!(result.h_star, 1.0);
    }

    #[test]
    fn grid_reproduces_a_brute_force_argmin() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let pm = random_pm(&mut rng, 50, 3);
        let obj = CvObjective::new(
            pm,
            gaussian_family(),
            5,
            3,
            ZeroWeightPolicy::MeanResponse,
        )
        .unwrap();
        let grid = GridConfig::default();
        let result = fit_bandwidth_grid(&obj, &grid).unwrap();
        // Independent scan over the same nodes.
        let mut best_h = f64::NAN;
        let mut best_e = f64::INFINITY;
        for h in grid.nodes() {
            let e = obj.error(h).unwrap();
            if e < best_e {
                best_e = e;
                best_h = h;
            }
        }
        assert_eq!(result.h_star, best_h);
        assert_eq!(result.error, best_e);
    }

    #[test]
    fn log_spacing_spans_the_exact_endpoints() {
        let grid = GridConfig {
            h_min: 1e-3,
            h_max: 10.0,
            n_points: 9,
            spacing: GridSpacing::Logarithmic,
        };
        let nodes = grid.nodes();
        assert_abs_diff_eq!(nodes[0], 1e-3, epsilon = 1e-15);
        assert_abs_diff_eq!(nodes[8], 10.0, epsilon = 1e-12);
        assert!(nodes.windows(2).all(|w| w[0] < w[1]));
    }

    // ------------------------------------------------------------------
    // Alpha search
    // ------------------------------------------------------------------

    #[test]
    fn alpha_search_with_one_machine_reduces_to_the_bandwidth_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(60);
        let pm = random_pm(&mut rng, 20, 1);
        let obj = HoldoutObjective::new(
            pm,
            SchemeFamily::CobraRelaxed { alpha: 1.0 },
            5,
            ZeroWeightPolicy::MeanResponse,
        )
        .unwrap();
        let grid = GridConfig { h_min: 0.05, h_max: 4.0, n_points: 40, spacing: GridSpacing::Linear };
        let joint = fit_alpha_grid(&obj, &grid, 1).unwrap();
        let plain = fit_bandwidth_grid(&obj, &grid).unwrap();
        assert_eq!(joint.alpha_star, 1.0);
        assert_eq!(joint.h_star, plain.h_star);
        assert_eq!(joint.error, plain.error);
    }

    #[test]
    fn alpha_search_matches_the_exhaustive_table() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let m = 3;
        let pm = random_pm(&mut rng, 18, m);
        let obj = CvObjective::new(
            pm,
            SchemeFamily::CobraRelaxed { alpha: 1.0 },
            3,
            2,
            ZeroWeightPolicy::MeanResponse,
        )
        .unwrap();
        let grid = GridConfig { h_min: 0.05, h_max: 5.0, n_points: 20, spacing: GridSpacing::Linear };
        let got = fit_alpha_grid(&obj, &grid, m).unwrap();

        // Exhaustive (alpha, h) table with the documented tie rules: larger
        // alpha wins ties, then the smaller h.
        let mut best: Option<(f64, f64, f64)> = None;
        for j in 1..=m {
            let alpha = j as f64 / m as f64;
            let scan = obj.with_family(SchemeFamily::CobraRelaxed { alpha });
            for h in grid.nodes() {
                let e = scan.evaluate(h).unwrap();
                let replace = match best {
                    None => true,
                    Some((be, ba, bh)) => {
                        e < be
                            || (e == be && alpha > ba)
                            || (e == be && alpha == ba && h < bh)
                    }
                };
                if replace {
                    best = Some((e, alpha, h));
                }
            }
        }
        let (be, ba, bh) = best.unwrap();
        assert_eq!(got.alpha_star, ba);
        assert_eq!(got.h_star, bh);
        assert_eq!(got.error, be);
    }

    #[test]
    fn alpha_search_picks_full_consensus_when_partial_agreement_misleads() {
        // Ten stored rows, two machines. Row 1 agrees with the validation
        // query on machine 1 only and carries a wildly wrong response, so
        // every alpha < 1 admits it and pays for it; full consensus keeps
        // only the exact twin (row 0) and scores zero error.
        let mut values = vec![[0.0, 0.0], [0.0, 5.0]];
        let mut responses = vec![0.0, 10.0];
        for i in 0..7 {
            values.push([100.0 + i as f64, 100.0 + i as f64]);
            responses.push(50.0);
        }
        values.push([0.0, 0.0]); // validation twin of row 0
        responses.push(0.0);
        let pm = PredictionMatrix::new(
            Array2::from_shape_fn((10, 2), |(i, j)| values[i][j]),
            Array1::from_vec(responses),
        )
        .unwrap();
        let obj = HoldoutObjective::from_rows(
            pm,
            SchemeFamily::CobraRelaxed { alpha: 1.0 },
            (0..9).collect(),
            vec![9],
            ZeroWeightPolicy::Zero,
        )
        .unwrap();
        let grid =
            GridConfig { h_min: 0.5, h_max: 4.0, n_points: 20, spacing: GridSpacing::Linear };
        let joint = fit_alpha_grid(&obj, &grid, 2).unwrap();
        assert_eq!(joint.alpha_star, 1.0);
        assert_eq!(joint.error, 0.0);
        assert_eq!(joint.h_star, 0.5); // tie over h resolves to the smallest node
    }

    #[test]
    fn alpha_search_requires_the_relaxed_family() {
        let mut rng = ChaCha8Rng::seed_from_u64(62);
        let pm = random_pm(&mut rng, 10, 2);
        let obj =
            CvObjective::new(pm, gaussian_family(), 2, 0, ZeroWeightPolicy::MeanResponse).unwrap();
        assert!(fit_alpha_grid(&obj, &GridConfig::default(), 2).is_err());
    }

    // ------------------------------------------------------------------
    // Hold-out objective
    // ------------------------------------------------------------------

    #[test]
    fn holdout_error_is_the_mean_over_validation_rows() {
        let pm = PredictionMatrix::new(
            array![[0.0], [1.0], [0.2], [0.9]],
            array![1.0, 2.0, 1.5, 2.5],
        )
        .unwrap();
        let obj = HoldoutObjective::from_rows(
            pm.clone(),
            gaussian_family(),
            vec![0, 1],
            vec![2, 3],
            ZeroWeightPolicy::MeanResponse,
        )
        .unwrap();
        let h = 1.3;
        let g = |j: usize| {
            let k0 = (-h * (pm.values()[[0, 0]] - pm.values()[[j, 0]]).powi(2) / 2.0).exp();
            let k1 = (-h * (pm.values()[[1, 0]] - pm.values()[[j, 0]]).powi(2) / 2.0).exp();
            (k0 * 1.0 + k1 * 2.0) / (k0 + k1)
        };
        let expected = ((g(2) - 1.5f64).powi(2) + (g(3) - 2.5f64).powi(2)) / 2.0;
        assert_abs_diff_eq!(obj.evaluate(h).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn holdout_split_is_a_partition() {
        let mut rng = ChaCha8Rng::seed_from_u64(70);
        let pm = random_pm(&mut rng, 21, 2);
        let obj = HoldoutObjective::new(
            pm,
            gaussian_family(),
            1234,
            ZeroWeightPolicy::MeanResponse,
        )
        .unwrap();
        let mut all: Vec<usize> = obj.fit_rows().iter().chain(obj.val_rows()).cloned().collect();
        all.sort_unstable();
        assert_eq!(all, (0..21).collect::<Vec<_>>());
        assert_eq!(obj.fit_rows().len(), 11); // weighting side gets the odd row
    }
}
