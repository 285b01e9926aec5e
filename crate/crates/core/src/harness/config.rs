//! Experiment configuration: the JSON format consumed by the CLI and the
//! resolution of config names into concrete learner kinds, scheme families
//! and tuning plans.
//!
//! Accepted names:
//!
//! - learners: `ridge`, `lasso`, `knn`, `tree`, `rf`
//! - schemes: `cobra`, `cobra-relaxed`, `kernel`, `kernel-percoord`
//! - kernels: `naive`, `epanechnikov`, `biweight`, `triweight`,
//!   `compact-gaussian`, `gaussian`, `exp4`
//!
//! Kernel schemes are tuned on the k-fold CV objective (gradient descent when
//! the config asks for it and the kernel admits the analytic gradient, grid
//! search otherwise); the indicator schemes are tuned on the hold-out
//! objective, jointly over (alpha, h) when `alpha` is left unset.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::aggregation::ZeroWeightPolicy;
use crate::bandwidth::{GdConfig, GradMode, GridConfig, GridSpacing, SchemeFamily};
use crate::datagen::Regime;
use crate::error::{Error, Result};
use crate::harness::metrics::MetricKind;
use crate::kernels::{KernelSpec, Parametrization};
use crate::learners::LearnerKind;

// ============================================================================
// JSON structures
// ============================================================================

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum SourceConfig {
    Synthetic {
        id: u8,
        #[serde(default = "default_regime")]
        regime: Regime,
    },
    Csv {
        path: PathBuf,
        target: String,
        #[serde(default)]
        features: Option<Vec<String>>,
    },
}

fn default_regime() -> Regime {
    Regime::Uncorrelated
}

/// A learner entry: either a bare name with default hyperparameters or a
/// detailed object.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LearnerConfig {
    Name(String),
    Detailed(LearnerSpec),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase", deny_unknown_fields)]
pub enum LearnerSpec {
    Ridge {
        #[serde(default)]
        lambda: Option<f64>,
    },
    Lasso {
        #[serde(default)]
        lambda: Option<f64>,
        #[serde(default = "default_lasso_tol")]
        tol: f64,
        #[serde(default = "default_lasso_max_iter")]
        max_iter: usize,
    },
    Knn {
        #[serde(default = "default_knn_k")]
        k: usize,
    },
    Tree {
        #[serde(default = "default_min_leaf")]
        min_leaf: usize,
        #[serde(default = "default_max_depth")]
        max_depth: usize,
    },
    Rf {
        #[serde(default = "default_n_trees")]
        n_trees: usize,
        #[serde(default)]
        mtry: Option<usize>,
        #[serde(default = "default_min_leaf")]
        min_leaf: usize,
        #[serde(default)]
        seed: u64,
    },
}

fn default_lasso_tol() -> f64 {
    1e-7
}
fn default_lasso_max_iter() -> usize {
    10_000
}
fn default_knn_k() -> usize {
    5
}
fn default_min_leaf() -> usize {
    5
}
fn default_max_depth() -> usize {
    12
}
fn default_n_trees() -> usize {
    300
}

impl LearnerSpec {
    fn to_kind(&self) -> LearnerKind {
        match *self {
            LearnerSpec::Ridge { lambda } => LearnerKind::Ridge { lambda },
            LearnerSpec::Lasso { lambda, tol, max_iter } => {
                LearnerKind::Lasso { lambda, tol, max_iter }
            }
            LearnerSpec::Knn { k } => LearnerKind::Knn { k },
            LearnerSpec::Tree { min_leaf, max_depth } => LearnerKind::Tree { min_leaf, max_depth },
            LearnerSpec::Rf { n_trees, mtry, min_leaf, seed } => {
                LearnerKind::RandomForest { n_trees, mtry, min_leaf, seed }
            }
        }
    }
}

impl LearnerConfig {
    pub fn to_kind(&self) -> Result<LearnerKind> {
        match self {
            LearnerConfig::Detailed(spec) => Ok(spec.to_kind()),
            LearnerConfig::Name(name) => match name.as_str() {
                "ridge" => Ok(LearnerKind::ridge()),
                "lasso" => Ok(LearnerKind::lasso()),
                "knn" => Ok(LearnerKind::knn(default_knn_k())),
                "tree" => Ok(LearnerKind::tree()),
                "rf" => Ok(LearnerKind::random_forest(default_n_trees())),
                other => Err(Error::InvalidConfig(format!(
                    "unknown learner {other:?} (expected ridge, lasso, knn, tree, rf)"
                ))),
            },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    /// `cobra`, `cobra-relaxed`, `kernel` or `kernel-percoord`.
    pub name: String,
    /// Kernel name for the kernel schemes (default `gaussian`).
    #[serde(default)]
    pub kernel: Option<String>,
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub rho1: Option<f64>,
    /// `divisive` or `multiplicative`; defaults to multiplicative for
    /// gaussian/exp4 and divisive for the compact kernels.
    #[serde(default)]
    pub parametrization: Option<String>,
    /// Consensus fraction for `cobra-relaxed`; tuned jointly with h when
    /// unset.
    #[serde(default)]
    pub alpha: Option<f64>,
    /// Result-column label override.
    #[serde(default)]
    pub label: Option<String>,
}

impl SchemeConfig {
    pub fn named(name: &str) -> Self {
        SchemeConfig {
            name: name.to_string(),
            kernel: None,
            sigma: None,
            rho1: None,
            parametrization: None,
            alpha: None,
            label: None,
        }
    }

    pub fn kernel(kernel: &str) -> Self {
        SchemeConfig { kernel: Some(kernel.to_string()), ..Self::named("kernel") }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "default_grid_min")]
    pub min: f64,
    #[serde(default = "default_grid_max")]
    pub max: f64,
    #[serde(default = "default_grid_points")]
    pub points: usize,
    #[serde(default = "default_spacing")]
    pub spacing: GridSpacing,
}

fn default_grid_min() -> f64 {
    1e-10
}
fn default_grid_max() -> f64 {
    10.0
}
fn default_grid_points() -> usize {
    500
}
fn default_spacing() -> GridSpacing {
    GridSpacing::Linear
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            min: default_grid_min(),
            max: default_grid_max(),
            points: default_grid_points(),
            spacing: default_spacing(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    /// `gd` or `grid`.
    #[serde(default = "default_optimizer")]
    pub optimizer: String,
    #[serde(default = "default_h0")]
    pub h0: f64,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_gd_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default = "default_folds")]
    pub folds: usize,
    /// Fold-assignment seed; derived from the replication seed when unset.
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_optimizer() -> String {
    "gd".to_string()
}
fn default_h0() -> f64 {
    1.0
}
fn default_lr() -> f64 {
    0.1
}
fn default_delta() -> f64 {
    1e-6
}
fn default_gd_max_iter() -> usize {
    300
}
fn default_folds() -> usize {
    5
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            optimizer: default_optimizer(),
            h0: default_h0(),
            lr: default_lr(),
            delta: default_delta(),
            max_iter: default_gd_max_iter(),
            grid: GridSection::default(),
            folds: default_folds(),
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FallbackConfig {
    /// No-consensus predictions return the stored-response mean.
    #[default]
    Mean,
    /// Literal 0/0 = 0 convention.
    Zero,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub source: SourceConfig,
    pub learners: Vec<LearnerConfig>,
    pub schemes: Vec<SchemeConfig>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    /// Defaults to MSE for synthetic sources and RMSE for CSV sources.
    #[serde(default)]
    pub metric: Option<MetricKind>,
    #[serde(default)]
    pub fallback: FallbackConfig,
}

fn default_replications() -> usize {
    20
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::InvalidConfig(format!("config parse error: {e}")))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::InvalidConfig(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::from_json(&text)
    }
}

// ============================================================================
// Resolution
// ============================================================================

/// How a scheme's bandwidth gets tuned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum TunePlan {
    CvGd,
    CvGrid,
    HoldoutGrid,
    /// Joint (alpha, h) hold-out search for the relaxed indicator scheme.
    HoldoutAlphaGrid,
}

#[derive(Debug, Clone)]
pub(crate) struct ResolvedScheme {
    pub label: String,
    pub family: SchemeFamily,
    pub tune: TunePlan,
}

#[derive(Debug, Clone)]
pub(crate) struct ResolvedExperiment {
    pub learner_kinds: Vec<LearnerKind>,
    pub learner_labels: Vec<String>,
    pub schemes: Vec<ResolvedScheme>,
    pub gd: GdConfig,
    pub grid: GridConfig,
    pub folds: usize,
    pub fold_seed: Option<u64>,
    pub replications: usize,
    pub seed: u64,
    pub metric: MetricKind,
    pub policy: ZeroWeightPolicy,
}

impl ExperimentConfig {
    pub(crate) fn resolve(&self) -> Result<ResolvedExperiment> {
        if self.replications == 0 {
            return Err(Error::InvalidConfig("replications must be at least 1".into()));
        }
        if self.learners.is_empty() {
            return Err(Error::InvalidConfig("need at least one learner".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::InvalidConfig("need at least one scheme".into()));
        }
        if let SourceConfig::Synthetic { id, .. } = self.source {
            if !(1..=10).contains(&id) {
                return Err(Error::InvalidConfig(format!(
                    "synthetic model id must be 1..=10, got {id}"
                )));
            }
        }

        let learner_kinds: Vec<LearnerKind> =
            self.learners.iter().map(|l| l.to_kind()).collect::<Result<_>>()?;
        let learner_labels =
            make_unique(learner_kinds.iter().map(|k| k.name().to_string()).collect());

        let use_gd = match self.optimizer.optimizer.as_str() {
            "gd" => true,
            "grid" => false,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown optimizer {other:?} (expected \"gd\" or \"grid\")"
                )))
            }
        };

        let mut schemes = Vec::with_capacity(self.schemes.len());
        let mut labels = Vec::with_capacity(self.schemes.len());
        for sc in &self.schemes {
            let resolved = resolve_scheme(sc, use_gd)?;
            labels.push(resolved.0);
            schemes.push(resolved.1);
        }
        let labels = make_unique(labels);
        let schemes: Vec<ResolvedScheme> = labels
            .into_iter()
            .zip(schemes)
            .map(|(label, (family, tune))| ResolvedScheme { label, family, tune })
            .collect();

        let gd = GdConfig {
            h0: self.optimizer.h0,
            learning_rate: self.optimizer.lr,
            threshold: self.optimizer.delta,
            max_iter: self.optimizer.max_iter,
            grad_mode: GradMode::Analytic,
            ..GdConfig::default()
        };
        gd.validate()?;
        let grid = GridConfig {
            h_min: self.optimizer.grid.min,
            h_max: self.optimizer.grid.max,
            n_points: self.optimizer.grid.points,
            spacing: self.optimizer.grid.spacing,
        };
        grid.validate()?;
        if self.optimizer.folds < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 CV folds, got {}",
                self.optimizer.folds
            )));
        }

        let metric = self.metric.unwrap_or(match self.source {
            SourceConfig::Synthetic { .. } => MetricKind::Mse,
            SourceConfig::Csv { .. } => MetricKind::Rmse,
        });
        let policy = match self.fallback {
            FallbackConfig::Mean => ZeroWeightPolicy::MeanResponse,
            FallbackConfig::Zero => ZeroWeightPolicy::Zero,
        };

        Ok(ResolvedExperiment {
            learner_kinds,
            learner_labels,
            schemes,
            gd,
            grid,
            folds: self.optimizer.folds,
            fold_seed: self.optimizer.seed,
            replications: self.replications,
            seed: self.seed,
            metric,
            policy,
        })
    }
}

type SchemeParts = (SchemeFamily, TunePlan);

fn resolve_scheme(sc: &SchemeConfig, use_gd: bool) -> Result<(String, SchemeParts)> {
    match sc.name.as_str() {
        "cobra" => {
            reject_kernel_fields(sc)?;
            let label = sc.label.clone().unwrap_or_else(|| "cobra".to_string());
            Ok((label, (SchemeFamily::CobraFull, TunePlan::HoldoutGrid)))
        }
        "cobra-relaxed" => {
            reject_kernel_fields(sc)?;
            let label = sc.label.clone().unwrap_or_else(|| "cobra-relaxed".to_string());
            match sc.alpha {
                Some(alpha) => {
                    if !(alpha > 0.0 && alpha <= 1.0) {
                        return Err(Error::InvalidConfig(format!(
                            "alpha must lie in (0, 1], got {alpha}"
                        )));
                    }
                    Ok((label, (SchemeFamily::CobraRelaxed { alpha }, TunePlan::HoldoutGrid)))
                }
                None => Ok((
                    label,
                    (SchemeFamily::CobraRelaxed { alpha: 1.0 }, TunePlan::HoldoutAlphaGrid),
                )),
            }
        }
        "kernel" | "kernel-percoord" => {
            if sc.alpha.is_some() {
                return Err(Error::InvalidConfig(
                    "alpha only applies to the cobra-relaxed scheme".into(),
                ));
            }
            let kernel_name = sc.kernel.as_deref().unwrap_or("gaussian");
            let spec = KernelSpec::from_name(kernel_name, sc.sigma, sc.rho1)?;
            let parametrization = match sc.parametrization.as_deref() {
                None => {
                    if spec.supports_multiplicative() {
                        Parametrization::Multiplicative
                    } else {
                        Parametrization::Divisive
                    }
                }
                Some("divisive") => Parametrization::Divisive,
                Some("multiplicative") => {
                    if !spec.supports_multiplicative() {
                        return Err(Error::InvalidConfig(format!(
                            "kernel {kernel_name:?} does not admit the multiplicative \
                             parametrization"
                        )));
                    }
                    Parametrization::Multiplicative
                }
                Some(other) => {
                    return Err(Error::InvalidConfig(format!(
                        "unknown parametrization {other:?} (expected divisive or multiplicative)"
                    )))
                }
            };
            let family = if sc.name == "kernel" {
                SchemeFamily::KernelVector { spec, parametrization }
            } else {
                SchemeFamily::KernelPerCoord { spec, parametrization }
            };
            // GD applies only where the analytic gradient exists; other
            // kernels in the same experiment fall back to grid search.
            let tune = if use_gd && family.supports_analytic_gradient() {
                TunePlan::CvGd
            } else {
                if use_gd {
                    log::info!(
                        "scheme {}: kernel {} is not differentiable in h, tuning by grid search",
                        sc.name,
                        kernel_name
                    );
                }
                TunePlan::CvGrid
            };
            let label = sc.label.clone().unwrap_or_else(|| {
                if sc.name == "kernel" {
                    kernel_name.to_string()
                } else {
                    format!("percoord-{kernel_name}")
                }
            });
            Ok((label, (family, tune)))
        }
        other => Err(Error::InvalidConfig(format!(
            "unknown scheme {other:?} (expected cobra, cobra-relaxed, kernel, kernel-percoord)"
        ))),
    }
}

fn reject_kernel_fields(sc: &SchemeConfig) -> Result<()> {
    if sc.kernel.is_some() || sc.sigma.is_some() || sc.rho1.is_some()
        || sc.parametrization.is_some()
    {
        return Err(Error::InvalidConfig(format!(
            "scheme {:?} takes no kernel fields",
            sc.name
        )));
    }
    Ok(())
}

/// Deduplicates labels by appending `#2`, `#3`, ... to repeats.
fn make_unique(labels: Vec<String>) -> Vec<String> {
    let mut seen: std::collections::HashMap<String, usize> = std::collections::HashMap::new();
    labels
        .into_iter()
        .map(|label| {
            let n = seen.entry(label.clone()).or_insert(0);
            *n += 1;
            if *n == 1 {
                label
            } else {
                format!("{label}#{n}")
            }
        })
        .collect()
}
