//! Consensual aggregation of regression machines.
//!
//! This crate combines an arbitrary collection of fitted base regressors into
//! a single predictor by kernel-weighted averaging in *prediction space*: a
//! training point contributes to the prediction at a query point according to
//! how closely the base machines' predictions at the two points agree. The
//! single tuned hyperparameter is the kernel bandwidth, selected either by
//! grid search or by gradient descent on a k-fold cross-validation error.
//!
//! Module map:
//!
//! - [`kernels`]: the kernel family and its bandwidth parametrizations.
//! - [`learners`]: self-contained ridge / lasso / kNN / tree / random-forest
//!   regressors behind one fit/predict contract.
//! - [`aggregation`]: combination weights (indicator-consensus and
//!   kernel-based) and the aggregated predictor.
//! - [`bandwidth`]: the cross-validation objective, its gradient, gradient
//!   descent and grid search.
//! - [`datagen`]: synthetic benchmark generators, dataset splitting and CSV
//!   ingestion.
//! - [`harness`]: replicated experiments, metrics, result tables and the
//!   property-check suites behind the CLI.

pub mod aggregation;
pub mod bandwidth;
pub mod datagen;
pub mod error;
pub mod harness;
pub mod kernels;
pub mod learners;
mod seeding;

pub use error::{Error, Result};
