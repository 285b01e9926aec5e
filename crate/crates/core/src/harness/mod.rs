//! Batch experiment harness: configuration, replicated runs, metrics,
//! result tables and property-check suites.

pub mod checks;
pub mod config;
pub mod metrics;
pub mod results;
pub mod run;

pub use checks::{run_all_checks, CheckReport};
pub use config::{ExperimentConfig, LearnerConfig, OptimizerConfig, SchemeConfig, SourceConfig};
pub use metrics::{metric_mse, metric_rmse, MetricKind};
pub use results::{emit_results, parse_results_csv, render_results, EmitFormat, ResultTable};
pub use run::{run_experiment, time_optimizers, write_synthetic_csv, OptimizerTiming};
