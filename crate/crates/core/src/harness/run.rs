//! Replicated experiment execution.
//!
//! One replication r of an experiment:
//!
//! 1. draw the dataset (synthetic sources regenerate with seed
//!    `base_seed + r`; CSV sources are loaded once and resplit),
//! 2. split into machine-fitting, aggregation and test parts,
//! 3. fit every configured learner on the machine-fitting part,
//! 4. build the prediction matrix on the aggregation part,
//! 5. tune h per scheme (CV objective for kernel schemes, hold-out for the
//!    indicator schemes, which then combine over their weighting half only),
//! 6. score every learner and scheme on the test part.
//!
//! Replications run in parallel and are gathered by index; every random
//! choice derives deterministically from the replication seed, so the
//! resulting table does not depend on the worker-pool size. A failed
//! replication is logged and dropped; more than 10% failures abort the run.

use ndarray::Array2;
use rayon::prelude::*;
use serde::Serialize;
use std::time::Instant;

use crate::aggregation::{aggregate_at, PredictionMatrix};
use crate::bandwidth::{
    fit_alpha_grid, fit_bandwidth_gd, fit_bandwidth_grid, BandwidthObjective, CvObjective,
    HoldoutObjective, SchemeFamily,
};
use crate::datagen::{gen_model, load_csv, split, Regime, SplitSpec, SyntheticModelId};
use crate::error::{Error, Result};
use crate::harness::config::{
    ExperimentConfig, ResolvedExperiment, ResolvedScheme, SourceConfig, TunePlan,
};
use crate::harness::results::{ColumnKind, ColumnSummary, ResultTable, TimingSummary};
use crate::learners::{fit, predict_all, BaseLearner, Dataset};
use crate::seeding;

// Seed streams, so the split, the learner fits and the fold assignments draw
// from independent generators per replication.
const STREAM_SPLIT: u64 = 1;
const STREAM_FIT: u64 = 100;
const STREAM_FOLDS: u64 = 200;
const STREAM_HOLDOUT: u64 = 300;

struct RepOutcome {
    learner_metrics: Vec<f64>,
    scheme_metrics: Vec<f64>,
    scheme_bandwidths: Vec<f64>,
    optimizer_seconds: f64,
    total_seconds: f64,
}

/// Runs the experiment described by `cfg` and gathers the per-column metric
/// summaries.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let resolved = cfg.resolve()?;
    let shared: Option<Dataset> = match &cfg.source {
        SourceConfig::Csv { path, target, features } => {
            let load = load_csv(path, target, features.as_deref())?;
            if load.dropped_rows > 0 {
                log::info!("{}: dropped {} incomplete rows", path.display(), load.dropped_rows);
            }
            if !load.excluded_columns.is_empty() {
                log::info!(
                    "{}: excluded non-numeric columns {:?}",
                    path.display(),
                    load.excluded_columns
                );
            }
            Some(load.dataset)
        }
        SourceConfig::Synthetic { .. } => None,
    };
    let source = match &cfg.source {
        SourceConfig::Synthetic { id, regime } => Some(SyntheticModelId::new(*id, *regime)?),
        SourceConfig::Csv { .. } => None,
    };

    let outcomes: Vec<(usize, Result<RepOutcome>)> = (0..resolved.replications)
        .into_par_iter()
        .map(|r| (r, run_replication(&resolved, source, shared.as_ref(), r)))
        .collect();

    let mut successes: Vec<RepOutcome> = Vec::with_capacity(outcomes.len());
    let mut failed = 0usize;
    for (r, outcome) in outcomes {
        match outcome {
            Ok(o) => successes.push(o),
            Err(e) => {
                failed += 1;
                log::warn!("replication {r} failed: {e}");
            }
        }
    }
    if failed * 10 > resolved.replications {
        return Err(Error::FailureThreshold { failed, total: resolved.replications });
    }
    if successes.is_empty() {
        return Err(Error::FailureThreshold { failed, total: resolved.replications });
    }

    let mut columns = Vec::new();
    for (m, label) in resolved.learner_labels.iter().enumerate() {
        let values: Vec<f64> = successes.iter().map(|o| o.learner_metrics[m]).collect();
        columns.push(ColumnSummary::from_values(label.clone(), ColumnKind::Learner, values, None));
    }
    for (s, scheme) in resolved.schemes.iter().enumerate() {
        let values: Vec<f64> = successes.iter().map(|o| o.scheme_metrics[s]).collect();
        let bandwidths: Vec<f64> = successes.iter().map(|o| o.scheme_bandwidths[s]).collect();
        columns.push(ColumnSummary::from_values(
            scheme.label.clone(),
            ColumnKind::Scheme,
            values,
            Some(bandwidths),
        ));
    }
    let timing = TimingSummary {
        optimizer_seconds: successes.iter().map(|o| o.optimizer_seconds).sum(),
        end_to_end_seconds: successes.iter().map(|o| o.total_seconds).sum(),
    };
    Ok(ResultTable {
        metric: resolved.metric,
        replications_requested: resolved.replications,
        failed_replications: failed,
        columns,
        timing,
    })
}

fn run_replication(
    resolved: &ResolvedExperiment,
    source: Option<SyntheticModelId>,
    shared: Option<&Dataset>,
    rep: usize,
) -> Result<RepOutcome> {
    let started = Instant::now();
    let rep_seed = resolved.seed.wrapping_add(rep as u64);

    let data = match (source, shared) {
        (Some(model), _) => gen_model(model, rep_seed)?,
        (None, Some(shared)) => shared.clone(),
        (None, None) => unreachable!("source resolution covers both cases"),
    };
    let parts = split(&data, &SplitSpec::new(seeding::derive(rep_seed, STREAM_SPLIT)))?;

    let learners: Vec<BaseLearner> = resolved
        .learner_kinds
        .iter()
        .enumerate()
        .map(|(m, kind)| fit(kind, &parts.train_k, seeding::derive(rep_seed, STREAM_FIT + m as u64)))
        .collect::<Result<_>>()?;

    let pm = PredictionMatrix::new(
        predict_all(&learners, &parts.train_l.features())?,
        parts.train_l.responses().to_owned(),
    )?;

    // Base predictions on the test rows are shared by the learner and
    // scheme scoring below.
    let test_preds: Array2<f64> = predict_all(&learners, &parts.test.features())?;
    let truth: Vec<f64> = parts.test.responses().to_vec();

    let mut learner_metrics = Vec::with_capacity(learners.len());
    for m in 0..learners.len() {
        let preds: Vec<f64> = test_preds.column(m).to_vec();
        learner_metrics.push(resolved.metric.compute(&preds, &truth)?);
    }

    let mut scheme_metrics = Vec::with_capacity(resolved.schemes.len());
    let mut scheme_bandwidths = Vec::with_capacity(resolved.schemes.len());
    let mut optimizer_seconds = 0.0;
    for (s, scheme) in resolved.schemes.iter().enumerate() {
        let tuned = tune_scheme(resolved, scheme, &pm, rep_seed, s)?;
        optimizer_seconds += tuned.seconds;
        let bound = tuned.family.with_bandwidth(tuned.h_star)?;
        let mut preds = Vec::with_capacity(test_preds.nrows());
        for row in test_preds.rows() {
            preds.push(aggregate_at(&tuned.pm, &bound, &row, resolved.policy)?.value);
        }
        scheme_metrics.push(resolved.metric.compute(&preds, &truth)?);
        scheme_bandwidths.push(tuned.h_star);
    }

    Ok(RepOutcome {
        learner_metrics,
        scheme_metrics,
        scheme_bandwidths,
        optimizer_seconds,
        total_seconds: started.elapsed().as_secs_f64(),
    })
}

struct TunedScheme {
    family: SchemeFamily,
    h_star: f64,
    /// Rows the final combination weights over (all of the aggregation part
    /// for CV-tuned schemes, the weighting half for hold-out-tuned ones).
    pm: PredictionMatrix,
    seconds: f64,
}

fn tune_scheme(
    resolved: &ResolvedExperiment,
    scheme: &ResolvedScheme,
    pm: &PredictionMatrix,
    rep_seed: u64,
    scheme_idx: usize,
) -> Result<TunedScheme> {
    let s = scheme_idx as u64;
    match scheme.tune {
        TunePlan::CvGd | TunePlan::CvGrid => {
            let fold_seed = resolved
                .fold_seed
                .unwrap_or_else(|| seeding::derive(rep_seed, STREAM_FOLDS + s));
            let obj = CvObjective::new(
                pm.clone(),
                scheme.family.clone(),
                resolved.folds,
                fold_seed,
                resolved.policy,
            )?;
            let clock = Instant::now();
            let h_star = match scheme.tune {
                TunePlan::CvGd => {
                    let gd = fit_bandwidth_gd(&obj, &resolved.gd)?;
                    debug_assert_eq!(gd.h_star, gd.trace.last().unwrap().h);
                    gd.h_star
                }
                _ => fit_bandwidth_grid(&obj, &resolved.grid)?.h_star,
            };
            Ok(TunedScheme {
                family: scheme.family.clone(),
                h_star,
                pm: pm.clone(),
                seconds: clock.elapsed().as_secs_f64(),
            })
        }
        TunePlan::HoldoutGrid | TunePlan::HoldoutAlphaGrid => {
            let obj = HoldoutObjective::new(
                pm.clone(),
                scheme.family.clone(),
                seeding::derive(rep_seed, STREAM_HOLDOUT + s),
                resolved.policy,
            )?;
            let clock = Instant::now();
            let (family, h_star) = match scheme.tune {
                TunePlan::HoldoutAlphaGrid => {
                    let m = pm.width();
                    let joint = fit_alpha_grid(&obj, &resolved.grid, m)?;
                    (SchemeFamily::CobraRelaxed { alpha: joint.alpha_star }, joint.h_star)
                }
                _ => {
                    let result = fit_bandwidth_grid(&obj, &resolved.grid)?;
                    (scheme.family.clone(), result.h_star)
                }
            };
            let seconds = clock.elapsed().as_secs_f64();
            // The deployable combination uses the weighting half only.
            let pm_fit = pm.subset(obj.fit_rows())?;
            Ok(TunedScheme { family, h_star, pm: pm_fit, seconds })
        }
    }
}

// ============================================================================
// Optimizer timing comparison
// ============================================================================

/// Head-to-head timing of gradient descent versus grid search on one shared
/// CV objective. Both optimizers evaluate the objective single-threaded, so
/// the wall-clock times compare the algorithms, not the thread pool.
#[derive(Debug, Clone, Serialize)]
pub struct OptimizerTiming {
    pub gd_seconds: f64,
    pub grid_seconds: f64,
    pub gd_h: f64,
    pub grid_h: f64,
    pub gd_cv_error: f64,
    pub grid_cv_error: f64,
}

/// Builds one replication's CV objective from the config (first scheme with
/// an analytic gradient) and times both optimizers on it.
pub fn time_optimizers(cfg: &ExperimentConfig) -> Result<OptimizerTiming> {
    let resolved = cfg.resolve()?;
    let scheme = resolved
        .schemes
        .iter()
        .find(|s| s.family.supports_analytic_gradient())
        .ok_or_else(|| {
            Error::InvalidConfig(
                "optimizer timing needs a gaussian or exp4 kernel scheme with the \
                 multiplicative parametrization"
                    .into(),
            )
        })?;

    let rep_seed = resolved.seed;
    let data = match &cfg.source {
        SourceConfig::Synthetic { id, regime } => {
            gen_model(SyntheticModelId::new(*id, *regime)?, rep_seed)?
        }
        SourceConfig::Csv { path, target, features } => {
            load_csv(path, target, features.as_deref())?.dataset
        }
    };
    let parts = split(&data, &SplitSpec::new(seeding::derive(rep_seed, STREAM_SPLIT)))?;
    let learners: Vec<BaseLearner> = resolved
        .learner_kinds
        .iter()
        .enumerate()
        .map(|(m, kind)| fit(kind, &parts.train_k, seeding::derive(rep_seed, STREAM_FIT + m as u64)))
        .collect::<Result<_>>()?;
    let pm = PredictionMatrix::new(
        predict_all(&learners, &parts.train_l.features())?,
        parts.train_l.responses().to_owned(),
    )?;
    let obj = CvObjective::new(
        pm,
        scheme.family.clone(),
        resolved.folds,
        resolved.fold_seed.unwrap_or_else(|| seeding::derive(rep_seed, STREAM_FOLDS)),
        resolved.policy,
    )?;

    let clock = Instant::now();
    let gd = fit_bandwidth_gd(&obj, &resolved.gd)?;
    let gd_seconds = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let grid = fit_bandwidth_grid(&obj, &resolved.grid)?;
    let grid_seconds = clock.elapsed().as_secs_f64();

    Ok(OptimizerTiming {
        gd_seconds,
        grid_seconds,
        gd_h: gd.h_star,
        grid_h: grid.h_star,
        gd_cv_error: obj.evaluate(gd.h_star)?,
        grid_cv_error: grid.error,
    })
}

// Synthetic CSV emission for the CLI `simulate` subcommand.

/// Writes a generated model as CSV with columns x1..xd, y.
pub fn write_synthetic_csv(
    model: SyntheticModelId,
    seed: u64,
    path: &std::path::Path,
) -> Result<()> {
    let data = gen_model(model, seed)?;
    let mut writer = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (1..=data.dim()).map(|j| format!("x{j}")).collect();
    header.push("y".to_string());
    writer.write_record(&header)?;
    for i in 0..data.n() {
        let mut record: Vec<String> =
            data.features().row(i).iter().map(|v| v.to_string()).collect();
        record.push(data.responses()[i].to_string());
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Convenience constructor used by tests and the timing harness.
pub fn synthetic_source(id: u8, regime: Regime) -> SourceConfig {
    SourceConfig::Synthetic { id, regime }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{LearnerConfig, SchemeConfig};
    use crate::harness::results::{render_results, EmitFormat};

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            source: synthetic_source(1, Regime::Uncorrelated),
            learners: vec![
                LearnerConfig::Name("knn".into()),
                LearnerConfig::Name("tree".into()),
            ],
            schemes: vec![SchemeConfig::kernel("gaussian"), SchemeConfig::named("cobra-relaxed")],
            optimizer: Default::default(),
            replications: 2,
            seed: 42,
            metric: None,
            fallback: Default::default(),
        }
    }

    #[test]
    fn smoke_run_produces_a_finite_table() {
        let table = run_experiment(&small_config()).unwrap();
        assert_eq!(table.columns.len(), 4);
        assert_eq!(table.replications_used(), 2);
        for col in &table.columns {
            assert!(col.mean.is_finite(), "{}: {}", col.name, col.mean);
            assert!(col.values.iter().all(|v| v.is_finite()));
        }
        let schemes: Vec<&ColumnSummary> =
            table.columns.iter().filter(|c| c.kind == ColumnKind::Scheme).collect();
        for s in schemes {
            let bw = s.bandwidths.as_ref().unwrap();
            assert!(bw.iter().all(|h| *h > 0.0));
        }
    }

    #[test]
    fn identical_config_and_seed_reproduce_the_table_bytes() {
        let cfg = small_config();
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        let ja = render_results(&a, EmitFormat::Json).unwrap();
        let jb = render_results(&b, EmitFormat::Json).unwrap();
        assert_eq!(ja, jb);
    }

    #[test]
    fn timing_comparison_populates_every_field() {
        let mut cfg = small_config();
        cfg.replications = 1;
        let timing = time_optimizers(&cfg).unwrap();
        assert!(timing.gd_seconds >= 0.0 && timing.grid_seconds >= 0.0);
        assert!(timing.gd_h > 0.0 && timing.grid_h > 0.0);
        assert!(timing.gd_cv_error.is_finite() && timing.grid_cv_error.is_finite());
    }

    #[test]
    fn timing_requires_a_differentiable_scheme() {
        let mut cfg = small_config();
        cfg.schemes = vec![SchemeConfig::named("cobra")];
        assert!(matches!(time_optimizers(&cfg), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn failing_replications_above_ten_percent_abort_the_run() {
        // Six rows split into (3, 2, 1): two aggregation rows cannot carry
        // five CV folds, so every replication errors out.
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tiny.csv");
        std::fs::write(&path, "a,y\n1,2\n2,3\n3,4\n4,5\n5,6\n6,7\n").unwrap();
        let mut cfg = small_config();
        cfg.source = SourceConfig::Csv { path, target: "y".into(), features: None };
        cfg.learners = vec![LearnerConfig::Name("knn".into())];
        cfg.schemes = vec![SchemeConfig::kernel("gaussian")];
        assert!(matches!(
            run_experiment(&cfg),
            Err(Error::FailureThreshold { failed: 2, total: 2 })
        ));
    }

    #[test]
    fn csv_sources_run_end_to_end() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gen.csv");
        write_synthetic_csv(SyntheticModelId::new(5, Regime::Uncorrelated).unwrap(), 8, &path)
            .unwrap();
        let mut cfg = small_config();
        cfg.source = SourceConfig::Csv { path, target: "y".into(), features: None };
        cfg.replications = 1;
        let table = run_experiment(&cfg).unwrap();
        assert_eq!(table.metric, crate::harness::MetricKind::Rmse);
        assert!(table.columns.iter().all(|c| c.mean.is_finite()));
    }
}
