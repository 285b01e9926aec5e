//! Runtime property suites: oracle-equivalence checks runnable from the CLI
//! (`validate`) and asserted by the acceptance tests.
//!
//! Every check pits a public code path against an independent, deliberately
//! naive re-implementation (brute-force scans, literal formula
//! transcriptions) on seeded random instances.

use ndarray::{Array1, Array2, Axis};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::aggregation::{weights, PredictionMatrix, WeightScheme, ZeroWeightPolicy};
use crate::bandwidth::{CvObjective, GradMode, SchemeFamily};
use crate::kernels::{BandwidthParam, KernelSpec, Parametrization};
use crate::learners::{fit, Dataset, LearnerKind};
use crate::seeding;

#[derive(Debug, Clone)]
pub struct CheckReport {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckReport {
    fn pass(name: &'static str, detail: String) -> Self {
        CheckReport { name, passed: true, detail }
    }

    fn fail(name: &'static str, detail: String) -> Self {
        CheckReport { name, passed: false, detail }
    }
}

/// Runs every property suite; deterministic for a fixed seed.
pub fn run_all_checks(seed: u64) -> Vec<CheckReport> {
    vec![
        check_weight_normalization(seeding::derive(seed, 1)),
        check_cobra_equivalence(seeding::derive(seed, 2)),
        check_cv_fold_oracle(seeding::derive(seed, 3)),
        check_knn_brute_force(seeding::derive(seed, 4)),
        check_gradient_agreement(seeding::derive(seed, 5)),
    ]
}

fn random_pm(rng: &mut ChaCha8Rng, rows: usize, m: usize) -> PredictionMatrix {
    let values = Array2::from_shape_fn((rows, m), |_| rng.random_range(-2.0..2.0));
    let responses = Array1::from_shape_fn(rows, |_| rng.random_range(-3.0..3.0));
    PredictionMatrix::new(values, responses).unwrap()
}

fn random_scheme(rng: &mut ChaCha8Rng) -> WeightScheme {
    let h = rng.random_range(0.05..4.0);
    match rng.random_range(0..5) {
        0 => WeightScheme::CobraFull { h },
        1 => WeightScheme::CobraRelaxed { h, alpha: rng.random_range(0.2..1.0) },
        2 => WeightScheme::KernelVector {
            spec: KernelSpec::gaussian(1.0).unwrap(),
            bw: BandwidthParam::new(h, Parametrization::Multiplicative).unwrap(),
        },
        3 => WeightScheme::KernelVector {
            spec: KernelSpec::Epanechnikov,
            bw: BandwidthParam::divisive(h).unwrap(),
        },
        _ => WeightScheme::KernelPerCoord {
            spec: KernelSpec::TriWeight,
            bw: BandwidthParam::divisive(h).unwrap(),
        },
    }
}

/// 10^4 random queries across schemes: weights sum to 1 within 1e-12 or are
/// identically zero.
pub fn check_weight_normalization(seed: u64) -> CheckReport {
    const NAME: &str = "weights-normalization";
    let mut rng = seeding::rng(seed);
    let mut zero_count = 0usize;
    for trial in 0..10_000 {
        let m = rng.random_range(1..=5);
        let rows = rng.random_range(1..40);
        let pm = random_pm(&mut rng, rows, m);
        let scheme = random_scheme(&mut rng);
        let query = Array1::from_shape_fn(m, |_| rng.random_range(-3.0..3.0));
        let w = match weights(&scheme, &pm, &query.view()) {
            Ok(w) => w,
            Err(e) => return CheckReport::fail(NAME, format!("trial {trial}: {e}")),
        };
        if w.iter().any(|&v| v < 0.0) {
            return CheckReport::fail(NAME, format!("trial {trial}: negative weight"));
        }
        let sum: f64 = w.iter().sum();
        if sum == 0.0 {
            if w.iter().any(|&v| v != 0.0) {
                return CheckReport::fail(NAME, format!("trial {trial}: zero sum, nonzero entry"));
            }
            zero_count += 1;
        } else if (sum - 1.0).abs() > 1e-12 {
            return CheckReport::fail(NAME, format!("trial {trial}: weight sum {sum}"));
        }
    }
    CheckReport::pass(
        NAME,
        format!("10000 queries normalized ({zero_count} with empty consensus)"),
    )
}

/// CobraFull(h) and CobraRelaxed(h, alpha = 1) produce bitwise-identical
/// weight vectors.
pub fn check_cobra_equivalence(seed: u64) -> CheckReport {
    const NAME: &str = "cobra-full-vs-relaxed";
    let mut rng = seeding::rng(seed);
    for trial in 0..2_000 {
        let m = rng.random_range(1..=6);
        let rows = rng.random_range(1..30);
        let pm = random_pm(&mut rng, rows, m);
        let h = rng.random_range(0.05..3.0);
        let query = Array1::from_shape_fn(m, |_| rng.random_range(-2.0..2.0));
        let full = weights(&WeightScheme::CobraFull { h }, &pm, &query.view()).unwrap();
        let relaxed =
            weights(&WeightScheme::CobraRelaxed { h, alpha: 1.0 }, &pm, &query.view()).unwrap();
        if full != relaxed {
            return CheckReport::fail(NAME, format!("trial {trial}: weight vectors differ"));
        }
    }
    CheckReport::pass(NAME, "2000 instances identical".into())
}

/// The CV objective matches a literal fold-by-fold transcription on
/// 12-row, 3-fold instances to 1e-12.
pub fn check_cv_fold_oracle(seed: u64) -> CheckReport {
    const NAME: &str = "cv-fold-oracle";
    let mut rng = seeding::rng(seed);
    let mut worst = 0.0f64;
    for trial in 0..200 {
        let pm = random_pm(&mut rng, 12, 2);
        let folds = crate::bandwidth::make_folds(12, 3, rng.random()).unwrap();
        let family = SchemeFamily::KernelVector {
            spec: KernelSpec::gaussian(1.0).unwrap(),
            parametrization: Parametrization::Multiplicative,
        };
        let obj = CvObjective::from_folds(
            pm.clone(),
            family,
            folds.clone(),
            ZeroWeightPolicy::MeanResponse,
        )
        .unwrap();
        let h = rng.random_range(0.05..5.0);
        let got = obj.error(h).unwrap();

        // Oracle: direct double sum over folds and held-out points.
        let mut total = 0.0;
        for fold in &folds {
            for &j in fold {
                let train: Vec<usize> = (0..12).filter(|r| !fold.contains(r)).collect();
                let mut num = 0.0;
                let mut den = 0.0;
                for &i in &train {
                    let sq: f64 = (0..pm.width())
                        .map(|c| (pm.values()[[i, c]] - pm.values()[[j, c]]).powi(2))
                        .sum();
                    let k = (-h * sq / 2.0).exp();
                    num += k * pm.responses()[i];
                    den += k;
                }
                let g = if den > 0.0 {
                    num / den
                } else {
                    train.iter().map(|&i| pm.responses()[i]).sum::<f64>() / train.len() as f64
                };
                total += (g - pm.responses()[j]).powi(2);
            }
        }
        let oracle = total / folds.len() as f64;
        let err = (got - oracle).abs();
        worst = worst.max(err);
        if err > 1e-12 {
            return CheckReport::fail(
                NAME,
                format!("trial {trial}: |{got} - {oracle}| = {err}"),
            );
        }
    }
    CheckReport::pass(NAME, format!("200 instances, worst deviation {worst:.3e}"))
}

/// Fitted kNN predictions equal a brute-force scan with explicit
/// standardization and lowest-index tie-breaking (n = 200).
pub fn check_knn_brute_force(seed: u64) -> CheckReport {
    const NAME: &str = "knn-brute-force";
    let mut rng = seeding::rng(seed);
    let n = 200;
    let d = 3;
    let x = Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0));
    let y = Array1::from_shape_fn(n, |_| rng.random_range(-3.0..3.0));
    let data = Dataset::new(x.clone(), y.clone()).unwrap();
    let k = 9;
    let learner = fit(&LearnerKind::Knn { k }, &data, 0).unwrap();

    let mean = x.sum_axis(Axis(0)) / n as f64;
    let sd = Array1::from_shape_fn(d, |j| {
        let v = x.column(j).iter().map(|v| (v - mean[j]).powi(2)).sum::<f64>() / n as f64;
        if v > 0.0 {
            v.sqrt()
        } else {
            1.0
        }
    });
    for trial in 0..100 {
        let q = Array1::from_shape_fn(d, |_| rng.random_range(-1.0..1.0));
        let mut dist: Vec<(f64, usize)> = (0..n)
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
        dist.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let expected = dist.iter().take(k).map(|&(_, i)| y[i]).sum::<f64>() / k as f64;
        let got = learner.predict(&q.view()).unwrap();
        if (got - expected).abs() > 1e-12 {
            return CheckReport::fail(NAME, format!("trial {trial}: {got} vs {expected}"));
        }
    }
    CheckReport::pass(NAME, "100 queries match the scan".into())
}

/// Analytic CV gradient versus central finite differences (step 1e-5) on 100
/// random instances with rows <= 50, machines <= 5, h in [0.01, 10]:
/// relative error at most 1e-4.
pub fn check_gradient_agreement(seed: u64) -> CheckReport {
    const NAME: &str = "analytic-vs-numerical-gradient";
    let mut rng = seeding::rng(seed);
    let mut worst = 0.0f64;
    for trial in 0..100 {
        let rows = rng.random_range(6..=50);
        let m = rng.random_range(1..=5);
        let pm = random_pm(&mut rng, rows, m);
        let family = SchemeFamily::KernelVector {
            spec: KernelSpec::gaussian(1.0).unwrap(),
            parametrization: Parametrization::Multiplicative,
        };
        let obj = CvObjective::new(
            pm,
            family,
            5.min(rows),
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
            let rel = (analytic - numeric).abs() / scale;
            worst = worst.max(rel);
            if rel > 1e-4 {
                return CheckReport::fail(
                    NAME,
                    format!("trial {trial}: h {h}, analytic {analytic}, numeric {numeric}, rel {rel}"),
                );
            }
        }
    }
    CheckReport::pass(NAME, format!("100 instances, worst relative error {worst:.3e}"))
}
