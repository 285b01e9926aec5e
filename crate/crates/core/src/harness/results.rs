//! Result tables and their serialization.
//!
//! A [`ResultTable`] holds one column per learner followed by one per scheme
//! (config order), each with the per-replication metric values and their
//! summary statistics. Three output formats:
//!
//! - `json`: full table including raw per-replication arrays, tuned
//!   bandwidths, and both dispersion measures (sample standard deviation and
//!   standard error of the mean).
//! - `csv`: one row per column with summary stats at 6 significant digits
//!   and the raw values at full precision; parses back losslessly.
//! - `markdown`: the two-block layout (base machines, then aggregation
//!   schemes) for pasting into reports.
//!
//! Wall-clock timings are kept on the table for display but never written by
//! [`emit_results`]: emitted result files are byte-identical across runs and
//! worker-pool sizes for a fixed config and seed.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::metrics::MetricKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Learner,
    Scheme,
}

impl ColumnKind {
    fn name(&self) -> &'static str {
        match self {
            ColumnKind::Learner => "learner",
            ColumnKind::Scheme => "scheme",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnSummary {
    pub name: String,
    pub kind: ColumnKind,
    pub mean: f64,
    /// Sample standard deviation across replications (the bracketed value of
    /// the benchmark tables).
    pub std_dev: f64,
    /// Standard error of the mean, std_dev / sqrt(R).
    pub std_err: f64,
    /// Per-replication metric values, replication order.
    pub values: Vec<f64>,
    /// Tuned bandwidth per replication (scheme columns only).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bandwidths: Option<Vec<f64>>,
}

impl ColumnSummary {
    pub fn from_values(
        name: String,
        kind: ColumnKind,
        values: Vec<f64>,
        bandwidths: Option<Vec<f64>>,
    ) -> Self {
        let (mean, std_dev, std_err) = summarize(&values);
        ColumnSummary { name, kind, mean, std_dev, std_err, values, bandwidths }
    }
}

pub(crate) fn summarize(values: &[f64]) -> (f64, f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    (mean, sd, sd / n.sqrt())
}

/// Wall-clock accounting of a run; displayed, never emitted to result files.
#[derive(Debug, Clone, Default)]
pub struct TimingSummary {
    /// Seconds spent inside bandwidth tuning, summed over replications.
    pub optimizer_seconds: f64,
    /// Seconds per full replication, summed.
    pub end_to_end_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct ResultTable {
    pub metric: MetricKind,
    pub replications_requested: usize,
    pub failed_replications: usize,
    /// Learner columns in config order, then scheme columns in config order.
    pub columns: Vec<ColumnSummary>,
    pub timing: TimingSummary,
}

impl ResultTable {
    /// Successful replication count (length of every value array).
    pub fn replications_used(&self) -> usize {
        self.columns.first().map_or(0, |c| c.values.len())
    }

    /// Confirms the stored summary statistics match the stored raw arrays;
    /// run before every emit.
    pub fn verify_recomputable(&self) -> Result<()> {
        for col in &self.columns {
            let (mean, sd, se) = summarize(&col.values);
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(1.0);
            if !(close(mean, col.mean) && close(sd, col.std_dev) && close(se, col.std_err)) {
                return Err(Error::InvalidArgument(format!(
                    "column {:?} summary does not match its stored values",
                    col.name
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmitFormat {
    Csv,
    Json,
    Markdown,
}

impl std::str::FromStr for EmitFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(EmitFormat::Csv),
            "json" => Ok(EmitFormat::Json),
            "markdown" | "md" => Ok(EmitFormat::Markdown),
            other => Err(Error::InvalidConfig(format!(
                "unknown format {other:?} (expected csv, json, markdown)"
            ))),
        }
    }
}

/// `x` at 6 significant digits in scientific notation. Stable under
/// parse-and-reformat, which keeps CSV round trips byte-identical.
pub(crate) fn sig6(x: f64) -> String {
    format!("{x:.5e}")
}

/// Renders the table in the requested format.
pub fn render_results(table: &ResultTable, format: EmitFormat) -> Result<String> {
    if table.columns.is_empty() || table.columns.iter().any(|c| c.values.is_empty()) {
        return Err(Error::InvalidArgument(
            "refusing to emit a table with no replication values".into(),
        ));
    }
    table.verify_recomputable()?;
    match format {
        EmitFormat::Csv => render_csv(table),
        EmitFormat::Json => render_json(table),
        EmitFormat::Markdown => Ok(render_markdown(table)),
    }
}

/// Renders and writes the table to `path`. Nothing is written when the table
/// fails validation.
pub fn emit_results(table: &ResultTable, format: EmitFormat, path: &Path) -> Result<()> {
    let text = render_results(table, format)?;
    std::fs::write(path, text)?;
    Ok(())
}

// ----------------------------------------------------------------------
// CSV
// ----------------------------------------------------------------------

fn render_csv(table: &ResultTable) -> Result<String> {
    let reps = table.replications_used();
    let mut out = String::new();
    out.push_str("column,kind,metric,mean,std_dev,std_err");
    for r in 0..reps {
        let _ = write!(out, ",r{r}");
    }
    out.push('\n');
    for col in &table.columns {
        let _ = write!(
            out,
            "{},{},{},{},{},{}",
            col.name,
            col.kind.name(),
            table.metric.name(),
            sig6(col.mean),
            sig6(col.std_dev),
            sig6(col.std_err)
        );
        for v in &col.values {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    Ok(out)
}

/// Parses a table previously rendered as CSV. Timing is not part of the CSV
/// and comes back zeroed; failed-replication counts live in the JSON format.
pub fn parse_results_csv(text: &str) -> Result<ResultTable> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    if headers.len() < 6 {
        return Err(Error::InvalidConfig("results CSV header too short".into()));
    }
    let reps = headers.len() - 6;
    let mut columns = Vec::new();
    let mut metric: Option<MetricKind> = None;
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let cell = |j: usize| record.get(j).unwrap_or("").to_string();
        let parse = |j: usize| -> Result<f64> {
            record
                .get(j)
                .and_then(|c| c.parse::<f64>().ok())
                .ok_or_else(|| Error::UnparseableCell {
                    row: i + 1,
                    column: headers.get(j).unwrap_or("").to_string(),
                    value: cell(j),
                })
        };
        let kind = match record.get(1) {
            Some("learner") => ColumnKind::Learner,
            Some("scheme") => ColumnKind::Scheme,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown column kind {other:?} in results CSV"
                )))
            }
        };
        let m = match record.get(2) {
            Some("mse") => MetricKind::Mse,
            Some("rmse") => MetricKind::Rmse,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown metric {other:?} in results CSV"
                )))
            }
        };
        metric = Some(m);
        let mut values = Vec::with_capacity(reps);
        for r in 0..reps {
            values.push(parse(6 + r)?);
        }
        // Summary stats are stored rounded to 6 significant digits; rebuild
        // them from the full-precision values and use the stored cells only
        // as a consistency check.
        let col = ColumnSummary::from_values(cell(0), kind, values, None);
        for (j, recomputed) in [(3, col.mean), (4, col.std_dev), (5, col.std_err)] {
            let stored = parse(j)?;
            if sig6(recomputed) != sig6(stored) {
                return Err(Error::InvalidConfig(format!(
                    "results CSV column {:?}: stored summary {} disagrees with the \
                     replication values (expected {})",
                    col.name,
                    sig6(stored),
                    sig6(recomputed)
                )));
            }
        }
        columns.push(col);
    }
    let metric = metric.ok_or_else(|| Error::InvalidConfig("empty results CSV".into()))?;
    Ok(ResultTable {
        metric,
        replications_requested: reps,
        failed_replications: 0,
        columns,
        timing: TimingSummary::default(),
    })
}

// ----------------------------------------------------------------------
// JSON
// ----------------------------------------------------------------------

#[derive(Serialize)]
struct JsonView<'a> {
    metric: MetricKind,
    replications_requested: usize,
    replications_used: usize,
    failed_replications: usize,
    columns: &'a [ColumnSummary],
}

fn render_json(table: &ResultTable) -> Result<String> {
    let view = JsonView {
        metric: table.metric,
        replications_requested: table.replications_requested,
        replications_used: table.replications_used(),
        failed_replications: table.failed_replications,
        columns: &table.columns,
    };
    let mut text = serde_json::to_string_pretty(&view)?;
    text.push('\n');
    Ok(text)
}

// ----------------------------------------------------------------------
// Markdown
// ----------------------------------------------------------------------

fn render_markdown(table: &ResultTable) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Metric: {} over {} replications ({} failed).",
        table.metric.name(),
        table.replications_used(),
        table.failed_replications
    );
    for (title, kind) in [
        ("Base machines", ColumnKind::Learner),
        ("Aggregation schemes", ColumnKind::Scheme),
    ] {
        let cols: Vec<&ColumnSummary> =
            table.columns.iter().filter(|c| c.kind == kind).collect();
        if cols.is_empty() {
            continue;
        }
        let _ = writeln!(out, "\n## {title}\n");
        let header: Vec<&str> = cols.iter().map(|c| c.name.as_str()).collect();
        let _ = writeln!(out, "| | {} |", header.join(" | "));
        let _ = writeln!(out, "{}|", "|---".repeat(cols.len() + 1));
        let means: Vec<String> = cols.iter().map(|c| sig6(c.mean)).collect();
        let _ = writeln!(out, "| mean | {} |", means.join(" | "));
        let sds: Vec<String> = cols.iter().map(|c| format!("({})", sig6(c.std_dev))).collect();
        let _ = writeln!(out, "| sd | {} |", sds.join(" | "));
    }
    out
}
