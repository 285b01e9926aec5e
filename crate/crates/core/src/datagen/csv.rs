//! CSV ingestion: RFC-4180 files with a header row and `.` decimal
//! separator. Empty cells and the literal `NA` count as missing; rows with a
//! missing value in any used column are dropped and counted. When no feature
//! list is given, every column other than the target that parses as numeric
//! throughout becomes a feature, and non-numeric columns are excluded and
//! reported.

use ndarray::{Array1, Array2};
use std::path::Path;

use crate::error::{Error, Result};
use crate::learners::Dataset;

#[derive(Debug)]
pub struct CsvLoad {
    pub dataset: Dataset,
    pub feature_names: Vec<String>,
    /// Rows removed because a used column had a missing value.
    pub dropped_rows: usize,
    /// Columns excluded in auto mode because they failed numeric parsing.
    pub excluded_columns: Vec<String>,
}

fn is_missing(cell: &str) -> bool {
    let t = cell.trim();
    t.is_empty() || t == "NA"
}

fn parse_cell(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Loads a dataset from `path`, predicting `target_column` from
/// `feature_columns` (or from every numeric column when `None`).
pub fn load_csv(
    path: &Path,
    target_column: &str,
    feature_columns: Option<&[String]>,
) -> Result<CsvLoad> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.to_string()).collect();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let target_idx = find(target_column)?;

    let records: Vec<csv::StringRecord> = reader.records().collect::<std::result::Result<_, _>>()?;

    // Resolve the feature column set.
    let (feature_idx, excluded_columns): (Vec<usize>, Vec<String>) = match feature_columns {
        Some(names) => {
            let mut idx = Vec::with_capacity(names.len());
            for name in names {
                let i = find(name)?;
                if i == target_idx {
                    return Err(Error::InvalidConfig(format!(
                        "column {name:?} is both target and feature"
                    )));
                }
                idx.push(i);
            }
            (idx, Vec::new())
        }
        None => {
            let mut idx = Vec::new();
            let mut excluded = Vec::new();
            for (i, name) in headers.iter().enumerate() {
                if i == target_idx {
                    continue;
                }
                let numeric = records
                    .iter()
                    .map(|r| r.get(i).unwrap_or(""))
                    .filter(|c| !is_missing(c))
                    .all(|c| parse_cell(c).is_some());
                if numeric {
                    idx.push(i);
                } else {
                    excluded.push(name.clone());
                }
            }
            (idx, excluded)
        }
    };
    if feature_idx.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "no usable numeric feature columns in {}",
            path.display()
        )));
    }

    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(records.len());
    let mut responses: Vec<f64> = Vec::with_capacity(records.len());
    let mut dropped_rows = 0usize;
    'rows: for (r, record) in records.iter().enumerate() {
        let mut row = Vec::with_capacity(feature_idx.len());
        for &i in feature_idx.iter().chain(std::iter::once(&target_idx)) {
            let cell = record.get(i).unwrap_or("");
            if is_missing(cell) {
                dropped_rows += 1;
                continue 'rows;
            }
            match parse_cell(cell) {
                Some(v) => row.push(v),
                None => {
                    return Err(Error::UnparseableCell {
                        row: r + 1,
                        column: headers[i].clone(),
                        value: cell.to_string(),
                    })
                }
            }
        }
        let y = row.pop().unwrap();
        rows.push(row);
        responses.push(y);
    }
    if rows.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "{}: no complete rows left after dropping {dropped_rows}",
            path.display()
        )));
    }

    let d = feature_idx.len();
    let mut features = Array2::zeros((rows.len(), d));
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            features[[i, j]] = v;
        }
    }
    Ok(CsvLoad {
        dataset: Dataset::new(features, Array1::from_vec(responses))?,
        feature_names: feature_idx.iter().map(|&i| headers[i].clone()).collect(),
        dropped_rows,
        excluded_columns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_csv(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn small_file_loads_exactly() {
        let f = write_csv("a,b,y\n1,2,3\n4,5,6\n7,8,9\n");
        let load = load_csv(f.path(), "y", None).unwrap();
        assert_eq!(load.dataset.n(), 3);
        assert_eq!(load.dataset.dim(), 2);
        assert_eq!(load.feature_names, vec!["a", "b"]);
        assert_eq!(load.dataset.features()[[1, 0]], 4.0);
        assert_eq!(load.dataset.responses()[2], 9.0);
        assert_eq!(load.dropped_rows, 0);
    }

    #[test]
    fn blank_response_rows_are_dropped_and_counted() {
        let f = write_csv("a,y\n1,2\n3,\n5,6\n");
        let load = load_csv(f.path(), "y", None).unwrap();
        assert_eq!(load.dataset.n(), 2);
        assert_eq!(load.dropped_rows, 1);
    }

    #[test]
    fn wine_shaped_file_has_eleven_features() {
        let header = "fixed acidity,volatile acidity,citric acid,residual sugar,chlorides,\
                      free sulfur dioxide,total sulfur dioxide,density,pH,sulphates,alcohol,quality";
        let mut body = String::from(header);
        for i in 0..5 {
            body.push('\n');
            let row: Vec<String> = (0..12).map(|j| format!("{}", (i * 12 + j) as f64 * 0.1)).collect();
            body.push_str(&row.join(","));
        }
        body.push('\n');
        let f = write_csv(&body);
        let load = load_csv(f.path(), "quality", None).unwrap();
        assert_eq!(load.dataset.dim(), 11);
        assert_eq!(load.dataset.n(), 5);
    }

    #[test]
    fn categorical_columns_are_excluded_in_auto_mode() {
        let f = write_csv("sex,len,y\nM,1.0,2.0\nF,2.0,3.0\nI,3.0,4.0\n");
        let load = load_csv(f.path(), "y", None).unwrap();
        assert_eq!(load.feature_names, vec!["len"]);
        assert_eq!(load.excluded_columns, vec!["sex"]);
    }

    #[test]
    fn explicit_feature_list_fails_loudly_on_garbage() {
        let f = write_csv("a,b,y\n1,2,3\n4,oops,6\n");
        let err = load_csv(f.path(), "y", Some(&["a".into(), "b".into()])).unwrap_err();
        match err {
            Error::UnparseableCell { row, column, value } => {
                assert_eq!(row, 2);
                assert_eq!(column, "b");
                assert_eq!(value, "oops");
            }
            other => panic!("expected UnparseableCell, got {other:?}"),
        }
    }

    #[test]
    fn missing_columns_are_reported_by_name() {
        let f = write_csv("a,y\n1,2\n");
        assert!(matches!(
            load_csv(f.path(), "nope", None),
            Err(Error::MissingColumn(c)) if c == "nope"
        ));
        assert!(matches!(
            load_csv(f.path(), "y", Some(&["missing".into()])),
            Err(Error::MissingColumn(c)) if c == "missing"
        ));
    }
}
