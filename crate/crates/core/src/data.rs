//! Dataset ingestion: LIBSVM sparse text, CSV with a column schema, and
//! the matrix/report file helpers used by instance serialization.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// A labeled dataset ready for reduction.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: SparseMatrix,
    /// Labels: class ids (dense from 0) when `label_map` is present, raw
    /// values otherwise.
    pub y: Vec<f64>,
    pub weights: Option<Vec<f64>>,
    pub feature_names: Option<Vec<String>>,
    /// Original label -> class id, sorted ascending by original label.
    pub label_map: Option<Vec<(String, usize)>>,
}

impl Dataset {
    pub fn n_samples(&self) -> usize {
        self.x.n_rows()
    }

    pub fn n_features(&self) -> usize {
        self.x.n_cols()
    }

    /// Row/column counts, nnz, and a content hash over entries and labels.
    pub fn manifest(&self) -> serde_json::Value {
        let mut hasher = Sha256::new();
        hasher.update(self.x.content_bytes());
        for value in &self.y {
            hasher.update(value.to_le_bytes());
        }
        let hash: String = hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect();
        serde_json::json!({
            "rows": self.x.n_rows(),
            "cols": self.x.n_cols(),
            "nnz": self.x.nnz(),
            "content_hash": hash,
        })
    }
}

/// Parses LIBSVM sparse text: one sample per nonempty line, a label token
/// followed by 1-based strictly increasing `index:value` pairs. Columns
/// come out 0-based; width is the largest index seen unless overridden.
/// Binary label sets are mapped to `{0, 1}` in ascending order.
pub fn parse_libsvm(text: &str, n_features: Option<usize>) -> Result<Dataset> {
    let mut raw_labels: Vec<f64> = Vec::new();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut max_index = 0usize;

    for (line_no, line) in text.lines().enumerate() {
        let line_no = line_no + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let label_token = tokens.next().expect("nonempty line has a first token");
        let label: f64 = label_token.parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("label `{label_token}` is not numeric"),
        })?;
        if !label.is_finite() {
            return Err(Error::Parse {
                line: line_no,
                message: format!("label `{label_token}` is not finite"),
            });
        }
        let mut entries: Vec<(usize, f64)> = Vec::new();
        let mut prev_index = 0usize;
        for pair in tokens {
            let (idx_str, val_str) = pair.split_once(':').ok_or_else(|| Error::Parse {
                line: line_no,
                message: format!("malformed pair `{pair}` (expected index:value)"),
            })?;
            let index: usize = idx_str.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("index `{idx_str}` is not a positive integer"),
            })?;
            if index == 0 {
                return Err(Error::Parse {
                    line: line_no,
                    message: "indices are 1-based; got 0".into(),
                });
            }
            if index <= prev_index {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("indices must be strictly increasing ({prev_index} then {index})"),
                });
            }
            let value: f64 = val_str.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("value `{val_str}` is not numeric"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("value `{val_str}` is not finite"),
                });
            }
            prev_index = index;
            max_index = max_index.max(index);
            entries.push((index - 1, value));
        }
        raw_labels.push(label);
        rows.push(entries);
    }

    if rows.is_empty() {
        return Err(Error::EmptyIndexSet("dataset has no samples".into()));
    }
    let width = match n_features {
        Some(w) => {
            if w < max_index {
                return Err(Error::Parse {
                    line: 0,
                    message: format!("declared width {w} is smaller than max index {max_index}"),
                });
            }
            w
        }
        None => max_index,
    };
    let x = SparseMatrix::from_rows(width, rows)?;
    let (y, label_map) = map_labels(&raw_labels);
    Ok(Dataset {
        x,
        y,
        weights: None,
        feature_names: None,
        label_map,
    })
}

/// Binary label sets map to `{0, 1}` ascending; already-dense nonnegative
/// integer labels pass through as class ids; anything else stays raw.
fn map_labels(raw: &[f64]) -> (Vec<f64>, Option<Vec<(String, usize)>>) {
    let mut distinct: Vec<f64> = Vec::new();
    for &l in raw {
        if !distinct.iter().any(|&d| d.to_bits() == l.to_bits()) {
            distinct.push(l);
        }
    }
    distinct.sort_by(|a, b| a.partial_cmp(b).expect("finite labels"));
    let dense_ids = distinct
        .iter()
        .enumerate()
        .all(|(i, &d)| d == i as f64);
    if distinct.len() == 2 && !dense_ids {
        let map: Vec<(String, usize)> = distinct
            .iter()
            .enumerate()
            .map(|(i, &d)| (format_float(d), i))
            .collect();
        let y = raw
            .iter()
            .map(|&l| if l.to_bits() == distinct[0].to_bits() { 0.0 } else { 1.0 })
            .collect();
        (y, Some(map))
    } else if dense_ids {
        let map = distinct
            .iter()
            .enumerate()
            .map(|(i, &d)| (format_float(d), i))
            .collect();
        (raw.to_vec(), Some(map))
    } else {
        (raw.to_vec(), None)
    }
}

/// Shortest decimal representation that round-trips the exact f64.
fn format_float(v: f64) -> String {
    let mut buffer = ryu_format(v);
    if buffer.ends_with(".0") {
        buffer.truncate(buffer.len() - 2);
    }
    buffer
}

fn ryu_format(v: f64) -> String {
    // `{}` on f64 produces the shortest round-trip representation.
    format!("{v}")
}

/// Serializes a dataset back to LIBSVM text, bit-exactly for finite values.
pub fn write_libsvm(ds: &Dataset) -> String {
    let mut out = String::new();
    for i in 0..ds.x.n_rows() {
        out.push_str(&ryu_format(ds.y[i]));
        let (cols, vals) = ds.x.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            out.push(' ');
            out.push_str(&format!("{}:{}", j + 1, ryu_format(v)));
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnRole {
    Categorical,
    Numeric,
    Drop,
    Label,
}

/// One entry per column; array order fixes the output feature order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub role: ColumnRole,
}

/// Preprocesses a CSV (header row required) per the schema: categoricals
/// become drop-first one-hot indicators with missing values as their own
/// category, numerics are mean-imputed, dropped columns are removed, and
/// the label column becomes dense class ids. Column order follows the
/// schema; categories are sorted lexicographically with the empty string
/// (missing) first.
pub fn preprocess_tabular(csv_text: &str, schema: &[ColumnSchema]) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(csv_text.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: format!("csv header: {e}"),
        })?
        .iter()
        .map(str::to_string)
        .collect();

    let mut column_index: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, h) in headers.iter().enumerate() {
        column_index.insert(h.as_str(), i);
    }
    let label_count = schema
        .iter()
        .filter(|c| matches!(c.role, ColumnRole::Label))
        .count();
    if label_count != 1 {
        return Err(Error::Schema(format!(
            "schema must mark exactly one label column, found {label_count}"
        )));
    }
    for col in schema {
        if !column_index.contains_key(col.name.as_str()) {
            return Err(Error::Schema(format!("column `{}` not present in csv", col.name)));
        }
    }

    let mut records: Vec<Vec<String>> = Vec::new();
    for (line_no, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            line: line_no + 2,
            message: format!("csv record: {e}"),
        })?;
        records.push(record.iter().map(str::to_string).collect());
    }
    if records.is_empty() {
        return Err(Error::EmptyIndexSet("csv has no data rows".into()));
    }

    let mut feature_columns: Vec<Vec<f64>> = Vec::new();
    let mut feature_names: Vec<String> = Vec::new();
    let mut labels_raw: Vec<String> = Vec::new();

    for col in schema {
        let idx = column_index[col.name.as_str()];
        let raw: Vec<&str> = records.iter().map(|r| r[idx].trim()).collect();
        match col.role {
            ColumnRole::Drop => {}
            ColumnRole::Label => {
                labels_raw = raw.iter().map(|s| s.to_string()).collect();
            }
            ColumnRole::Numeric => {
                let mut values: Vec<Option<f64>> = Vec::with_capacity(raw.len());
                for (i, s) in raw.iter().enumerate() {
                    if s.is_empty() {
                        values.push(None);
                    } else {
                        let v: f64 = s.parse().map_err(|_| Error::Parse {
                            line: i + 2,
                            message: format!("column `{}`: `{s}` is not numeric", col.name),
                        })?;
                        values.push(Some(v));
                    }
                }
                let present: Vec<f64> = values.iter().flatten().copied().collect();
                let mean = if present.is_empty() {
                    0.0
                } else {
                    present.iter().sum::<f64>() / present.len() as f64
                };
                feature_columns.push(values.into_iter().map(|v| v.unwrap_or(mean)).collect());
                feature_names.push(col.name.clone());
            }
            ColumnRole::Categorical => {
                // Missing is the empty-string category, which sorts first.
                let mut categories: Vec<&str> = raw.to_vec();
                categories.sort_unstable();
                categories.dedup();
                // Drop the first category.
                for &cat in &categories[1..] {
                    feature_columns.push(
                        raw.iter()
                            .map(|&s| if s == cat { 1.0 } else { 0.0 })
                            .collect(),
                    );
                    let display = if cat.is_empty() { "<missing>" } else { cat };
                    feature_names.push(format!("{}={display}", col.name));
                }
            }
        }
    }

    // Label -> dense class ids, sorted numerically when possible.
    let mut distinct: Vec<String> = labels_raw.clone();
    distinct.sort_unstable();
    distinct.dedup();
    let all_numeric = distinct.iter().all(|s| s.parse::<f64>().is_ok());
    if all_numeric {
        distinct.sort_by(|a, b| {
            a.parse::<f64>()
                .unwrap()
                .partial_cmp(&b.parse::<f64>().unwrap())
                .expect("finite labels")
        });
    }
    let label_map: Vec<(String, usize)> = distinct
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), i))
        .collect();
    let lookup: BTreeMap<&str, usize> = label_map
        .iter()
        .map(|(s, i)| (s.as_str(), *i))
        .collect();
    let y: Vec<f64> = labels_raw.iter().map(|s| lookup[s.as_str()] as f64).collect();

    let n = records.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| feature_columns.iter().map(|c| c[i]).collect())
        .collect();
    Ok(Dataset {
        x: SparseMatrix::from_dense(&rows)?,
        y,
        weights: None,
        feature_names: Some(feature_names),
        label_map: Some(label_map),
    })
}

/// Reads a headerless dense CSV of numbers as a matrix.
pub fn read_dense_csv(path: &Path) -> Result<SparseMatrix> {
    let text = std::fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|tok| {
                tok.trim().parse::<f64>().map_err(|_| Error::Parse {
                    line: line_no + 1,
                    message: format!("`{tok}` is not numeric"),
                })
            })
            .collect::<Result<_>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyIndexSet("csv matrix has no rows".into()));
    }
    SparseMatrix::from_dense(&rows)
}

/// Writes a matrix as headerless dense CSV with round-trip float text.
pub fn write_dense_csv(path: &Path, m: &SparseMatrix) -> Result<()> {
    let mut out = String::new();
    for row in m.to_dense() {
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            out.push_str(&ryu_format(v));
            first = false;
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}
