//! Compressed-sparse-row matrices with a lazily built column-major mirror.
//!
//! Explicit zeros may be stored; every consumer in this crate treats them
//! exactly like absent entries, so the two representations are
//! interchangeable for refinement, aggregation, and products.

use std::sync::OnceLock;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
struct ColumnMirror {
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

/// CSR matrix over `f64` entries. Column indices are strictly increasing
/// within each row; all stored values are finite.
#[derive(Debug, Clone, Default)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    mirror: OnceLock<ColumnMirror>,
}

impl PartialEq for SparseMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.n_rows == other.n_rows
            && self.n_cols == other.n_cols
            && self.row_ptr == other.row_ptr
            && self.col_idx == other.col_idx
            && self.values == other.values
    }
}

// JSON form: shape plus dense rows. Reduced matrices are small; the CSV
// files carry the canonical copies.
impl serde::Serialize for SparseMatrix {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut state = serializer.serialize_struct("SparseMatrix", 3)?;
        state.serialize_field("n_rows", &self.n_rows)?;
        state.serialize_field("n_cols", &self.n_cols)?;
        state.serialize_field("dense", &self.to_dense())?;
        state.end()
    }
}

impl SparseMatrix {
    /// Builds a matrix from per-row `(column, value)` entry lists.
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n_rows = rows.len();
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for (i, row) in rows.iter().enumerate() {
            let mut prev: Option<usize> = None;
            for &(j, v) in row {
                if j >= n_cols {
                    return Err(Error::Structure(format!(
                        "row {i}: column index {j} out of range (n_cols = {n_cols})"
                    )));
                }
                if let Some(p) = prev {
                    if j <= p {
                        return Err(Error::Structure(format!(
                            "row {i}: column indices must be strictly increasing ({p} then {j})"
                        )));
                    }
                }
                if !v.is_finite() {
                    return Err(Error::Structure(format!(
                        "row {i}, column {j}: non-finite value {v}"
                    )));
                }
                prev = Some(j);
                col_idx.push(j);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(SparseMatrix {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
            mirror: OnceLock::new(),
        })
    }

    /// Builds a matrix from dense row data, storing only nonzero entries.
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, |r| r.len());
        let mut entries = Vec::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(Error::dimension(format!("dense row {i}"), n_cols, row.len()));
            }
            entries.push(
                row.iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0.0)
                    .map(|(j, &v)| (j, v))
                    .collect(),
            );
        }
        Self::from_rows(n_cols, entries)
    }

    pub fn identity(n: usize) -> Self {
        let rows = (0..n).map(|i| vec![(i, 1.0)]).collect();
        Self::from_rows(n, rows).expect("identity is well formed")
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    /// Number of stored entries (explicit zeros included).
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// The stored entries of row `i` as parallel `(columns, values)` slices.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[a..b], &self.values[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(pos) => vals[pos],
            Err(_) => 0.0,
        }
    }

    /// The stored entries of column `j`; builds and caches the column-major
    /// mirror on first use.
    pub fn col(&self, j: usize) -> (&[usize], &[f64]) {
        let m = self.mirror();
        let (a, b) = (m.col_ptr[j], m.col_ptr[j + 1]);
        (&m.row_idx[a..b], &m.values[a..b])
    }

    fn mirror(&self) -> &ColumnMirror {
        self.mirror.get_or_init(|| {
            let mut counts = vec![0usize; self.n_cols + 1];
            for &j in &self.col_idx {
                counts[j + 1] += 1;
            }
            for j in 0..self.n_cols {
                counts[j + 1] += counts[j];
            }
            let col_ptr = counts.clone();
            let mut cursor = counts;
            let mut row_idx = vec![0usize; self.values.len()];
            let mut values = vec![0f64; self.values.len()];
            for i in 0..self.n_rows {
                let (cols, vals) = self.row(i);
                for (&j, &v) in cols.iter().zip(vals) {
                    row_idx[cursor[j]] = i;
                    values[cursor[j]] = v;
                    cursor[j] += 1;
                }
            }
            ColumnMirror {
                col_ptr,
                row_idx,
                values,
            }
        })
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.n_cols]; self.n_rows];
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                out[i][j] = v;
            }
        }
        out
    }

    pub fn transpose(&self) -> SparseMatrix {
        let m = self.mirror();
        let mut rows = Vec::with_capacity(self.n_cols);
        for j in 0..self.n_cols {
            let (a, b) = (m.col_ptr[j], m.col_ptr[j + 1]);
            rows.push(
                m.row_idx[a..b]
                    .iter()
                    .zip(&m.values[a..b])
                    .map(|(&i, &v)| (i, v))
                    .collect(),
            );
        }
        SparseMatrix::from_rows(self.n_rows, rows).expect("transpose preserves structure")
    }

    /// `A x`; summation within a row is in ascending column order.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_cols {
            return Err(Error::dimension("matvec input", self.n_cols, x.len()));
        }
        Ok((0..self.n_rows)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum()
            })
            .collect())
    }

    /// `A^T x`; accumulation is in ascending row order, then ascending
    /// column within each row, so the result is bit-reproducible.
    pub fn t_matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_rows {
            return Err(Error::dimension("t_matvec input", self.n_rows, x.len()));
        }
        let mut out = vec![0.0; self.n_cols];
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                out[j] += v * x[i];
            }
        }
        Ok(out)
    }

    /// Semantic symmetry: `A[i][j] == A[j][i]` for all entries, with
    /// explicit zeros treated as absent.
    pub fn is_symmetric(&self) -> bool {
        if self.n_rows != self.n_cols {
            return false;
        }
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if self.get(j, i) != v {
                    return false;
                }
            }
            // Entries stored in column i but absent from row i must be zero.
            let (rows, tvals) = self.col(i);
            for (&j, &tv) in rows.iter().zip(tvals) {
                if self.get(i, j) != tv {
                    return false;
                }
            }
        }
        true
    }

    /// Scales row `i` by `factors[i]`, returning a new matrix.
    pub fn scale_rows(&self, factors: &[f64]) -> Result<SparseMatrix> {
        if factors.len() != self.n_rows {
            return Err(Error::dimension("row scale factors", self.n_rows, factors.len()));
        }
        let rows = (0..self.n_rows)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter()
                    .zip(vals)
                    .map(|(&j, &v)| (j, v * factors[i]))
                    .collect()
            })
            .collect();
        SparseMatrix::from_rows(self.n_cols, rows)
    }

    /// Appends a column of ones (the augmented-bias form).
    pub fn append_ones_column(&self) -> SparseMatrix {
        let rows = (0..self.n_rows)
            .map(|i| {
                let (cols, vals) = self.row(i);
                let mut row: Vec<(usize, f64)> =
                    cols.iter().zip(vals).map(|(&j, &v)| (j, v)).collect();
                row.push((self.n_cols, 1.0));
                row
            })
            .collect();
        SparseMatrix::from_rows(self.n_cols + 1, rows).expect("augmentation preserves structure")
    }

    /// Canonical little-endian byte serialization of shape and entries,
    /// used for content hashing.
    pub fn content_bytes(&self) -> Vec<u8> {
        let mut bytes = Vec::with_capacity(16 + self.values.len() * 16);
        bytes.extend_from_slice(&(self.n_rows as u64).to_le_bytes());
        bytes.extend_from_slice(&(self.n_cols as u64).to_le_bytes());
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if v != 0.0 {
                    bytes.extend_from_slice(&(i as u64).to_le_bytes());
                    bytes.extend_from_slice(&(j as u64).to_le_bytes());
                    bytes.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        bytes
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_structure() {
        assert!(SparseMatrix::from_rows(3, vec![vec![(0, 1.0), (0, 2.0)]]).is_err());
        assert!(SparseMatrix::from_rows(3, vec![vec![(2, 1.0), (1, 2.0)]]).is_err());
        assert!(SparseMatrix::from_rows(2, vec![vec![(2, 1.0)]]).is_err());
        assert!(SparseMatrix::from_rows(2, vec![vec![(0, f64::NAN)]]).is_err());
    }

    #[test]
    fn dense_round_trip() {
        let dense = vec![vec![1.0, 0.0, 2.0], vec![0.0, -3.0, 0.0]];
        let m = SparseMatrix::from_dense(&dense).unwrap();
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.to_dense(), dense);
        assert_eq!(m.get(0, 2), 2.0);
        assert_eq!(m.get(1, 0), 0.0);
    }

    #[test]
    fn column_mirror_matches_transpose() {
        let m = SparseMatrix::from_rows(
            3,
            vec![vec![(0, 1.0), (2, 5.0)], vec![(1, 2.0)], vec![(0, 3.0), (1, 4.0)]],
        )
        .unwrap();
        let (rows, vals) = m.col(0);
        assert_eq!(rows, &[0, 2]);
        assert_eq!(vals, &[1.0, 3.0]);
        assert_eq!(m.transpose().to_dense(), vec![
            vec![1.0, 0.0, 3.0],
            vec![0.0, 2.0, 4.0],
            vec![5.0, 0.0, 0.0],
        ]);
    }

    #[test]
    fn matvec_and_t_matvec() {
        let m = SparseMatrix::from_dense(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        assert_eq!(m.matvec(&[1.0, -1.0]).unwrap(), vec![-1.0, -1.0, -1.0]);
        assert_eq!(m.t_matvec(&[1.0, 1.0, 1.0]).unwrap(), vec![9.0, 12.0]);
        assert!(m.matvec(&[1.0]).is_err());
    }

    #[test]
    fn symmetry_ignores_explicit_zeros() {
        let sym = SparseMatrix::from_rows(
            2,
            vec![vec![(0, 2.0), (1, 0.0)], vec![(1, 3.0)]],
        )
        .unwrap();
        assert!(sym.is_symmetric());

        let asym = SparseMatrix::from_dense(&[vec![0.0, 1.0], vec![2.0, 0.0]]).unwrap();
        assert!(!asym.is_symmetric());
    }
}
