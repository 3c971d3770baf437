//! Feature standardization on the reduced matrix, with the exact
//! back-transform to raw-space parameters.
//!
//! Standardizing before refinement usually makes the partition strictly
//! finer, so the pipeline standardizes the reduced matrix instead and maps
//! fitted parameters back: `w = w_sc / sigma`, `b = b_sc - w . mu`.
//! Predictions on raw features then need no centering or normalization.

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Per-feature means and standard deviations of a fitted matrix.
#[derive(Debug, Clone)]
pub struct StandardScaler {
    pub means: Vec<f64>,
    /// Population standard deviations; zeros are replaced by 1 so constant
    /// features pass through unscaled.
    pub stds: Vec<f64>,
    /// Columns whose standard deviation was zero.
    pub constant_features: Vec<usize>,
}

impl StandardScaler {
    pub fn fit(x: &SparseMatrix) -> Self {
        let n = x.n_rows() as f64;
        let dense = x.to_dense();
        let mut means = vec![0.0; x.n_cols()];
        for row in &dense {
            for (j, &v) in row.iter().enumerate() {
                means[j] += v;
            }
        }
        for m in &mut means {
            *m /= n;
        }
        let mut vars = vec![0.0; x.n_cols()];
        for row in &dense {
            for (j, &v) in row.iter().enumerate() {
                vars[j] += (v - means[j]) * (v - means[j]);
            }
        }
        let mut constant_features = Vec::new();
        let stds = vars
            .iter()
            .enumerate()
            .map(|(j, &var)| {
                let s = (var / n).sqrt();
                if s == 0.0 {
                    constant_features.push(j);
                    1.0
                } else {
                    s
                }
            })
            .collect();
        if !constant_features.is_empty() {
            log::warn!(
                "constant features {constant_features:?} left unscaled (zero standard deviation)"
            );
        }
        StandardScaler {
            means,
            stds,
            constant_features,
        }
    }

    /// `(x - mu) / sigma`, densifying as needed.
    pub fn transform(&self, x: &SparseMatrix) -> Result<SparseMatrix> {
        if x.n_cols() != self.means.len() {
            return Err(Error::dimension("scaler input", self.means.len(), x.n_cols()));
        }
        let rows: Vec<Vec<f64>> = x
            .to_dense()
            .into_iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .map(|(j, &v)| (v - self.means[j]) / self.stds[j])
                    .collect()
            })
            .collect();
        SparseMatrix::from_dense(&rows)
    }

    pub fn backtransform(&self, w_scaled: &[f64], b_scaled: f64) -> Result<(Vec<f64>, f64)> {
        scaler_backtransform(w_scaled, b_scaled, &self.means, &self.stds)
    }

    /// Column-per-class variant: each class column of the coefficient
    /// matrix is back-transformed independently.
    pub fn backtransform_multiclass(
        &self,
        w_scaled: &[Vec<f64>],
        b_scaled: &[f64],
    ) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        if w_scaled.len() != self.means.len() {
            return Err(Error::dimension(
                "scaled coefficient rows",
                self.means.len(),
                w_scaled.len(),
            ));
        }
        let n_classes = b_scaled.len();
        let mut w = vec![vec![0.0; n_classes]; w_scaled.len()];
        let mut b = b_scaled.to_vec();
        for c in 0..n_classes {
            for (j, row) in w_scaled.iter().enumerate() {
                w[j][c] = row[c] / self.stds[j];
                b[c] -= w[j][c] * self.means[j];
            }
        }
        Ok((w, b))
    }
}

/// Maps parameters fitted on standardized features back to the
/// unstandardized space: `w_j = w_sc_j / sigma_j`,
/// `b = b_sc - sum_j w_j mu_j`. A zero standard deviation is treated as 1
/// with a warning (constant feature).
pub fn scaler_backtransform(
    w_scaled: &[f64],
    b_scaled: f64,
    means: &[f64],
    stds: &[f64],
) -> Result<(Vec<f64>, f64)> {
    if means.len() != w_scaled.len() || stds.len() != w_scaled.len() {
        return Err(Error::dimension("scaler parameters", w_scaled.len(), means.len()));
    }
    let mut w = Vec::with_capacity(w_scaled.len());
    let mut b = b_scaled;
    for j in 0..w_scaled.len() {
        let sigma = if stds[j] == 0.0 {
            log::warn!("feature {j} has zero standard deviation; treating as 1");
            1.0
        } else if stds[j] < 0.0 || !stds[j].is_finite() {
            return Err(Error::Parameter(format!(
                "standard deviation must be nonnegative and finite, got {}",
                stds[j]
            )));
        } else {
            stds[j]
        };
        let wj = w_scaled[j] / sigma;
        b -= wj * means[j];
        w.push(wj);
    }
    Ok((w, b))
}
