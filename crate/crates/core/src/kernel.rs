//! Kernel matrix construction and the kernel-family reductions.
//!
//! Kernel problems are colored in coefficient space: one coloring `Q` over
//! samples must make `(Q, Q)` equitable on `K` with constant
//! label-weighted kernel sums and constant weights per color. Two derived
//! matrices express the reduced problem: the symmetric projection
//! `K_quad = Pi_Q^T K Pi_Q` for the quadratic regularizer, and the
//! row-averaged `K_logit = Pi_P^Scaled K Pi_Q` for the loss, whose row
//! partition `P` may be finer (per-label loss rows). The reduced problem
//! is a smaller convex program, not itself a kernel problem in standard
//! form, so it is kept as a first-class instance type.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::KernelKind;
use crate::partition::{AggregateMode, Coloring};
use crate::refine::{symmetric_coarsest_equitable, FloatKeyPolicy};
use crate::sparse::SparseMatrix;

/// A reduced kernel instance with the asymmetric quad/logit pair.
#[derive(Debug, Clone, Serialize)]
pub struct KernelReduced {
    /// `Pi_Q^T K Pi_Q`, symmetric, |Q| x |Q|; drives the regularizer.
    pub k_quad: SparseMatrix,
    /// `Pi_P^Scaled K Pi_Q`, |P| x |Q|; drives the logits/predictions.
    pub k_logit: SparseMatrix,
    /// Reduced targets, one per loss row.
    pub targets: Vec<f64>,
    /// Summed weights, one per loss row.
    pub weights: Vec<f64>,
    /// Loss-row partition of the samples (equals `coef_coloring` for ridge).
    pub loss_coloring: Coloring,
    /// Coefficient partition of the samples.
    pub coef_coloring: Coloring,
    /// Regularization strength carried through to the solver.
    pub lambda: f64,
}

impl KernelReduced {
    pub fn write_dir(&self, dir: &Path, input_hash: &str, policy: FloatKeyPolicy) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        crate::data::write_dense_csv(&dir.join("k_quad.csv"), &self.k_quad)?;
        crate::data::write_dense_csv(&dir.join("k_logit.csv"), &self.k_logit)?;
        std::fs::write(
            dir.join("targets.json"),
            serde_json::to_string_pretty(&self.targets)?,
        )?;
        std::fs::write(
            dir.join("weights.json"),
            serde_json::to_string_pretty(&self.weights)?,
        )?;
        std::fs::write(
            dir.join("colorings.json"),
            serde_json::to_string_pretty(&serde_json::json!({
                "loss_coloring": self.loss_coloring,
                "coef_coloring": self.coef_coloring,
            }))?,
        )?;
        std::fs::write(
            dir.join("manifest.json"),
            serde_json::to_string_pretty(&serde_json::json!({
                "input_hash": input_hash,
                "float_key_policy": policy,
                "lambda": self.lambda,
            }))?,
        )?;
        Ok(())
    }
}

/// Materializes the kernel matrix `K[i][j] = k(x_i, x_j)` for the given
/// kind. Row blocks are computed in parallel; output is deterministic.
pub fn compute_kernel(x: &SparseMatrix, kind: KernelKind) -> Result<SparseMatrix> {
    use rayon::prelude::*;
    let n = x.n_rows();
    let dense = x.to_dense();
    let entry = |i: usize, j: usize| -> f64 {
        match kind {
            KernelKind::Linear => dot(&dense[i], &dense[j]),
            KernelKind::Poly { degree, coef0 } => {
                (dot(&dense[i], &dense[j]) + coef0).powi(degree as i32)
            }
            KernelKind::Rbf { gamma } => {
                let sq: f64 = dense[i]
                    .iter()
                    .zip(&dense[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                (-gamma * sq).exp()
            }
            KernelKind::None => unreachable!("validated below"),
        }
    };
    match kind {
        KernelKind::None => {
            return Err(Error::Parameter("kernel kind must be linear, rbf, or poly".into()))
        }
        KernelKind::Rbf { gamma } if gamma <= 0.0 || !gamma.is_finite() => {
            return Err(Error::Parameter(format!("rbf gamma must be > 0, got {gamma}")));
        }
        KernelKind::Poly { degree, .. } if degree == 0 => {
            return Err(Error::Parameter("poly kernel degree must be >= 1".into()));
        }
        _ => {}
    }

    // Upper triangle per row, mirrored afterwards for exact symmetry.
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (i..n).map(|j| entry(i, j)).collect())
        .collect();
    let mut rows = vec![vec![0.0; n]; n];
    for i in 0..n {
        for (off, &v) in upper[i].iter().enumerate() {
            let j = i + off;
            rows[i][j] = v;
            rows[j][i] = v;
        }
    }
    SparseMatrix::from_dense(&rows)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Shared ridge/logistic front half: validate, derive the coefficient
/// coloring, and verify the reduction conditions on it.
fn kernel_coef_coloring(
    k: &SparseMatrix,
    y: &[f64],
    v: &[f64],
    policy: FloatKeyPolicy,
) -> Result<Coloring> {
    if k.n_rows() != k.n_cols() {
        return Err(Error::Structure(format!(
            "kernel matrix must be square, got {}x{}",
            k.n_rows(),
            k.n_cols()
        )));
    }
    if !k.is_symmetric() {
        return Err(Error::Structure("kernel matrix must be symmetric".into()));
    }
    let n = k.n_rows();
    if y.len() != n {
        return Err(Error::dimension("targets", n, y.len()));
    }
    if v.len() != n {
        return Err(Error::dimension("weights", n, v.len()));
    }
    if let Some(&bad) = v.iter().find(|&&w| !(w > 0.0) || !w.is_finite()) {
        return Err(Error::Parameter(format!("weights must be positive, got {bad}")));
    }

    // Initial split by (weight, label-weighted kernel sum); by symmetry the
    // row and column forms of the sum coincide.
    let weighted: Vec<f64> = y.iter().zip(v).map(|(&yi, &vi)| yi * vi).collect();
    let sums = k.t_matvec(&weighted)?;
    let keys: Vec<(u64, u64)> = v
        .iter()
        .zip(&sums)
        .map(|(&vi, &si)| (policy.key(vi), policy.key(si)))
        .collect();
    let q0 = Coloring::unit(n)?.split_by_keys(&keys)?;
    let q = symmetric_coarsest_equitable(k, &q0, policy)?;

    // Re-verify the three conditions on the final coloring.
    let stats = q.stats();
    for members in &stats.members {
        let first = members[0];
        if members.iter().any(|&i| v[i] != v[first]) {
            return Err(Error::Invariant(format!(
                "weights not constant within coefficient color containing {first}"
            )));
        }
        let k0 = policy.key(sums[first]);
        if members.iter().any(|&i| policy.key(sums[i]) != k0) {
            return Err(Error::Invariant(format!(
                "label-weighted kernel sums differ within color containing {first}"
            )));
        }
    }
    Ok(q)
}

/// Block sums of `k` over `(row_colors, col_colors)`: `Pi_R^T K Pi_C`.
/// Computed for the lower pair order and mirrored when the colorings are
/// the same object, so the output is exactly symmetric.
fn block_sums(k: &SparseMatrix, rows: &Coloring, cols: &Coloring, symmetric: bool) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; cols.num_colors()]; rows.num_colors()];
    if symmetric {
        let stats = rows.stats();
        for a in 0..rows.num_colors() {
            for b in a..cols.num_colors() {
                let mut sum = 0.0;
                for &i in &stats.members[a] {
                    let (cidx, vals) = k.row(i);
                    for (&j, &v) in cidx.iter().zip(vals) {
                        if cols.color_of(j) == b {
                            sum += v;
                        }
                    }
                }
                out[a][b] = sum;
                out[b][a] = sum;
            }
        }
    } else {
        for i in 0..k.n_rows() {
            let (cidx, vals) = k.row(i);
            let a = rows.color_of(i);
            for (&j, &v) in cidx.iter().zip(vals) {
                out[a][cols.color_of(j)] += v;
            }
        }
    }
    out
}

/// Row-averaged block sums `Pi_P^Scaled K Pi_Q`, built from each loss
/// color's representative row. Equitability of `(Q, Q)` guarantees every
/// member of a loss color has the same block row.
fn representative_logit_rows(
    k: &SparseMatrix,
    loss: &Coloring,
    coef: &Coloring,
    policy: FloatKeyPolicy,
) -> Result<Vec<Vec<f64>>> {
    let stats = loss.stats();
    let mut rows = Vec::with_capacity(loss.num_colors());
    for members in &stats.members {
        let mut first: Option<Vec<f64>> = None;
        for &i in members {
            let mut sums = vec![0.0; coef.num_colors()];
            let (cidx, vals) = k.row(i);
            for (&j, &v) in cidx.iter().zip(vals) {
                sums[coef.color_of(j)] += v;
            }
            match &first {
                None => first = Some(sums),
                Some(f) => {
                    if f.iter().zip(&sums).any(|(a, b)| policy.key(*a) != policy.key(*b)) {
                        return Err(Error::Invariant(format!(
                            "kernel block row not constant within loss color containing {}",
                            members[0]
                        )));
                    }
                }
            }
        }
        rows.push(first.expect("colors are nonempty"));
    }
    Ok(rows)
}

/// Kernel ridge reduction: the loss and coefficient partitions coincide.
pub fn reduce_kernel_ridge(
    k: &SparseMatrix,
    y: &[f64],
    v: &[f64],
    lambda: f64,
    policy: FloatKeyPolicy,
) -> Result<KernelReduced> {
    if lambda < 0.0 || !lambda.is_finite() {
        return Err(Error::Parameter(format!("lambda must be >= 0, got {lambda}")));
    }
    let q = kernel_coef_coloring(k, y, v, policy)?;
    let k_quad = SparseMatrix::from_dense(&block_sums(k, &q, &q, true))?;
    let k_logit = SparseMatrix::from_dense(&representative_logit_rows(k, &q, &q, policy)?)?;
    let targets = q.aggregate(y, AggregateMode::Mean)?;
    let weights = q.aggregate(v, AggregateMode::Sum)?;
    Ok(KernelReduced {
        k_quad,
        k_logit,
        targets,
        weights,
        loss_coloring: q.clone(),
        coef_coloring: q,
        lambda,
    })
}

/// Kernel logistic reduction: same coefficient coloring as ridge, with
/// loss rows further split per label so targets stay integral.
pub fn reduce_kernel_logistic(
    k: &SparseMatrix,
    y: &[f64],
    v: &[f64],
    lambda: f64,
    policy: FloatKeyPolicy,
) -> Result<KernelReduced> {
    if lambda < 0.0 || !lambda.is_finite() {
        return Err(Error::Parameter(format!("lambda must be >= 0, got {lambda}")));
    }
    if let Some(&bad) = y.iter().find(|&&t| t != 0.0 && t != 1.0) {
        return Err(Error::Parameter(format!(
            "kernel logistic labels must be 0 or 1, got {bad}"
        )));
    }
    let q = kernel_coef_coloring(k, y, v, policy)?;
    let label_bits: Vec<u64> = y.iter().map(|&t| t.to_bits()).collect();
    let p = q.split_by_keys(&label_bits)?;

    let k_quad = SparseMatrix::from_dense(&block_sums(k, &q, &q, true))?;
    let k_logit = SparseMatrix::from_dense(&representative_logit_rows(k, &p, &q, policy)?)?;
    let targets = p.aggregate(y, AggregateMode::Mean)?; // integral: labels constant per color
    let weights = p.aggregate(v, AggregateMode::Sum)?;
    Ok(KernelReduced {
        k_quad,
        k_logit,
        targets,
        weights,
        loss_coloring: p,
        coef_coloring: q,
        lambda,
    })
}
