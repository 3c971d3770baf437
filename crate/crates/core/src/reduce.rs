//! Per-model reduction pipelines: initial colorings, reduced-instance
//! construction, penalty transforms, and exact solution lifting.
//!
//! For every supported primal family the pipeline is the same shape:
//! derive initial colorings from the data, labels, and weights; refine to
//! the coarsest equitable pair; then merge samples and features within
//! colors. The initial colorings encode the per-family conditions (equal
//! label-weighted column sums, constant weights within sample colors), and
//! every condition is re-verified on the final colorings — a violation is
//! reported as an internal invariant error, never silently accepted.

use std::collections::HashMap;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{MergeMode, ModelFamily, ModelSpec};
use crate::partition::{AggregateMode, Coloring};
use crate::refine::{coarsest_equitable, is_equitable, Equitability, FloatKeyPolicy};
use crate::sparse::SparseMatrix;

/// Reduced targets, by merge mode and family.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "data")]
pub enum ReducedTargets {
    /// Real-valued targets: regression targets, or binary labels /
    /// fractional label means.
    Values(Vec<f64>),
    /// Integral class ids (per-label multiclass merging).
    Classes(Vec<usize>),
    /// One probability row per reduced sample (mean-target multiclass).
    Probabilities(Vec<Vec<f64>>),
}

impl ReducedTargets {
    pub fn len(&self) -> usize {
        match self {
            ReducedTargets::Values(v) => v.len(),
            ReducedTargets::Classes(c) => c.len(),
            ReducedTargets::Probabilities(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A compressed ERM instance together with everything needed to lift
/// solutions back to the original problem.
#[derive(Debug, Clone, Serialize)]
pub struct ReducedInstance {
    /// Reduced feature matrix; one row per merged sample group.
    pub x: SparseMatrix,
    pub targets: ReducedTargets,
    /// Per-reduced-row weights; sums to the original total weight.
    pub weights: Vec<f64>,
    /// Sample coloring (rows of the original matrix).
    pub row_coloring: Coloring,
    /// Feature coloring (columns of the original matrix).
    pub col_coloring: Coloring,
    /// Row color each reduced row was built from. Identity-like for
    /// mean-target merging; per-label merging may repeat a color.
    pub row_color_ids: Vec<usize>,
    /// Per reduced coefficient: the size of its feature color. The reduced
    /// penalty is `sum_T m_T (lambda2 w_T^2 + lambda1 |w_T|)`.
    pub penalty_multipliers: Vec<usize>,
    pub model: ModelSpec,
}

impl ReducedInstance {
    pub fn n_reduced_rows(&self) -> usize {
        self.x.n_rows()
    }

    pub fn n_reduced_cols(&self) -> usize {
        self.x.n_cols()
    }

    /// Size statistics for summaries: original/reduced counts and ratios.
    pub fn compression_summary(&self, n_orig: usize, d_orig: usize) -> serde_json::Value {
        serde_json::json!({
            "original_samples": n_orig,
            "reduced_samples": self.n_reduced_rows(),
            "original_features": d_orig,
            "reduced_features": self.n_reduced_cols(),
            "sample_ratio": self.n_reduced_rows() as f64 / n_orig as f64,
            "feature_ratio": self.n_reduced_cols() as f64 / d_orig as f64,
            "row_color_sizes": self.row_coloring.stats().sizes,
            "col_color_sizes": self.col_coloring.stats().sizes,
        })
    }

    /// Serializes the instance to a directory: dense CSV matrix, JSON
    /// colorings/targets/weights/multipliers, and a provenance manifest.
    pub fn write_dir(
        &self,
        dir: &Path,
        input_hash: &str,
        policy: FloatKeyPolicy,
    ) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        crate::data::write_dense_csv(&dir.join("x_reduced.csv"), &self.x)?;
        let to_file = |name: &str, value: serde_json::Value| -> Result<()> {
            std::fs::write(dir.join(name), serde_json::to_string_pretty(&value)?)?;
            Ok(())
        };
        to_file("targets.json", serde_json::to_value(&self.targets)?)?;
        to_file("weights.json", serde_json::to_value(&self.weights)?)?;
        to_file(
            "colorings.json",
            serde_json::json!({
                "row_coloring": self.row_coloring,
                "col_coloring": self.col_coloring,
                "row_color_ids": self.row_color_ids,
            }),
        )?;
        to_file(
            "multipliers.json",
            serde_json::to_value(&self.penalty_multipliers)?,
        )?;
        to_file(
            "manifest.json",
            serde_json::json!({
                "input_hash": input_hash,
                "float_key_policy": policy,
                "model": self.model,
            }),
        )?;
        Ok(())
    }
}

/// SHA-256 over the matrix entries, targets, and weights; hex encoded.
pub fn instance_hash(x: &SparseMatrix, y: &[f64], v: Option<&[f64]>) -> String {
    let mut hasher = Sha256::new();
    hasher.update(x.content_bytes());
    for value in y {
        hasher.update(value.to_le_bytes());
    }
    if let Some(v) = v {
        for value in v {
            hasher.update(value.to_le_bytes());
        }
    }
    hex_string(&hasher.finalize())
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Initial colorings for unweighted least squares: rows start as one
/// color, features split by their label correlation `(X^T y)_j`.
pub fn init_coloring_linreg(
    x: &SparseMatrix,
    y: &[f64],
    policy: FloatKeyPolicy,
) -> Result<(Coloring, Coloring)> {
    if y.len() != x.n_rows() {
        return Err(Error::dimension("targets", x.n_rows(), y.len()));
    }
    let p0 = Coloring::unit(x.n_rows())?;
    let keys = policy.keys(&x.t_matvec(y)?);
    let q0 = Coloring::unit(x.n_cols())?.split_by_keys(&keys)?;
    Ok((p0, q0))
}

/// Initial colorings for (weighted) logistic families: rows split by
/// weight, features split by the per-class weighted sums
/// `sum_i v_i X_ij 1{y_i = c}`. The binary case uses the single class-1
/// scalar; the class-0 condition follows once the pair is equitable and
/// weights are color-constant.
pub fn init_coloring_logistic(
    x: &SparseMatrix,
    class_ids: &[usize],
    v: &[f64],
    n_classes: usize,
    policy: FloatKeyPolicy,
) -> Result<(Coloring, Coloring)> {
    let scalar = n_classes == 2;
    init_logistic_inner(x, class_ids, v, n_classes, scalar, policy)
}

fn init_logistic_inner(
    x: &SparseMatrix,
    class_ids: &[usize],
    v: &[f64],
    n_classes: usize,
    binary_scalar: bool,
    policy: FloatKeyPolicy,
) -> Result<(Coloring, Coloring)> {
    if class_ids.len() != x.n_rows() {
        return Err(Error::dimension("class ids", x.n_rows(), class_ids.len()));
    }
    if v.len() != x.n_rows() {
        return Err(Error::dimension("weights", x.n_rows(), v.len()));
    }
    if let Some(&bad) = class_ids.iter().find(|&&c| c >= n_classes) {
        return Err(Error::Parameter(format!(
            "class id {bad} out of range for {n_classes} classes"
        )));
    }
    let p0 = Coloring::unit(x.n_rows())?.split_by_keys(&policy.keys(v))?;
    let q0 = if binary_scalar {
        let indicator: Vec<f64> = class_ids
            .iter()
            .zip(v)
            .map(|(&c, &w)| if c == 1 { w } else { 0.0 })
            .collect();
        let keys = policy.keys(&x.t_matvec(&indicator)?);
        Coloring::unit(x.n_cols())?.split_by_keys(&keys)?
    } else {
        let mut keys: Vec<Vec<u64>> = vec![Vec::with_capacity(n_classes); x.n_cols()];
        for c in 0..n_classes {
            let indicator: Vec<f64> = class_ids
                .iter()
                .zip(v)
                .map(|(&ci, &w)| if ci == c { w } else { 0.0 })
                .collect();
            for (j, sum) in x.t_matvec(&indicator)?.into_iter().enumerate() {
                keys[j].push(policy.key(sum));
            }
        }
        Coloring::unit(x.n_cols())?.split_by_keys(&keys)?
    };
    Ok((p0, q0))
}

/// Initial colorings for weighted regression: rows split by weight,
/// features split by `sum_i v_i X_ij y_i`.
fn init_coloring_weighted_regression(
    x: &SparseMatrix,
    y: &[f64],
    v: &[f64],
    policy: FloatKeyPolicy,
) -> Result<(Coloring, Coloring)> {
    let p0 = Coloring::unit(x.n_rows())?.split_by_keys(&policy.keys(v))?;
    let weighted: Vec<f64> = y.iter().zip(v).map(|(&yi, &vi)| yi * vi).collect();
    let keys = policy.keys(&x.t_matvec(&weighted)?);
    let q0 = Coloring::unit(x.n_cols())?.split_by_keys(&keys)?;
    Ok((p0, q0))
}

/// Runs the full reduction pipeline for a primal family: initial colorings,
/// coarsest equitable refinement, and merged instance construction.
pub fn reduce_erm(
    x: &SparseMatrix,
    y: &[f64],
    v: Option<&[f64]>,
    spec: &ModelSpec,
    policy: FloatKeyPolicy,
) -> Result<ReducedInstance> {
    spec.validate()?;
    if spec.family.is_kernel() {
        return Err(Error::Parameter(
            "reduce_erm handles primal families; use the kernel reductions for kernel models"
                .into(),
        ));
    }
    if x.n_rows() == 0 || x.n_cols() == 0 {
        return Err(Error::EmptyIndexSet("empty data matrix".into()));
    }
    if y.len() != x.n_rows() {
        return Err(Error::dimension("targets", x.n_rows(), y.len()));
    }
    let ones;
    let v = match v {
        Some(v) => {
            if v.len() != x.n_rows() {
                return Err(Error::dimension("weights", x.n_rows(), v.len()));
            }
            if let Some(&bad) = v.iter().find(|&&w| !(w > 0.0) || !w.is_finite()) {
                return Err(Error::Parameter(format!("weights must be positive, got {bad}")));
            }
            v
        }
        None => {
            ones = vec![1.0; x.n_rows()];
            &ones
        }
    };
    if let Some(&bad) = y.iter().find(|&&t| !t.is_finite()) {
        return Err(Error::Parameter(format!("non-finite target {bad}")));
    }

    let class_ids = match spec.family {
        ModelFamily::LogisticBinary => Some(class_ids_from(y, 2)?),
        ModelFamily::LogisticMulticlass => Some(class_ids_from(y, spec.n_classes)?),
        _ => None,
    };

    let unweighted = v.iter().all(|&w| w == 1.0);
    let (p0, q0) = match spec.family {
        ModelFamily::LinearRegression | ModelFamily::Ridge | ModelFamily::ElasticNet => {
            if unweighted {
                init_coloring_linreg(x, y, policy)?
            } else {
                init_coloring_weighted_regression(x, y, v, policy)?
            }
        }
        ModelFamily::LogisticBinary => {
            init_logistic_inner(x, class_ids.as_ref().unwrap(), v, 2, true, policy)?
        }
        ModelFamily::LogisticMulticlass => {
            // Per-class sums for every class, even when there are only two.
            init_logistic_inner(
                x,
                class_ids.as_ref().unwrap(),
                v,
                spec.n_classes,
                false,
                policy,
            )?
        }
        _ => unreachable!("kernel families rejected above"),
    };

    let pair = coarsest_equitable(x, &p0, &q0, policy)?;
    let p = pair.row_coloring;
    let q = pair.col_coloring;

    // Per-row reduced feature vectors; constant within each row color by
    // equitability, asserted below.
    let reduced_rows = reduced_feature_rows(x, &q);
    let p_stats = p.stats();
    for members in &p_stats.members {
        let first = &reduced_rows[members[0]];
        for &i in &members[1..] {
            for t in 0..q.num_colors() {
                if policy.key(reduced_rows[i][t]) != policy.key(first[t]) {
                    return Err(Error::Invariant(format!(
                        "rows {} and {} share a color but differ in reduced feature {t}",
                        members[0], i
                    )));
                }
            }
        }
    }

    // Re-verify the reduction conditions on the final colorings.
    verify_reduction_conditions(x, y, v, &p, &q, spec, class_ids.as_deref(), policy)?;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    let mut row_color_ids: Vec<usize> = Vec::new();
    let targets = match spec.merge_mode {
        MergeMode::MeanTarget => {
            let weight_sums = p.aggregate(v, AggregateMode::Sum)?;
            for (s, members) in p_stats.members.iter().enumerate() {
                rows.push(reduced_rows[members[0]].clone());
                weights.push(weight_sums[s]);
                row_color_ids.push(s);
            }
            match spec.family {
                ModelFamily::LogisticMulticlass => {
                    let probs = class_probability_rows(
                        &p_stats.members,
                        class_ids.as_ref().unwrap(),
                        v,
                        spec.n_classes,
                        &weight_sums,
                    );
                    ReducedTargets::Probabilities(probs)
                }
                _ => {
                    let mut means = Vec::with_capacity(p_stats.members.len());
                    for (s, members) in p_stats.members.iter().enumerate() {
                        if members.iter().all(|&i| y[i] == y[members[0]]) {
                            means.push(y[members[0]]);
                        } else {
                            let weighted: f64 = members.iter().map(|&i| v[i] * y[i]).sum();
                            means.push(weighted / weight_sums[s]);
                        }
                    }
                    ReducedTargets::Values(means)
                }
            }
        }
        MergeMode::PerLabel => {
            let mut values: Vec<f64> = Vec::new();
            for (s, members) in p_stats.members.iter().enumerate() {
                // Group by exact target value, emitted in ascending order.
                let mut groups: Vec<(f64, f64)> = Vec::new();
                for &i in members {
                    match groups.iter_mut().find(|(val, _)| val.to_bits() == y[i].to_bits()) {
                        Some((_, w)) => *w += v[i],
                        None => groups.push((y[i], v[i])),
                    }
                }
                groups.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite targets"));
                for (value, weight) in groups {
                    rows.push(reduced_rows[members[0]].clone());
                    weights.push(weight);
                    row_color_ids.push(s);
                    values.push(value);
                }
            }
            match spec.family {
                ModelFamily::LogisticMulticlass => {
                    ReducedTargets::Classes(values.iter().map(|&v| v as usize).collect())
                }
                _ => ReducedTargets::Values(values),
            }
        }
    };

    let x_reduced = SparseMatrix::from_dense(&rows)?;
    Ok(ReducedInstance {
        x: x_reduced,
        targets,
        weights,
        penalty_multipliers: q.stats().sizes,
        row_color_ids,
        row_coloring: p,
        col_coloring: q,
        model: *spec,
    })
}

/// Per-row sums over each feature color: row `i` of `X Pi_Q`.
fn reduced_feature_rows(x: &SparseMatrix, q: &Coloring) -> Vec<Vec<f64>> {
    (0..x.n_rows())
        .map(|i| {
            let mut sums = vec![0.0; q.num_colors()];
            let (cols, vals) = x.row(i);
            for (&j, &val) in cols.iter().zip(vals) {
                sums[q.color_of(j)] += val;
            }
            sums
        })
        .collect()
}

fn class_ids_from(y: &[f64], n_classes: usize) -> Result<Vec<usize>> {
    y.iter()
        .map(|&t| {
            if t.fract() != 0.0 || t < 0.0 || t >= n_classes as f64 {
                Err(Error::Parameter(format!(
                    "label {t} is not a class id in 0..{n_classes}"
                )))
            } else {
                Ok(t as usize)
            }
        })
        .collect()
}

fn class_probability_rows(
    members: &[Vec<usize>],
    class_ids: &[usize],
    v: &[f64],
    n_classes: usize,
    weight_sums: &[f64],
) -> Vec<Vec<f64>> {
    members
        .iter()
        .enumerate()
        .map(|(s, group)| {
            let mut row = vec![0.0; n_classes];
            for &i in group {
                row[class_ids[i]] += v[i];
            }
            for p in &mut row {
                *p /= weight_sums[s];
            }
            row
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn verify_reduction_conditions(
    x: &SparseMatrix,
    y: &[f64],
    v: &[f64],
    p: &Coloring,
    q: &Coloring,
    spec: &ModelSpec,
    class_ids: Option<&[usize]>,
    policy: FloatKeyPolicy,
) -> Result<()> {
    match is_equitable(x, p, q, policy)? {
        Equitability::Pass => {}
        Equitability::Witness(w) => {
            return Err(Error::Invariant(format!(
                "refinement output is not equitable: {w:?}"
            )));
        }
    }

    // Weights constant within every row color.
    for members in &p.stats().members {
        if members.iter().any(|&i| v[i] != v[members[0]]) {
            return Err(Error::Invariant(format!(
                "weights are not constant within row color containing index {}",
                members[0]
            )));
        }
    }

    // Label-weighted column sums constant within every feature color
    // (per class for multiclass).
    let check_keys = |sums: &[f64]| -> Result<()> {
        for members in &q.stats().members {
            let k0 = policy.key(sums[members[0]]);
            if members.iter().any(|&j| policy.key(sums[j]) != k0) {
                return Err(Error::Invariant(format!(
                    "label-weighted sums differ within feature color containing column {}",
                    members[0]
                )));
            }
        }
        Ok(())
    };
    match spec.family {
        ModelFamily::LogisticMulticlass => {
            let ids = class_ids.expect("class ids for multiclass");
            for c in 0..spec.n_classes {
                let indicator: Vec<f64> = ids
                    .iter()
                    .zip(v)
                    .map(|(&ci, &w)| if ci == c { w } else { 0.0 })
                    .collect();
                check_keys(&x.t_matvec(&indicator)?)?;
            }
        }
        _ => {
            let weighted: Vec<f64> = y.iter().zip(v).map(|(&yi, &vi)| yi * vi).collect();
            check_keys(&x.t_matvec(&weighted)?)?;
        }
    }
    Ok(())
}

/// Expands features into all monomials up to `degree` (constant excluded;
/// the bias stays a standalone scalar). Columns are ordered by total
/// degree, then lexicographically by the nondecreasing variable tuple.
pub fn expand_polynomial(x: &SparseMatrix, degree: u32) -> Result<SparseMatrix> {
    if degree == 0 {
        return Err(Error::Parameter("polynomial degree must be >= 1".into()));
    }
    let d = x.n_cols();
    let mut monomials: Vec<Vec<usize>> = Vec::new();
    let mut current: Vec<usize> = Vec::new();
    fn enumerate(d: usize, remaining: u32, start: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if remaining == 0 {
            out.push(current.clone());
            return;
        }
        for j in start..d {
            current.push(j);
            enumerate(d, remaining - 1, j, current, out);
            current.pop();
        }
    }
    for deg in 1..=degree {
        enumerate(d, deg, 0, &mut current, &mut monomials);
    }

    let dense = x.to_dense();
    let rows: Vec<Vec<f64>> = dense
        .iter()
        .map(|row| {
            monomials
                .iter()
                .map(|m| m.iter().map(|&j| row[j]).product())
                .collect()
        })
        .collect();
    SparseMatrix::from_dense(&rows)
}

/// Folds positive sample weights into the data: `X -> diag(sqrt(v)) X`,
/// `y -> sqrt(v) * y`. The weighted least-squares objective on `(X, y, v)`
/// equals the unweighted objective on the transformed pair. A bias term
/// must already be present as a column of `X`, since the transform scales
/// it per row like any other feature.
pub fn absorb_sample_weights(
    x: &SparseMatrix,
    y: &[f64],
    v: &[f64],
) -> Result<(SparseMatrix, Vec<f64>)> {
    if y.len() != x.n_rows() {
        return Err(Error::dimension("targets", x.n_rows(), y.len()));
    }
    if v.len() != x.n_rows() {
        return Err(Error::dimension("weights", x.n_rows(), v.len()));
    }
    if let Some(&bad) = v.iter().find(|&&w| !(w > 0.0) || !w.is_finite()) {
        return Err(Error::Parameter(format!("weights must be positive, got {bad}")));
    }
    let roots: Vec<f64> = v.iter().map(|&w| w.sqrt()).collect();
    let xt = x.scale_rows(&roots)?;
    let yt = y.iter().zip(&roots).map(|(&yi, &r)| yi * r).collect();
    Ok((xt, yt))
}

/// Broadcasts reduced coefficients back to original feature space; the
/// bias passes through unchanged.
pub fn lift_solution(w_reduced: &[f64], bias: f64, q: &Coloring) -> Result<(Vec<f64>, f64)> {
    Ok((q.expand(w_reduced)?, bias))
}

/// Multiclass variant: each reduced coefficient row is broadcast to every
/// feature in its color.
pub fn lift_solution_multiclass(
    w_reduced: &[Vec<f64>],
    bias: &[f64],
    q: &Coloring,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    if w_reduced.len() != q.num_colors() {
        return Err(Error::dimension(
            "reduced coefficient rows",
            q.num_colors(),
            w_reduced.len(),
        ));
    }
    let lifted = q
        .assignment()
        .iter()
        .map(|&t| w_reduced[t].clone())
        .collect();
    Ok((lifted, bias.to_vec()))
}

/// Per-coefficient elastic-net multipliers for the reduced problem: the
/// size of each feature color. The reduced penalty
/// `sum_T |T| (lambda2 w_T^2 + lambda1 |w_T|)` equals the original penalty
/// restricted to color-constant coefficients.
pub fn elastic_net_multipliers(q: &Coloring, lambda1: f64, lambda2: f64) -> Result<Vec<usize>> {
    if lambda1 < 0.0 || lambda2 < 0.0 {
        return Err(Error::Parameter(
            "elastic-net strengths must be nonnegative".into(),
        ));
    }
    Ok(q.stats().sizes)
}

/// Groups a label vector into dense class ids, returning the sorted
/// original values alongside.
pub fn dense_class_ids(y: &[f64]) -> Result<(Vec<usize>, Vec<f64>)> {
    let mut distinct: Vec<f64> = Vec::new();
    for &t in y {
        if !t.is_finite() {
            return Err(Error::Parameter(format!("non-finite label {t}")));
        }
        if !distinct.iter().any(|&d| d.to_bits() == t.to_bits()) {
            distinct.push(t);
        }
    }
    distinct.sort_by(|a, b| a.partial_cmp(b).expect("finite labels"));
    let lookup: HashMap<u64, usize> = distinct
        .iter()
        .enumerate()
        .map(|(i, &d)| (d.to_bits(), i))
        .collect();
    let ids = y.iter().map(|&t| lookup[&t.to_bits()]).collect();
    Ok((ids, distinct))
}
