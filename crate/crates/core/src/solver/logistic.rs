//! Weighted logistic regression, binary and multiclass, with optional
//! per-coefficient elastic-net penalties and fractional targets.

use std::time::Instant;

use super::prox::{self, ProxOptions, SmoothObjective};
use super::{Bias, Coefficients, FitResult, SolverConfig};
use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Targets accepted by [`solve_logistic`]: binary values in `[0, 1]`
/// (possibly fractional label means), integral class ids, or one
/// probability row per sample.
#[derive(Debug, Clone, Copy)]
pub enum LogisticTargets<'a> {
    Binary(&'a [f64]),
    Classes(&'a [usize]),
    Probabilities(&'a [Vec<f64>]),
}

impl LogisticTargets<'_> {
    fn len(&self) -> usize {
        match self {
            LogisticTargets::Binary(y) => y.len(),
            LogisticTargets::Classes(y) => y.len(),
            LogisticTargets::Probabilities(y) => y.len(),
        }
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))` without overflow.
pub(crate) fn log1p_exp(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

pub(crate) struct BinaryLogistic<'a> {
    pub x: &'a SparseMatrix,
    pub y: &'a [f64],
    pub v: &'a [f64],
    pub lambda2: f64,
    pub multipliers: &'a [f64],
}

impl BinaryLogistic<'_> {
    fn logits(&self, w: &[f64], b: f64) -> Vec<f64> {
        let mut z = self.x.matvec(w).expect("dims validated");
        for zi in &mut z {
            *zi += b;
        }
        z
    }

    fn ridge(&self, w: &[f64]) -> f64 {
        self.lambda2
            * w.iter()
                .zip(self.multipliers)
                .map(|(&wj, &m)| m * wj * wj)
                .sum::<f64>()
    }
}

impl SmoothObjective for BinaryLogistic<'_> {
    fn dim(&self) -> usize {
        self.x.n_cols() + 1
    }

    fn value(&self, params: &[f64]) -> f64 {
        let d = self.x.n_cols();
        let (w, b) = (&params[..d], params[d]);
        let z = self.logits(w, b);
        let loss: f64 = z
            .iter()
            .zip(self.y)
            .zip(self.v)
            .map(|((&zi, &yi), &vi)| vi * (log1p_exp(zi) - yi * zi))
            .sum();
        loss + self.ridge(w)
    }

    fn value_and_grad(&self, params: &[f64], grad: &mut [f64]) -> f64 {
        let d = self.x.n_cols();
        let (w, b) = (&params[..d], params[d]);
        let z = self.logits(w, b);
        let mut loss = 0.0;
        let residual: Vec<f64> = z
            .iter()
            .zip(self.y)
            .zip(self.v)
            .map(|((&zi, &yi), &vi)| {
                loss += vi * (log1p_exp(zi) - yi * zi);
                vi * (sigmoid(zi) - yi)
            })
            .collect();
        let gw = self.x.t_matvec(&residual).expect("dims validated");
        for j in 0..d {
            grad[j] = gw[j] + 2.0 * self.lambda2 * self.multipliers[j] * w[j];
        }
        grad[d] = residual.iter().sum();
        loss + self.ridge(w)
    }
}

pub(crate) struct MulticlassLogistic<'a> {
    pub x: &'a SparseMatrix,
    /// Per-sample class probability rows (one-hot for class-id targets).
    pub y: &'a [Vec<f64>],
    pub v: &'a [f64],
    pub lambda2: f64,
    pub multipliers: &'a [f64],
    pub n_classes: usize,
}

impl MulticlassLogistic<'_> {
    /// Parameter layout: row-major `D x K` coefficients, then `K` biases.
    fn coef<'b>(&self, params: &'b [f64]) -> (&'b [f64], &'b [f64]) {
        let dk = self.x.n_cols() * self.n_classes;
        (&params[..dk], &params[dk..])
    }

    fn logits(&self, w: &[f64], b: &[f64]) -> Vec<Vec<f64>> {
        let k = self.n_classes;
        (0..self.x.n_rows())
            .map(|i| {
                let (cols, vals) = self.x.row(i);
                let mut z = b.to_vec();
                for (&j, &xij) in cols.iter().zip(vals) {
                    let row = &w[j * k..(j + 1) * k];
                    for c in 0..k {
                        z[c] += xij * row[c];
                    }
                }
                z
            })
            .collect()
    }

    fn ridge(&self, w: &[f64]) -> f64 {
        let k = self.n_classes;
        let mut total = 0.0;
        for (j, &m) in self.multipliers.iter().enumerate() {
            for c in 0..k {
                let wjc = w[j * k + c];
                total += m * wjc * wjc;
            }
        }
        self.lambda2 * total
    }
}

/// Stable per-row softmax cross-entropy pieces: log-sum-exp and softmax.
fn softmax_row(z: &[f64]) -> (Vec<f64>, f64) {
    let zmax = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|&zi| (zi - zmax).exp()).collect();
    let total: f64 = exps.iter().sum();
    let lse = zmax + total.ln();
    (exps.iter().map(|&e| e / total).collect(), lse)
}

impl SmoothObjective for MulticlassLogistic<'_> {
    fn dim(&self) -> usize {
        (self.x.n_cols() + 1) * self.n_classes
    }

    fn value(&self, params: &[f64]) -> f64 {
        let (w, b) = self.coef(params);
        let logits = self.logits(w, b);
        let mut loss = 0.0;
        for ((z, yrow), &vi) in logits.iter().zip(self.y).zip(self.v) {
            let (_, lse) = softmax_row(z);
            for (c, &yc) in yrow.iter().enumerate() {
                if yc != 0.0 {
                    loss += vi * yc * (lse - z[c]);
                }
            }
        }
        loss + self.ridge(w)
    }

    fn value_and_grad(&self, params: &[f64], grad: &mut [f64]) -> f64 {
        let (w, b) = self.coef(params);
        let k = self.n_classes;
        let d = self.x.n_cols();
        let logits = self.logits(w, b);
        grad.fill(0.0);
        let mut loss = 0.0;
        for (i, ((z, yrow), &vi)) in logits.iter().zip(self.y).zip(self.v).enumerate() {
            let (probs, lse) = softmax_row(z);
            let (cols, vals) = self.x.row(i);
            for c in 0..k {
                let yc = yrow[c];
                if yc != 0.0 {
                    loss += vi * yc * (lse - z[c]);
                }
                let r = vi * (probs[c] - yc);
                for (&j, &xij) in cols.iter().zip(vals) {
                    grad[j * k + c] += xij * r;
                }
                grad[d * k + c] += r;
            }
        }
        for (j, &m) in self.multipliers.iter().enumerate() {
            for c in 0..k {
                grad[j * k + c] += 2.0 * self.lambda2 * m * w[j * k + c];
            }
        }
        loss + self.ridge(w)
    }
}

/// Minimizes weighted cross-entropy plus
/// `sum_j m_j (lambda2 ||w_j||^2 + lambda1 ||w_j||_1)` by accelerated
/// proximal gradient descent. Binary targets use a single coefficient
/// vector; class-id and probability targets use a `D x K` matrix even for
/// two classes. Non-convergence is flagged, never silently dropped.
#[allow(clippy::too_many_arguments)]
pub fn solve_logistic(
    x: &SparseMatrix,
    targets: LogisticTargets<'_>,
    v: Option<&[f64]>,
    lambda1: f64,
    lambda2: f64,
    multipliers: &[f64],
    n_classes: usize,
    config: &SolverConfig,
) -> Result<FitResult> {
    if lambda1 < 0.0 || lambda2 < 0.0 {
        return Err(Error::Parameter("penalty strengths must be nonnegative".into()));
    }
    config.validate()?;
    if targets.len() != x.n_rows() {
        return Err(Error::dimension("targets", x.n_rows(), targets.len()));
    }
    if multipliers.len() != x.n_cols() {
        return Err(Error::dimension("penalty multipliers", x.n_cols(), multipliers.len()));
    }
    let ones;
    let v = match v {
        Some(v) => {
            if v.len() != x.n_rows() {
                return Err(Error::dimension("weights", x.n_rows(), v.len()));
            }
            v
        }
        None => {
            ones = vec![1.0; x.n_rows()];
            &ones
        }
    };
    if let Some(&bad) = v.iter().find(|&&w| !(w > 0.0) || !w.is_finite()) {
        return Err(Error::Parameter(format!("weights must be positive, got {bad}")));
    }

    let start = Instant::now();
    match targets {
        LogisticTargets::Binary(y) => {
            if let Some(&bad) = y.iter().find(|&&t| !(0.0..=1.0).contains(&t)) {
                return Err(Error::Parameter(format!(
                    "binary targets must lie in [0, 1], got {bad}"
                )));
            }
            let objective = BinaryLogistic {
                x,
                y,
                v,
                lambda2,
                multipliers,
            };
            let mut l1_weights = vec![0.0; x.n_cols() + 1];
            if lambda1 > 0.0 {
                for (slot, &m) in l1_weights.iter_mut().zip(multipliers) {
                    *slot = lambda1 * m;
                }
            } else {
                l1_weights.clear();
            }
            let outcome = prox::minimize(
                &objective,
                &ProxOptions {
                    tol: config.tol,
                    max_iter: config.max_iter,
                    l1_weights,
                    record_trace: config.record_trace,
                },
            );
            let d = x.n_cols();
            let l1_term: f64 = outcome.x[..d]
                .iter()
                .zip(multipliers)
                .map(|(&wj, &m)| lambda1 * m * wj.abs())
                .sum();
            Ok(FitResult {
                objective_value: objective.value(&outcome.x) + l1_term,
                coefficients: Coefficients::Vector(outcome.x[..d].to_vec()),
                bias: Bias::Scalar(outcome.x[d]),
                iterations: outcome.iterations,
                grad_inf_norm: outcome.residual_inf,
                converged: outcome.converged,
                least_norm_fallback: false,
                wall_time_secs: start.elapsed().as_secs_f64(),
                objective_trace: outcome.trace,
            })
        }
        LogisticTargets::Classes(_) | LogisticTargets::Probabilities(_) => {
            let rows: Vec<Vec<f64>> = match targets {
                LogisticTargets::Classes(ids) => {
                    if let Some(&bad) = ids.iter().find(|&&c| c >= n_classes) {
                        return Err(Error::Parameter(format!(
                            "class id {bad} out of range for {n_classes} classes"
                        )));
                    }
                    ids.iter()
                        .map(|&c| {
                            let mut row = vec![0.0; n_classes];
                            row[c] = 1.0;
                            row
                        })
                        .collect()
                }
                LogisticTargets::Probabilities(rows) => {
                    for row in rows {
                        if row.len() != n_classes {
                            return Err(Error::dimension("probability row", n_classes, row.len()));
                        }
                        let total: f64 = row.iter().sum();
                        if row.iter().any(|&p| p < 0.0) || (total - 1.0).abs() > 1e-9 {
                            return Err(Error::Parameter(format!(
                                "probability row must be nonnegative and sum to 1, got {row:?}"
                            )));
                        }
                    }
                    rows.to_vec()
                }
                LogisticTargets::Binary(_) => unreachable!(),
            };
            let objective = MulticlassLogistic {
                x,
                y: &rows,
                v,
                lambda2,
                multipliers,
                n_classes,
            };
            let d = x.n_cols();
            let k = n_classes;
            let mut l1_weights = vec![0.0; (d + 1) * k];
            if lambda1 > 0.0 {
                for j in 0..d {
                    for c in 0..k {
                        l1_weights[j * k + c] = lambda1 * multipliers[j];
                    }
                }
            } else {
                l1_weights.clear();
            }
            let outcome = prox::minimize(
                &objective,
                &ProxOptions {
                    tol: config.tol,
                    max_iter: config.max_iter,
                    l1_weights,
                    record_trace: config.record_trace,
                },
            );
            let l1_term: f64 = if lambda1 > 0.0 {
                (0..d)
                    .map(|j| {
                        let m = multipliers[j];
                        outcome.x[j * k..(j + 1) * k]
                            .iter()
                            .map(|&wjc| lambda1 * m * wjc.abs())
                            .sum::<f64>()
                    })
                    .sum()
            } else {
                0.0
            };
            let coef_rows: Vec<Vec<f64>> =
                (0..d).map(|j| outcome.x[j * k..(j + 1) * k].to_vec()).collect();
            Ok(FitResult {
                objective_value: objective.value(&outcome.x) + l1_term,
                coefficients: Coefficients::Matrix(coef_rows),
                bias: Bias::Vector(outcome.x[d * k..].to_vec()),
                iterations: outcome.iterations,
                grad_inf_norm: outcome.residual_inf,
                converged: outcome.converged,
                least_norm_fallback: false,
                wall_time_secs: start.elapsed().as_secs_f64(),
                objective_trace: outcome.trace,
            })
        }
    }
}
