//! Exact training-objective evaluation and per-sample predictions for any
//! supported family. Verification evaluates both the original fit and the
//! lifted reduced fit through this single code path.

use super::logistic::{log1p_exp, sigmoid, BinaryLogistic, MulticlassLogistic};
use super::prox::SmoothObjective;
use crate::error::{Error, Result};
use crate::model::{ModelFamily, ModelSpec};
use crate::sparse::SparseMatrix;

/// Data underlying the objective: a feature matrix for primal families,
/// a logit/quad projection pair for kernel families.
#[derive(Debug, Clone, Copy)]
pub enum DataRef<'a> {
    Features(&'a SparseMatrix),
    Kernel {
        logit: &'a SparseMatrix,
        quad: &'a SparseMatrix,
    },
}

/// Parameters under evaluation.
#[derive(Debug, Clone)]
pub enum FitParams<'a> {
    Linear { weights: &'a [f64], bias: f64 },
    Multiclass { weights: &'a [Vec<f64>], bias: &'a [f64] },
    Kernel { alpha: &'a [f64], bias: f64 },
}

/// Targets for objective evaluation.
#[derive(Debug, Clone, Copy)]
pub enum TargetsRef<'a> {
    Values(&'a [f64]),
    Classes(&'a [usize]),
    Probabilities(&'a [Vec<f64>]),
}

/// Per-sample model outputs: predictions for regression, probabilities for
/// the logistic families.
#[derive(Debug, Clone, PartialEq)]
pub enum Predictions {
    Vector(Vec<f64>),
    Matrix(Vec<Vec<f64>>),
}

impl Predictions {
    /// Largest absolute elementwise difference between two prediction sets.
    pub fn max_abs_delta(&self, other: &Predictions) -> Result<f64> {
        match (self, other) {
            (Predictions::Vector(a), Predictions::Vector(b)) if a.len() == b.len() => Ok(a
                .iter()
                .zip(b)
                .map(|(&x, &y)| (x - y).abs())
                .fold(0.0, f64::max)),
            (Predictions::Matrix(a), Predictions::Matrix(b)) if a.len() == b.len() => {
                let mut worst = 0.0f64;
                for (ra, rb) in a.iter().zip(b) {
                    if ra.len() != rb.len() {
                        return Err(Error::dimension("prediction row", ra.len(), rb.len()));
                    }
                    for (&x, &y) in ra.iter().zip(rb) {
                        worst = worst.max((x - y).abs());
                    }
                }
                Ok(worst)
            }
            _ => Err(Error::Parameter(
                "prediction sets have incompatible shapes".into(),
            )),
        }
    }
}

fn weights_or_ones(v: Option<&[f64]>, n: usize) -> Vec<f64> {
    v.map(|v| v.to_vec()).unwrap_or_else(|| vec![1.0; n])
}

fn penalty(
    spec: &ModelSpec,
    weights: &[f64],
    bias_sq: f64,
    multipliers: Option<&[f64]>,
) -> f64 {
    if spec.lambda1 == 0.0 && spec.lambda2 == 0.0 {
        return 0.0;
    }
    let term: f64 = weights
        .iter()
        .enumerate()
        .map(|(j, &wj)| {
            let m = multipliers.map_or(1.0, |m| m[j]);
            m * (spec.lambda2 * wj * wj + spec.lambda1 * wj.abs())
        })
        .sum();
    term + if spec.penalize_bias { spec.lambda2 * bias_sq } else { 0.0 }
}

/// Evaluates the exact training objective and per-sample predictions.
/// `multipliers` scales the penalty per coefficient for reduced instances;
/// `None` means the original problem (all ones).
pub fn objective_and_predict(
    spec: &ModelSpec,
    params: &FitParams<'_>,
    data: &DataRef<'_>,
    targets: &TargetsRef<'_>,
    v: Option<&[f64]>,
    multipliers: Option<&[f64]>,
) -> Result<(f64, Predictions)> {
    match (spec.family, params, data) {
        (
            ModelFamily::LinearRegression | ModelFamily::Ridge | ModelFamily::ElasticNet,
            FitParams::Linear { weights, bias },
            DataRef::Features(x),
        ) => {
            let y = match targets {
                TargetsRef::Values(y) => *y,
                _ => return Err(Error::Parameter("regression expects value targets".into())),
            };
            if y.len() != x.n_rows() {
                return Err(Error::dimension("targets", x.n_rows(), y.len()));
            }
            let v = weights_or_ones(v, x.n_rows());
            let preds: Vec<f64> = x.matvec(weights)?.iter().map(|&p| p + bias).collect();
            let loss: f64 = preds
                .iter()
                .zip(y)
                .zip(&v)
                .map(|((&p, &t), &vi)| vi * (p - t) * (p - t))
                .sum();
            let obj = loss + penalty(spec, weights, bias * bias, multipliers);
            Ok((obj, Predictions::Vector(preds)))
        }
        (
            ModelFamily::LogisticBinary,
            FitParams::Linear { weights, bias },
            DataRef::Features(x),
        ) => {
            let y = match targets {
                TargetsRef::Values(y) => *y,
                _ => {
                    return Err(Error::Parameter(
                        "binary logistic expects value targets in [0, 1]".into(),
                    ))
                }
            };
            let v = weights_or_ones(v, x.n_rows());
            let z: Vec<f64> = x.matvec(weights)?.iter().map(|&p| p + bias).collect();
            let loss: f64 = z
                .iter()
                .zip(y)
                .zip(&v)
                .map(|((&zi, &yi), &vi)| vi * (log1p_exp(zi) - yi * zi))
                .sum();
            let probs: Vec<f64> = z.iter().map(|&zi| sigmoid(zi)).collect();
            let obj = loss + penalty(spec, weights, bias * bias, multipliers);
            Ok((obj, Predictions::Vector(probs)))
        }
        (
            ModelFamily::LogisticMulticlass,
            FitParams::Multiclass { weights, bias },
            DataRef::Features(x),
        ) => {
            let k = spec.n_classes;
            if weights.len() != x.n_cols() {
                return Err(Error::dimension("coefficient rows", x.n_cols(), weights.len()));
            }
            let v = weights_or_ones(v, x.n_rows());
            let mut loss = 0.0;
            let mut probs = Vec::with_capacity(x.n_rows());
            for i in 0..x.n_rows() {
                let (cols, vals) = x.row(i);
                let mut z = bias.to_vec();
                for (&j, &xij) in cols.iter().zip(vals) {
                    for c in 0..k {
                        z[c] += xij * weights[j][c];
                    }
                }
                let zmax = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = z.iter().map(|&zi| (zi - zmax).exp()).collect();
                let total: f64 = exps.iter().sum();
                let lse = zmax + total.ln();
                match targets {
                    TargetsRef::Classes(ids) => {
                        loss += v[i] * (lse - z[ids[i]]);
                    }
                    TargetsRef::Probabilities(rows) => {
                        for (c, &yc) in rows[i].iter().enumerate() {
                            if yc != 0.0 {
                                loss += v[i] * yc * (lse - z[c]);
                            }
                        }
                    }
                    TargetsRef::Values(_) => {
                        return Err(Error::Parameter(
                            "multiclass expects class or probability targets".into(),
                        ))
                    }
                }
                probs.push(exps.iter().map(|&e| e / total).collect());
            }
            let flat: Vec<f64> = weights.iter().flatten().copied().collect();
            let flat_multipliers: Option<Vec<f64>> =
                multipliers.map(|m| m.iter().flat_map(|&mj| std::iter::repeat(mj).take(k)).collect());
            let bias_sq: f64 = bias.iter().map(|&b| b * b).sum();
            let obj = loss + penalty(spec, &flat, bias_sq, flat_multipliers.as_deref());
            Ok((obj, Predictions::Matrix(probs)))
        }
        (
            ModelFamily::KernelRidge,
            FitParams::Kernel { alpha, bias },
            DataRef::Kernel { logit, quad },
        ) => {
            let y = match targets {
                TargetsRef::Values(y) => *y,
                _ => return Err(Error::Parameter("kernel ridge expects value targets".into())),
            };
            let v = weights_or_ones(v, logit.n_rows());
            let preds: Vec<f64> = logit.matvec(alpha)?.iter().map(|&p| p + bias).collect();
            let loss: f64 = preds
                .iter()
                .zip(y)
                .zip(&v)
                .map(|((&p, &t), &vi)| vi * (p - t) * (p - t))
                .sum();
            let ka = quad.matvec(alpha)?;
            let reg: f64 = alpha.iter().zip(&ka).map(|(&a, &b)| a * b).sum();
            Ok((loss + spec.lambda2 * reg, Predictions::Vector(preds)))
        }
        (
            ModelFamily::KernelLogistic,
            FitParams::Kernel { alpha, bias },
            DataRef::Kernel { logit, quad },
        ) => {
            let y = match targets {
                TargetsRef::Values(y) => *y,
                _ => {
                    return Err(Error::Parameter(
                        "kernel logistic expects value targets in [0, 1]".into(),
                    ))
                }
            };
            let v = weights_or_ones(v, logit.n_rows());
            let z: Vec<f64> = logit.matvec(alpha)?.iter().map(|&p| p + bias).collect();
            let loss: f64 = z
                .iter()
                .zip(y)
                .zip(&v)
                .map(|((&zi, &yi), &vi)| vi * (log1p_exp(zi) - yi * zi))
                .sum();
            let ka = quad.matvec(alpha)?;
            let reg: f64 = alpha.iter().zip(&ka).map(|(&a, &b)| a * b).sum();
            let probs: Vec<f64> = z.iter().map(|&zi| sigmoid(zi)).collect();
            Ok((loss + spec.lambda2 * reg, Predictions::Vector(probs)))
        }
        _ => Err(Error::Parameter(
            "parameter/data kinds do not match the model family".into(),
        )),
    }
}

/// Smooth-part objective value and analytic gradient at the given
/// parameters, exactly as the iterative solvers compute them. Parameter
/// layout is flattened: `[w.., b]` for binary/kernel families,
/// `[W row-major.., b..]` for multiclass. L1 terms and their subgradients
/// are excluded; the ridge term is included.
pub fn objective_gradient(
    spec: &ModelSpec,
    params: &[f64],
    data: &DataRef<'_>,
    targets: &TargetsRef<'_>,
    v: Option<&[f64]>,
    multipliers: Option<&[f64]>,
) -> Result<(f64, Vec<f64>)> {
    let evaluate = |obj: &dyn SmoothObjective, params: &[f64]| -> Result<(f64, Vec<f64>)> {
        if params.len() != obj.dim() {
            return Err(Error::dimension("parameter vector", obj.dim(), params.len()));
        }
        let mut grad = vec![0.0; obj.dim()];
        let value = obj.value_and_grad(params, &mut grad);
        Ok((value, grad))
    };
    match (spec.family, data) {
        (ModelFamily::LogisticBinary, DataRef::Features(x)) => {
            let y = match targets {
                TargetsRef::Values(y) => *y,
                _ => return Err(Error::Parameter("binary logistic expects value targets".into())),
            };
            let ones_v = weights_or_ones(v, x.n_rows());
            let ones_m = vec![1.0; x.n_cols()];
            let obj = BinaryLogistic {
                x,
                y,
                v: &ones_v,
                lambda2: spec.lambda2,
                multipliers: multipliers.unwrap_or(&ones_m),
            };
            evaluate(&obj, params)
        }
        (ModelFamily::LogisticMulticlass, DataRef::Features(x)) => {
            let rows: Vec<Vec<f64>> = match targets {
                TargetsRef::Classes(ids) => ids
                    .iter()
                    .map(|&c| {
                        let mut row = vec![0.0; spec.n_classes];
                        row[c] = 1.0;
                        row
                    })
                    .collect(),
                TargetsRef::Probabilities(rows) => rows.to_vec(),
                TargetsRef::Values(_) => {
                    return Err(Error::Parameter(
                        "multiclass expects class or probability targets".into(),
                    ))
                }
            };
            let ones_v = weights_or_ones(v, x.n_rows());
            let ones_m = vec![1.0; x.n_cols()];
            let obj = MulticlassLogistic {
                x,
                y: &rows,
                v: &ones_v,
                lambda2: spec.lambda2,
                multipliers: multipliers.unwrap_or(&ones_m),
                n_classes: spec.n_classes,
            };
            evaluate(&obj, params)
        }
        (ModelFamily::KernelLogistic, DataRef::Kernel { logit, quad }) => {
            let y = match targets {
                TargetsRef::Values(y) => *y,
                _ => return Err(Error::Parameter("kernel logistic expects value targets".into())),
            };
            let ones_v = weights_or_ones(v, logit.n_rows());
            let obj = super::kernel::KernelLogistic {
                k_logit: logit,
                k_quad: quad,
                y,
                v: &ones_v,
                lambda: spec.lambda2,
            };
            evaluate(&obj, params)
        }
        (
            ModelFamily::LinearRegression | ModelFamily::Ridge | ModelFamily::ElasticNet,
            DataRef::Features(x),
        ) => {
            let y = match targets {
                TargetsRef::Values(y) => *y,
                _ => return Err(Error::Parameter("regression expects value targets".into())),
            };
            let ones_v = weights_or_ones(v, x.n_rows());
            let ones_m = vec![1.0; x.n_cols()];
            let obj = super::least_squares::SquaredLoss {
                x,
                y,
                v: &ones_v,
                lambda2: spec.lambda2,
                multipliers: multipliers.unwrap_or(&ones_m),
                penalize_bias: spec.penalize_bias,
            };
            evaluate(&obj, params)
        }
        _ => Err(Error::Parameter(
            "gradient evaluation is defined for the iterative families".into(),
        )),
    }
}
