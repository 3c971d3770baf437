//! (Weighted) least squares and ridge via the normal equations, plus the
//! proximal solver for elastic-net regression.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use super::dense::solve_spd;
use super::prox::{self, ProxOptions, SmoothObjective};
use super::{Bias, Coefficients, FitResult, SolverConfig};
use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

fn validate_inputs(
    x: &SparseMatrix,
    y: &[f64],
    v: Option<&[f64]>,
    multipliers: &[f64],
) -> Result<Vec<f64>> {
    if y.len() != x.n_rows() {
        return Err(Error::dimension("targets", x.n_rows(), y.len()));
    }
    if multipliers.len() != x.n_cols() {
        return Err(Error::dimension("penalty multipliers", x.n_cols(), multipliers.len()));
    }
    if multipliers.iter().any(|&m| !(m > 0.0) || !m.is_finite()) {
        return Err(Error::Parameter("penalty multipliers must be positive".into()));
    }
    let weights = match v {
        Some(v) => {
            if v.len() != x.n_rows() {
                return Err(Error::dimension("weights", x.n_rows(), v.len()));
            }
            if let Some(&bad) = v.iter().find(|&&w| !(w > 0.0) || !w.is_finite()) {
                return Err(Error::Parameter(format!("weights must be positive, got {bad}")));
            }
            v.to_vec()
        }
        None => vec![1.0; x.n_rows()],
    };
    for &t in y {
        if !t.is_finite() {
            return Err(Error::Parameter(format!("non-finite target {t}")));
        }
    }
    Ok(weights)
}

/// Weighted means of the columns of `x` and of `y`.
fn weighted_means(x: &SparseMatrix, y: &[f64], v: &[f64]) -> (Vec<f64>, f64) {
    let total: f64 = v.iter().sum();
    let mut col_means = x.t_matvec(v).expect("dims validated");
    for m in &mut col_means {
        *m /= total;
    }
    let y_mean = y.iter().zip(v).map(|(&yi, &vi)| yi * vi).sum::<f64>() / total;
    (col_means, y_mean)
}

/// Solves `min_w,b sum_i v_i (x_i.w + b - y_i)^2
///               + lambda2 sum_j m_j w_j^2`
/// through the normal equations. With `penalize_bias` the bias joins the
/// coefficient vector via an appended ones column (multiplier 1);
/// otherwise it is eliminated by weighted centering, which solves the
/// unpenalized-bias stationarity exactly. Singular systems fall back to
/// the least-norm solution.
pub fn solve_least_squares(
    x: &SparseMatrix,
    y: &[f64],
    v: Option<&[f64]>,
    lambda2: f64,
    multipliers: &[f64],
    penalize_bias: bool,
) -> Result<FitResult> {
    if lambda2 < 0.0 || !lambda2.is_finite() {
        return Err(Error::Parameter(format!("lambda2 must be >= 0, got {lambda2}")));
    }
    let start = Instant::now();
    let weights = validate_inputs(x, y, v, multipliers)?;
    let d = x.n_cols();

    let (coefficients, bias, fallback) = if penalize_bias {
        let xa = x.append_ones_column();
        let mut m: Vec<f64> = multipliers.to_vec();
        m.push(1.0);
        let (w_all, fallback) = normal_equations(&xa, y, &weights, lambda2, &m);
        let bias = w_all[d];
        (w_all[..d].to_vec(), bias, fallback)
    } else {
        let (col_means, y_mean) = weighted_means(x, y, &weights);
        let yc: Vec<f64> = y.iter().map(|&yi| yi - y_mean).collect();
        let (w, fallback) = normal_equations_centered(x, &col_means, &yc, &weights, lambda2, multipliers);
        let bias = y_mean - col_means.iter().zip(&w).map(|(&m, &wj)| m * wj).sum::<f64>();
        (w, bias, fallback)
    };

    // Residual gradient for the report.
    let preds: Vec<f64> = x
        .matvec(&coefficients)?
        .iter()
        .map(|&p| p + bias)
        .collect();
    let objective: f64 = preds
        .iter()
        .zip(y)
        .zip(&weights)
        .map(|((&p, &t), &w)| w * (p - t) * (p - t))
        .sum::<f64>()
        + lambda2
            * coefficients
                .iter()
                .zip(multipliers)
                .map(|(&w, &m)| m * w * w)
                .sum::<f64>()
        + if penalize_bias { lambda2 * bias * bias } else { 0.0 };
    let residual: Vec<f64> = preds
        .iter()
        .zip(y)
        .zip(&weights)
        .map(|((&p, &t), &w)| 2.0 * w * (p - t))
        .collect();
    let mut grad = x.t_matvec(&residual)?;
    for (g, (&w, &m)) in grad.iter_mut().zip(coefficients.iter().zip(multipliers)) {
        *g += 2.0 * lambda2 * m * w;
    }
    let bias_grad: f64 =
        residual.iter().sum::<f64>() + if penalize_bias { 2.0 * lambda2 * bias } else { 0.0 };
    let grad_inf = grad
        .iter()
        .chain(std::iter::once(&bias_grad))
        .fold(0.0f64, |acc, &g| acc.max(g.abs()));

    Ok(FitResult {
        coefficients: Coefficients::Vector(coefficients),
        bias: Bias::Scalar(bias),
        objective_value: objective,
        iterations: 0,
        grad_inf_norm: grad_inf,
        converged: true,
        least_norm_fallback: fallback,
        wall_time_secs: start.elapsed().as_secs_f64(),
        objective_trace: None,
    })
}

/// Solves the bare normal equations
/// `(X^T W X + lambda2 diag(m)) w = X^T W y` with no intercept term.
/// This is the closed form over an already-augmented matrix (a ones
/// column carrying the bias as an ordinary coefficient).
pub fn solve_least_squares_no_intercept(
    x: &SparseMatrix,
    y: &[f64],
    v: Option<&[f64]>,
    lambda2: f64,
    multipliers: &[f64],
) -> Result<FitResult> {
    if lambda2 < 0.0 || !lambda2.is_finite() {
        return Err(Error::Parameter(format!("lambda2 must be >= 0, got {lambda2}")));
    }
    let start = Instant::now();
    let weights = validate_inputs(x, y, v, multipliers)?;
    let (coefficients, fallback) = normal_equations(x, y, &weights, lambda2, multipliers);

    let preds = x.matvec(&coefficients)?;
    let objective: f64 = preds
        .iter()
        .zip(y)
        .zip(&weights)
        .map(|((&p, &t), &w)| w * (p - t) * (p - t))
        .sum::<f64>()
        + lambda2
            * coefficients
                .iter()
                .zip(multipliers)
                .map(|(&w, &m)| m * w * w)
                .sum::<f64>();
    let residual: Vec<f64> = preds
        .iter()
        .zip(y)
        .zip(&weights)
        .map(|((&p, &t), &w)| 2.0 * w * (p - t))
        .collect();
    let mut grad = x.t_matvec(&residual)?;
    for (g, (&w, &m)) in grad.iter_mut().zip(coefficients.iter().zip(multipliers)) {
        *g += 2.0 * lambda2 * m * w;
    }
    let grad_inf = grad.iter().fold(0.0f64, |acc, &g| acc.max(g.abs()));

    Ok(FitResult {
        coefficients: Coefficients::Vector(coefficients),
        bias: Bias::Scalar(0.0),
        objective_value: objective,
        iterations: 0,
        grad_inf_norm: grad_inf,
        converged: true,
        least_norm_fallback: fallback,
        wall_time_secs: start.elapsed().as_secs_f64(),
        objective_trace: None,
    })
}

/// `(X^T W X + lambda2 diag(m)) w = X^T W y` on the raw matrix.
fn normal_equations(
    x: &SparseMatrix,
    y: &[f64],
    v: &[f64],
    lambda2: f64,
    multipliers: &[f64],
) -> (Vec<f64>, bool) {
    let d = x.n_cols();
    let dense = x.to_dense();
    let mut gram = DMatrix::zeros(d, d);
    let mut rhs = DVector::zeros(d);
    for (row, (&yi, &vi)) in dense.iter().zip(y.iter().zip(v)) {
        for a in 0..d {
            let va = vi * row[a];
            rhs[a] += va * yi;
            for b in a..d {
                gram[(a, b)] += va * row[b];
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
        gram[(a, a)] += lambda2 * multipliers[a];
    }
    let (w, fallback) = solve_spd(gram, rhs);
    (w.iter().copied().collect(), fallback)
}

/// Normal equations on column-centered data without materializing the
/// centered matrix.
fn normal_equations_centered(
    x: &SparseMatrix,
    col_means: &[f64],
    yc: &[f64],
    v: &[f64],
    lambda2: f64,
    multipliers: &[f64],
) -> (Vec<f64>, bool) {
    let d = x.n_cols();
    let dense = x.to_dense();
    let mut gram = DMatrix::zeros(d, d);
    let mut rhs = DVector::zeros(d);
    for (row, (&yci, &vi)) in dense.iter().zip(yc.iter().zip(v)) {
        for a in 0..d {
            let ca = row[a] - col_means[a];
            rhs[a] += vi * ca * yci;
            for b in a..d {
                gram[(a, b)] += vi * ca * (row[b] - col_means[b]);
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
        gram[(a, a)] += lambda2 * multipliers[a];
    }
    let (w, fallback) = solve_spd(gram, rhs);
    (w.iter().copied().collect(), fallback)
}

pub(crate) struct SquaredLoss<'a> {
    pub(crate) x: &'a SparseMatrix,
    pub(crate) y: &'a [f64],
    pub(crate) v: &'a [f64],
    pub(crate) lambda2: f64,
    pub(crate) multipliers: &'a [f64],
    pub(crate) penalize_bias: bool,
}

impl SquaredLoss<'_> {
    fn split<'b>(&self, params: &'b [f64]) -> (&'b [f64], f64) {
        (&params[..self.x.n_cols()], params[self.x.n_cols()])
    }
}

impl SmoothObjective for SquaredLoss<'_> {
    fn dim(&self) -> usize {
        self.x.n_cols() + 1
    }

    fn value(&self, params: &[f64]) -> f64 {
        let (w, b) = self.split(params);
        let preds = self.x.matvec(w).expect("dims validated");
        let loss: f64 = preds
            .iter()
            .zip(self.y)
            .zip(self.v)
            .map(|((&p, &t), &vi)| vi * (p + b - t) * (p + b - t))
            .sum();
        let ridge: f64 = w
            .iter()
            .zip(self.multipliers)
            .map(|(&wj, &m)| m * wj * wj)
            .sum();
        loss + self.lambda2 * (ridge + if self.penalize_bias { b * b } else { 0.0 })
    }

    fn value_and_grad(&self, params: &[f64], grad: &mut [f64]) -> f64 {
        let (w, b) = self.split(params);
        let preds = self.x.matvec(w).expect("dims validated");
        let mut loss = 0.0;
        let residual: Vec<f64> = preds
            .iter()
            .zip(self.y)
            .zip(self.v)
            .map(|((&p, &t), &vi)| {
                let r = p + b - t;
                loss += vi * r * r;
                2.0 * vi * r
            })
            .collect();
        let gw = self.x.t_matvec(&residual).expect("dims validated");
        let d = self.x.n_cols();
        let mut ridge = 0.0;
        for j in 0..d {
            ridge += self.multipliers[j] * w[j] * w[j];
            grad[j] = gw[j] + 2.0 * self.lambda2 * self.multipliers[j] * w[j];
        }
        grad[d] = residual.iter().sum();
        if self.penalize_bias {
            ridge += b * b;
            grad[d] += 2.0 * self.lambda2 * b;
        }
        loss + self.lambda2 * ridge
    }
}

/// Elastic-net regression
/// `min sum_i v_i (x_i.w + b - y_i)^2 + sum_j m_j (lambda2 w_j^2 + lambda1 |w_j|)`
/// via proximal gradient descent. The bias never carries an L1 penalty.
pub fn solve_elastic_net(
    x: &SparseMatrix,
    y: &[f64],
    v: Option<&[f64]>,
    lambda1: f64,
    lambda2: f64,
    multipliers: &[f64],
    penalize_bias: bool,
    config: &SolverConfig,
) -> Result<FitResult> {
    if lambda1 < 0.0 || lambda2 < 0.0 {
        return Err(Error::Parameter("penalty strengths must be nonnegative".into()));
    }
    config.validate()?;
    let start = Instant::now();
    let weights = validate_inputs(x, y, v, multipliers)?;
    let objective = SquaredLoss {
        x,
        y,
        v: &weights,
        lambda2,
        multipliers,
        penalize_bias,
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
    let l1_term: f64 = if lambda1 > 0.0 {
        outcome.x[..d]
            .iter()
            .zip(multipliers)
            .map(|(&wj, &m)| lambda1 * m * wj.abs())
            .sum()
    } else {
        0.0
    };
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
