//! Kernel ridge (direct linear system) and kernel logistic (proximal
//! gradient) solvers over the quad/logit matrix pair. For an unreduced
//! problem both matrices are the kernel matrix itself.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use super::dense::solve_spd;
use super::logistic::{log1p_exp, sigmoid};
use super::prox::{self, ProxOptions, SmoothObjective};
use super::{Bias, Coefficients, FitResult, SolverConfig};
use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

fn validate_pair(
    k_logit: &SparseMatrix,
    k_quad: &SparseMatrix,
    y: &[f64],
    v: &[f64],
) -> Result<()> {
    if k_quad.n_rows() != k_quad.n_cols() {
        return Err(Error::Structure("quadratic projection must be square".into()));
    }
    if k_logit.n_cols() != k_quad.n_rows() {
        return Err(Error::dimension(
            "logit projection columns",
            k_quad.n_rows(),
            k_logit.n_cols(),
        ));
    }
    if y.len() != k_logit.n_rows() {
        return Err(Error::dimension("targets", k_logit.n_rows(), y.len()));
    }
    if v.len() != k_logit.n_rows() {
        return Err(Error::dimension("weights", k_logit.n_rows(), v.len()));
    }
    if let Some(&bad) = v.iter().find(|&&w| !(w > 0.0) || !w.is_finite()) {
        return Err(Error::Parameter(format!("weights must be positive, got {bad}")));
    }
    Ok(())
}

/// Minimizes
/// `(K_l a + b 1 - y)^T W (K_l a + b 1 - y) + lambda a^T K_q a`
/// by solving its stationarity system in `(a, b)`. Singular systems are
/// solved in the least-norm sense.
pub fn solve_kernel_ridge(
    k_logit: &SparseMatrix,
    k_quad: &SparseMatrix,
    y: &[f64],
    v: &[f64],
    lambda: f64,
) -> Result<FitResult> {
    if lambda <= 0.0 || !lambda.is_finite() {
        return Err(Error::Parameter(format!("lambda must be > 0, got {lambda}")));
    }
    validate_pair(k_logit, k_quad, y, v)?;
    let start = Instant::now();
    let n = k_logit.n_rows();
    let m = k_quad.n_rows();

    let kl = {
        let dense = k_logit.to_dense();
        DMatrix::from_fn(n, m, |i, j| dense[i][j])
    };
    let kq = {
        let dense = k_quad.to_dense();
        DMatrix::from_fn(m, m, |i, j| dense[i][j])
    };
    let w = DVector::from_column_slice(v);
    let yv = DVector::from_column_slice(y);

    // Stationarity (gradient over 2): [Kl^T W Kl + lambda Kq, Kl^T W 1;
    //                                  1^T W Kl,              1^T W 1]
    let wkl = DMatrix::from_fn(n, m, |i, j| w[i] * kl[(i, j)]);
    let mut system = DMatrix::zeros(m + 1, m + 1);
    system.view_mut((0, 0), (m, m)).copy_from(&(kl.transpose() * &wkl + lambda * &kq));
    let klw1 = wkl.transpose() * DVector::from_element(n, 1.0);
    for a in 0..m {
        system[(a, m)] = klw1[a];
        system[(m, a)] = klw1[a];
    }
    system[(m, m)] = v.iter().sum();
    let mut rhs = DVector::zeros(m + 1);
    let wy = DVector::from_fn(n, |i, _| w[i] * yv[i]);
    rhs.rows_mut(0, m).copy_from(&(kl.transpose() * &wy));
    rhs[m] = wy.sum();

    let (solution, fallback) = solve_spd(system, rhs);
    let alpha: Vec<f64> = solution.rows(0, m).iter().copied().collect();
    let bias = solution[m];

    let preds = k_logit.matvec(&alpha)?;
    let objective: f64 = preds
        .iter()
        .zip(y)
        .zip(v)
        .map(|((&p, &t), &vi)| vi * (p + bias - t) * (p + bias - t))
        .sum::<f64>()
        + lambda * {
            let ka = k_quad.matvec(&alpha)?;
            alpha.iter().zip(&ka).map(|(&a, &b)| a * b).sum::<f64>()
        };

    // Gradient at the solution, for the report.
    let residual: Vec<f64> = preds
        .iter()
        .zip(y)
        .zip(v)
        .map(|((&p, &t), &vi)| 2.0 * vi * (p + bias - t))
        .collect();
    let mut grad = k_logit.t_matvec(&residual)?;
    let ka = k_quad.matvec(&alpha)?;
    for (g, &kai) in grad.iter_mut().zip(&ka) {
        *g += 2.0 * lambda * kai;
    }
    let grad_b: f64 = residual.iter().sum();
    let grad_inf = grad
        .iter()
        .chain(std::iter::once(&grad_b))
        .fold(0.0f64, |acc, &g| acc.max(g.abs()));

    Ok(FitResult {
        coefficients: Coefficients::Vector(alpha),
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

pub(crate) struct KernelLogistic<'a> {
    pub k_logit: &'a SparseMatrix,
    pub k_quad: &'a SparseMatrix,
    pub y: &'a [f64],
    pub v: &'a [f64],
    pub lambda: f64,
}

impl SmoothObjective for KernelLogistic<'_> {
    fn dim(&self) -> usize {
        self.k_quad.n_rows() + 1
    }

    fn value(&self, params: &[f64]) -> f64 {
        let m = self.k_quad.n_rows();
        let (alpha, b) = (&params[..m], params[m]);
        let z = self.k_logit.matvec(alpha).expect("dims validated");
        let loss: f64 = z
            .iter()
            .zip(self.y)
            .zip(self.v)
            .map(|((&zi, &yi), &vi)| vi * (log1p_exp(zi + b) - yi * (zi + b)))
            .sum();
        let ka = self.k_quad.matvec(alpha).expect("dims validated");
        let reg: f64 = alpha.iter().zip(&ka).map(|(&a, &k)| a * k).sum();
        loss + self.lambda * reg
    }

    fn value_and_grad(&self, params: &[f64], grad: &mut [f64]) -> f64 {
        let m = self.k_quad.n_rows();
        let (alpha, b) = (&params[..m], params[m]);
        let z = self.k_logit.matvec(alpha).expect("dims validated");
        let mut loss = 0.0;
        let residual: Vec<f64> = z
            .iter()
            .zip(self.y)
            .zip(self.v)
            .map(|((&zi, &yi), &vi)| {
                loss += vi * (log1p_exp(zi + b) - yi * (zi + b));
                vi * (sigmoid(zi + b) - yi)
            })
            .collect();
        let gl = self.k_logit.t_matvec(&residual).expect("dims validated");
        let ka = self.k_quad.matvec(alpha).expect("dims validated");
        let mut reg = 0.0;
        for j in 0..m {
            reg += alpha[j] * ka[j];
            grad[j] = gl[j] + 2.0 * self.lambda * ka[j];
        }
        grad[m] = residual.iter().sum();
        loss + self.lambda * reg
    }
}

/// Kernel binary logistic regression over the quad/logit pair:
/// `-sum_S v_S (y_S log yhat_S + (1-y_S) log(1-yhat_S)) + lambda a^T K_q a`
/// with `yhat = sigmoid(K_l a + b)`.
pub fn solve_kernel_logistic(
    k_logit: &SparseMatrix,
    k_quad: &SparseMatrix,
    y: &[f64],
    v: &[f64],
    lambda: f64,
    config: &SolverConfig,
) -> Result<FitResult> {
    if lambda <= 0.0 || !lambda.is_finite() {
        return Err(Error::Parameter(format!("lambda must be > 0, got {lambda}")));
    }
    config.validate()?;
    validate_pair(k_logit, k_quad, y, v)?;
    if let Some(&bad) = y.iter().find(|&&t| !(0.0..=1.0).contains(&t)) {
        return Err(Error::Parameter(format!(
            "logistic targets must lie in [0, 1], got {bad}"
        )));
    }
    let start = Instant::now();
    let objective = KernelLogistic {
        k_logit,
        k_quad,
        y,
        v,
        lambda,
    };
    let outcome = prox::minimize(
        &objective,
        &ProxOptions {
            tol: config.tol,
            max_iter: config.max_iter,
            l1_weights: Vec::new(),
            record_trace: config.record_trace,
        },
    );
    let m = k_quad.n_rows();
    Ok(FitResult {
        objective_value: objective.value(&outcome.x),
        coefficients: Coefficients::Vector(outcome.x[..m].to_vec()),
        bias: Bias::Scalar(outcome.x[m]),
        iterations: outcome.iterations,
        grad_inf_norm: outcome.residual_inf,
        converged: outcome.converged,
        least_norm_fallback: false,
        wall_time_secs: start.elapsed().as_secs_f64(),
        objective_trace: outcome.trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_sample_puts_everything_in_the_bias() {
        // Scalar stationarity: b = y - k a, lambda k a = 0 => a = 0, b = y.
        let k = SparseMatrix::from_dense(&[vec![2.5]]).unwrap();
        let fit = solve_kernel_ridge(&k, &k, &[4.0], &[1.0], 0.7).unwrap();
        let alpha = fit.coefficients.as_vector().unwrap();
        assert_abs_diff_eq!(alpha[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.bias.as_scalar().unwrap(), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_targets_need_no_coefficients() {
        let x = SparseMatrix::from_dense(&[vec![1.0, 0.0], vec![0.5, 0.5], vec![0.0, 2.0]])
            .unwrap();
        let k = crate::kernel::compute_kernel(&x, crate::model::KernelKind::Linear).unwrap();
        let fit = solve_kernel_ridge(&k, &k, &[3.0; 3], &[1.0; 3], 0.5).unwrap();
        let alpha = fit.coefficients.as_vector().unwrap();
        for &a in alpha {
            assert_abs_diff_eq!(a, 0.0, epsilon = 1e-10);
        }
        assert_abs_diff_eq!(fit.bias.as_scalar().unwrap(), 3.0, epsilon = 1e-10);
    }

    #[test]
    fn rejects_nonpositive_lambda() {
        let k = SparseMatrix::identity(2);
        assert!(solve_kernel_ridge(&k, &k, &[1.0, 2.0], &[1.0, 1.0], 0.0).is_err());
    }

    #[test]
    fn zero_logits_recover_weighted_log_odds() {
        let k_logit = SparseMatrix::from_rows(2, vec![vec![]; 4]).unwrap();
        let k_quad = SparseMatrix::identity(2);
        let y = [1.0, 0.0, 1.0, 1.0];
        let v = [1.0; 4];
        let fit = solve_kernel_logistic(
            &k_logit,
            &k_quad,
            &y,
            &v,
            0.5,
            &SolverConfig::default().with_tol(1e-10),
        )
        .unwrap();
        let alpha = fit.coefficients.as_vector().unwrap();
        assert_eq!(alpha, &[0.0, 0.0]);
        let p: f64 = 0.75;
        assert_abs_diff_eq!(
            fit.bias.as_scalar().unwrap(),
            (p / (1.0 - p)).ln(),
            epsilon = 1e-7
        );
    }
}
