//! Reference solvers used to demonstrate and verify equivalence: direct
//! (weighted) least squares and kernel ridge systems, and proximal-
//! gradient solvers for the logistic and elastic-net families.
//!
//! All iterative solvers start from zero parameters so verification runs
//! are reproducible, and report the prox-gradient residual inf-norm
//! (gradient inf-norm for smooth problems) at exit.

mod dense;
mod kernel;
mod least_squares;
mod logistic;
mod objective;
mod prox;

use serde::Serialize;

use crate::error::{Error, Result};

pub use kernel::{solve_kernel_logistic, solve_kernel_ridge};
pub use least_squares::{
    solve_elastic_net, solve_least_squares, solve_least_squares_no_intercept,
};
pub use logistic::{solve_logistic, LogisticTargets};
pub use objective::{
    objective_and_predict, objective_gradient, DataRef, FitParams, Predictions, TargetsRef,
};

/// Iterative-solver knobs. The defaults match the verification setup:
/// gradient tolerance `1e-8`, at most 10,000 iterations.
#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    /// Record the objective value at every accepted iterate.
    pub record_trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-8,
            max_iter: 10_000,
            record_trace: false,
        }
    }
}

impl SolverConfig {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.tol <= 0.0 || !self.tol.is_finite() {
            return Err(Error::Parameter(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::Parameter("max_iter must be >= 1".into()));
        }
        Ok(())
    }
}

/// Fitted coefficients: a vector for scalar-output families, a row-major
/// `D x K` matrix for multiclass.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Coefficients {
    Vector(Vec<f64>),
    Matrix(Vec<Vec<f64>>),
}

impl Coefficients {
    pub fn as_vector(&self) -> Option<&[f64]> {
        match self {
            Coefficients::Vector(v) => Some(v),
            Coefficients::Matrix(_) => None,
        }
    }

    pub fn as_matrix(&self) -> Option<&[Vec<f64>]> {
        match self {
            Coefficients::Matrix(m) => Some(m),
            Coefficients::Vector(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Bias {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl Bias {
    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            Bias::Scalar(b) => Some(*b),
            Bias::Vector(_) => None,
        }
    }

    pub fn as_vector(&self) -> Option<&[f64]> {
        match self {
            Bias::Vector(b) => Some(b),
            Bias::Scalar(_) => None,
        }
    }
}

/// Outcome of a fit, serializable for reports.
#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub coefficients: Coefficients,
    pub bias: Bias,
    #[serde(rename = "objective")]
    pub objective_value: f64,
    pub iterations: usize,
    /// Prox-gradient residual inf-norm at exit; the gradient inf-norm for
    /// smooth problems. At most the configured tolerance when `converged`.
    pub grad_inf_norm: f64,
    pub converged: bool,
    /// Direct solvers fall back to the least-norm solution when the system
    /// is singular; recorded here.
    pub least_norm_fallback: bool,
    #[serde(rename = "wall_time")]
    pub wall_time_secs: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective_trace: Option<Vec<f64>>,
}
