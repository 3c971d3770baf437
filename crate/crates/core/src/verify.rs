//! End-to-end equivalence verification and the benchmark harness.
//!
//! `verify_equivalence` fits the original instance, compresses it, fits
//! the reduced instance (through the standardize-on-reduced path when the
//! spec asks for it), lifts the reduced solution, and evaluates both
//! parameter sets on the *original* objective and predictions. The
//! standardized fit is an exact reparametrization: penalty multipliers are
//! rescaled by `1 / sigma^2` so the scaled problem matches the raw one
//! term by term, and the fitted parameters are mapped back before lifting.
//!
//! `run_benchmark` repeats the same pipeline for timing statistics.
//! Timings include scaler fit/transform but exclude dataset parsing and
//! kernel materialization; absolute times are environment-dependent and
//! only orderings/ratios are meaningful.

use std::time::Instant;

use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernel::{compute_kernel, reduce_kernel_logistic, reduce_kernel_ridge, KernelReduced};
use crate::model::{ModelFamily, ModelSpec};
use crate::reduce::{
    lift_solution, lift_solution_multiclass, reduce_erm, ReducedInstance, ReducedTargets,
};
use crate::refine::FloatKeyPolicy;
use crate::scaler::StandardScaler;
use crate::solver::{
    objective_and_predict, solve_elastic_net, solve_kernel_logistic, solve_kernel_ridge,
    solve_least_squares, solve_logistic, DataRef, FitParams, FitResult, LogisticTargets,
    Predictions, SolverConfig, TargetsRef,
};
use crate::sparse::SparseMatrix;

/// Mean and standard deviation over timing trials. A single trial reports
/// zero deviation.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct TimingStats {
    pub mean: f64,
    pub std: f64,
}

impl TimingStats {
    fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let std = if n < 2 {
            0.0
        } else {
            let var = samples.iter().map(|&t| (t - mean) * (t - mean)).sum::<f64>()
                / (n as f64 - 1.0);
            var.sqrt()
        };
        TimingStats { mean, std }
    }
}

/// Full equivalence/benchmark report.
#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceReport {
    pub abs_obj_delta: f64,
    /// `abs_obj_delta / max(|objective_original|, 1e-12)`.
    pub rel_obj_delta: f64,
    pub max_abs_pred_delta: f64,
    pub n_orig: usize,
    pub n_red: usize,
    pub d_orig: usize,
    pub d_red: usize,
    pub t_train_orig: TimingStats,
    pub t_compress: TimingStats,
    pub t_train_red: TimingStats,
    /// `(t_compress + t_train_red) / t_train_orig`, means.
    pub normalized_total: f64,
    pub trials: usize,
    pub orig_converged: bool,
    pub red_converged: bool,
    pub seed: u64,
}

impl EquivalenceReport {
    /// Aligned text rendering of the headline metrics.
    pub fn to_table(&self) -> String {
        format!(
            "{:<28} {:>14}\n{:<28} {:>14.6e}\n{:<28} {:>14.6e}\n{:<28} {:>14.6e}\n\
             {:<28} {:>7} -> {:>4}\n{:<28} {:>7} -> {:>4}\n\
             {:<28} {:>14.6}\n{:<28} {:>14.6}\n{:<28} {:>14.6}\n{:<28} {:>13.1}%\n",
            "metric", "value",
            "abs objective delta", self.abs_obj_delta,
            "rel objective delta", self.rel_obj_delta,
            "max abs prediction delta", self.max_abs_pred_delta,
            "samples", self.n_orig, self.n_red,
            "features", self.d_orig, self.d_red,
            "t_train_orig (s)", self.t_train_orig.mean,
            "t_compress (s)", self.t_compress.mean,
            "t_train_red (s)", self.t_train_red.mean,
            "normalized total", self.normalized_total * 100.0,
        )
    }
}

/// Pipeline knobs for verification runs.
#[derive(Debug, Clone, Copy)]
pub struct VerifyConfig {
    pub solver: SolverConfig,
    pub policy: FloatKeyPolicy,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            solver: SolverConfig::default(),
            policy: FloatKeyPolicy::Exact,
            seed: 0,
        }
    }
}

/// Parameters in original space, owned.
enum LiftedParams {
    Linear { weights: Vec<f64>, bias: f64 },
    Multiclass { weights: Vec<Vec<f64>>, bias: Vec<f64> },
    Kernel { alpha: Vec<f64>, bias: f64 },
}

impl LiftedParams {
    fn as_params(&self) -> FitParams<'_> {
        match self {
            LiftedParams::Linear { weights, bias } => FitParams::Linear {
                weights,
                bias: *bias,
            },
            LiftedParams::Multiclass { weights, bias } => FitParams::Multiclass { weights, bias },
            LiftedParams::Kernel { alpha, bias } => FitParams::Kernel {
                alpha,
                bias: *bias,
            },
        }
    }
}

struct SingleRun {
    t_orig: f64,
    t_compress: f64,
    t_red: f64,
    abs_obj_delta: f64,
    rel_obj_delta: f64,
    max_abs_pred_delta: f64,
    n_red: usize,
    d_red: usize,
    orig_converged: bool,
    red_converged: bool,
}

fn scaled_multipliers(base: &[f64], scaler: &StandardScaler) -> Vec<f64> {
    base.iter()
        .zip(&scaler.stds)
        .map(|(&m, &s)| m / (s * s))
        .collect()
}

fn check_scaling_supported(spec: &ModelSpec) -> Result<()> {
    if spec.standardize && spec.lambda1 > 0.0 {
        return Err(Error::Parameter(
            "standardize with an L1 penalty is not an exact reparametrization; \
             fit raw or drop the L1 term"
                .into(),
        ));
    }
    if spec.standardize && spec.penalize_bias {
        return Err(Error::Parameter(
            "standardize with a penalized bias is not an exact reparametrization".into(),
        ));
    }
    Ok(())
}

/// Fits a primal-family instance, optionally through the scaling path, and
/// returns parameters in raw space.
#[allow(clippy::too_many_arguments)]
fn fit_primal(
    x: &SparseMatrix,
    targets: &ReducedTargets,
    weights: Option<&[f64]>,
    multipliers: &[f64],
    spec: &ModelSpec,
    solver: &SolverConfig,
) -> Result<(LiftedParams, FitResult)> {
    let scaler = spec.standardize.then(|| StandardScaler::fit(x));
    let fitted_x;
    let x_fit: &SparseMatrix = match &scaler {
        Some(s) => {
            fitted_x = s.transform(x)?;
            &fitted_x
        }
        None => x,
    };
    let eff_multipliers = match &scaler {
        Some(s) => scaled_multipliers(multipliers, s),
        None => multipliers.to_vec(),
    };

    let fit = match (spec.family, targets) {
        (
            ModelFamily::LinearRegression | ModelFamily::Ridge,
            ReducedTargets::Values(y),
        ) => solve_least_squares(
            x_fit,
            y,
            weights,
            spec.lambda2,
            &eff_multipliers,
            spec.penalize_bias,
        )?,
        (ModelFamily::ElasticNet, ReducedTargets::Values(y)) => solve_elastic_net(
            x_fit,
            y,
            weights,
            spec.lambda1,
            spec.lambda2,
            &eff_multipliers,
            spec.penalize_bias,
            solver,
        )?,
        (ModelFamily::LogisticBinary, ReducedTargets::Values(y)) => solve_logistic(
            x_fit,
            LogisticTargets::Binary(y),
            weights,
            spec.lambda1,
            spec.lambda2,
            &eff_multipliers,
            2,
            solver,
        )?,
        (ModelFamily::LogisticMulticlass, ReducedTargets::Classes(ids)) => solve_logistic(
            x_fit,
            LogisticTargets::Classes(ids),
            weights,
            spec.lambda1,
            spec.lambda2,
            &eff_multipliers,
            spec.n_classes,
            solver,
        )?,
        (ModelFamily::LogisticMulticlass, ReducedTargets::Probabilities(rows)) => solve_logistic(
            x_fit,
            LogisticTargets::Probabilities(rows),
            weights,
            spec.lambda1,
            spec.lambda2,
            &eff_multipliers,
            spec.n_classes,
            solver,
        )?,
        _ => {
            return Err(Error::Parameter(
                "target kind does not match the model family".into(),
            ))
        }
    };

    let params = match (&fit.coefficients, &fit.bias) {
        (crate::solver::Coefficients::Vector(w), crate::solver::Bias::Scalar(b)) => {
            let (w, b) = match &scaler {
                Some(s) => s.backtransform(w, *b)?,
                None => (w.clone(), *b),
            };
            LiftedParams::Linear { weights: w, bias: b }
        }
        (crate::solver::Coefficients::Matrix(w), crate::solver::Bias::Vector(b)) => {
            let (w, b) = match &scaler {
                Some(s) => s.backtransform_multiclass(w, b)?,
                None => (w.clone(), b.clone()),
            };
            LiftedParams::Multiclass { weights: w, bias: b }
        }
        _ => return Err(Error::Invariant("mismatched fit result shapes".into())),
    };
    Ok((params, fit))
}

fn original_targets(ds: &Dataset, spec: &ModelSpec) -> Result<ReducedTargets> {
    match spec.family {
        ModelFamily::LogisticMulticlass => {
            let ids = ds
                .y
                .iter()
                .map(|&t| {
                    if t.fract() != 0.0 || t < 0.0 || t >= spec.n_classes as f64 {
                        Err(Error::Parameter(format!(
                            "label {t} is not a class id in 0..{}",
                            spec.n_classes
                        )))
                    } else {
                        Ok(t as usize)
                    }
                })
                .collect::<Result<Vec<usize>>>()?;
            Ok(ReducedTargets::Classes(ids))
        }
        _ => Ok(ReducedTargets::Values(ds.y.clone())),
    }
}

fn original_targets_ref<'a>(targets: &'a ReducedTargets) -> TargetsRef<'a> {
    match targets {
        ReducedTargets::Values(v) => TargetsRef::Values(v),
        ReducedTargets::Classes(c) => TargetsRef::Classes(c),
        ReducedTargets::Probabilities(p) => TargetsRef::Probabilities(p),
    }
}

fn evaluate_original(
    spec: &ModelSpec,
    params: &LiftedParams,
    data: &DataRef<'_>,
    targets: &ReducedTargets,
    weights: Option<&[f64]>,
) -> Result<(f64, Predictions)> {
    objective_and_predict(
        spec,
        &params.as_params(),
        data,
        &original_targets_ref(targets),
        weights,
        None,
    )
}

fn run_once(ds: &Dataset, spec: &ModelSpec, cfg: &VerifyConfig) -> Result<SingleRun> {
    spec.validate()?;
    check_scaling_supported(spec)?;
    let weights = ds.weights.as_deref();

    if spec.family.is_kernel() {
        let kernel = compute_kernel(&ds.x, spec.kernel)?;
        let v = weights
            .map(<[f64]>::to_vec)
            .unwrap_or_else(|| vec![1.0; ds.n_samples()]);

        let start = Instant::now();
        let orig_fit = match spec.family {
            ModelFamily::KernelRidge => {
                solve_kernel_ridge(&kernel, &kernel, &ds.y, &v, spec.lambda2)?
            }
            _ => solve_kernel_logistic(&kernel, &kernel, &ds.y, &v, spec.lambda2, &cfg.solver)?,
        };
        let t_orig = start.elapsed().as_secs_f64();

        let start = Instant::now();
        let red: KernelReduced = match spec.family {
            ModelFamily::KernelRidge => {
                reduce_kernel_ridge(&kernel, &ds.y, &v, spec.lambda2, cfg.policy)?
            }
            _ => reduce_kernel_logistic(&kernel, &ds.y, &v, spec.lambda2, cfg.policy)?,
        };
        let t_compress = start.elapsed().as_secs_f64();

        let start = Instant::now();
        let red_fit = match spec.family {
            ModelFamily::KernelRidge => solve_kernel_ridge(
                &red.k_logit,
                &red.k_quad,
                &red.targets,
                &red.weights,
                red.lambda,
            )?,
            _ => solve_kernel_logistic(
                &red.k_logit,
                &red.k_quad,
                &red.targets,
                &red.weights,
                red.lambda,
                &cfg.solver,
            )?,
        };
        let t_red = start.elapsed().as_secs_f64();

        let alpha_red = red_fit
            .coefficients
            .as_vector()
            .ok_or_else(|| Error::Invariant("kernel fit must produce a vector".into()))?;
        let lifted = LiftedParams::Kernel {
            alpha: red.coef_coloring.expand(alpha_red)?,
            bias: red_fit
                .bias
                .as_scalar()
                .ok_or_else(|| Error::Invariant("kernel fit must produce a scalar bias".into()))?,
        };
        let orig_params = LiftedParams::Kernel {
            alpha: orig_fit
                .coefficients
                .as_vector()
                .expect("kernel fit produces a vector")
                .to_vec(),
            bias: orig_fit.bias.as_scalar().expect("scalar bias"),
        };

        let data = DataRef::Kernel {
            logit: &kernel,
            quad: &kernel,
        };
        let targets = ReducedTargets::Values(ds.y.clone());
        let (obj_orig, pred_orig) =
            evaluate_original(spec, &orig_params, &data, &targets, Some(&v))?;
        let (obj_lift, pred_lift) = evaluate_original(spec, &lifted, &data, &targets, Some(&v))?;

        let abs_obj_delta = (obj_orig - obj_lift).abs();
        return Ok(SingleRun {
            t_orig,
            t_compress,
            t_red,
            abs_obj_delta,
            rel_obj_delta: abs_obj_delta / obj_orig.abs().max(REL_EPS),
            max_abs_pred_delta: pred_orig.max_abs_delta(&pred_lift)?,
            n_red: red.k_logit.n_rows(),
            d_red: red.k_quad.n_rows(),
            orig_converged: orig_fit.converged,
            red_converged: red_fit.converged,
        });
    }

    // Primal families.
    let orig_targets = original_targets(ds, spec)?;
    let ones = vec![1.0; ds.n_features()];

    let start = Instant::now();
    let (orig_params, orig_fit) = fit_primal(
        &ds.x,
        &orig_targets,
        weights,
        &ones,
        spec,
        &cfg.solver,
    )?;
    let t_orig = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let red: ReducedInstance = reduce_erm(&ds.x, &ds.y, weights, spec, cfg.policy)?;
    let t_compress = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let red_multipliers: Vec<f64> = red.penalty_multipliers.iter().map(|&m| m as f64).collect();
    let (red_params_raw, red_fit) = fit_primal(
        &red.x,
        &red.targets,
        Some(&red.weights),
        &red_multipliers,
        spec,
        &cfg.solver,
    )?;
    let lifted = match red_params_raw {
        LiftedParams::Linear { weights, bias } => {
            let (w, b) = lift_solution(&weights, bias, &red.col_coloring)?;
            LiftedParams::Linear { weights: w, bias: b }
        }
        LiftedParams::Multiclass { weights, bias } => {
            let (w, b) = lift_solution_multiclass(&weights, &bias, &red.col_coloring)?;
            LiftedParams::Multiclass { weights: w, bias: b }
        }
        LiftedParams::Kernel { .. } => unreachable!("primal fit"),
    };
    let t_red = start.elapsed().as_secs_f64();

    let data = DataRef::Features(&ds.x);
    let (obj_orig, pred_orig) =
        evaluate_original(spec, &orig_params, &data, &orig_targets, weights)?;
    let (obj_lift, pred_lift) = evaluate_original(spec, &lifted, &data, &orig_targets, weights)?;

    let abs_obj_delta = (obj_orig - obj_lift).abs();
    Ok(SingleRun {
        t_orig,
        t_compress,
        t_red,
        abs_obj_delta,
        rel_obj_delta: abs_obj_delta / obj_orig.abs().max(REL_EPS),
        max_abs_pred_delta: pred_orig.max_abs_delta(&pred_lift)?,
        n_red: red.n_reduced_rows(),
        d_red: red.n_reduced_cols(),
        orig_converged: orig_fit.converged,
        red_converged: red_fit.converged,
    })
}

const REL_EPS: f64 = 1e-12;

fn assemble(ds: &Dataset, runs: &[SingleRun], seed: u64) -> EquivalenceReport {
    let last = runs.last().expect("at least one run");
    let t_orig = TimingStats::from_samples(&runs.iter().map(|r| r.t_orig).collect::<Vec<_>>());
    let t_compress =
        TimingStats::from_samples(&runs.iter().map(|r| r.t_compress).collect::<Vec<_>>());
    let t_red = TimingStats::from_samples(&runs.iter().map(|r| r.t_red).collect::<Vec<_>>());
    EquivalenceReport {
        abs_obj_delta: last.abs_obj_delta,
        rel_obj_delta: last.rel_obj_delta,
        max_abs_pred_delta: last.max_abs_pred_delta,
        n_orig: ds.n_samples(),
        n_red: last.n_red,
        d_orig: ds.n_features(),
        d_red: last.d_red,
        normalized_total: (t_compress.mean + t_red.mean) / t_orig.mean.max(REL_EPS),
        t_train_orig: t_orig,
        t_compress,
        t_train_red: t_red,
        trials: runs.len(),
        orig_converged: last.orig_converged,
        red_converged: last.red_converged,
        seed,
    }
}

/// Fits the original (unreduced) instance through the configured pipeline
/// and returns the result with parameters mapped back to raw space.
pub fn fit_original(ds: &Dataset, spec: &ModelSpec, cfg: &VerifyConfig) -> Result<FitResult> {
    spec.validate()?;
    check_scaling_supported(spec)?;
    if spec.family.is_kernel() {
        let kernel = compute_kernel(&ds.x, spec.kernel)?;
        let v = ds
            .weights
            .clone()
            .unwrap_or_else(|| vec![1.0; ds.n_samples()]);
        return match spec.family {
            ModelFamily::KernelRidge => {
                solve_kernel_ridge(&kernel, &kernel, &ds.y, &v, spec.lambda2)
            }
            _ => solve_kernel_logistic(&kernel, &kernel, &ds.y, &v, spec.lambda2, &cfg.solver),
        };
    }
    let targets = original_targets(ds, spec)?;
    let ones = vec![1.0; ds.n_features()];
    let (params, mut fit) = fit_primal(
        &ds.x,
        &targets,
        ds.weights.as_deref(),
        &ones,
        spec,
        &cfg.solver,
    )?;
    match params {
        LiftedParams::Linear { weights, bias } => {
            fit.coefficients = crate::solver::Coefficients::Vector(weights);
            fit.bias = crate::solver::Bias::Scalar(bias);
        }
        LiftedParams::Multiclass { weights, bias } => {
            fit.coefficients = crate::solver::Coefficients::Matrix(weights);
            fit.bias = crate::solver::Bias::Vector(bias);
        }
        LiftedParams::Kernel { .. } => unreachable!("primal fit"),
    }
    Ok(fit)
}

/// Fits original and reduced instances and reports objective/prediction
/// deltas on the original problem, sizes, and single-trial timings.
/// Non-convergence of either fit is flagged; deltas are still reported.
pub fn verify_equivalence(
    ds: &Dataset,
    spec: &ModelSpec,
    cfg: &VerifyConfig,
) -> Result<EquivalenceReport> {
    let run = run_once(ds, spec, cfg)?;
    Ok(assemble(ds, &[run], cfg.seed))
}

/// Repeats the pipeline for timing statistics. Trials run sequentially;
/// deltas and sizes are identical across trials by construction.
pub fn run_benchmark(
    ds: &Dataset,
    spec: &ModelSpec,
    trials: usize,
    cfg: &VerifyConfig,
) -> Result<EquivalenceReport> {
    if trials == 0 {
        return Err(Error::Parameter("trials must be >= 1".into()));
    }
    let mut runs = Vec::with_capacity(trials);
    for _ in 0..trials {
        runs.push(run_once(ds, spec, cfg)?);
    }
    Ok(assemble(ds, &runs, cfg.seed))
}
