//! Acceptance suite: end-to-end checks of the compression pipeline, one
//! test per criterion, each printing a PASS line. Dataset-dependent checks
//! run only when the files are present (see `scripts/fetch_datasets.sh`)
//! and print SKIP otherwise.

use std::path::PathBuf;
use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use erm_squash::data::parse_libsvm;
use erm_squash::kernel::{compute_kernel, reduce_kernel_logistic, reduce_kernel_ridge};
use erm_squash::model::{KernelKind, MergeMode, ModelFamily, ModelSpec};
use erm_squash::partition::Coloring;
use erm_squash::reduce::{lift_solution, reduce_erm};
use erm_squash::refine::{brute_force_coarsest, coarsest_equitable, FloatKeyPolicy};
use erm_squash::solver::{
    objective_and_predict, objective_gradient, solve_least_squares,
    solve_least_squares_no_intercept, DataRef, FitParams, SolverConfig, TargetsRef,
};
use erm_squash::sparse::SparseMatrix;
use erm_squash::synthetic::{planted_classification, planted_regression, PlantedConfig};
use erm_squash::validate::{validate_erm_coloring, ValidationOutcome};
use erm_squash::verify::{run_benchmark, verify_equivalence, VerifyConfig};

fn appendix_matrix() -> SparseMatrix {
    SparseMatrix::from_dense(&[
        vec![3.0, 1.0, 0.0],
        vec![1.0, 3.0, 0.0],
        vec![4.0, 2.0, 2.0],
        vec![2.0, 4.0, 2.0],
        vec![3.0, 3.0, 1.0],
    ])
    .unwrap()
}

fn appendix_targets() -> Vec<f64> {
    vec![0.0, 1.0, 1.0, 0.0, 7.0]
}

fn tight_config() -> VerifyConfig {
    VerifyConfig {
        solver: SolverConfig::default().with_tol(1e-10).with_max_iter(200_000),
        policy: FloatKeyPolicy::Exact,
        seed: 7,
    }
}

/// Criterion 1: the worked 5x3 example reduces to the published colorings,
/// matrices, and solution, and lifts exactly.
#[test]
fn criterion_1_worked_example_exactness() {
    let started = Instant::now();
    let x = appendix_matrix();
    let y = appendix_targets();
    let spec =
        ModelSpec::new(ModelFamily::LinearRegression).with_merge_mode(MergeMode::MeanTarget);
    let red = reduce_erm(&x, &y, None, &spec, FloatKeyPolicy::Exact).unwrap();

    assert_eq!(
        red.row_coloring,
        Coloring::from_groups(5, &[vec![0, 1], vec![2, 3], vec![4]]).unwrap()
    );
    assert_eq!(
        red.col_coloring,
        Coloring::from_groups(3, &[vec![0, 1], vec![2]]).unwrap()
    );
    assert_eq!(red.x.to_dense(), vec![
        vec![4.0, 0.0],
        vec![6.0, 2.0],
        vec![6.0, 1.0],
    ]);
    match &red.targets {
        erm_squash::reduce::ReducedTargets::Values(v) => assert_eq!(v, &vec![0.5, 0.5, 7.0]),
        other => panic!("unexpected targets {other:?}"),
    }
    assert_eq!(red.weights, vec![2.0, 2.0, 1.0]);

    let multipliers: Vec<f64> = red.penalty_multipliers.iter().map(|&m| m as f64).collect();
    let fit = match &red.targets {
        erm_squash::reduce::ReducedTargets::Values(v) => {
            solve_least_squares(&red.x, v, Some(&red.weights), 0.0, &multipliers, false).unwrap()
        }
        _ => unreachable!(),
    };
    let w_red = fit.coefficients.as_vector().unwrap();
    let bias = fit.bias.as_scalar().unwrap();
    assert!((w_red[0] - 6.5).abs() <= 1e-10, "w'_0 = {}", w_red[0]);
    assert!((w_red[1] + 6.5).abs() <= 1e-10, "w'_1 = {}", w_red[1]);
    assert!((bias + 25.5).abs() <= 1e-10, "b = {bias}");

    let (w, b) = lift_solution(w_red, bias, &red.col_coloring).unwrap();
    for (lifted, expected) in w.iter().zip(&[6.5, 6.5, -6.5]) {
        assert!((lifted - expected).abs() <= 1e-10);
    }
    assert!((b + 25.5).abs() <= 1e-10);

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!("criterion 1 PASS (worked-example exactness, {elapsed:?})");
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut items: Vec<usize> = (0..n).collect();
    fn heap(k: usize, items: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(items.clone());
            return;
        }
        for i in 0..k {
            heap(k - 1, items, out);
            if k % 2 == 0 {
                items.swap(i, k - 1);
            } else {
                items.swap(0, k - 1);
            }
        }
    }
    heap(n, &mut items, &mut out);
    out
}

/// Criterion 2: no nontrivial permutation pair preserves the worked
/// example, yet the compression of criterion 1 still holds.
#[test]
fn criterion_2_no_symmetry_witness() {
    let x = appendix_matrix().to_dense();
    let y = appendix_targets();
    let mut preserving = 0usize;
    for col_perm in permutations(3) {
        for row_perm in permutations(5) {
            let matches = (0..5).all(|i| {
                y[row_perm[i]] == y[i]
                    && (0..3).all(|j| x[row_perm[i]][col_perm[j]] == x[i][j])
            });
            if matches {
                preserving += 1;
                assert!(
                    col_perm == vec![0, 1, 2] && row_perm == vec![0, 1, 2, 3, 4],
                    "nontrivial preserving pair: rows {row_perm:?}, cols {col_perm:?}"
                );
            }
        }
    }
    assert_eq!(preserving, 1, "only the identity may preserve the data");

    // Compression is nonetheless nontrivial.
    let spec = ModelSpec::new(ModelFamily::LinearRegression);
    let red = reduce_erm(
        &appendix_matrix(),
        &appendix_targets(),
        None,
        &spec,
        FloatKeyPolicy::Exact,
    )
    .unwrap();
    assert_eq!(red.row_coloring.num_colors(), 3);
    assert_eq!(red.col_coloring.num_colors(), 2);
    println!("criterion 2 PASS (compression without permutation symmetry)");
}

/// Criterion 3: the refinement engine agrees with the exhaustive oracle on
/// random small matrices and initial colorings.
#[test]
fn criterion_3_oracle_equivalence() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut checked = 0usize;
    while checked < 200 {
        let m = rng.gen_range(2..=6);
        let n = rng.gen_range(2..=6);
        let dense: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..n).map(|_| rng.gen_range(0..3) as f64).collect())
            .collect();
        let a = SparseMatrix::from_dense(&dense).unwrap();
        let p0 = Coloring::from_labels(
            &(0..m).map(|_| rng.gen_range(0..2usize)).collect::<Vec<_>>(),
        )
        .unwrap();
        let q0 = Coloring::from_labels(
            &(0..n).map(|_| rng.gen_range(0..2usize)).collect::<Vec<_>>(),
        )
        .unwrap();
        let fast = coarsest_equitable(&a, &p0, &q0, FloatKeyPolicy::Exact).unwrap();
        let slow = brute_force_coarsest(&a, &p0, &q0).unwrap();
        assert_eq!(fast, slow, "disagreement on {dense:?}, p0 {p0:?}, q0 {q0:?}");
        checked += 1;
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");
    println!("criterion 3 PASS ({checked} oracle agreements, {elapsed:?})");
}

fn planted_fixture(seed: u64, family: ModelFamily, n_classes: usize) -> (SparseMatrix, Vec<f64>) {
    let cfg = if family.is_kernel() {
        PlantedConfig {
            base_rows: 6,
            base_cols: 3,
            max_col_copies: 2,
            max_row_copies: 2,
        }
    } else {
        PlantedConfig {
            base_rows: 10,
            base_cols: 4,
            max_col_copies: 3,
            max_row_copies: 3,
        }
    };
    match family {
        ModelFamily::LinearRegression | ModelFamily::Ridge | ModelFamily::ElasticNet => {
            planted_regression(seed, &cfg)
        }
        ModelFamily::KernelRidge => planted_regression(seed, &cfg),
        ModelFamily::KernelLogistic => planted_classification(seed, &cfg, 2, false),
        ModelFamily::LogisticBinary => planted_classification(seed, &cfg, 2, true),
        ModelFamily::LogisticMulticlass => planted_classification(seed, &cfg, n_classes, true),
    }
}

fn family_spec(family: ModelFamily) -> ModelSpec {
    match family {
        ModelFamily::LinearRegression => ModelSpec::new(family),
        ModelFamily::Ridge => ModelSpec::new(family).with_lambda2(0.3),
        ModelFamily::ElasticNet => ModelSpec::new(family).with_lambda1(0.05).with_lambda2(0.1),
        ModelFamily::LogisticBinary => ModelSpec::new(family).with_lambda2(0.1),
        ModelFamily::LogisticMulticlass => {
            ModelSpec::new(family).with_classes(3).with_lambda2(0.1)
        }
        ModelFamily::KernelRidge | ModelFamily::KernelLogistic => ModelSpec::new(family)
            .with_lambda2(0.5)
            .with_kernel(KernelKind::Rbf { gamma: 0.4 }),
    }
}

/// Criterion 4: losslessness across all seven families on planted
/// instances; lifted-reduced optima match original optima to 1e-6
/// relative at solver tolerance 1e-10.
#[test]
fn criterion_4_losslessness_property_suite() {
    let started = Instant::now();
    let families = [
        ModelFamily::LinearRegression,
        ModelFamily::Ridge,
        ModelFamily::ElasticNet,
        ModelFamily::LogisticBinary,
        ModelFamily::LogisticMulticlass,
        ModelFamily::KernelRidge,
        ModelFamily::KernelLogistic,
    ];
    let cfg = tight_config();
    for family in families {
        let spec = family_spec(family).with_standardize(false);
        for seed in 0..50u64 {
            let (x, y) = planted_fixture(1000 + seed, family, spec.n_classes);
            let ds = erm_squash::data::Dataset {
                x,
                y,
                weights: None,
                feature_names: None,
                label_map: None,
            };
            let report = verify_equivalence(&ds, &spec, &cfg).unwrap();
            assert!(
                report.orig_converged && report.red_converged,
                "{family:?} seed {seed}: fit did not converge"
            );
            assert!(
                report.rel_obj_delta <= 1e-6,
                "{family:?} seed {seed}: rel delta {}",
                report.rel_obj_delta
            );
            assert!(report.n_red <= report.n_orig && report.d_red <= report.d_orig);
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 300.0, "took {elapsed:?}");
    println!(
        "criterion 4 PASS (7 families x 50 planted instances, {elapsed:?})"
    );
}

/// Criterion 5: reduced weighted normal equations lift exactly to the
/// plain and ridge closed forms over the augmented full-rank fixture.
#[test]
fn criterion_5_closed_form_preservation() {
    let x = appendix_matrix().append_ones_column();
    let y = appendix_targets();

    // Oracle: dense closed forms computed directly.
    let dense = x.to_dense();
    let closed_form = |lambda2: f64| -> Vec<f64> {
        let d = 4;
        let mut gram = nalgebra::DMatrix::zeros(d, d);
        let mut rhs = nalgebra::DVector::zeros(d);
        for (row, &t) in dense.iter().zip(&y) {
            for a in 0..d {
                rhs[a] += row[a] * t;
                for b in 0..d {
                    gram[(a, b)] += row[a] * row[b];
                }
            }
        }
        for a in 0..d {
            gram[(a, a)] += lambda2;
        }
        let solved = gram.lu().solve(&rhs).unwrap();
        solved.iter().copied().collect()
    };

    for lambda2 in [0.0, 0.3] {
        let spec = ModelSpec::new(if lambda2 == 0.0 {
            ModelFamily::LinearRegression
        } else {
            ModelFamily::Ridge
        })
        .with_lambda2(lambda2)
        .with_merge_mode(MergeMode::MeanTarget);
        let red = reduce_erm(&x, &y, None, &spec, FloatKeyPolicy::Exact).unwrap();
        assert_eq!(red.penalty_multipliers, vec![2, 1, 1]);

        let multipliers: Vec<f64> = red.penalty_multipliers.iter().map(|&m| m as f64).collect();
        let targets = match &red.targets {
            erm_squash::reduce::ReducedTargets::Values(v) => v.clone(),
            other => panic!("unexpected targets {other:?}"),
        };
        let fit = solve_least_squares_no_intercept(
            &red.x,
            &targets,
            Some(&red.weights),
            lambda2,
            &multipliers,
        )
        .unwrap();
        let (lifted, _) = lift_solution(
            fit.coefficients.as_vector().unwrap(),
            0.0,
            &red.col_coloring,
        )
        .unwrap();
        let expected = closed_form(lambda2);
        for (j, (a, b)) in lifted.iter().zip(&expected).enumerate() {
            assert!(
                (a - b).abs() <= 1e-10,
                "lambda2 {lambda2}, coefficient {j}: {a} vs {b}"
            );
        }
    }
    println!("criterion 5 PASS (closed-form preservation, plain and ridge)");
}

/// Criterion 6: fitting the reduced instance raw versus scaled-then-
/// back-transformed yields the same predictions to 1e-10.
#[test]
fn criterion_6_standard_scaler_two_paths() {
    let solver = SolverConfig::default().with_tol(1e-12).with_max_iter(500_000);
    for seed in 0..20u64 {
        let (x, y) = planted_classification(
            2000 + seed,
            &PlantedConfig {
                base_rows: 8,
                base_cols: 3,
                max_col_copies: 2,
                max_row_copies: 2,
            },
            2,
            true,
        );
        // Keep the features at unit scale so both fits pin the optimum to
        // well below the 1e-10 prediction budget.
        let quarter = vec![0.25; x.n_rows()];
        let x = x.scale_rows(&quarter).unwrap();
        let ds = erm_squash::data::Dataset {
            x,
            y,
            weights: None,
            feature_names: None,
            label_map: None,
        };
        let base = ModelSpec::new(ModelFamily::LogisticBinary).with_lambda2(1.0);
        let cfg = VerifyConfig {
            solver,
            policy: FloatKeyPolicy::Exact,
            seed,
        };

        let raw_fit =
            erm_squash::verify::fit_original(&ds, &base.with_standardize(false), &cfg).unwrap();
        let scaled_fit =
            erm_squash::verify::fit_original(&ds, &base.with_standardize(true), &cfg).unwrap();
        assert!(raw_fit.converged && scaled_fit.converged, "seed {seed}");

        let spec_eval = base.with_standardize(false);
        let evaluate = |fit: &erm_squash::solver::FitResult| {
            let (_, preds) = objective_and_predict(
                &spec_eval,
                &FitParams::Linear {
                    weights: fit.coefficients.as_vector().unwrap(),
                    bias: fit.bias.as_scalar().unwrap(),
                },
                &DataRef::Features(&ds.x),
                &TargetsRef::Values(&ds.y),
                None,
                None,
            )
            .unwrap();
            preds
        };
        let delta = evaluate(&raw_fit)
            .max_abs_delta(&evaluate(&scaled_fit))
            .unwrap();
        assert!(delta <= 1e-10, "seed {seed}: prediction delta {delta}");
    }
    println!("criterion 6 PASS (scaler two-path agreement on 20 instances)");
}

fn data_dir() -> PathBuf {
    std::env::var("ERM_SQUASH_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|_| {
            PathBuf::from(env!("CARGO_MANIFEST_DIR"))
                .join("../../data")
        })
}

fn load_dataset(name: &str) -> Option<erm_squash::data::Dataset> {
    let path = data_dir().join(name);
    let text = std::fs::read_to_string(&path).ok()?;
    Some(parse_libsvm(&text, None).expect("dataset parses"))
}

/// Criterion 7: compression sizes and equivalence deltas on the reference
/// datasets, when present on disk.
#[test]
fn criterion_7_dataset_reproduction() {
    let spec = ModelSpec::new(ModelFamily::LogisticBinary).with_standardize(true);
    let cfg = VerifyConfig::default();
    let started = Instant::now();
    let mut ran_any = false;

    if let Some(ds) = load_dataset("breast-cancer") {
        ran_any = true;
        let report = verify_equivalence(&ds, &spec, &cfg).unwrap();
        assert_eq!((report.n_orig, report.n_red), (683, 675), "breast-cancer samples");
        assert_eq!((report.d_orig, report.d_red), (10, 10), "breast-cancer features");
        assert!(
            report.abs_obj_delta <= 1.2e-3,
            "breast-cancer abs delta {}",
            report.abs_obj_delta
        );
        assert!(
            report.max_abs_pred_delta <= 1.1e-2,
            "breast-cancer pred delta {}",
            report.max_abs_pred_delta
        );
        println!(
            "criterion 7 breast-cancer: 683 -> {} samples, dObj {:.3e}, dPred {:.3e}",
            report.n_red, report.abs_obj_delta, report.max_abs_pred_delta
        );
    } else {
        println!("criterion 7 SKIP breast-cancer (not in {:?}; run scripts/fetch_datasets.sh)", data_dir());
    }

    if let Some(ds) = load_dataset("phishing") {
        ran_any = true;
        let report = verify_equivalence(&ds, &spec, &cfg).unwrap();
        assert_eq!((report.n_orig, report.n_red), (11055, 5849), "phishing samples");
        assert_eq!((report.d_orig, report.d_red), (68, 68), "phishing features");
        assert!(
            report.rel_obj_delta <= 3.4e-4,
            "phishing rel delta {}",
            report.rel_obj_delta
        );
        assert!(
            report.max_abs_pred_delta <= 9e-2,
            "phishing pred delta {}",
            report.max_abs_pred_delta
        );
        println!(
            "criterion 7 phishing: 11055 -> {} samples, dObj {:.3e}, dPred {:.3e}",
            report.n_red, report.abs_obj_delta, report.max_abs_pred_delta
        );
    } else {
        println!("criterion 7 SKIP phishing (not in {:?}; run scripts/fetch_datasets.sh)", data_dir());
    }

    // Large datasets: size checks only, when present.
    if let Some(ds) = load_dataset("skin_nonskin") {
        ran_any = true;
        let red = reduce_erm(&ds.x, &ds.y, None, &spec, FloatKeyPolicy::Exact).unwrap();
        assert_eq!(ds.n_samples(), 245057);
        assert_eq!(red.n_reduced_rows(), 51444, "skin_nonskin samples");
        assert_eq!(red.n_reduced_cols(), 3, "skin_nonskin features");
        println!("criterion 7 skin_nonskin: 245057 -> {}", red.n_reduced_rows());
    }
    if let Some(ds) = load_dataset("a7a") {
        ran_any = true;
        let red = reduce_erm(&ds.x, &ds.y, None, &spec, FloatKeyPolicy::Exact).unwrap();
        assert_eq!(red.n_reduced_rows(), 13900, "a7a samples");
        assert_eq!(red.n_reduced_cols(), 120, "a7a features");
        println!("criterion 7 a7a: {} -> {}", ds.n_samples(), red.n_reduced_rows());
    }

    if ran_any {
        let elapsed = started.elapsed();
        assert!(elapsed.as_secs_f64() < 120.0, "took {elapsed:?}");
        println!("criterion 7 PASS ({elapsed:?})");
    } else {
        println!("criterion 7 SKIP (no reference datasets on disk)");
    }
}

/// Criterion 8: on phishing, compressing and training on the reduced
/// instance beats training on the original, averaged over 50 trials.
/// Absolute times are not targets.
#[test]
fn criterion_8_benchmark_ordering() {
    let Some(ds) = load_dataset("phishing") else {
        println!("criterion 8 SKIP phishing (not in {:?}; run scripts/fetch_datasets.sh)", data_dir());
        return;
    };
    let spec = ModelSpec::new(ModelFamily::LogisticBinary).with_standardize(true);
    let report = run_benchmark(&ds, &spec, 50, &VerifyConfig::default()).unwrap();
    assert!(
        report.t_compress.mean + report.t_train_red.mean < report.t_train_orig.mean,
        "compress {:.4}s + reduced {:.4}s !< original {:.4}s",
        report.t_compress.mean,
        report.t_train_red.mean,
        report.t_train_orig.mean
    );
    println!(
        "criterion 8 PASS (normalized total {:.1}% over {} trials)",
        report.normalized_total * 100.0,
        report.trials
    );
}

/// Criterion 9: the finite-difference validator accepts every coloring the
/// pipelines emit and rejects a deliberately coarse one with a witness.
#[test]
fn criterion_9_reduction_coloring_validator() {
    // Primal families: validate the feature coloring against the actual
    // unregularized loss.
    for family in [
        ModelFamily::LinearRegression,
        ModelFamily::LogisticBinary,
        ModelFamily::LogisticMulticlass,
    ] {
        let spec = family_spec(family).with_standardize(false);
        for seed in 0..5u64 {
            let (x, y) = planted_fixture(3000 + seed, family, spec.n_classes);
            let red = reduce_erm(&x, &y, None, &spec, FloatKeyPolicy::Exact).unwrap();
            let q = red.col_coloring.clone();
            let outcome = match family {
                ModelFamily::LinearRegression => {
                    let objective = |w: &[f64], b: f64| {
                        let preds = x.matvec(w).unwrap();
                        preds
                            .iter()
                            .zip(&y)
                            .map(|(&p, &t)| (p + b - t) * (p + b - t))
                            .sum()
                    };
                    validate_erm_coloring(objective, &q, 3, seed).unwrap()
                }
                ModelFamily::LogisticBinary => {
                    let objective = |w: &[f64], b: f64| {
                        let z = x.matvec(w).unwrap();
                        z.iter()
                            .zip(&y)
                            .map(|(&zi, &yi)| {
                                let zb = zi + b;
                                zb.max(0.0) + (-zb.abs()).exp().ln_1p() - yi * zb
                            })
                            .sum()
                    };
                    validate_erm_coloring(objective, &q, 3, seed).unwrap()
                }
                _ => {
                    // Multiclass: flatten W (row-major) plus per-class
                    // biases; variable colors pair (feature color, class).
                    let k = spec.n_classes;
                    let d = x.n_cols();
                    let mut labels: Vec<usize> = Vec::with_capacity((d + 1) * k);
                    for j in 0..d {
                        for c in 0..k {
                            labels.push(q.color_of(j) * k + c);
                        }
                    }
                    let base = q.num_colors() * k;
                    for c in 0..k {
                        labels.push(base + c);
                    }
                    let q_ext = Coloring::from_labels(&labels).unwrap();
                    let ids: Vec<usize> = y.iter().map(|&t| t as usize).collect();
                    let objective = |params: &[f64]| {
                        let mut loss = 0.0;
                        for i in 0..x.n_rows() {
                            let (cols, vals) = x.row(i);
                            let mut z = params[d * k..(d + 1) * k].to_vec();
                            for (&j, &xij) in cols.iter().zip(vals) {
                                for c in 0..k {
                                    z[c] += xij * params[j * k + c];
                                }
                            }
                            let zmax = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                            let lse =
                                zmax + z.iter().map(|&zi| (zi - zmax).exp()).sum::<f64>().ln();
                            loss += lse - z[ids[i]];
                        }
                        loss
                    };
                    let program = erm_squash::validate::ConvexProgram {
                        objective: Box::new(objective),
                        constraints: Vec::new(),
                        bounds: Vec::new(),
                        lower: vec![-10.0; (d + 1) * k],
                        upper: vec![10.0; (d + 1) * k],
                    };
                    erm_squash::validate::validate_reduction_coloring(
                        &program, None, &q_ext, 3, seed,
                    )
                    .unwrap()
                }
            };
            assert!(
                outcome.is_pass(),
                "{family:?} seed {seed}: validator rejected a pipeline coloring: {outcome:?}"
            );
        }
    }

    // Kernel families: validate the coefficient coloring against the
    // kernel objectives.
    for family in [ModelFamily::KernelRidge, ModelFamily::KernelLogistic] {
        let spec = family_spec(family);
        for seed in 0..5u64 {
            let (x, y) = planted_fixture(4000 + seed, family, 2);
            let kernel = compute_kernel(&x, spec.kernel).unwrap();
            let v = vec![1.0; x.n_rows()];
            let q = match family {
                ModelFamily::KernelRidge => {
                    reduce_kernel_ridge(&kernel, &y, &v, spec.lambda2, FloatKeyPolicy::Exact)
                        .unwrap()
                        .coef_coloring
                }
                _ => reduce_kernel_logistic(&kernel, &y, &v, spec.lambda2, FloatKeyPolicy::Exact)
                    .unwrap()
                    .coef_coloring,
            };
            let lambda = spec.lambda2;
            let outcome = match family {
                ModelFamily::KernelRidge => {
                    let objective = |alpha: &[f64], b: f64| {
                        let z = kernel.matvec(alpha).unwrap();
                        let loss: f64 = z
                            .iter()
                            .zip(&y)
                            .map(|(&zi, &ti)| (zi + b - ti) * (zi + b - ti))
                            .sum();
                        let ka = kernel.matvec(alpha).unwrap();
                        loss + lambda * alpha.iter().zip(&ka).map(|(&a, &k)| a * k).sum::<f64>()
                    };
                    validate_erm_coloring(objective, &q, 3, seed).unwrap()
                }
                _ => {
                    let objective = |alpha: &[f64], b: f64| {
                        let z = kernel.matvec(alpha).unwrap();
                        let loss: f64 = z
                            .iter()
                            .zip(&y)
                            .map(|(&zi, &yi)| {
                                let zb = zi + b;
                                zb.max(0.0) + (-zb.abs()).exp().ln_1p() - yi * zb
                            })
                            .sum();
                        let ka = kernel.matvec(alpha).unwrap();
                        loss + lambda * alpha.iter().zip(&ka).map(|(&a, &k)| a * k).sum::<f64>()
                    };
                    validate_erm_coloring(objective, &q, 3, seed).unwrap()
                }
            };
            assert!(
                outcome.is_pass(),
                "{family:?} seed {seed}: validator rejected a pipeline coloring"
            );
        }
    }

    // Negative case: the unit feature coloring on the worked example must
    // be rejected with a gradient witness.
    let x = appendix_matrix();
    let y = appendix_targets();
    let objective = |w: &[f64], b: f64| {
        let preds = x.matvec(w).unwrap();
        preds
            .iter()
            .zip(&y)
            .map(|(&p, &t)| (p + b - t) * (p + b - t))
            .sum()
    };
    match validate_erm_coloring(objective, &Coloring::unit(3).unwrap(), 4, 42).unwrap() {
        ValidationOutcome::Witness(w) => {
            assert_eq!(
                w.condition,
                erm_squash::validate::ViolatedCondition::ObjectiveGradient
            );
        }
        ValidationOutcome::Pass => panic!("unit coloring must be rejected"),
    }
    println!("criterion 9 PASS (validator sound on pipelines, rejects broken coloring)");
}

/// Criterion 10: analytic gradients of every iterative solver family match
/// central finite differences at 5 random points.
#[test]
fn criterion_10_gradient_checks() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut check =
        |name: &str,
         spec: &ModelSpec,
         params_len: usize,
         data: DataRef<'_>,
         targets: TargetsRef<'_>| {
            for point in 0..5 {
                let params: Vec<f64> =
                    (0..params_len).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let (_, grad) =
                    objective_gradient(spec, &params, &data, &targets, None, None).unwrap();
                let mut fd = vec![0.0; params_len];
                let mut probe = params.clone();
                for j in 0..params_len {
                    let h = 1e-6 * (1.0 + probe[j].abs());
                    let original = probe[j];
                    probe[j] = original + h;
                    let fp = objective_gradient(spec, &probe, &data, &targets, None, None)
                        .unwrap()
                        .0;
                    probe[j] = original - h;
                    let fm = objective_gradient(spec, &probe, &data, &targets, None, None)
                        .unwrap()
                        .0;
                    probe[j] = original;
                    fd[j] = (fp - fm) / (2.0 * h);
                }
                let scale = fd.iter().fold(1.0f64, |acc, &g| acc.max(g.abs()));
                let worst = grad
                    .iter()
                    .zip(&fd)
                    .map(|(&a, &b)| (a - b).abs())
                    .fold(0.0f64, f64::max);
                assert!(
                    worst / scale <= 1e-5,
                    "{name} point {point}: rel gradient error {}",
                    worst / scale
                );
            }
        };

    let (x, y) = planted_classification(77, &PlantedConfig::default(), 2, true);
    let spec = ModelSpec::new(ModelFamily::LogisticBinary).with_lambda2(0.1);
    check(
        "binary logistic",
        &spec,
        x.n_cols() + 1,
        DataRef::Features(&x),
        TargetsRef::Values(&y),
    );

    let (x3, y3) = planted_classification(78, &PlantedConfig::default(), 3, true);
    let ids: Vec<usize> = y3.iter().map(|&t| t as usize).collect();
    let spec = ModelSpec::new(ModelFamily::LogisticMulticlass)
        .with_classes(3)
        .with_lambda2(0.1);
    check(
        "multiclass logistic",
        &spec,
        (x3.n_cols() + 1) * 3,
        DataRef::Features(&x3),
        TargetsRef::Classes(&ids),
    );

    let (xr, yr) = planted_regression(79, &PlantedConfig::default());
    let spec = ModelSpec::new(ModelFamily::ElasticNet).with_lambda2(0.2);
    check(
        "elastic-net smooth part",
        &spec,
        xr.n_cols() + 1,
        DataRef::Features(&xr),
        TargetsRef::Values(&yr),
    );

    let (xk, yk) = planted_classification(
        80,
        &PlantedConfig {
            base_rows: 6,
            base_cols: 3,
            max_col_copies: 2,
            max_row_copies: 2,
        },
        2,
        false,
    );
    let kernel = compute_kernel(&xk, KernelKind::Rbf { gamma: 0.4 }).unwrap();
    let spec = ModelSpec::new(ModelFamily::KernelLogistic)
        .with_kernel(KernelKind::Rbf { gamma: 0.4 })
        .with_lambda2(0.5);
    check(
        "kernel logistic",
        &spec,
        kernel.n_rows() + 1,
        DataRef::Kernel {
            logit: &kernel,
            quad: &kernel,
        },
        TargetsRef::Values(&yk),
    );

    println!("criterion 10 PASS (gradient checks, 4 iterative families x 5 points)");
}
