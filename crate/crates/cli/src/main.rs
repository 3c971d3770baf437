//! Command-line frontend: compress, fit, verify, bench, and inspect.
//!
//! Exit codes: 0 success, 1 input/parse error, 2 invalid flags, 3 internal
//! invariant violation, 4 verification thresholds exceeded. Every error
//! path prints a one-line `error:<category>: message` prefix on stderr.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use erm_squash::data::{self, ColumnSchema, Dataset};
use erm_squash::kernel::{compute_kernel, reduce_kernel_logistic, reduce_kernel_ridge};
use erm_squash::model::{KernelKind, MergeMode, ModelFamily, ModelSpec};
use erm_squash::partition::Coloring;
use erm_squash::reduce::{instance_hash, reduce_erm};
use erm_squash::refine::{coarsest_equitable, is_equitable, Equitability, FloatKeyPolicy};
use erm_squash::solver::SolverConfig;
use erm_squash::sparse::SparseMatrix;
use erm_squash::verify::{run_benchmark, verify_equivalence, VerifyConfig};
use erm_squash::Error;

#[derive(Parser)]
#[command(name = "erm-squash", version, about = "Lossless compression of convex ERM instances")]
struct Cli {
    /// Thread cap for internally parallel kernels
    /// (falls back to ERM_SQUASH_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Seed embedded in reports; fixed seeds make JSON outputs
    /// byte-reproducible (timing fields aside).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reduce an instance and write the compressed directory.
    Compress(CompressArgs),
    /// Fit the original instance and print the result as JSON.
    Fit(FitArgs),
    /// Fit original and reduced instances and compare them.
    Verify(VerifyArgs),
    /// Timing trials for original vs compress-then-reduced training.
    Bench(BenchArgs),
    /// Refinement and equitability inspection for a raw matrix.
    Inspect(InspectArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Linreg,
    Ridge,
    Elasticnet,
    Logistic,
    Multiclass,
    KernelRidge,
    KernelLogistic,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Linear,
    Rbf,
    Poly,
}

#[derive(Clone, Copy, ValueEnum)]
enum MergeArg {
    PerLabel,
    MeanTarget,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Libsvm,
    Csv,
}

#[derive(Args)]
struct ModelArgs {
    /// Model family.
    #[arg(long, value_enum)]
    model: FamilyArg,

    /// L1 penalty strength.
    #[arg(long, default_value_t = 0.0)]
    lambda1: f64,

    /// L2 penalty strength (kernel regularizer for kernel families).
    #[arg(long, default_value_t = 0.0)]
    lambda2: f64,

    /// Number of classes for multiclass logistic.
    #[arg(long, default_value_t = 2)]
    classes: usize,

    /// Kernel kind for kernel families.
    #[arg(long, value_enum)]
    kernel: Option<KernelArg>,

    /// RBF bandwidth.
    #[arg(long)]
    gamma: Option<f64>,

    /// Polynomial kernel degree.
    #[arg(long)]
    degree: Option<u32>,

    /// Polynomial kernel offset.
    #[arg(long, default_value_t = 0.0)]
    coef0: f64,

    /// Sample merge mode (default: per-label for classification,
    /// mean-target for regression).
    #[arg(long, value_enum)]
    merge_mode: Option<MergeArg>,

    /// Disable the standardize-on-reduced path (on by default for primal
    /// families, mirroring the verification setup).
    #[arg(long)]
    no_standardize: bool,

    /// Round refinement sums to this many decimal digits before grouping
    /// (default: exact bitwise grouping).
    #[arg(long)]
    quantize_digits: Option<u32>,

    /// Input format (default: guessed from the file extension).
    #[arg(long, value_enum)]
    format: Option<FormatArg>,

    /// Column schema JSON for CSV preprocessing
    /// ([{"name": .., "role": "categorical|numeric|drop|label"}, ..]).
    #[arg(long)]
    schema: Option<PathBuf>,

    /// Gradient tolerance for iterative solvers.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,

    /// Iteration cap for iterative solvers.
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
}

impl ModelArgs {
    fn spec(&self) -> Result<ModelSpec, Error> {
        let family = match self.model {
            FamilyArg::Linreg => ModelFamily::LinearRegression,
            FamilyArg::Ridge => ModelFamily::Ridge,
            FamilyArg::Elasticnet => ModelFamily::ElasticNet,
            FamilyArg::Logistic => ModelFamily::LogisticBinary,
            FamilyArg::Multiclass => ModelFamily::LogisticMulticlass,
            FamilyArg::KernelRidge => ModelFamily::KernelRidge,
            FamilyArg::KernelLogistic => ModelFamily::KernelLogistic,
        };
        let kernel = if family.is_kernel() {
            match self.kernel.unwrap_or(KernelArg::Linear) {
                KernelArg::Linear => KernelKind::Linear,
                KernelArg::Rbf => KernelKind::Rbf {
                    gamma: self.gamma.unwrap_or(1.0),
                },
                KernelArg::Poly => KernelKind::Poly {
                    degree: self.degree.unwrap_or(2),
                    coef0: self.coef0,
                },
            }
        } else {
            KernelKind::None
        };
        let mut spec = ModelSpec::new(family)
            .with_lambda1(self.lambda1)
            .with_lambda2(self.lambda2)
            .with_classes(self.classes)
            .with_kernel(kernel)
            .with_standardize(!family.is_kernel() && !self.no_standardize);
        if let Some(merge) = self.merge_mode {
            spec = spec.with_merge_mode(match merge {
                MergeArg::PerLabel => MergeMode::PerLabel,
                MergeArg::MeanTarget => MergeMode::MeanTarget,
            });
        }
        // Standardization with an L1 penalty is not an exact
        // reparametrization; drop it rather than silently change the
        // problem.
        if spec.lambda1 > 0.0 {
            spec = spec.with_standardize(false);
        }
        spec.validate()?;
        Ok(spec)
    }

    fn policy(&self) -> FloatKeyPolicy {
        match self.quantize_digits {
            Some(digits) => FloatKeyPolicy::Quantize { digits },
            None => FloatKeyPolicy::Exact,
        }
    }

    fn solver(&self) -> SolverConfig {
        SolverConfig::default()
            .with_tol(self.tol)
            .with_max_iter(self.max_iter)
    }

    fn load_dataset(&self, path: &Path) -> Result<Dataset, Error> {
        let format = match self.format {
            Some(f) => f,
            None => match path.extension().and_then(|e| e.to_str()) {
                Some("csv") => FormatArg::Csv,
                _ => FormatArg::Libsvm,
            },
        };
        let text = std::fs::read_to_string(path)?;
        match format {
            FormatArg::Libsvm => data::parse_libsvm(&text, None),
            FormatArg::Csv => match &self.schema {
                Some(schema_path) => {
                    let schema_text = std::fs::read_to_string(schema_path)?;
                    let schema: Vec<ColumnSchema> = serde_json::from_str(&schema_text)?;
                    data::preprocess_tabular(&text, &schema)
                }
                None => {
                    // Headerless numeric CSV, last column is the label.
                    let matrix = data::read_dense_csv(path)?;
                    split_label_column(&matrix)
                }
            },
        }
    }
}

fn split_label_column(matrix: &SparseMatrix) -> Result<Dataset, Error> {
    let d = matrix.n_cols();
    if d < 2 {
        return Err(Error::Schema(
            "csv without a schema needs at least one feature column and a trailing label".into(),
        ));
    }
    let dense = matrix.to_dense();
    let rows: Vec<Vec<f64>> = dense.iter().map(|r| r[..d - 1].to_vec()).collect();
    let y: Vec<f64> = dense.iter().map(|r| r[d - 1]).collect();
    Ok(Dataset {
        x: SparseMatrix::from_dense(&rows)?,
        y,
        weights: None,
        feature_names: None,
        label_map: None,
    })
}

#[derive(Args)]
struct CompressArgs {
    #[command(flatten)]
    model: ModelArgs,

    /// Output directory for the reduced instance.
    #[arg(short, long)]
    output: PathBuf,

    input: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    model: ModelArgs,

    /// Also write the fit result JSON here.
    #[arg(short, long)]
    output: Option<PathBuf>,

    input: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    model: ModelArgs,

    /// Largest acceptable relative objective delta.
    #[arg(long, default_value_t = 1e-4)]
    max_rel_obj_delta: f64,

    /// Largest acceptable absolute prediction delta.
    #[arg(long, default_value_t = 5e-2)]
    max_pred_delta: f64,

    /// Also write the report JSON here.
    #[arg(short, long)]
    output: Option<PathBuf>,

    input: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    model: ModelArgs,

    /// Timing trials.
    #[arg(long, default_value_t = 50)]
    trials: usize,

    /// Also write the report JSON here.
    #[arg(short, long)]
    output: Option<PathBuf>,

    input: PathBuf,
}

#[derive(Args)]
struct InspectArgs {
    /// Matrix file to analyze (dense CSV or LIBSVM features).
    #[arg(long, value_name = "FILE")]
    equitable: PathBuf,

    /// Initial row coloring: `unit`, `discrete`, or `@file.json`.
    #[arg(long, default_value = "unit")]
    rows: String,

    /// Initial column coloring: `unit`, `discrete`, or `@file.json`.
    #[arg(long, default_value = "unit")]
    cols: String,

    /// Check the given colorings for equitability instead of refining.
    #[arg(long)]
    check: bool,

    #[arg(long, value_enum)]
    format: Option<FormatArg>,

    /// Round refinement sums to this many decimal digits before grouping.
    #[arg(long)]
    quantize_digits: Option<u32>,
}

fn parse_coloring(arg: &str, n: usize) -> Result<Coloring, Error> {
    match arg {
        "unit" => Coloring::unit(n),
        "discrete" => Coloring::discrete(n),
        spec => {
            let path = spec.strip_prefix('@').ok_or_else(|| {
                Error::Parameter(format!(
                    "coloring must be `unit`, `discrete`, or `@file.json`, got `{spec}`"
                ))
            })?;
            let text = std::fs::read_to_string(path)?;
            let coloring: Coloring = serde_json::from_str(&text)?;
            if coloring.len() != n {
                return Err(Error::Dimension {
                    context: format!("coloring from {path}"),
                    expected: n,
                    actual: coloring.len(),
                });
            }
            Ok(coloring)
        }
    }
}

fn emit(value: &serde_json::Value, output: Option<&Path>) -> Result<(), Error> {
    let pretty = serde_json::to_string_pretty(value)?;
    println!("{pretty}");
    if let Some(path) = output {
        std::fs::write(path, pretty)?;
    }
    Ok(())
}

fn cmd_compress(seed: u64, args: &CompressArgs) -> Result<(), Error> {
    let spec = args.model.spec()?;
    let policy = args.model.policy();
    let ds = args.model.load_dataset(&args.input)?;
    let hash = instance_hash(&ds.x, &ds.y, ds.weights.as_deref());

    let summary = if spec.family.is_kernel() {
        let kernel = compute_kernel(&ds.x, spec.kernel)?;
        let v = ds
            .weights
            .clone()
            .unwrap_or_else(|| vec![1.0; ds.n_samples()]);
        let red = match spec.family {
            ModelFamily::KernelRidge => {
                reduce_kernel_ridge(&kernel, &ds.y, &v, spec.lambda2, policy)?
            }
            _ => reduce_kernel_logistic(&kernel, &ds.y, &v, spec.lambda2, policy)?,
        };
        red.write_dir(&args.output, &hash, policy)?;
        serde_json::json!({
            "seed": seed,
            "input": args.input.display().to_string(),
            "original_samples": ds.n_samples(),
            "reduced_loss_rows": red.k_logit.n_rows(),
            "reduced_coefficients": red.k_quad.n_rows(),
            "coef_color_sizes": red.coef_coloring.stats().sizes,
        })
    } else {
        let red = reduce_erm(&ds.x, &ds.y, ds.weights.as_deref(), &spec, policy)?;
        red.write_dir(&args.output, &hash, policy)?;
        let mut summary = red.compression_summary(ds.n_samples(), ds.n_features());
        summary["seed"] = serde_json::json!(seed);
        summary["input"] = serde_json::json!(args.input.display().to_string());
        summary
    };
    emit(&summary, Some(&args.output.join("summary.json")))?;
    Ok(())
}

fn cmd_fit(args: &FitArgs) -> Result<(), Error> {
    let spec = args.model.spec()?;
    let ds = args.model.load_dataset(&args.input)?;
    let cfg = VerifyConfig {
        solver: args.model.solver(),
        policy: args.model.policy(),
        seed: 0,
    };
    let fit = erm_squash::verify::fit_original(&ds, &spec, &cfg)?;
    emit(&serde_json::to_value(&fit)?, args.output.as_deref())?;
    Ok(())
}

fn cmd_verify(seed: u64, args: &VerifyArgs) -> Result<ExitCode, Error> {
    let spec = args.model.spec()?;
    let ds = args.model.load_dataset(&args.input)?;
    let cfg = VerifyConfig {
        solver: args.model.solver(),
        policy: args.model.policy(),
        seed,
    };
    let report = verify_equivalence(&ds, &spec, &cfg)?;
    emit(&serde_json::to_value(&report)?, args.output.as_deref())?;
    eprintln!("{}", report.to_table());
    if report.rel_obj_delta > args.max_rel_obj_delta
        || report.max_abs_pred_delta > args.max_pred_delta
    {
        eprintln!(
            "error:verify: deltas exceed thresholds (rel obj {} > {} or pred {} > {})",
            report.rel_obj_delta,
            args.max_rel_obj_delta,
            report.max_abs_pred_delta,
            args.max_pred_delta
        );
        return Ok(ExitCode::from(4));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_bench(seed: u64, args: &BenchArgs) -> Result<(), Error> {
    let spec = args.model.spec()?;
    let ds = args.model.load_dataset(&args.input)?;
    let cfg = VerifyConfig {
        solver: args.model.solver(),
        policy: args.model.policy(),
        seed,
    };
    let report = run_benchmark(&ds, &spec, args.trials, &cfg)?;
    emit(&serde_json::to_value(&report)?, args.output.as_deref())?;
    eprintln!("{}", report.to_table());
    Ok(())
}

fn cmd_inspect(args: &InspectArgs) -> Result<(), Error> {
    let policy = match args.quantize_digits {
        Some(digits) => FloatKeyPolicy::Quantize { digits },
        None => FloatKeyPolicy::Exact,
    };
    let matrix = match args.format {
        Some(FormatArg::Libsvm) => {
            let text = std::fs::read_to_string(&args.equitable)?;
            data::parse_libsvm(&text, None)?.x
        }
        _ => data::read_dense_csv(&args.equitable)?,
    };
    let rows = parse_coloring(&args.rows, matrix.n_rows())?;
    let cols = parse_coloring(&args.cols, matrix.n_cols())?;

    if args.check {
        let outcome = is_equitable(&matrix, &rows, &cols, policy)?;
        let value = match &outcome {
            Equitability::Pass => serde_json::json!({"equitable": true}),
            Equitability::Witness(w) => serde_json::json!({
                "equitable": false,
                "witness": w,
            }),
        };
        emit(&value, None)?;
    } else {
        let pair = coarsest_equitable(&matrix, &rows, &cols, policy)?;
        let mut value = pair.summary();
        value["row_coloring"] = serde_json::to_value(&pair.row_coloring)?;
        value["col_coloring"] = serde_json::to_value(&pair.col_coloring)?;
        emit(&value, None)?;
    }
    Ok(())
}

fn exit_code_for(err: &Error) -> ExitCode {
    match err.category() {
        "parse" | "io" => ExitCode::from(1),
        "flags" => ExitCode::from(2),
        "internal" => ExitCode::from(3),
        _ => ExitCode::from(1),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();

    let threads = cli.threads.or_else(|| {
        std::env::var("ERM_SQUASH_THREADS")
            .ok()
            .and_then(|s| s.parse().ok())
    });
    if let Some(n) = threads {
        // Applies to internally parallel kernels; outputs stay
        // deterministic regardless of the cap.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }

    let outcome = match &cli.command {
        Command::Compress(args) => cmd_compress(cli.seed, args).map(|()| ExitCode::SUCCESS),
        Command::Fit(args) => cmd_fit(args).map(|()| ExitCode::SUCCESS),
        Command::Verify(args) => cmd_verify(cli.seed, args),
        Command::Bench(args) => cmd_bench(cli.seed, args).map(|()| ExitCode::SUCCESS),
        Command::Inspect(args) => cmd_inspect(args).map(|()| ExitCode::SUCCESS),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error:{}: {err}", err.category());
            exit_code_for(&err)
        }
    }
}
