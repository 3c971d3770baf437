//! Lossless compression of convex empirical-risk-minimization instances.
//!
//! The pipeline finds row/column partitions of the data (or kernel) matrix
//! that are *equitable* — every block has constant row and column sums —
//! and refines them so that aggregating samples and features within colors
//! provably preserves optima. The reduced problem is solved and the
//! solution lifted exactly back to the original problem.
//!
//! The crate is organized around that pipeline:
//!
//! - [`partition`]: canonical colorings plus sum/mean aggregation and
//!   broadcast expansion.
//! - [`sparse`]: the CSR matrix container shared by all stages.
//! - [`refine`]: stack-based color refinement to the coarsest equitable
//!   pair, an equitability checker with witnesses, a tied symmetric
//!   variant for kernel matrices, and an exhaustive oracle for testing.
//! - [`reduce`]: model-aware initial colorings and reduced-instance
//!   construction for linear/polynomial/elastic-net regression and binary/
//!   multiclass logistic regression, with exact solution lifting.
//! - [`kernel`]: kernel matrix construction and the kernel ridge/logistic
//!   reductions with their asymmetric quad/logit projections.
//! - [`solver`]: reference solvers (closed-form weighted least squares,
//!   proximal-gradient logistic families, kernel systems) strong enough to
//!   demonstrate equivalence.
//! - [`scaler`]: standardize-on-reduced with the exact parameter
//!   back-transform.
//! - [`data`]: LIBSVM and CSV ingestion with the preprocessing used by the
//!   verification datasets.
//! - [`verify`]: end-to-end equivalence reports and the benchmark harness.
//! - [`validate`]: a finite-difference checker for the reduction-coloring
//!   conditions on arbitrary convex programs.

pub mod data;
pub mod error;
pub mod kernel;
pub mod model;
pub mod partition;
pub mod reduce;
pub mod refine;
pub mod scaler;
pub mod solver;
pub mod sparse;
pub mod synthetic;
pub mod validate;
pub mod verify;

pub use error::{Error, Result};
pub use model::{KernelKind, MergeMode, ModelFamily, ModelSpec};
pub use partition::{AggregateMode, ColorStats, Coloring};
pub use refine::{EquitablePair, FloatKeyPolicy};
pub use sparse::SparseMatrix;
