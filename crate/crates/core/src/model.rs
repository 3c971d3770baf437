//! Model families and their hyperparameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    LinearRegression,
    Ridge,
    ElasticNet,
    LogisticBinary,
    LogisticMulticlass,
    KernelRidge,
    KernelLogistic,
}

impl ModelFamily {
    pub fn is_kernel(&self) -> bool {
        matches!(self, ModelFamily::KernelRidge | ModelFamily::KernelLogistic)
    }

    pub fn is_regression(&self) -> bool {
        matches!(
            self,
            ModelFamily::LinearRegression | ModelFamily::Ridge | ModelFamily::ElasticNet
        )
    }

    pub fn is_logistic(&self) -> bool {
        matches!(
            self,
            ModelFamily::LogisticBinary | ModelFamily::LogisticMulticlass
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum KernelKind {
    None,
    Linear,
    Rbf { gamma: f64 },
    Poly { degree: u32, coef0: f64 },
}

/// How samples sharing a row color are merged into reduced rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergeMode {
    /// One reduced row per distinct target value in the color; weights are
    /// summed per value. Preserves the objective exactly and keeps
    /// classification targets integral.
    PerLabel,
    /// One reduced row per color with the weighted-mean target (a
    /// probability row per class for multiclass). The squared-loss
    /// objective shifts by a target-only constant; cross-entropy is
    /// preserved exactly.
    MeanTarget,
}

/// An ERM family plus everything needed to reduce and solve an instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: ModelFamily,
    /// L1 penalty strength. Must be zero for kernel families.
    pub lambda1: f64,
    /// L2 penalty strength; for kernel families this is the coefficient of
    /// the `alpha^T K alpha` regularizer.
    pub lambda2: f64,
    pub n_classes: usize,
    pub kernel: KernelKind,
    pub merge_mode: MergeMode,
    pub standardize: bool,
    pub penalize_bias: bool,
}

impl ModelSpec {
    /// Defaults per family: regression merges by mean target (the formulas
    /// used by the closed-form checks), classification merges per label
    /// to keep integral targets. Standardization defaults on for primal
    /// families and is unavailable for kernel families.
    pub fn new(family: ModelFamily) -> Self {
        let merge_mode = if family.is_regression() {
            MergeMode::MeanTarget
        } else {
            MergeMode::PerLabel
        };
        ModelSpec {
            family,
            lambda1: 0.0,
            lambda2: 0.0,
            n_classes: 2,
            kernel: if family.is_kernel() {
                KernelKind::Linear
            } else {
                KernelKind::None
            },
            merge_mode,
            standardize: false,
            penalize_bias: false,
        }
    }

    pub fn with_lambda1(mut self, lambda1: f64) -> Self {
        self.lambda1 = lambda1;
        self
    }

    pub fn with_lambda2(mut self, lambda2: f64) -> Self {
        self.lambda2 = lambda2;
        self
    }

    pub fn with_classes(mut self, n_classes: usize) -> Self {
        self.n_classes = n_classes;
        self
    }

    pub fn with_kernel(mut self, kernel: KernelKind) -> Self {
        self.kernel = kernel;
        self
    }

    pub fn with_merge_mode(mut self, merge_mode: MergeMode) -> Self {
        self.merge_mode = merge_mode;
        self
    }

    pub fn with_standardize(mut self, standardize: bool) -> Self {
        self.standardize = standardize;
        self
    }

    pub fn with_penalize_bias(mut self, penalize_bias: bool) -> Self {
        self.penalize_bias = penalize_bias;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda1 < 0.0 || !self.lambda1.is_finite() {
            return Err(Error::Parameter(format!("lambda1 must be >= 0, got {}", self.lambda1)));
        }
        if self.lambda2 < 0.0 || !self.lambda2.is_finite() {
            return Err(Error::Parameter(format!("lambda2 must be >= 0, got {}", self.lambda2)));
        }
        if self.family.is_kernel() {
            if self.lambda1 != 0.0 {
                return Err(Error::Parameter(
                    "kernel families do not support an L1 penalty".into(),
                ));
            }
            if self.standardize {
                return Err(Error::Parameter(
                    "standardization applies to primal feature matrices only".into(),
                ));
            }
            if matches!(self.kernel, KernelKind::None) {
                return Err(Error::Parameter("kernel family requires a kernel kind".into()));
            }
        }
        if let KernelKind::Rbf { gamma } = self.kernel {
            if gamma <= 0.0 || !gamma.is_finite() {
                return Err(Error::Parameter(format!("rbf gamma must be > 0, got {gamma}")));
            }
        }
        if let KernelKind::Poly { degree, coef0 } = self.kernel {
            if degree == 0 {
                return Err(Error::Parameter("poly kernel degree must be >= 1".into()));
            }
            if !coef0.is_finite() {
                return Err(Error::Parameter("poly coef0 must be finite".into()));
            }
        }
        match self.family {
            ModelFamily::LogisticMulticlass => {
                if self.n_classes < 2 {
                    return Err(Error::Parameter(format!(
                        "multiclass requires at least 2 classes, got {}",
                        self.n_classes
                    )));
                }
            }
            ModelFamily::LogisticBinary | ModelFamily::KernelLogistic => {
                if self.n_classes != 2 {
                    return Err(Error::Parameter(format!(
                        "binary families require exactly 2 classes, got {}",
                        self.n_classes
                    )));
                }
            }
            _ => {}
        }
        Ok(())
    }
}
