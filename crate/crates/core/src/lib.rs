//! Semi-supervised ordinal regression by empirical risk minimization.
//!
//! Ordinal labels `1..=K` are predicted by thresholding a real-valued score
//! `f(x)` against an ordered vector `θ` of `K - 1` cut points. Training
//! minimizes a surrogate of the task risk. Besides the ordinary supervised
//! estimator, the crate provides an unbiased labeled/unlabeled estimator that
//! replaces one class's labeled term with an expression over unlabeled inputs,
//! its convex combination with the supervised estimator, and a non-negative
//! variant of it.
//!
//! Module map:
//!
//! - [`ordinal`]: labels, thresholds, the prediction rule, task losses and metrics
//! - [`losses`]: binary surrogates and task surrogates (AT, IT, LS, LAD)
//! - [`model`]: linear and Gaussian-kernel score functions, model files
//! - [`risk`]: risk estimators, gradients, class priors, removed-class strategies
//! - [`train`]: full-batch gradient descent with early stopping and grid search
//! - [`data`]: CSV loading, class merging, splitting, synthetic generators
//! - [`bench`]: the experiment harness behind the `semiord` binary

pub mod bench;
pub mod data;
pub mod error;
pub mod losses;
pub mod model;
pub mod ordinal;
pub mod risk;
pub mod train;

pub use error::{Error, Result};
pub use losses::{BinarySurrogate, TaskSurrogate};
pub use model::{ModelFamily, ScoreModel};
pub use ordinal::{
    ClassPriors, LabelSpace, Labeled, OrdinalDataset, OrdinalModel, TaskLoss, ThresholdVector,
};
pub use risk::{RemovalStrategy, RiskBreakdown, RiskSpec};
pub use train::{FitReport, TrainConfig};
