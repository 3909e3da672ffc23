//! Ordinal label spaces, the threshold prediction rule and task losses.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::ScoreModel;

/// The ordered label set `{1, ..., K}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LabelSpace(usize);

impl LabelSpace {
    pub fn new(classes: usize) -> Result<Self> {
        if classes < 2 {
            return Err(Error::TooFewClasses(classes));
        }
        Ok(Self(classes))
    }

    pub fn classes(self) -> usize {
        self.0
    }

    /// Number of thresholds, `K - 1`.
    pub fn thresholds(self) -> usize {
        self.0 - 1
    }

    pub fn check(self, label: usize) -> Result<()> {
        if label == 0 || label > self.0 {
            return Err(Error::LabelOutOfRange {
                label,
                classes: self.0,
            });
        }
        Ok(())
    }
}

/// One labeled example. Labels are 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct Labeled {
    pub x: Vec<f64>,
    pub y: usize,
}

impl Labeled {
    pub fn new(x: Vec<f64>, y: usize) -> Self {
        Self { x, y }
    }
}

/// Labeled pairs plus unlabeled inputs over a common label space.
#[derive(Debug, Clone, PartialEq)]
pub struct OrdinalDataset {
    pub labeled: Vec<Labeled>,
    pub unlabeled: Vec<Vec<f64>>,
    classes: LabelSpace,
    dim: usize,
}

impl OrdinalDataset {
    /// Validates dimensions and label ranges. Either pool may be empty; the
    /// estimators check what they need.
    pub fn new(
        labeled: Vec<Labeled>,
        unlabeled: Vec<Vec<f64>>,
        classes: LabelSpace,
        dim: usize,
    ) -> Result<Self> {
        for s in &labeled {
            if s.x.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: s.x.len(),
                });
            }
            classes.check(s.y)?;
        }
        if let Some(x) = unlabeled.iter().find(|x| x.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: x.len(),
            });
        }
        Ok(Self {
            labeled,
            unlabeled,
            classes,
            dim,
        })
    }

    pub fn classes(&self) -> LabelSpace {
        self.classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `n_y` for `y = 1..=K`, stored at index `y - 1`.
    pub fn class_counts(&self) -> Vec<usize> {
        class_counts(&self.labeled, self.classes)
    }

    /// Same data with a different unlabeled pool.
    pub fn with_unlabeled(&self, unlabeled: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(self.labeled.clone(), unlabeled, self.classes, self.dim)
    }
}

pub(crate) fn class_counts(labeled: &[Labeled], classes: LabelSpace) -> Vec<usize> {
    let mut counts = vec![0; classes.classes()];
    for s in labeled {
        counts[s.y - 1] += 1;
    }
    counts
}

/// Class-prior probabilities `π_1..π_K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassPriors(Vec<f64>);

impl ClassPriors {
    pub fn new(pi: Vec<f64>) -> Result<Self> {
        if pi.len() < 2 {
            return Err(Error::TooFewClasses(pi.len()));
        }
        if pi.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(invalid("priors", format!("entries must lie in [0, 1]: {pi:?}")));
        }
        let sum: f64 = pi.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(invalid("priors", format!("entries sum to {sum}, not 1")));
        }
        Ok(Self(pi))
    }

    pub fn uniform(classes: LabelSpace) -> Self {
        let k = classes.classes();
        Self(vec![1.0 / k as f64; k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Prior of 1-based class `y`.
    pub fn get(&self, y: usize) -> f64 {
        self.0[y - 1]
    }

    pub fn classes(&self) -> usize {
        self.0.len()
    }
}

/// Cut points `θ_1..θ_{K-1}`. Ordering is not enforced here; training
/// encourages it through the order penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdVector(pub Vec<f64>);

impl ThresholdVector {
    pub fn new(theta: Vec<f64>) -> Self {
        Self(theta)
    }

    /// `θ_i = -1 + 2i/K`, evenly spaced inside `(-1, 1)`.
    pub fn evenly_spaced(classes: LabelSpace) -> Self {
        let k = classes.classes() as f64;
        Self(
            (1..classes.classes())
                .map(|i| -1.0 + 2.0 * i as f64 / k)
                .collect(),
        )
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `θ_1 ≤ θ_2 ≤ ... ≤ θ_{K-1}`.
    pub fn is_ordered(&self) -> bool {
        self.0.windows(2).all(|w| w[0] <= w[1])
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.0.windows(2).all(|w| w[0] < w[1])
    }
}

/// A score function together with its thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct OrdinalModel {
    pub score: ScoreModel,
    pub theta: ThresholdVector,
}

impl OrdinalModel {
    pub fn new(score: ScoreModel, theta: ThresholdVector) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::TooFewClasses(theta.len() + 1));
        }
        Ok(Self { score, theta })
    }

    pub fn classes(&self) -> LabelSpace {
        LabelSpace(self.theta.len() + 1)
    }

    pub fn input_dim(&self) -> usize {
        self.score.input_dim()
    }

    /// `1 + #{i : f(x) > θ_i}`. Ties stay below the threshold.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(predict_from_score(self.score.score(x)?, self.theta.as_slice()))
    }

    /// `α_i = θ_i - f(x)`.
    pub fn alpha(&self, x: &[f64]) -> Result<Vec<f64>> {
        let f = self.score.score(x)?;
        Ok(self.theta.0.iter().map(|t| t - f).collect())
    }

    /// Number of trainable parameters: score weights followed by thresholds.
    pub fn n_params(&self) -> usize {
        self.score.weights().len() + self.theta.len()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = self.score.weights().to_vec();
        p.extend_from_slice(self.theta.as_slice());
        p
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                expected: self.n_params(),
                got: params.len(),
            });
        }
        let nw = self.score.weights().len();
        self.score.weights_mut().copy_from_slice(&params[..nw]);
        self.theta.0.copy_from_slice(&params[nw..]);
        Ok(())
    }
}

pub fn predict_from_score(score: f64, theta: &[f64]) -> usize {
    1 + theta.iter().filter(|&&t| score > t).count()
}

/// Evaluation losses on predicted labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TaskLoss {
    Absolute,
    ZeroOne,
    Squared,
}

impl TaskLoss {
    pub fn value(self, predicted: usize, y: usize, classes: LabelSpace) -> Result<f64> {
        classes.check(predicted)?;
        classes.check(y)?;
        let diff = predicted.abs_diff(y) as f64;
        Ok(match self {
            TaskLoss::Absolute => diff,
            TaskLoss::ZeroOne => f64::from(u8::from(predicted != y)),
            TaskLoss::Squared => diff * diff,
        })
    }

    /// Short metric name used in reports.
    pub fn metric_name(self) -> &'static str {
        match self {
            TaskLoss::Absolute => "MAE",
            TaskLoss::ZeroOne => "MZE",
            TaskLoss::Squared => "MSE",
        }
    }
}

impl fmt::Display for TaskLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.metric_name())
    }
}

impl FromStr for TaskLoss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mae" | "absolute" => Ok(TaskLoss::Absolute),
            "mze" | "zero-one" | "zero_one" => Ok(TaskLoss::ZeroOne),
            "mse" | "squared" => Ok(TaskLoss::Squared),
            other => Err(invalid("metric", format!("unknown metric `{other}`"))),
        }
    }
}

/// The absolute loss written through `α`:
/// `Σ_{i<y} 1[α_i ≥ 0] + Σ_{i≥y} 1[α_i < 0]`.
pub fn absolute_loss_decomposed(alpha: &[f64], y: usize) -> Result<f64> {
    let classes = LabelSpace::new(alpha.len() + 1)?;
    classes.check(y)?;
    let below = alpha[..y - 1].iter().filter(|&&a| a >= 0.0).count();
    let above = alpha[y - 1..].iter().filter(|&&a| a < 0.0).count();
    Ok((below + above) as f64)
}

/// Zero-one loss in threshold form, `1[f ≤ θ_{y-1}] + 1[f > θ_y]` with
/// `θ_0 = -∞` and `θ_K = +∞`.
pub fn zero_one_threshold_form(score: f64, theta: &[f64], y: usize) -> Result<f64> {
    let classes = LabelSpace::new(theta.len() + 1)?;
    classes.check(y)?;
    let lower = if y == 1 { f64::NEG_INFINITY } else { theta[y - 2] };
    let upper = if y == classes.classes() {
        f64::INFINITY
    } else {
        theta[y - 1]
    };
    Ok(f64::from(u8::from(score <= lower)) + f64::from(u8::from(score > upper)))
}

/// Mean task loss of `model` over `test`.
pub fn evaluate_metric(model: &OrdinalModel, test: &[Labeled], kind: TaskLoss) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let classes = model.classes();
    let mut total = 0.0;
    for s in test {
        total += kind.value(model.predict(&s.x)?, s.y, classes)?;
    }
    Ok(total / test.len() as f64)
}
