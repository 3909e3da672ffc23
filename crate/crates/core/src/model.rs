//! Score functions `f(x)` that are linear in their trainable weights.
//!
//! Two families: an affine model over the raw inputs (`w·x + b`) and a
//! Gaussian-kernel expansion over fixed centers. Bandwidth and centers are
//! chosen before training and never updated.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::ordinal::{LabelSpace, OrdinalModel, ThresholdVector};

/// Multipliers applied to the median pairwise distance.
pub const BANDWIDTH_FACTORS: [f64; 6] = [0.125, 0.25, 0.5, 1.0, 1.5, 2.0];

#[derive(Debug, Clone, PartialEq)]
pub enum ScoreModel {
    /// `weights[..d]·x + weights[d]`.
    Linear { weights: Vec<f64> },
    /// `Σ_i weights[i] · exp(-‖x - centers[i]‖² / (2σ²))`.
    Kernel {
        weights: Vec<f64>,
        centers: Vec<Vec<f64>>,
        bandwidth: f64,
    },
}

impl ScoreModel {
    /// Affine model; the last weight is the bias.
    pub fn linear(weights: Vec<f64>) -> Self {
        assert!(!weights.is_empty(), "linear model needs at least a bias weight");
        ScoreModel::Linear { weights }
    }

    pub fn kernel(centers: Vec<Vec<f64>>, weights: Vec<f64>, bandwidth: f64) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::Empty("kernel centers"));
        }
        if weights.len() != centers.len() {
            return Err(Error::DimensionMismatch {
                expected: centers.len(),
                got: weights.len(),
            });
        }
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(invalid("bandwidth", format!("must be positive, got {bandwidth}")));
        }
        let d = centers[0].len();
        if let Some(c) = centers.iter().find(|c| c.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: c.len(),
            });
        }
        Ok(ScoreModel::Kernel {
            weights,
            centers,
            bandwidth,
        })
    }

    pub fn family(&self) -> ModelFamily {
        match self {
            ScoreModel::Linear { .. } => ModelFamily::Linear,
            ScoreModel::Kernel { .. } => ModelFamily::Kernel,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            ScoreModel::Linear { weights } => weights.len() - 1,
            ScoreModel::Kernel { centers, .. } => centers[0].len(),
        }
    }

    pub fn weights(&self) -> &[f64] {
        match self {
            ScoreModel::Linear { weights } | ScoreModel::Kernel { weights, .. } => weights,
        }
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        match self {
            ScoreModel::Linear { weights } | ScoreModel::Kernel { weights, .. } => weights,
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn score(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.score_unchecked(x))
    }

    pub(crate) fn score_unchecked(&self, x: &[f64]) -> f64 {
        match self {
            ScoreModel::Linear { weights } => {
                let (w, b) = weights.split_at(x.len());
                dot(w, x) + b[0]
            }
            ScoreModel::Kernel {
                weights,
                centers,
                bandwidth,
            } => {
                let denom = 2.0 * bandwidth * bandwidth;
                weights
                    .iter()
                    .zip(centers)
                    .map(|(w, c)| w * (-sq_dist(x, c) / denom).exp())
                    .sum()
            }
        }
    }

    /// `∂f/∂weights`, which for both families is the feature map `φ(x)`.
    pub fn score_grad_params(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let mut out = vec![0.0; self.weights().len()];
        self.features_into(x, &mut out);
        Ok(out)
    }

    pub(crate) fn features_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            ScoreModel::Linear { .. } => {
                out[..x.len()].copy_from_slice(x);
                out[x.len()] = 1.0;
            }
            ScoreModel::Kernel {
                centers, bandwidth, ..
            } => {
                let denom = 2.0 * bandwidth * bandwidth;
                for (o, c) in out.iter_mut().zip(centers) {
                    *o = (-sq_dist(x, c) / denom).exp();
                }
            }
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelFamily {
    Linear,
    Kernel,
}

impl ModelFamily {
    pub fn name(self) -> &'static str {
        match self {
            ModelFamily::Linear => "linear",
            ModelFamily::Kernel => "kernel",
        }
    }
}

impl FromStr for ModelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(ModelFamily::Linear),
            "kernel" => Ok(ModelFamily::Kernel),
            other => Err(invalid("model", format!("unknown model family `{other}`"))),
        }
    }
}

/// What to build in [`init_model`].
#[derive(Debug, Clone)]
pub enum ModelKind {
    Linear,
    Kernel {
        centers: Vec<Vec<f64>>,
        bandwidth: f64,
    },
}

/// Zero weights and thresholds `θ_i = -1 + 2i/K`.
pub fn init_model(kind: ModelKind, dim: usize, classes: LabelSpace) -> Result<OrdinalModel> {
    let score = match kind {
        ModelKind::Linear => ScoreModel::linear(vec![0.0; dim + 1]),
        ModelKind::Kernel { centers, bandwidth } => {
            let n = centers.len();
            let m = ScoreModel::kernel(centers, vec![0.0; n], bandwidth)?;
            if m.input_dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: m.input_dim(),
                });
            }
            m
        }
    };
    OrdinalModel::new(score, ThresholdVector::evenly_spaced(classes))
}

/// Like [`init_model`] but with standard-normal weights drawn from `seed`.
pub fn random_model(
    kind: ModelKind,
    dim: usize,
    classes: LabelSpace,
    seed: u64,
) -> Result<OrdinalModel> {
    let mut model = init_model(kind, dim, classes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for w in model.score.weights_mut() {
        *w = StandardNormal.sample(&mut rng);
    }
    Ok(model)
}

/// `{1/8, 1/4, 1/2, 1, 3/2, 2}` times the median distance over unordered
/// pairs `i < j`.
pub fn median_bandwidth_candidates(inputs: &[Vec<f64>]) -> Result<[f64; 6]> {
    if inputs.len() < 2 {
        return Err(Error::Degenerate(format!(
            "median heuristic needs at least 2 inputs, got {}",
            inputs.len()
        )));
    }
    let mut dists = Vec::with_capacity(inputs.len() * (inputs.len() - 1) / 2);
    for (i, a) in inputs.iter().enumerate() {
        for b in &inputs[i + 1..] {
            dists.push(sq_dist(a, b).sqrt());
        }
    }
    dists.sort_by(f64::total_cmp);
    let n = dists.len();
    let median = if n % 2 == 1 {
        dists[n / 2]
    } else {
        0.5 * (dists[n / 2 - 1] + dists[n / 2])
    };
    if !(median > 0.0) {
        return Err(Error::Degenerate(
            "median pairwise distance is zero".to_string(),
        ));
    }
    Ok(BANDWIDTH_FACTORS.map(|f| f * median))
}

/// Flat text form: one record per line, fields comma-separated.
///
/// ```text
/// kind,kernel
/// d,2
/// K,3
/// theta,-0.5,0.5
/// weights,0.1,0.2
/// sigma,1.5
/// center,0,0
/// center,1,1
/// ```
///
/// Floats use the shortest decimal form that parses back to the same bits.
pub fn model_to_text(model: &OrdinalModel) -> String {
    let mut s = String::new();
    let join = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x}"))
            .collect::<Vec<_>>()
            .join(",")
    };
    let _ = writeln!(s, "kind,{}", model.score.family().name());
    let _ = writeln!(s, "d,{}", model.input_dim());
    let _ = writeln!(s, "K,{}", model.classes().classes());
    let _ = writeln!(s, "theta,{}", join(model.theta.as_slice()));
    let _ = writeln!(s, "weights,{}", join(model.score.weights()));
    if let ScoreModel::Kernel {
        centers, bandwidth, ..
    } = &model.score
    {
        let _ = writeln!(s, "sigma,{bandwidth}");
        for c in centers {
            let _ = writeln!(s, "center,{}", join(c));
        }
    }
    s
}

pub fn model_from_text(text: &str) -> Result<OrdinalModel> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let mut record = |tag: &str| -> Result<Vec<String>> {
        let line = lines
            .next()
            .ok_or_else(|| Error::ModelFormat(format!("missing `{tag}` record")))?;
        let mut fields = line.split(',').map(|f| f.trim().to_string());
        let head = fields.next().unwrap_or_default();
        if head != tag {
            return Err(Error::ModelFormat(format!("expected `{tag}`, found `{head}`")));
        }
        Ok(fields.collect())
    };
    let floats = |v: Vec<String>| -> Result<Vec<f64>> {
        v.iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::ModelFormat(format!("bad number `{f}`")))
            })
            .collect()
    };
    let single = |v: Vec<String>, tag: &str| -> Result<String> {
        match v.as_slice() {
            [one] => Ok(one.clone()),
            _ => Err(Error::ModelFormat(format!("`{tag}` takes one value"))),
        }
    };
    let int = |s: String| -> Result<usize> {
        s.parse()
            .map_err(|_| Error::ModelFormat(format!("bad integer `{s}`")))
    };

    let family: ModelFamily = single(record("kind")?, "kind")?
        .parse()
        .map_err(|_| Error::ModelFormat("unknown kind".into()))?;
    let d = int(single(record("d")?, "d")?)?;
    let k = int(single(record("K")?, "K")?)?;
    let classes = LabelSpace::new(k)?;
    let theta = floats(record("theta")?)?;
    if theta.len() != classes.thresholds() {
        return Err(Error::ModelFormat(format!(
            "expected {} thresholds, found {}",
            classes.thresholds(),
            theta.len()
        )));
    }
    let weights = floats(record("weights")?)?;
    let score = match family {
        ModelFamily::Linear => {
            if weights.len() != d + 1 {
                return Err(Error::ModelFormat(format!(
                    "linear model with d={d} needs {} weights, found {}",
                    d + 1,
                    weights.len()
                )));
            }
            ScoreModel::linear(weights)
        }
        ModelFamily::Kernel => {
            let sigma = floats(record("sigma")?)?;
            let [bandwidth] = sigma[..] else {
                return Err(Error::ModelFormat("`sigma` takes one value".into()));
            };
            let mut centers = Vec::with_capacity(weights.len());
            for _ in 0..weights.len() {
                let c = floats(record("center")?)?;
                if c.len() != d {
                    return Err(Error::ModelFormat(format!(
                        "center has {} coordinates, expected {d}",
                        c.len()
                    )));
                }
                centers.push(c);
            }
            ScoreModel::kernel(centers, weights, bandwidth)?
        }
    };
    if lines.next().is_some() {
        return Err(Error::ModelFormat("trailing records".into()));
    }
    OrdinalModel::new(score, ThresholdVector::new(theta))
}

pub fn save_model(model: &OrdinalModel, path: &Path) -> Result<()> {
    fs::write(path, model_to_text(model)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_model(path: &Path) -> Result<OrdinalModel> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    model_from_text(&text)
}
