//! Empirical risk estimators and their gradients.
//!
//! For a removed class `k` the labeled/unlabeled (LU) estimator is
//!
//! ```text
//! l1 = Σ_{y≠k} π_y/n_y Σ_j ψ(α(x_j^y), y)
//! u  = 1/n_U Σ_j ψ(α(x_j^U), k)
//! l2 = Σ_{y≠k} π_y/n_y Σ_j ψ(α(x_j^y), k)
//! LU = l1 + u - l2            (or l1 + max(0, u - l2) when non-negative)
//! ```
//!
//! and the semi-supervised estimator is `γ·LU + (1-γ)·SV` where `SV` is the
//! ordinary labeled mean. `u - l2` estimates `π_k E[ψ(α(X), k) | Y = k]`, which
//! is never negative in expectation; the non-negative variant clamps it.
//!
//! Gradients are with respect to the flat parameter vector of
//! [`OrdinalModel::params`]: score weights first, then thresholds.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::losses::TaskSurrogate;
use crate::ordinal::{ClassPriors, LabelSpace, Labeled, OrdinalDataset, OrdinalModel};

#[derive(Debug, Clone, PartialEq)]
pub struct RiskSpec {
    pub surrogate: TaskSurrogate,
    /// 1-based class whose labeled term is rewritten through unlabeled data.
    pub removed_class: usize,
    pub gamma: f64,
    /// Weight of the threshold-order penalty.
    pub mu: f64,
    pub non_negative: bool,
    pub priors: ClassPriors,
}

impl RiskSpec {
    /// Purely supervised objective (`γ = 0`).
    pub fn supervised(surrogate: TaskSurrogate, mu: f64, priors: ClassPriors) -> Self {
        Self {
            surrogate,
            removed_class: 1,
            gamma: 0.0,
            mu,
            non_negative: false,
            priors,
        }
    }

    pub fn validate(&self, classes: LabelSpace) -> Result<()> {
        classes.check(self.removed_class)?;
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(invalid("gamma", format!("must lie in [0, 1], got {}", self.gamma)));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(invalid("mu", format!("must be finite and >= 0, got {}", self.mu)));
        }
        if self.priors.classes() != classes.classes() {
            return Err(Error::DimensionMismatch {
                expected: classes.classes(),
                got: self.priors.classes(),
            });
        }
        Ok(())
    }
}

/// Terms of an empirical risk evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RiskBreakdown {
    pub l1: f64,
    pub u: f64,
    pub l2: f64,
    pub sv: f64,
    pub total: f64,
}

impl RiskBreakdown {
    /// `u - l2`, the unclamped estimate of the removed class's contribution.
    pub fn bracket(&self) -> f64 {
        self.u - self.l2
    }
}

/// `π̂_y = n_y / n_L`.
pub fn estimate_priors(dataset: &OrdinalDataset) -> Result<ClassPriors> {
    priors_from_counts(&dataset.class_counts())
}

pub fn priors_from_counts(counts: &[usize]) -> Result<ClassPriors> {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return Err(Error::Empty("labeled set"));
    }
    let mut pi: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
    // absorb rounding so the entries sum to exactly 1
    let drift = 1.0 - pi.iter().sum::<f64>();
    if let Some(max) = pi.iter_mut().max_by(|a, b| a.total_cmp(b)) {
        *max += drift;
    }
    ClassPriors::new(pi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RemovalStrategy {
    /// Remove the class with the fewest labeled examples.
    Smallest,
    /// Remove the class with the most labeled examples; this minimizes the
    /// estimation-error bound.
    Bound,
    Fixed(usize),
}

impl fmt::Display for RemovalStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RemovalStrategy::Smallest => f.write_str("smallest"),
            RemovalStrategy::Bound => f.write_str("bound"),
            RemovalStrategy::Fixed(k) => write!(f, "fixed:{k}"),
        }
    }
}

impl FromStr for RemovalStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.to_ascii_lowercase();
        match s.as_str() {
            "smallest" => Ok(RemovalStrategy::Smallest),
            "bound" => Ok(RemovalStrategy::Bound),
            _ => s
                .strip_prefix("fixed:")
                .and_then(|k| k.parse().ok())
                .map(RemovalStrategy::Fixed)
                .ok_or_else(|| invalid("strategy", format!("expected smallest|bound|fixed:K, got `{s}`"))),
        }
    }
}

/// Picks the removed class from per-class labeled counts. Ties go to the
/// smallest class index.
pub fn select_removed_class(counts: &[usize], strategy: RemovalStrategy) -> Result<usize> {
    if counts.iter().sum::<usize>() == 0 {
        return Err(Error::Empty("labeled set"));
    }
    let classes = LabelSpace::new(counts.len())?;
    let pick = |better: fn(usize, usize) -> bool| {
        let mut best = 0;
        for (i, &c) in counts.iter().enumerate() {
            if better(c, counts[best]) {
                best = i;
            }
        }
        best + 1
    };
    match strategy {
        RemovalStrategy::Smallest => Ok(pick(|c, b| c < b)),
        RemovalStrategy::Bound => Ok(pick(|c, b| c > b)),
        RemovalStrategy::Fixed(k) => {
            classes.check(k)?;
            Ok(k)
        }
    }
}

/// `(1/n_L) Σ_j ψ(α(x_j), y_j)`.
pub fn supervised_risk(model: &OrdinalModel, labeled: &[Labeled], psi: TaskSurrogate) -> Result<f64> {
    if labeled.is_empty() {
        return Err(Error::Empty("labeled set"));
    }
    let classes = model.classes();
    let mut alpha = vec![0.0; classes.thresholds()];
    let mut total = 0.0;
    for s in labeled {
        classes.check(s.y)?;
        alpha_into(model, &s.x, &mut alpha)?;
        total += psi.value_unchecked(&alpha, s.y);
    }
    Ok(total / labeled.len() as f64)
}

/// LU estimator. `sv` is filled in as well; `total` is the LU value alone.
pub fn lu_risk(model: &OrdinalModel, dataset: &OrdinalDataset, spec: &RiskSpec) -> Result<RiskBreakdown> {
    let lu_spec = RiskSpec {
        gamma: 1.0,
        ..spec.clone()
    };
    Ok(evaluate(model, dataset, &lu_spec, false)?.breakdown)
}

/// `γ·LU + (1-γ)·SV`. At `γ = 0` the unlabeled pool is never touched.
pub fn semi_risk(model: &OrdinalModel, dataset: &OrdinalDataset, spec: &RiskSpec) -> Result<RiskBreakdown> {
    Ok(evaluate(model, dataset, spec, false)?.breakdown)
}

/// `μ · max{0, Σ_{i=1}^{K-2} -log(θ_{i+1} - θ_i)}`; `+∞` when some gap is not
/// positive, 0 when `μ = 0` or `K = 2`.
pub fn threshold_penalty(theta: &[f64], mu: f64) -> f64 {
    if mu == 0.0 || theta.len() < 2 {
        return 0.0;
    }
    let mut sum = 0.0;
    for w in theta.windows(2) {
        let gap = w[1] - w[0];
        if !(gap > 0.0) {
            return f64::INFINITY;
        }
        sum -= gap.ln();
    }
    mu * sum.max(0.0)
}

/// Gradient of [`threshold_penalty`] in `θ`, added into `out`. Zero on the flat
/// side of the clamp, including the boundary.
fn add_penalty_grad(theta: &[f64], mu: f64, out: &mut [f64]) {
    if mu == 0.0 || theta.len() < 2 {
        return;
    }
    let sum: f64 = theta.windows(2).map(|w| -(w[1] - w[0]).ln()).sum();
    if sum <= 0.0 {
        return;
    }
    for (i, w) in theta.windows(2).enumerate() {
        let inv = mu / (w[1] - w[0]);
        out[i] += inv;
        out[i + 1] -= inv;
    }
}

/// Semi-supervised risk plus order penalty, the quantity training minimizes
/// (before weight decay).
pub fn objective(model: &OrdinalModel, dataset: &OrdinalDataset, spec: &RiskSpec) -> Result<f64> {
    let risk = semi_risk(model, dataset, spec)?;
    Ok(risk.total + threshold_penalty(model.theta.as_slice(), spec.mu))
}

/// Gradient of [`objective`] over all model parameters.
///
/// With the non-negative estimator and `u - l2 < 0`, the bracket's gradient
/// is negated: the step pushes `u - l2` back up instead of following the flat
/// clamp.
pub fn risk_grad(model: &OrdinalModel, dataset: &OrdinalDataset, spec: &RiskSpec) -> Result<Vec<f64>> {
    Ok(objective_and_grad(model, dataset, spec)?.grad)
}

#[derive(Debug, Clone)]
pub struct ObjectiveEval {
    pub breakdown: RiskBreakdown,
    pub penalty: f64,
    pub grad: Vec<f64>,
}

impl ObjectiveEval {
    pub fn objective(&self) -> f64 {
        self.breakdown.total + self.penalty
    }
}

/// Value and gradient in one pass over the data.
pub fn objective_and_grad(
    model: &OrdinalModel,
    dataset: &OrdinalDataset,
    spec: &RiskSpec,
) -> Result<ObjectiveEval> {
    let penalty = threshold_penalty(model.theta.as_slice(), spec.mu);
    if penalty.is_infinite() {
        return Err(Error::InfeasibleThresholds);
    }
    let eval = evaluate(model, dataset, spec, true)?;
    let terms = eval.grads.expect("gradients requested");
    let b = eval.breakdown;
    let g = spec.gamma;
    let bracket_sign = if spec.non_negative && b.bracket() < 0.0 {
        -1.0
    } else {
        1.0
    };
    let mut grad: Vec<f64> = (0..model.n_params())
        .map(|i| {
            g * (terms.l1[i] + bracket_sign * (terms.u[i] - terms.l2[i])) + (1.0 - g) * terms.sv[i]
        })
        .collect();
    let nw = model.score.weights().len();
    add_penalty_grad(model.theta.as_slice(), spec.mu, &mut grad[nw..]);
    Ok(ObjectiveEval {
        breakdown: b,
        penalty,
        grad,
    })
}

struct TermGrads {
    l1: Vec<f64>,
    u: Vec<f64>,
    l2: Vec<f64>,
    sv: Vec<f64>,
}

struct Evaluation {
    breakdown: RiskBreakdown,
    grads: Option<TermGrads>,
}

/// Per-point scratch space for accumulating `scale · ∂ψ/∂params`.
struct Scratch {
    alpha: Vec<f64>,
    galpha: Vec<f64>,
    feat: Vec<f64>,
}

impl Scratch {
    fn new(model: &OrdinalModel) -> Self {
        Self {
            alpha: vec![0.0; model.theta.len()],
            galpha: vec![0.0; model.theta.len()],
            feat: vec![0.0; model.score.weights().len()],
        }
    }

    /// Adds `scale · ∇ψ(α(x), y)` into `grad`; `feat` must hold `φ(x)`.
    fn add_grad(&mut self, psi: TaskSurrogate, y: usize, scale: f64, grad: &mut [f64]) {
        self.galpha.iter_mut().for_each(|v| *v = 0.0);
        psi.accumulate_grad(&self.alpha, y, scale, &mut self.galpha);
        // α_i = θ_i - f(x): ∂α_i/∂θ_i = 1, ∂α_i/∂w = -φ(x)
        let df: f64 = -self.galpha.iter().sum::<f64>();
        let nw = self.feat.len();
        for (g, f) in grad[..nw].iter_mut().zip(&self.feat) {
            *g += df * f;
        }
        for (g, ga) in grad[nw..].iter_mut().zip(&self.galpha) {
            *g += ga;
        }
    }
}

fn alpha_into(model: &OrdinalModel, x: &[f64], alpha: &mut [f64]) -> Result<()> {
    let f = model.score.score(x)?;
    for (a, t) in alpha.iter_mut().zip(model.theta.as_slice()) {
        *a = t - f;
    }
    Ok(())
}

fn check_compat(model: &OrdinalModel, dataset: &OrdinalDataset, spec: &RiskSpec) -> Result<()> {
    if model.input_dim() != dataset.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            got: dataset.dim(),
        });
    }
    if model.classes() != dataset.classes() {
        return Err(Error::DimensionMismatch {
            expected: model.classes().classes(),
            got: dataset.classes().classes(),
        });
    }
    spec.validate(dataset.classes())
}

fn evaluate(
    model: &OrdinalModel,
    dataset: &OrdinalDataset,
    spec: &RiskSpec,
    with_grad: bool,
) -> Result<Evaluation> {
    check_compat(model, dataset, spec)?;
    let n_l = dataset.labeled.len();
    if n_l == 0 {
        return Err(Error::Empty("labeled set"));
    }
    let psi = spec.surrogate;
    let k = spec.removed_class;
    let use_lu = spec.gamma > 0.0;
    let counts = dataset.class_counts();
    if use_lu {
        if let Some(y) = (1..=counts.len()).find(|&y| y != k && counts[y - 1] == 0) {
            return Err(Error::MissingClass(y));
        }
        if dataset.unlabeled.is_empty() {
            return Err(Error::Empty("unlabeled set"));
        }
    }

    let np = model.n_params();
    let zeros = || if with_grad { vec![0.0; np] } else { Vec::new() };
    let mut grads = TermGrads {
        l1: zeros(),
        u: zeros(),
        l2: zeros(),
        sv: zeros(),
    };
    let mut b = RiskBreakdown::default();
    let mut s = Scratch::new(model);
    let inv_nl = 1.0 / n_l as f64;

    for p in &dataset.labeled {
        alpha_into(model, &p.x, &mut s.alpha)?;
        if with_grad {
            model.score.features_into(&p.x, &mut s.feat);
        }
        b.sv += psi.value_unchecked(&s.alpha, p.y);
        if with_grad {
            s.add_grad(psi, p.y, inv_nl, &mut grads.sv);
        }
        if use_lu && p.y != k {
            let w = spec.priors.get(p.y) / counts[p.y - 1] as f64;
            b.l1 += w * psi.value_unchecked(&s.alpha, p.y);
            b.l2 += w * psi.value_unchecked(&s.alpha, k);
            if with_grad {
                s.add_grad(psi, p.y, w, &mut grads.l1);
                s.add_grad(psi, k, w, &mut grads.l2);
            }
        }
    }
    b.sv /= n_l as f64;
    if use_lu {
        let inv_nu = 1.0 / dataset.unlabeled.len() as f64;
        for x in &dataset.unlabeled {
            alpha_into(model, x, &mut s.alpha)?;
            b.u += inv_nu * psi.value_unchecked(&s.alpha, k);
            if with_grad {
                model.score.features_into(x, &mut s.feat);
                s.add_grad(psi, k, inv_nu, &mut grads.u);
            }
        }
    }

    let bracket = if spec.non_negative {
        b.bracket().max(0.0)
    } else {
        b.bracket()
    };
    b.total = if !use_lu {
        b.sv
    } else if spec.gamma == 1.0 {
        b.l1 + bracket
    } else {
        spec.gamma * (b.l1 + bracket) + (1.0 - spec.gamma) * b.sv
    };
    Ok(Evaluation {
        breakdown: b,
        grads: with_grad.then_some(grads),
    })
}

/// `Var[LU] / Var[SV]` for a fixed model over bootstrap draws of `n_l`
/// labeled and `n_u` unlabeled points from the dataset's pools.
///
/// Draws whose labeled sample lacks a class other than the removed one are
/// redrawn. Per-point losses are computed once since the model is fixed.
pub fn variance_ratio(
    dataset: &OrdinalDataset,
    spec: &RiskSpec,
    model: &OrdinalModel,
    resamples: usize,
    sizes: (usize, usize),
    seed: u64,
) -> Result<f64> {
    check_compat(model, dataset, spec)?;
    let (n_l, n_u) = sizes;
    if resamples < 2 {
        return Err(invalid("resamples", "need at least 2"));
    }
    if n_l == 0 || n_u == 0 {
        return Err(invalid("sizes", "sample sizes must be positive"));
    }
    if dataset.labeled.is_empty() {
        return Err(Error::Empty("labeled pool"));
    }
    if dataset.unlabeled.is_empty() {
        return Err(Error::Empty("unlabeled pool"));
    }
    let psi = spec.surrogate;
    let k = spec.removed_class;
    let classes = dataset.classes().classes();
    let mut alpha = vec![0.0; classes - 1];

    // (label, ψ(α, y), ψ(α, k)) per labeled point; ψ(α, k) per unlabeled point
    let mut lab = Vec::with_capacity(dataset.labeled.len());
    for p in &dataset.labeled {
        alpha_into(model, &p.x, &mut alpha)?;
        lab.push((p.y, psi.value_unchecked(&alpha, p.y), psi.value_unchecked(&alpha, k)));
    }
    let mut unl = Vec::with_capacity(dataset.unlabeled.len());
    for x in &dataset.unlabeled {
        alpha_into(model, x, &mut alpha)?;
        unl.push(psi.value_unchecked(&alpha, k));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lu_vals = Vec::with_capacity(resamples);
    let mut sv_vals = Vec::with_capacity(resamples);
    let mut idx = vec![0usize; n_l];
    for _ in 0..resamples {
        let mut counts = vec![0usize; classes];
        let mut attempts = 0;
        loop {
            counts.iter_mut().for_each(|c| *c = 0);
            for i in idx.iter_mut() {
                *i = rng.random_range(0..lab.len());
                counts[lab[*i].0 - 1] += 1;
            }
            if (1..=classes).all(|y| y == k || counts[y - 1] > 0) {
                break;
            }
            attempts += 1;
            if attempts >= 1000 {
                return Err(Error::Degenerate(format!(
                    "could not draw {n_l} labeled points covering every class except {k}"
                )));
            }
        }
        let (mut sv, mut l1, mut l2) = (0.0, 0.0, 0.0);
        for &i in &idx {
            let (y, own, removed) = lab[i];
            sv += own;
            if y != k {
                let w = spec.priors.get(y) / counts[y - 1] as f64;
                l1 += w * own;
                l2 += w * removed;
            }
        }
        let u: f64 = (0..n_u).map(|_| unl[rng.random_range(0..unl.len())]).sum::<f64>() / n_u as f64;
        let bracket = if spec.non_negative { (u - l2).max(0.0) } else { u - l2 };
        lu_vals.push(l1 + bracket);
        sv_vals.push(sv / n_l as f64);
    }
    let var_sv = sample_variance(&sv_vals);
    if !(var_sv > 0.0) {
        return Err(Error::Degenerate(
            "supervised risk has zero variance across resamples".to_string(),
        ));
    }
    Ok(sample_variance(&lu_vals) / var_sv)
}

pub(crate) fn sample_variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
}
