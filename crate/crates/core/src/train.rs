//! Full-batch gradient descent with early stopping, and hold-out grid search.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::model::{init_model, ModelFamily, ModelKind};
use crate::ordinal::{class_counts, Labeled, OrdinalDataset, OrdinalModel};
use crate::risk::{objective_and_grad, semi_risk, threshold_penalty, RiskSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Epochs without a validation improvement before stopping.
    pub patience: usize,
    /// L2 penalty on score weights (thresholds are not decayed).
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            patience: 20,
            weight_decay: 0.0,
            max_epochs: 2000,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid("lr", format!("must be finite and >= 0, got {}", self.learning_rate)));
        }
        if self.patience == 0 {
            return Err(invalid("patience", "must be at least 1"));
        }
        if self.max_epochs == 0 {
            return Err(invalid("max-epochs", "must be at least 1"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(invalid("weight-decay", format!("must be finite and >= 0, got {}", self.weight_decay)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    /// Parameters at the best validation epoch.
    pub model: OrdinalModel,
    /// `(epoch, objective)` evaluated before each step, weight decay included.
    pub train_curve: Vec<(usize, f64)>,
    /// `(epoch, validation risk)` after each step; epoch 0 is the initial model.
    pub val_curve: Vec<(usize, f64)>,
    pub stopped_epoch: usize,
    pub best_epoch: usize,
    pub best_val: f64,
    pub thresholds_ordered: bool,
}

/// Validation pool for the semi-supervised estimator: held-out labeled pairs
/// together with the training unlabeled inputs.
pub fn validation_set(train: &OrdinalDataset, val_labeled: Vec<Labeled>) -> Result<OrdinalDataset> {
    OrdinalDataset::new(val_labeled, train.unlabeled.clone(), train.classes(), train.dim())
}

/// Trains `model0` on `train`, stopping early on the risk of `val` under the
/// same estimator.
pub fn fit(
    train: &OrdinalDataset,
    val: &OrdinalDataset,
    spec: &RiskSpec,
    config: &TrainConfig,
    model0: OrdinalModel,
) -> Result<FitReport> {
    fit_with_log(train, val, spec, config, model0, None)
}

/// [`fit`] that also streams `epoch,objective,val_risk` CSV lines to `log`.
pub fn fit_with_log(
    train: &OrdinalDataset,
    val: &OrdinalDataset,
    spec: &RiskSpec,
    config: &TrainConfig,
    model0: OrdinalModel,
    mut log: Option<&mut dyn Write>,
) -> Result<FitReport> {
    config.validate()?;
    if val.labeled.is_empty() {
        return Err(Error::Empty("validation set"));
    }
    if threshold_penalty(model0.theta.as_slice(), spec.mu).is_infinite() {
        return Err(Error::InfeasibleThresholds);
    }
    let io = |e: std::io::Error| Error::Io {
        path: "<training log>".into(),
        source: e,
    };
    if let Some(w) = log.as_deref_mut() {
        writeln!(w, "epoch,objective,val_risk").map_err(io)?;
    }

    let mut model = model0;
    let nw = model.score.weights().len();
    let mut params = model.params();

    let val0 = semi_risk(&model, val, spec)?.total;
    if !val0.is_finite() {
        return Err(Error::Divergence { epoch: 0, value: val0 });
    }
    let mut best = (val0, params.clone(), 0usize);
    let mut val_curve = vec![(0, val0)];
    let mut train_curve = Vec::new();
    let mut since_best = 0;
    let mut stopped_epoch = config.max_epochs;

    for epoch in 1..=config.max_epochs {
        let eval = match objective_and_grad(&model, train, spec) {
            Ok(e) => e,
            Err(Error::InfeasibleThresholds) => {
                return Err(Error::Divergence {
                    epoch,
                    value: f64::INFINITY,
                })
            }
            Err(e) => return Err(e),
        };
        let decay = 0.5 * config.weight_decay * params[..nw].iter().map(|w| w * w).sum::<f64>();
        let obj = eval.objective() + decay;
        if !obj.is_finite() {
            return Err(Error::Divergence { epoch, value: obj });
        }
        train_curve.push((epoch, obj));

        for (i, (p, g)) in params.iter_mut().zip(&eval.grad).enumerate() {
            let g = if i < nw { g + config.weight_decay * *p } else { *g };
            *p -= config.learning_rate * g;
        }
        model.set_params(&params)?;

        let v = semi_risk(&model, val, spec)?.total;
        if !v.is_finite() {
            return Err(Error::Divergence { epoch, value: v });
        }
        val_curve.push((epoch, v));
        if let Some(w) = log.as_deref_mut() {
            writeln!(w, "{epoch},{obj},{v}").map_err(io)?;
        }
        if v < best.0 {
            best = (v, params.clone(), epoch);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                stopped_epoch = epoch;
                break;
            }
        }
    }

    model.set_params(&best.1)?;
    let ordered = model.theta.is_strictly_increasing();
    if !ordered && spec.mu > 0.0 {
        log::warn!("thresholds not strictly increasing after training: {:?}", model.theta.as_slice());
    }
    Ok(FitReport {
        model,
        train_curve,
        val_curve,
        stopped_epoch,
        best_epoch: best.2,
        best_val: best.0,
        thresholds_ordered: ordered,
    })
}

/// Hyperparameter grid. `bandwidths` is only consulted for kernel models.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub bandwidths: Vec<f64>,
    pub weight_decays: Vec<f64>,
}

impl Grid {
    pub fn weight_decays(weight_decays: Vec<f64>) -> Self {
        Self {
            bandwidths: Vec::new(),
            weight_decays,
        }
    }

    fn points(&self, family: ModelFamily) -> Result<Vec<(Option<f64>, f64)>> {
        if self.weight_decays.is_empty() {
            return Err(invalid("weight-decays", "grid is empty"));
        }
        let bandwidths: Vec<Option<f64>> = match family {
            ModelFamily::Linear => vec![None],
            ModelFamily::Kernel if self.bandwidths.is_empty() => {
                return Err(invalid("bandwidths", "kernel model needs at least one bandwidth"))
            }
            ModelFamily::Kernel => self.bandwidths.iter().copied().map(Some).collect(),
        };
        Ok(bandwidths
            .into_iter()
            .flat_map(|b| self.weight_decays.iter().map(move |&l| (b, l)))
            .collect())
    }
}

#[derive(Debug, Clone)]
pub struct GridScore {
    pub bandwidth: Option<f64>,
    pub weight_decay: f64,
    pub best_val: f64,
    pub best_epoch: usize,
}

#[derive(Debug, Clone)]
pub struct Selection {
    pub bandwidth: Option<f64>,
    pub weight_decay: f64,
    /// Refit on all labeled data.
    pub report: FitReport,
    pub scores: Vec<GridScore>,
}

fn model_for(
    family: ModelFamily,
    bandwidth: Option<f64>,
    labeled: &[Labeled],
    data: &OrdinalDataset,
) -> Result<OrdinalModel> {
    let kind = match (family, bandwidth) {
        (ModelFamily::Linear, _) => ModelKind::Linear,
        (ModelFamily::Kernel, Some(bandwidth)) => ModelKind::Kernel {
            centers: labeled.iter().map(|s| s.x.clone()).collect(),
            bandwidth,
        },
        (ModelFamily::Kernel, None) => return Err(invalid("bandwidth", "kernel model needs one")),
    };
    init_model(kind, data.dim(), data.classes())
}

/// Splits the labeled pool 2:1, trains one model per grid point on the larger
/// part, scores it on the smaller part (plus all unlabeled inputs) and refits
/// the winner on the whole pool.
///
/// The refit runs for the winner's best epoch count and is early-stopped on
/// the same hold-out part. Ties keep the earlier grid point.
pub fn select_hyperparams(
    dataset: &OrdinalDataset,
    spec: &RiskSpec,
    config: &TrainConfig,
    family: ModelFamily,
    grid: &Grid,
) -> Result<Selection> {
    let points = grid.points(family)?;
    let (fit_part, hold_part) = split_two_to_one(dataset, spec, config.seed)?;
    let train = OrdinalDataset::new(
        fit_part.clone(),
        dataset.unlabeled.clone(),
        dataset.classes(),
        dataset.dim(),
    )?;
    let val = validation_set(dataset, hold_part)?;

    let scores = points
        .par_iter()
        .map(|&(bandwidth, weight_decay)| {
            let model0 = model_for(family, bandwidth, &fit_part, dataset)?;
            let cfg = TrainConfig {
                weight_decay,
                ..config.clone()
            };
            let report = fit(&train, &val, spec, &cfg, model0)?;
            Ok(GridScore {
                bandwidth,
                weight_decay,
                best_val: report.best_val,
                best_epoch: report.best_epoch,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut winner = 0;
    for (i, s) in scores.iter().enumerate() {
        if s.best_val < scores[winner].best_val {
            winner = i;
        }
    }
    let chosen = scores[winner].clone();
    let model0 = model_for(family, chosen.bandwidth, &dataset.labeled, dataset)?;
    let cfg = TrainConfig {
        weight_decay: chosen.weight_decay,
        max_epochs: chosen.best_epoch.max(1),
        ..config.clone()
    };
    let report = fit(dataset, &val, spec, &cfg, model0)?;
    Ok(Selection {
        bandwidth: chosen.bandwidth,
        weight_decay: chosen.weight_decay,
        report,
        scores,
    })
}

/// Seeded 2:1 split of the labeled pool. When the semi-supervised term is
/// active both parts must contain every class except the removed one; up to
/// 10 reshuffles are tried.
fn split_two_to_one(
    dataset: &OrdinalDataset,
    spec: &RiskSpec,
    seed: u64,
) -> Result<(Vec<Labeled>, Vec<Labeled>)> {
    let n = dataset.labeled.len();
    if n < 3 {
        return Err(Error::Degenerate(format!(
            "need at least 3 labeled points for a 2:1 split, got {n}"
        )));
    }
    let n_hold = (n as f64 / 3.0).round() as usize;
    let classes = dataset.classes();
    let covers = |part: &[Labeled]| {
        if spec.gamma == 0.0 {
            return true;
        }
        let counts = class_counts(part, classes);
        (1..=classes.classes()).all(|y| y == spec.removed_class || counts[y - 1] > 0)
    };
    for attempt in 0..10u64 {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt)));
        let hold: Vec<Labeled> = order[..n_hold].iter().map(|&i| dataset.labeled[i].clone()).collect();
        let fit: Vec<Labeled> = order[n_hold..].iter().map(|&i| dataset.labeled[i].clone()).collect();
        if covers(&fit) && covers(&hold) {
            return Ok((fit, hold));
        }
    }
    Err(Error::Degenerate(
        "no 2:1 split with every non-removed class on both sides after 10 attempts".to_string(),
    ))
}
