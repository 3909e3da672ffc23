//! Experiment harness: single runs, the variance-ratio table and multi-trial
//! benchmarks with per-trial JSON lines and a summary CSV.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{make_splits, RawTable, SplitSpec, Standardizer};
use crate::error::{invalid, Error, Result};
use crate::losses::TaskSurrogate;
use crate::model::{median_bandwidth_candidates, random_model, ModelFamily, ModelKind};
use crate::ordinal::{evaluate_metric, LabelSpace, Labeled, OrdinalDataset, OrdinalModel, TaskLoss};
use crate::risk::{
    estimate_priors, priors_from_counts, select_removed_class, variance_ratio, RemovalStrategy,
    RiskSpec,
};
use crate::train::{select_hyperparams, Grid, Selection, TrainConfig};

/// How the removed class is chosen, or none at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Supervised risk only.
    Sv,
    /// Removes the class with the fewest labeled points.
    Semi1,
    /// Removes the class with the lowest estimation-error bound.
    Semi2,
}

impl Variant {
    pub fn strategy(self) -> Option<RemovalStrategy> {
        match self {
            Variant::Sv => None,
            Variant::Semi1 => Some(RemovalStrategy::Smallest),
            Variant::Semi2 => Some(RemovalStrategy::Bound),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Variant::Sv => "sv",
            Variant::Semi1 => "semi1",
            Variant::Semi2 => "semi2",
        }
    }
}

/// A variant paired with a score family, written `semi2-linear` and so on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Method {
    pub variant: Variant,
    pub family: ModelFamily,
}

impl Method {
    /// Parses `sv|semi1|semi2` with an optional `-linear|-kernel` suffix;
    /// `default_family` fills in a missing suffix.
    pub fn parse(s: &str, default_family: ModelFamily) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let (v, fam) = match s.split_once('-') {
            Some((v, f)) => (v.to_string(), f.parse()?),
            None => (s.clone(), default_family),
        };
        let variant = match v.as_str() {
            "sv" => Variant::Sv,
            "semi1" => Variant::Semi1,
            "semi2" => Variant::Semi2,
            _ => return Err(invalid("method", format!("unknown method `{s}`"))),
        };
        Ok(Self {
            variant,
            family: fam,
        })
    }

    pub fn parse_list(s: &str, default_family: ModelFamily) -> Result<Vec<Self>> {
        let methods = s
            .split(',')
            .filter(|m| !m.trim().is_empty())
            .map(|m| Self::parse(m, default_family))
            .collect::<Result<Vec<_>>>()?;
        if methods.is_empty() {
            return Err(invalid("methods", "no method given"));
        }
        Ok(methods)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.variant.name(), self.family.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s, ModelFamily::Linear)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub dataset: String,
    pub method: String,
    pub surrogate: String,
    pub metric: String,
    pub value: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub dataset: String,
    pub method: String,
    pub surrogate: String,
    pub seed: u64,
    pub error: String,
}

/// One JSON line of benchmark output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TrialLine {
    Ok(TrialResult),
    Failed(TrialFailure),
}

impl TrialLine {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("trial lines always serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub dataset: String,
    pub method: String,
    pub surrogate: String,
    pub metric: String,
    pub mean: f64,
    /// Sample standard deviation over `sqrt(n_trials)`; 0 for a single trial.
    pub stderr: f64,
    pub n_trials: usize,
    #[serde(skip)]
    pub n_failed: usize,
    #[serde(skip)]
    values: Vec<f64>,
}

/// Everything a run needs besides the data and the method.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub dataset: String,
    pub split: SplitSpec,
    pub surrogate: TaskSurrogate,
    /// Overrides the metric paired with the surrogate.
    pub metric: Option<TaskLoss>,
    pub gamma: f64,
    pub mu: f64,
    pub non_negative: bool,
    /// Overrides the method's removal strategy for semi-supervised methods.
    pub strategy: Option<RemovalStrategy>,
    pub train: TrainConfig,
    pub weight_decays: Vec<f64>,
}

impl Experiment {
    pub fn new(dataset: impl Into<String>, surrogate: TaskSurrogate) -> Self {
        Self {
            dataset: dataset.into(),
            split: SplitSpec::default(),
            surrogate,
            metric: None,
            gamma: 0.8,
            mu: 10.0,
            non_negative: true,
            strategy: None,
            train: TrainConfig::default(),
            weight_decays: vec![0.1, 0.01, 0.001],
        }
    }

    pub fn metric(&self) -> TaskLoss {
        self.metric.unwrap_or(self.surrogate.paired_metric())
    }

    /// Risk specification a method trains under on `train`.
    pub fn risk_spec(&self, method: Method, train: &OrdinalDataset) -> Result<RiskSpec> {
        let priors = estimate_priors(train)?;
        let spec = match method.variant.strategy() {
            None => RiskSpec::supervised(self.surrogate, self.mu, priors),
            Some(default) => {
                let strategy = self.strategy.unwrap_or(default);
                RiskSpec {
                    surrogate: self.surrogate,
                    removed_class: select_removed_class(&train.class_counts(), strategy)?,
                    gamma: self.gamma,
                    mu: self.mu,
                    non_negative: self.non_negative,
                    priors,
                }
            }
        };
        spec.validate(train.classes())?;
        Ok(spec)
    }
}

/// Outcome of training one method on one split.
#[derive(Debug, Clone)]
pub struct Run {
    pub method: Method,
    pub spec: RiskSpec,
    pub selection: Selection,
    pub value: f64,
}

impl Run {
    pub fn model(&self) -> &OrdinalModel {
        &self.selection.report.model
    }
}

/// Selects hyperparameters, refits and scores one method on a split.
pub fn run_method(
    train: &OrdinalDataset,
    test: &[Labeled],
    method: Method,
    exp: &Experiment,
    seed: u64,
) -> Result<Run> {
    let spec = exp.risk_spec(method, train)?;
    let bandwidths = match method.family {
        ModelFamily::Linear => Vec::new(),
        ModelFamily::Kernel => {
            let inputs: Vec<Vec<f64>> = train.labeled.iter().map(|p| p.x.clone()).collect();
            median_bandwidth_candidates(&inputs)?.to_vec()
        }
    };
    let grid = Grid {
        bandwidths,
        weight_decays: exp.weight_decays.clone(),
    };
    let config = TrainConfig {
        seed,
        ..exp.train.clone()
    };
    let selection = select_hyperparams(train, &spec, &config, method.family, &grid)?;
    let value = evaluate_metric(&selection.report.model, test, exp.metric())?;
    Ok(Run {
        method,
        spec,
        selection,
        value,
    })
}

/// Trial `t` of a benchmark: resplit with seed `exp.split.seed + t` and run
/// every method. Failures become [`TrialLine::Failed`].
pub fn run_trial(table: &RawTable, exp: &Experiment, methods: &[Method], t: u64) -> Vec<TrialLine> {
    let seed = exp.split.seed.wrapping_add(t);
    let failed = |m: &Method, e: &Error| {
        TrialLine::Failed(TrialFailure {
            dataset: exp.dataset.clone(),
            method: m.to_string(),
            surrogate: exp.surrogate.short_name().to_string(),
            seed,
            error: e.to_string(),
        })
    };
    let split = SplitSpec {
        seed,
        ..exp.split.clone()
    };
    let (train, test) = match make_splits(table, &split) {
        Ok(s) => s,
        Err(e) => return methods.iter().map(|m| failed(m, &e)).collect(),
    };
    methods
        .iter()
        .map(|&m| match run_method(&train, &test, m, exp, seed) {
            Ok(run) => TrialLine::Ok(TrialResult {
                dataset: exp.dataset.clone(),
                method: m.to_string(),
                surrogate: exp.surrogate.short_name().to_string(),
                metric: exp.metric().metric_name().to_string(),
                value: run.value,
                seed,
            }),
            Err(e) => failed(&m, &e),
        })
        .collect()
}

/// Trials `1..=trials` in parallel; output is ordered by trial, then method.
pub fn run_bench(table: &RawTable, exp: &Experiment, methods: &[Method], trials: usize) -> Vec<TrialLine> {
    (1..=trials as u64)
        .into_par_iter()
        .map(|t| run_trial(table, exp, methods, t))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// Groups successful trials by (dataset, method, surrogate) in order of first
/// appearance. Failed trials only increment `n_failed`.
pub fn summarize(lines: &[TrialLine]) -> Vec<SummaryRow> {
    let mut rows: Vec<SummaryRow> = Vec::new();
    let mut index: BTreeMap<(String, String, String), usize> = BTreeMap::new();
    for line in lines {
        let (dataset, method, surrogate) = match line {
            TrialLine::Ok(r) => (&r.dataset, &r.method, &r.surrogate),
            TrialLine::Failed(f) => (&f.dataset, &f.method, &f.surrogate),
        };
        let key = (dataset.clone(), method.clone(), surrogate.clone());
        let i = *index.entry(key).or_insert_with(|| {
            rows.push(SummaryRow {
                dataset: dataset.clone(),
                method: method.clone(),
                surrogate: surrogate.clone(),
                metric: String::new(),
                mean: f64::NAN,
                stderr: f64::NAN,
                n_trials: 0,
                n_failed: 0,
                values: Vec::new(),
            });
            rows.len() - 1
        });
        match line {
            TrialLine::Ok(r) => {
                rows[i].metric = r.metric.clone();
                rows[i].values.push(r.value);
            }
            TrialLine::Failed(_) => rows[i].n_failed += 1,
        }
    }
    for row in &mut rows {
        let n = row.values.len();
        row.n_trials = n;
        if n > 0 {
            let (mean, stderr) = mean_stderr(&row.values);
            row.mean = mean;
            row.stderr = stderr;
        }
    }
    rows
}

/// Mean and standard error (sample sd over `sqrt(n)`, 0 when `n = 1`).
pub fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Welch's t statistic for `mean(a) - mean(b)`; `None` when undefined.
pub fn welch_t(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() < 2 || b.len() < 2 {
        return None;
    }
    let (ma, sa) = mean_stderr(a);
    let (mb, sb) = mean_stderr(b);
    let se = (sa * sa + sb * sb).sqrt();
    (se > 0.0).then(|| (ma - mb) / se)
}

impl SummaryRow {
    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// `dataset,method,surrogate,metric,mean,stderr,n_trials`, skipping groups
/// where every trial failed.
pub fn write_summary<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let to_err = |e: csv::Error| Error::Degenerate(format!("writing summary: {e}"));
    for row in rows.iter().filter(|r| r.n_trials > 0) {
        w.serialize(row).map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: "<summary>".into(),
        source: e,
    })
}

/// Failure counts and Welch t statistics against the supervised method of
/// the same model family: `dataset,method,surrogate,metric,n_failed,t_vs_sv`.
pub fn write_stats<W: Write>(rows: &[SummaryRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "dataset,method,surrogate,metric,n_failed,t_vs_sv")?;
    for row in rows {
        let family = row.method.split_once('-').map_or("", |(_, f)| f);
        let baseline = rows.iter().find(|r| {
            r.dataset == row.dataset && r.surrogate == row.surrogate && r.method == format!("sv-{family}")
        });
        let t = match baseline {
            Some(b) if b.method != row.method => welch_t(&row.values, &b.values),
            _ => None,
        };
        writeln!(
            out,
            "{},{},{},{},{},{}",
            row.dataset,
            row.method,
            row.surrogate,
            row.metric,
            row.n_failed,
            t.map_or(String::new(), |t| t.to_string())
        )?;
    }
    Ok(())
}

/// One row of the variance-ratio table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceRow {
    pub surrogate: String,
    pub dataset: String,
    pub ratio: f64,
}

/// Variance ratio of the LU estimator to the supervised one for each
/// surrogate, at a random linear model.
///
/// Every row of `table` (labels in `1..=K`) serves both as the labeled pool
/// and, with its label dropped, as the unlabeled pool. Priors are the table's
/// class frequencies.
pub fn variance_table(
    table: &RawTable,
    exp: &Experiment,
    surrogates: &[TaskSurrogate],
    resamples: usize,
    sizes: (usize, usize),
) -> Result<Vec<VarianceRow>> {
    let classes = LabelSpace::new(exp.split.k_target)?;
    let mut labeled = table
        .features()
        .iter()
        .zip(table.labels())
        .map(|(x, &y)| {
            let y = usize::try_from(y).map_err(|_| Error::LabelOutOfRange {
                label: 0,
                classes: classes.classes(),
            })?;
            classes.check(y)?;
            Ok(Labeled::new(x.clone(), y))
        })
        .collect::<Result<Vec<_>>>()?;
    if exp.split.standardize {
        let s = Standardizer::fit(labeled.iter().map(|p| p.x.as_slice()), table.dim());
        labeled.iter_mut().for_each(|p| s.apply(&mut p.x));
    }
    let unlabeled = labeled.iter().map(|p| p.x.clone()).collect();
    let data = OrdinalDataset::new(labeled, unlabeled, classes, table.dim())?;
    let counts = data.class_counts();
    let priors = priors_from_counts(&counts)?;
    let removed = select_removed_class(&counts, exp.strategy.unwrap_or(RemovalStrategy::Bound))?;
    let model = random_model(ModelKind::Linear, table.dim(), classes, exp.split.seed)?;

    surrogates
        .iter()
        .map(|&surrogate| {
            let spec = RiskSpec {
                surrogate,
                removed_class: removed,
                gamma: 1.0,
                mu: exp.mu,
                non_negative: exp.non_negative,
                priors: priors.clone(),
            };
            let ratio = variance_ratio(&data, &spec, &model, resamples, sizes, exp.split.seed)?;
            Ok(VarianceRow {
                surrogate: surrogate.short_name().to_string(),
                dataset: exp.dataset.clone(),
                ratio,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{merge_classes, Synthetic};
    use crate::losses::BinarySurrogate;

    const AT: TaskSurrogate = TaskSurrogate::AllThreshold(BinarySurrogate::Logistic);

    fn quick(dataset: &str) -> Experiment {
        let mut exp = Experiment::new(dataset, AT);
        exp.train.max_epochs = 60;
        exp.weight_decays = vec![0.01];
        exp.split.n_labeled = 15;
        exp
    }

    fn toy() -> RawTable {
        let mut g = Synthetic::new(90, 3, 3, 11);
        g.label_noise = 0.1;
        merge_classes(&g.generate().unwrap(), 3).unwrap()
    }

    #[test]
    fn method_names() {
        let m = Method::parse("SEMI2-kernel", ModelFamily::Linear).unwrap();
        assert_eq!(m.variant, Variant::Semi2);
        assert_eq!(m.family, ModelFamily::Kernel);
        assert_eq!(m.to_string(), "semi2-kernel");
        assert_eq!(Method::parse("sv", ModelFamily::Kernel).unwrap().to_string(), "sv-kernel");
        assert!(Method::parse("semi3", ModelFamily::Linear).is_err());
        assert!(Method::parse("sv-tree", ModelFamily::Linear).is_err());
        assert_eq!(Method::parse_list("sv,semi1", ModelFamily::Linear).unwrap().len(), 2);
    }

    #[test]
    fn json_lines_round_trip() {
        let line = TrialLine::Ok(TrialResult {
            dataset: "toy".into(),
            method: "semi2-linear".into(),
            surrogate: "at".into(),
            metric: "MAE".into(),
            value: 0.1 + 0.2,
            seed: u64::MAX,
        });
        let back: TrialLine = serde_json::from_str(&line.to_json()).unwrap();
        assert_eq!(back, line);
        let fail = TrialLine::Failed(TrialFailure {
            dataset: "toy".into(),
            method: "sv-linear".into(),
            surrogate: "it".into(),
            seed: 3,
            error: "boom".into(),
        });
        let back: TrialLine = serde_json::from_str(&fail.to_json()).unwrap();
        assert_eq!(back, fail);
    }

    fn ok(method: &str, value: f64) -> TrialLine {
        TrialLine::Ok(TrialResult {
            dataset: "d".into(),
            method: method.into(),
            surrogate: "at".into(),
            metric: "MAE".into(),
            value,
            seed: 0,
        })
    }

    #[test]
    fn summary_statistics() {
        let vals = [0.3, 0.5, 0.4, 0.9];
        let mut lines: Vec<TrialLine> = vals.iter().map(|&v| ok("sv-linear", v)).collect();
        lines.push(ok("semi2-linear", 0.2));
        lines.push(TrialLine::Failed(TrialFailure {
            dataset: "d".into(),
            method: "semi2-linear".into(),
            surrogate: "at".into(),
            seed: 1,
            error: "x".into(),
        }));
        let rows = summarize(&lines);
        assert_eq!(rows.len(), 2);
        let mean = vals.iter().sum::<f64>() / 4.0;
        assert!((rows[0].mean - mean).abs() < 1e-12);
        let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 3.0).sqrt();
        assert!((rows[0].stderr - sd / 2.0).abs() < 1e-12);
        assert_eq!(rows[0].n_trials, 4);
        assert_eq!(rows[1].n_trials, 1);
        assert_eq!(rows[1].stderr, 0.0);
        assert_eq!(rows[1].n_failed, 1);

        let mut csv = Vec::new();
        write_summary(&rows, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().next().unwrap(), "dataset,method,surrogate,metric,mean,stderr,n_trials");
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn welch_statistic() {
        let a = [1.0, 2.0, 3.0];
        let b = [2.0, 3.0, 4.0, 5.0];
        // means 2 and 3.5, variances 1 and 5/3
        let t = welch_t(&a, &b).unwrap();
        let expected = -1.5 / (1.0 / 3.0 + (5.0 / 3.0) / 4.0_f64).sqrt();
        assert!((t - expected).abs() < 1e-12);
        assert!(welch_t(&[1.0], &b).is_none());
    }

    #[test]
    fn single_trial_has_zero_stderr() {
        let exp = quick("toy");
        let methods = [Method::parse("semi2-linear", ModelFamily::Linear).unwrap()];
        let lines = run_bench(&toy(), &exp, &methods, 1);
        let rows = summarize(&lines);
        assert_eq!(rows[0].n_trials, 1, "{lines:?}");
        assert_eq!(rows[0].stderr, 0.0);
    }

    #[test]
    fn bench_is_deterministic_and_ordered() {
        let exp = quick("toy");
        let methods = Method::parse_list("sv,semi1,semi2", ModelFamily::Linear).unwrap();
        let a = run_bench(&toy(), &exp, &methods, 3);
        let b = run_bench(&toy(), &exp, &methods, 3);
        assert_eq!(a, b);
        let seeds: Vec<u64> = a
            .iter()
            .map(|l| match l {
                TrialLine::Ok(r) => r.seed,
                TrialLine::Failed(f) => f.seed,
            })
            .collect();
        assert_eq!(seeds, vec![1, 1, 1, 2, 2, 2, 3, 3, 3]);
    }

    #[test]
    fn supervised_ignores_unlabeled_pool() {
        let exp = quick("toy");
        let (train, test) = make_splits(&toy(), &exp.split).unwrap();
        for family in [ModelFamily::Linear, ModelFamily::Kernel] {
            let sv = Method {
                variant: Variant::Sv,
                family,
            };
            let base = run_method(&train, &test, sv, &exp, 5).unwrap();
            let mut shuffled = train.unlabeled.clone();
            shuffled.reverse();
            shuffled.extend(train.unlabeled.iter().cloned());
            let poisoned = vec![vec![f64::NAN; train.dim()]; train.unlabeled.len()];
            for pool in [shuffled, poisoned] {
                let alt = train.with_unlabeled(pool).unwrap();
                let run = run_method(&alt, &test, sv, &exp, 5).unwrap();
                assert_eq!(run.model(), base.model());
                assert_eq!(run.value, base.value);
            }
        }
    }

    #[test]
    fn failed_trials_are_recorded() {
        let mut exp = quick("toy");
        exp.split.n_labeled = 200;
        let lines = run_bench(&toy(), &exp, &[Method::parse("sv", ModelFamily::Linear).unwrap()], 2);
        assert!(lines.iter().all(|l| matches!(l, TrialLine::Failed(_))));
        let rows = summarize(&lines);
        assert_eq!(rows[0].n_trials, 0);
        assert_eq!(rows[0].n_failed, 2);
    }

    #[test]
    fn variance_rows_per_surrogate() {
        let table = merge_classes(&Synthetic::new(400, 3, 3, 8).generate().unwrap(), 3).unwrap();
        let exp = quick("toy");
        let surrogates = [AT, TaskSurrogate::LeastSquares];
        let rows = variance_table(&table, &exp, &surrogates, 200, (30, 300)).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].surrogate, "AT");
        assert!(rows.iter().all(|r| r.ratio.is_finite() && r.ratio > 0.0));
        assert_eq!(rows, variance_table(&table, &exp, &surrogates, 200, (30, 300)).unwrap());
    }
}
