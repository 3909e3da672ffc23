use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use semiord::bench::{
    run_bench, run_method, summarize, variance_table, write_stats, write_summary, Experiment,
    Method,
};
use semiord::data::{load_csv, make_splits, merge_classes, RawTable, SplitSpec};
use semiord::model::{load_model, save_model};
use semiord::ordinal::evaluate_metric;
use semiord::{BinarySurrogate, ModelFamily, RemovalStrategy, TaskLoss, TaskSurrogate, TrainConfig};

#[derive(Parser)]
#[command(name = "semiord", version, about = "Semi-supervised ordinal regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split, select hyperparameters, fit and report the test metric.
    Train(TrainArgs),
    /// Score a saved model on the test part of a seeded split.
    Eval(EvalArgs),
    /// Variance ratio of the labeled/unlabeled risk to the supervised risk.
    Variance(VarianceArgs),
    /// Multi-trial comparison of methods.
    Bench(BenchArgs),
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    has_header: bool,
    #[arg(long, default_value_t = 3)]
    k_classes: usize,
    #[arg(long, default_value_t = 30)]
    n_labeled: usize,
    #[arg(long, default_value_t = 0.5)]
    unlabeled_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct RiskArgs {
    #[arg(long, default_value = "logistic")]
    binary_loss: BinarySurrogate,
    #[arg(long, default_value = "linear")]
    model: ModelFamily,
    #[arg(long, default_value_t = 0.8, value_parser = unit_interval)]
    gamma: f64,
    #[arg(long, default_value_t = 10.0)]
    mu: f64,
    #[arg(long)]
    strategy: Option<RemovalStrategy>,
    /// Clamp the unlabeled bracket at zero (default).
    #[arg(long, overrides_with = "no_non_negative")]
    non_negative: bool,
    #[arg(long, overrides_with = "non_negative")]
    no_non_negative: bool,
    /// Metric override; defaults to the one paired with the surrogate.
    #[arg(long)]
    metric: Option<TaskLoss>,
}

#[derive(Args)]
struct OptimArgs {
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 20)]
    patience: usize,
    #[arg(long, default_value_t = 2000)]
    max_epochs: usize,
    #[arg(long, default_value = "0.1,0.01,0.001", value_delimiter = ',')]
    weight_decays: Vec<f64>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    risk: RiskArgs,
    #[command(flatten)]
    optim: OptimArgs,
    #[arg(long, default_value = "at")]
    surrogate: String,
    #[arg(long, default_value = "semi2")]
    method: String,
    /// Where to write the fitted model.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-epoch `epoch,objective,val_risk` log of the final refit.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    model_file: PathBuf,
    #[arg(long, default_value = "mae")]
    metric: TaskLoss,
}

#[derive(Args)]
struct VarianceArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    risk: RiskArgs,
    /// Comma-separated surrogates.
    #[arg(long, default_value = "at,it,ls")]
    surrogate: String,
    #[arg(long, default_value_t = 1000)]
    resamples: usize,
    /// Unlabeled sample size per resample; defaults to rows minus n-labeled.
    #[arg(long)]
    n_unlabeled: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    risk: RiskArgs,
    #[command(flatten)]
    optim: OptimArgs,
    #[arg(long, default_value = "at")]
    surrogate: String,
    #[arg(long, alias = "method", default_value = "sv,semi1,semi2")]
    methods: String,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    /// JSON-lines output; the summary goes to `<out>.summary.csv` and
    /// statistics to `<out>.stats.csv`. Without it lines go to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn unit_interval(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("must lie in [0, 1], got {v}"))
    }
}

fn parse_surrogate(name: &str, binary: BinarySurrogate) -> Result<TaskSurrogate> {
    Ok(TaskSurrogate::from_names(name.trim(), binary)?)
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

fn load(data: &DataArgs) -> Result<RawTable> {
    let raw = load_csv(&data.data, data.has_header)?;
    Ok(merge_classes(&raw, data.k_classes)
        .with_context(|| format!("merging labels of {}", data.data.display()))?)
}

fn split_spec(data: &DataArgs) -> SplitSpec {
    SplitSpec {
        n_labeled: data.n_labeled,
        k_target: data.k_classes,
        unlabeled_fraction: data.unlabeled_fraction,
        seed: data.seed,
        standardize: true,
    }
}

fn experiment(data: &DataArgs, risk: &RiskArgs, optim: Option<&OptimArgs>, surrogate: TaskSurrogate) -> Experiment {
    let mut exp = Experiment::new(dataset_name(&data.data), surrogate);
    exp.split = split_spec(data);
    exp.metric = risk.metric;
    exp.gamma = risk.gamma;
    exp.mu = risk.mu;
    exp.non_negative = !risk.no_non_negative;
    exp.strategy = risk.strategy;
    if let Some(o) = optim {
        exp.train = TrainConfig {
            learning_rate: o.lr,
            patience: o.patience,
            max_epochs: o.max_epochs,
            seed: data.seed,
            ..TrainConfig::default()
        };
        exp.weight_decays = o.weight_decays.clone();
    }
    exp
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let surrogate = parse_surrogate(&a.surrogate, a.risk.binary_loss)?;
    let method = Method::parse(&a.method, a.risk.model)?;
    let exp = experiment(&a.data, &a.risk, Some(&a.optim), surrogate);
    exp.train.validate()?;
    let table = load(&a.data)?;
    let (train, test) = make_splits(&table, &exp.split)?;
    let run = run_method(&train, &test, method, &exp, a.data.seed)?;

    if let Some(path) = &a.out {
        save_model(run.model(), path)?;
    }
    if let Some(path) = &a.log {
        let report = &run.selection.report;
        let mut out = create(path)?;
        writeln!(out, "epoch,objective,val_risk")?;
        for ((epoch, obj), (_, val)) in report.train_curve.iter().zip(&report.val_curve[1..]) {
            writeln!(out, "{epoch},{obj},{val}")?;
        }
        out.flush()?;
    }
    let line = json!({
        "dataset": exp.dataset,
        "method": method.to_string(),
        "surrogate": surrogate.short_name(),
        "metric": exp.metric().metric_name(),
        "value": run.value,
        "seed": a.data.seed,
        "removed_class": (run.spec.gamma > 0.0).then_some(run.spec.removed_class),
        "bandwidth": run.selection.bandwidth,
        "weight_decay": run.selection.weight_decay,
        "thresholds_ordered": run.selection.report.thresholds_ordered,
    });
    println!("{line}");
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let model = load_model(&a.model_file)?;
    let table = load(&a.data)?;
    let (_, test) = make_splits(&table, &split_spec(&a.data))?;
    let value = evaluate_metric(&model, &test, a.metric)?;
    let line = json!({
        "dataset": dataset_name(&a.data.data),
        "metric": a.metric.metric_name(),
        "value": value,
        "seed": a.data.seed,
    });
    println!("{line}");
    Ok(())
}

fn cmd_variance(a: VarianceArgs) -> Result<()> {
    let surrogates = a
        .surrogate
        .split(',')
        .map(|s| parse_surrogate(s, a.risk.binary_loss))
        .collect::<Result<Vec<_>>>()?;
    let first = *surrogates.first().context("no surrogate given")?;
    let exp = experiment(&a.data, &a.risk, None, first);
    let table = load(&a.data)?;
    let n_u = a.n_unlabeled.unwrap_or(table.len().saturating_sub(a.data.n_labeled));
    let rows = variance_table(&table, &exp, &surrogates, a.resamples, (a.data.n_labeled, n_u))?;
    let mut text = String::new();
    for r in &rows {
        text.push_str(&format!("{},{},{}\n", r.surrogate, r.dataset, r.ratio));
    }
    print!("{text}");
    if let Some(path) = &a.out {
        let mut out = create(path)?;
        out.write_all(b"surrogate,dataset,ratio\n")?;
        out.write_all(text.as_bytes())?;
        out.flush()?;
    }
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    let surrogate = parse_surrogate(&a.surrogate, a.risk.binary_loss)?;
    let methods = Method::parse_list(&a.methods, a.risk.model)?;
    let exp = experiment(&a.data, &a.risk, Some(&a.optim), surrogate);
    exp.train.validate()?;
    exp.split.validate()?;
    let table = load(&a.data)?;
    let lines = run_bench(&table, &exp, &methods, a.trials);
    let rows = summarize(&lines);

    let mut jsonl = String::new();
    for l in &lines {
        jsonl.push_str(&l.to_json());
        jsonl.push('\n');
    }
    match &a.out {
        None => print!("{jsonl}"),
        Some(path) => {
            let mut out = create(path)?;
            out.write_all(jsonl.as_bytes())?;
            out.flush()?;
            let summary = path.with_extension("summary.csv");
            let mut s = create(&summary)?;
            write_summary(&rows, &mut s)?;
            s.flush()?;
            let mut st = create(&path.with_extension("stats.csv"))?;
            write_stats(&rows, &mut st)?;
            st.flush()?;
        }
    }
    for r in rows.iter() {
        if r.n_trials > 0 {
            log::info!("{} {}: {} = {:.4} ± {:.4} ({} trials, {} failed)", r.method, r.surrogate, r.metric, r.mean, r.stderr, r.n_trials, r.n_failed);
        } else {
            log::warn!("{} {}: all {} trials failed", r.method, r.surrogate, r.n_failed);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Variance(a) => cmd_variance(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
