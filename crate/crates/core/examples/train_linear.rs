//! Grid search over weight decay and a refit, then the test metric.

use semiord::bench::{Experiment, Method, Variant};
use semiord::data::{make_splits, Synthetic};
use semiord::ordinal::evaluate_metric;
use semiord::train::{fit, validation_set};
use semiord::model::{init_model, ModelKind};
use semiord::{BinarySurrogate, ModelFamily, TaskSurrogate};

fn main() -> semiord::Result<()> {
    let table = Synthetic { noise: 0.4, ..Synthetic::new(1000, 5, 3, 3) }.generate()?;
    let exp = Experiment::new("synthetic", TaskSurrogate::AllThreshold(BinarySurrogate::Logistic));
    let (train, test) = make_splits(&table, &exp.split)?;

    for variant in [Variant::Sv, Variant::Semi1, Variant::Semi2] {
        let method = Method { variant, family: ModelFamily::Linear };
        let run = semiord::bench::run_method(&train, &test, method, &exp, 0)?;
        let r = &run.selection.report;
        println!(
            "{method}: lambda={} best_epoch={} stopped={} MAE={:.3}",
            run.selection.weight_decay, r.best_epoch, r.stopped_epoch, run.value
        );
    }

    // a single fit without selection, validated on the test labels
    let spec = exp.risk_spec(Method { variant: Variant::Semi2, family: ModelFamily::Linear }, &train)?;
    let model0 = init_model(ModelKind::Linear, train.dim(), train.classes())?;
    let val = validation_set(&train, test.clone())?;
    let report = fit(&train, &val, &spec, &exp.train, model0)?;
    println!(
        "plain fit: {} epochs, thresholds {:.3?}, MAE={:.3}",
        report.stopped_epoch,
        report.model.theta.as_slice(),
        evaluate_metric(&report.model, &test, semiord::ordinal::TaskLoss::Absolute)?
    );
    Ok(())
}
