//! Gaussian-kernel scores with bandwidths from the median heuristic.

use semiord::bench::{run_method, Experiment, Method};
use semiord::data::{make_splits, Synthetic};
use semiord::model::median_bandwidth_candidates;
use semiord::{ModelFamily, TaskSurrogate};

fn main() -> semiord::Result<()> {
    let table = Synthetic { noise: 0.2, ..Synthetic::new(600, 2, 3, 9) }.generate()?;
    let mut exp = Experiment::new("synthetic", TaskSurrogate::LeastSquares);
    exp.weight_decays = vec![0.01, 0.001];
    let (train, test) = make_splits(&table, &exp.split)?;

    let inputs: Vec<Vec<f64>> = train.labeled.iter().map(|p| p.x.clone()).collect();
    println!("bandwidth candidates {:.3?}", median_bandwidth_candidates(&inputs)?);

    for name in ["sv-kernel", "semi2-kernel"] {
        let method = Method::parse(name, ModelFamily::Kernel)?;
        let run = run_method(&train, &test, method, &exp, 1)?;
        println!(
            "{method}: sigma={:.3} lambda={} MSE={:.3}",
            run.selection.bandwidth.unwrap_or(f64::NAN),
            run.selection.weight_decay,
            run.value
        );
    }
    Ok(())
}
