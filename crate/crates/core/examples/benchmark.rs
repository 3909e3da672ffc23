//! Repeated-trial comparison with mean, standard error and Welch t.

use semiord::bench::{run_bench, summarize, write_stats, write_summary, Experiment, Method};
use semiord::data::Synthetic;
use semiord::{ModelFamily, TaskSurrogate, BinarySurrogate};

fn main() -> anyhow::Result<()> {
    let table = Synthetic { noise: 0.3, label_noise: 0.05, ..Synthetic::new(1200, 4, 3, 4) }.generate()?;
    let mut exp = Experiment::new("synthetic", TaskSurrogate::ImmediateThreshold(BinarySurrogate::Logistic));
    exp.train.max_epochs = 500;
    let methods = Method::parse_list("sv,semi1,semi2", ModelFamily::Linear)?;

    let lines = run_bench(&table, &exp, &methods, 5);
    for l in &lines {
        println!("{}", l.to_json());
    }
    let rows = summarize(&lines);
    let stdout = std::io::stdout();
    write_summary(&rows, stdout.lock())?;
    write_stats(&rows, stdout.lock())?;
    Ok(())
}
