//! Resampled variance of the labeled/unlabeled risk relative to the
//! supervised risk at a fixed random model.

use semiord::bench::{variance_table, Experiment};
use semiord::data::Synthetic;
use semiord::{BinarySurrogate, TaskSurrogate};

fn main() -> semiord::Result<()> {
    let table = Synthetic { noise: 0.5, ..Synthetic::new(4000, 4, 3, 21) }.generate()?;
    let exp = Experiment::new("synthetic", TaskSurrogate::LeastSquares);
    let surrogates = [
        TaskSurrogate::AllThreshold(BinarySurrogate::Logistic),
        TaskSurrogate::ImmediateThreshold(BinarySurrogate::Logistic),
        TaskSurrogate::LeastSquares,
    ];
    for n_u in [100, 1000, 3000] {
        for row in variance_table(&table, &exp, &surrogates, 500, (30, n_u))? {
            println!("n_u={n_u:5} {:3} ratio={:.3}", row.surrogate, row.ratio);
        }
    }
    Ok(())
}
