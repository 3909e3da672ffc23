//! Threshold prediction, margins and the task surrogates on a hand-built model.

use semiord::losses::{BinarySurrogate, TaskSurrogate};
use semiord::ordinal::{absolute_loss_decomposed, LabelSpace, OrdinalModel, TaskLoss, ThresholdVector};
use semiord::ScoreModel;

fn main() -> semiord::Result<()> {
    // f(x) = 2 x_0 - x_1 with bias 0; the last weight is the bias
    let score = ScoreModel::linear(vec![2.0, -1.0, 0.0]);
    let model = OrdinalModel::new(score, ThresholdVector::new(vec![-1.0, 0.5, 2.0]))?;
    let classes = LabelSpace::new(4)?;

    let surrogates = [
        TaskSurrogate::AllThreshold(BinarySurrogate::Logistic),
        TaskSurrogate::ImmediateThreshold(BinarySurrogate::Hinge),
        TaskSurrogate::LeastSquares,
        TaskSurrogate::LeastAbsoluteDeviation,
    ];

    for (x, y) in [([0.0, 2.0], 1), ([0.5, 0.2], 2), ([1.0, 0.0], 3), ([2.0, 0.5], 4)] {
        let g = model.predict(&x)?;
        let alpha = model.alpha(&x)?;
        print!("x={x:?} y={y} g={g} alpha={alpha:.2?}");
        print!(" |g-y|={} via alpha={}", TaskLoss::Absolute.value(g, y, classes)?, absolute_loss_decomposed(&alpha, y)?);
        for psi in surrogates {
            print!(" {}={:.3}", psi.short_name(), psi.value(&alpha, y)?);
        }
        println!();
    }

    for l in [BinarySurrogate::Logistic, BinarySurrogate::Squared, BinarySurrogate::Hinge] {
        match l.linear_odd_constant() {
            Some(c) => println!("{}: l(z) - l(-z) = {c} * (-z)", l.name()),
            None => println!("{}: not linear-odd", l.name()),
        }
    }
    Ok(())
}
