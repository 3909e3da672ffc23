//! Supervised, labeled/unlabeled and combined risks of one model on one sample.

use semiord::data::{make_splits, SplitSpec, Synthetic};
use semiord::model::{random_model, ModelKind};
use semiord::risk::{estimate_priors, lu_risk, select_removed_class, semi_risk, supervised_risk};
use semiord::{RemovalStrategy, RiskSpec, TaskSurrogate};

fn main() -> semiord::Result<()> {
    let table = Synthetic { noise: 0.3, ..Synthetic::new(3000, 4, 3, 11) }.generate()?;
    let split = SplitSpec { n_labeled: 200, ..SplitSpec::default() };
    let (train, test) = make_splits(&table, &split)?;

    let model = random_model(ModelKind::Linear, train.dim(), train.classes(), 5)?;
    let psi = TaskSurrogate::LeastSquares;
    let counts = train.class_counts();
    let mut spec = RiskSpec {
        surrogate: psi,
        removed_class: select_removed_class(&counts, RemovalStrategy::Bound)?,
        gamma: 1.0,
        mu: 0.0,
        non_negative: false,
        priors: estimate_priors(&train)?,
    };
    println!("class counts {counts:?}, removed class {}", spec.removed_class);

    let lu = lu_risk(&model, &train, &spec)?;
    println!("LU:  l1={:.4} u={:.4} l2={:.4} total={:.4}", lu.l1, lu.u, lu.l2, lu.total);
    println!("SV:  {:.4}", supervised_risk(&model, &train.labeled, psi)?);
    for gamma in [0.0, 0.5, 0.8] {
        spec.gamma = gamma;
        println!("SEMI gamma={gamma}: {:.4}", semi_risk(&model, &train, &spec)?.total);
    }
    println!("test-set risk: {:.4}", supervised_risk(&model, &test, psi)?);
    Ok(())
}
