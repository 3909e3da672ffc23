//! Load a CSV with arbitrary integer labels, merge them into three ordered
//! classes and split.
//!
//! `cargo run --example csv_pipeline -- path/to/data.csv` reads a file;
//! without an argument a small synthetic table is written to a temp path.

use std::collections::BTreeMap;
use std::path::PathBuf;

use semiord::data::{load_csv, make_splits, merge_map, RawTable, SplitSpec};

fn main() -> anyhow::Result<()> {
    let path = match std::env::args().nth(1) {
        Some(p) => PathBuf::from(p),
        None => {
            let features: Vec<Vec<f64>> = (0..200).map(|i| vec![i as f64, (i % 7) as f64]).collect();
            let labels: Vec<i64> = (0..200).map(|i| 10 + (i / 20) as i64).collect();
            let path = std::env::temp_dir().join("semiord_pipeline.csv");
            RawTable::new(features, labels)?.write_csv(std::fs::File::create(&path)?)?;
            path
        }
    };
    let raw = load_csv(&path, false)?;
    let mut sizes: BTreeMap<i64, usize> = BTreeMap::new();
    for &y in raw.labels() {
        *sizes.entry(y).or_default() += 1;
    }
    println!("{} rows, dim {}, raw label sizes {sizes:?}", raw.len(), raw.dim());

    let map = merge_map(&raw, 3)?;
    println!("merge map {map:?}");
    let table = semiord::data::merge_classes(&raw, 3)?;

    let (train, test) = make_splits(&table, &SplitSpec { seed: 42, ..SplitSpec::default() })?;
    println!(
        "labeled {} (counts {:?}), unlabeled {}, test {}",
        train.labeled.len(),
        train.class_counts(),
        train.unlabeled.len(),
        test.len()
    );
    Ok(())
}
