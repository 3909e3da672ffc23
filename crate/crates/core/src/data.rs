//! Loading, class merging, seeded splitting and synthetic data.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::ordinal::{LabelSpace, Labeled, OrdinalDataset};

/// Feature rows with raw integer labels, as read from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    features: Vec<Vec<f64>>,
    labels: Vec<i64>,
    dim: usize,
}

impl RawTable {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<i64>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::Empty("table"));
        }
        if features.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: features.len(),
                got: labels.len(),
            });
        }
        let dim = features[0].len();
        if dim == 0 {
            return Err(invalid("features", "rows need at least one feature column"));
        }
        if let Some(row) = features.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: row.len(),
            });
        }
        Ok(Self {
            features,
            labels,
            dim,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    /// Writes the table in the format read by [`load_csv`], without header.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for (x, y) in self.features.iter().zip(&self.labels) {
            let mut rec: Vec<String> = x.iter().map(|v| v.to_string()).collect();
            rec.push(y.to_string());
            w.write_record(&rec)?;
        }
        w.flush()
    }
}

/// Reads comma-separated rows whose last column is an integer label.
pub fn load_csv(path: &Path, has_header: bool) -> Result<RawTable> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let parse_err = |line: usize, column: usize, reason: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        column,
        reason,
    };

    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(i + 1, |p| p.line() as usize);
            parse_err(line, 0, e.to_string())
        })?;
        let line = rec.position().map_or(i + 1, |p| p.line() as usize);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() < 2 {
            return Err(parse_err(line, rec.len(), "need at least one feature and a label".into()));
        }
        match width {
            None => width = Some(rec.len()),
            Some(w) if w != rec.len() => {
                return Err(parse_err(
                    line,
                    rec.len(),
                    format!("expected {w} columns, found {}", rec.len()),
                ))
            }
            _ => {}
        }
        let last = rec.len() - 1;
        let mut x = Vec::with_capacity(last);
        for (j, field) in rec.iter().take(last).enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(line, j + 1, format!("`{field}` is not a number")))?;
            x.push(v);
        }
        let y: i64 = rec[last]
            .parse()
            .map_err(|_| parse_err(line, last + 1, format!("label `{}` is not an integer", &rec[last])))?;
        features.push(x);
        labels.push(y);
    }
    if features.is_empty() {
        return Err(parse_err(1, 0, "no data rows".into()));
    }
    RawTable::new(features, labels)
}

/// Raw label to merged label in `1..=k_target`, by contiguous bins over the
/// sorted distinct labels whose sizes are as even as possible (least sum of
/// squared bin sizes; ties keep earlier cut points).
pub fn merge_map(table: &RawTable, k_target: usize) -> Result<BTreeMap<i64, usize>> {
    LabelSpace::new(k_target)?;
    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
    for &y in &table.labels {
        *counts.entry(y).or_default() += 1;
    }
    let m = counts.len();
    if m < k_target {
        return Err(Error::Degenerate(format!(
            "{m} distinct labels cannot be merged into {k_target} classes"
        )));
    }
    let sizes: Vec<usize> = counts.values().copied().collect();
    let mut prefix = vec![0usize; m + 1];
    for i in 0..m {
        prefix[i + 1] = prefix[i] + sizes[i];
    }
    let cost = |a: usize, b: usize| {
        let s = (prefix[b] - prefix[a]) as u128;
        s * s
    };
    // best[g][j]: first j labels in g bins
    let inf = u128::MAX;
    let mut best = vec![vec![inf; m + 1]; k_target + 1];
    let mut cut = vec![vec![0usize; m + 1]; k_target + 1];
    best[0][0] = 0;
    for g in 1..=k_target {
        for j in g..=m {
            for i in (g - 1)..j {
                if best[g - 1][i] == inf {
                    continue;
                }
                let c = best[g - 1][i] + cost(i, j);
                if c < best[g][j] {
                    best[g][j] = c;
                    cut[g][j] = i;
                }
            }
        }
    }
    let mut bin_of = vec![0usize; m];
    let mut j = m;
    for g in (1..=k_target).rev() {
        let i = cut[g][j];
        bin_of[i..j].iter_mut().for_each(|b| *b = g);
        j = i;
    }
    Ok(counts.keys().copied().zip(bin_of).collect())
}

/// Relabels into `1..=k_target`; see [`merge_map`].
pub fn merge_classes(table: &RawTable, k_target: usize) -> Result<RawTable> {
    let map = merge_map(table, k_target)?;
    let labels = table.labels.iter().map(|y| map[y] as i64).collect();
    RawTable::new(table.features.clone(), labels)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    pub n_labeled: usize,
    pub k_target: usize,
    /// Share of the non-labeled remainder used as unlabeled data; the rest is test.
    pub unlabeled_fraction: f64,
    pub seed: u64,
    pub standardize: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            n_labeled: 30,
            k_target: 3,
            unlabeled_fraction: 0.5,
            seed: 0,
            standardize: true,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        LabelSpace::new(self.k_target)?;
        if self.n_labeled < self.k_target {
            return Err(invalid(
                "n-labeled",
                format!("must be at least the number of classes ({})", self.k_target),
            ));
        }
        if !(self.unlabeled_fraction > 0.0 && self.unlabeled_fraction < 1.0) {
            return Err(invalid(
                "unlabeled-fraction",
                format!("must lie in (0, 1), got {}", self.unlabeled_fraction),
            ));
        }
        Ok(())
    }
}

/// Per-feature affine scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Standardizer {
    /// Population mean and standard deviation; constant features get sd 1.
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f64]>, dim: usize) -> Self {
        let rows: Vec<&[f64]> = rows.into_iter().collect();
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; dim];
        for r in &rows {
            for (m, v) in mean.iter_mut().zip(r.iter()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut sd = vec![0.0; dim];
        for r in &rows {
            for ((s, v), m) in sd.iter_mut().zip(r.iter()).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        for (s, m) in sd.iter_mut().zip(&mean) {
            *s = (*s / n).sqrt();
            if !(*s > 1e-12 * m.abs().max(1.0)) {
                *s = 1.0;
            }
        }
        Self { mean, sd }
    }

    pub fn apply(&self, x: &mut [f64]) {
        for ((v, m), s) in x.iter_mut().zip(&self.mean).zip(&self.sd) {
            *v = (*v - m) / s;
        }
    }
}

/// Seeded labeled / unlabeled / test split of a table whose labels already
/// lie in `1..=k_target`.
pub fn make_splits(table: &RawTable, spec: &SplitSpec) -> Result<(OrdinalDataset, Vec<Labeled>)> {
    spec.validate()?;
    let classes = LabelSpace::new(spec.k_target)?;
    let n = table.len();
    if n < spec.n_labeled + 2 {
        return Err(Error::Degenerate(format!(
            "{n} rows, need at least {} for {} labeled plus unlabeled and test",
            spec.n_labeled + 2,
            spec.n_labeled
        )));
    }
    let labels = table
        .labels
        .iter()
        .map(|&y| {
            usize::try_from(y)
                .ok()
                .filter(|&u| classes.check(u).is_ok())
                .ok_or(Error::Degenerate(format!(
                    "label {y} is outside 1..={}; merge classes first",
                    spec.k_target
                )))
        })
        .collect::<Result<Vec<usize>>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut covered = false;
    for _ in 0..10 {
        order.shuffle(&mut rng);
        let mut seen = vec![false; spec.k_target];
        for &i in &order[..spec.n_labeled] {
            seen[labels[i] - 1] = true;
        }
        if seen.iter().all(|&s| s) {
            covered = true;
            break;
        }
    }
    if !covered {
        log::warn!("labeled subsample misses a class after 10 draws; keeping the last one");
    }

    let rest = n - spec.n_labeled;
    let n_unl = ((rest as f64 * spec.unlabeled_fraction).round() as usize).clamp(1, rest - 1);
    let (lab_idx, tail) = order.split_at(spec.n_labeled);
    let (unl_idx, test_idx) = tail.split_at(n_unl);

    let mut labeled: Vec<Labeled> = lab_idx
        .iter()
        .map(|&i| Labeled::new(table.features[i].clone(), labels[i]))
        .collect();
    let mut unlabeled: Vec<Vec<f64>> = unl_idx.iter().map(|&i| table.features[i].clone()).collect();
    let mut test: Vec<Labeled> = test_idx
        .iter()
        .map(|&i| Labeled::new(table.features[i].clone(), labels[i]))
        .collect();

    if spec.standardize {
        let scaler = Standardizer::fit(
            labeled
                .iter()
                .map(|p| p.x.as_slice())
                .chain(unlabeled.iter().map(Vec::as_slice)),
            table.dim,
        );
        labeled.iter_mut().for_each(|p| scaler.apply(&mut p.x));
        unlabeled.iter_mut().for_each(|x| scaler.apply(x));
        test.iter_mut().for_each(|p| scaler.apply(&mut p.x));
    }
    let train = OrdinalDataset::new(labeled, unlabeled, classes, table.dim)?;
    Ok((train, test))
}

/// Ordinal data from a latent linear score: `x ~ N(0, I)`, `s = w·x + noise·ε`
/// with a random unit `w`, cut at the empirical `i/K` quantiles of `s`. With
/// probability `label_noise` a label is replaced by a different class drawn
/// uniformly.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthetic {
    pub n: usize,
    pub dim: usize,
    pub classes: usize,
    pub noise: f64,
    pub label_noise: f64,
    pub seed: u64,
}

impl Synthetic {
    pub fn new(n: usize, dim: usize, classes: usize, seed: u64) -> Self {
        Self {
            n,
            dim,
            classes,
            noise: 0.0,
            label_noise: 0.0,
            seed,
        }
    }

    pub fn generate(&self) -> Result<RawTable> {
        LabelSpace::new(self.classes)?;
        if self.n < self.classes || self.dim == 0 {
            return Err(invalid("synthetic", "need n >= K and d >= 1"));
        }
        if !(0.0..=1.0).contains(&self.label_noise) || !(self.noise >= 0.0) {
            return Err(invalid("synthetic", "noise must be >= 0 and label noise in [0, 1]"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut w: Vec<f64> = (0..self.dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        w.iter_mut().for_each(|v| *v /= norm);

        let mut features = Vec::with_capacity(self.n);
        let mut latent = Vec::with_capacity(self.n);
        for _ in 0..self.n {
            let x: Vec<f64> = (0..self.dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let eps: f64 = StandardNormal.sample(&mut rng);
            latent.push(x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + self.noise * eps);
            features.push(x);
        }
        let mut sorted = latent.clone();
        sorted.sort_by(f64::total_cmp);
        let cuts: Vec<f64> = (1..self.classes)
            .map(|i| sorted[i * self.n / self.classes])
            .collect();
        let labels = latent
            .iter()
            .map(|&s| {
                let y = 1 + cuts.iter().filter(|&&c| s >= c).count();
                let y = if rng.random::<f64>() < self.label_noise {
                    let other = rng.random_range(1..self.classes);
                    if other >= y {
                        other + 1
                    } else {
                        other
                    }
                } else {
                    y
                };
                y as i64
            })
            .collect();
        RawTable::new(features, labels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn write_tmp(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    fn table(labels: &[i64]) -> RawTable {
        RawTable::new(labels.iter().map(|&y| vec![y as f64]).collect(), labels.to_vec()).unwrap()
    }

    #[test]
    fn loads_small_csv() {
        let f = write_tmp("1.0,2.0,3\n0.0,1.0,1\n");
        let t = load_csv(f.path(), false).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.dim(), 2);
        assert_eq!(t.labels(), &[3, 1]);
        assert_eq!(t.features()[0], vec![1.0, 2.0]);
    }

    #[test]
    fn header_is_skipped() {
        let f = write_tmp("a,b,label\n1.0,2.0,3\n");
        let t = load_csv(f.path(), true).unwrap();
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn empty_file_errors() {
        let f = write_tmp("");
        assert!(matches!(load_csv(f.path(), false), Err(Error::Parse { .. })));
    }

    #[test]
    fn parse_errors_point_at_cell() {
        let f = write_tmp("1.0,2.0,3\n0.0,x,1\n");
        match load_csv(f.path(), false) {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (2, 2)),
            other => panic!("{other:?}"),
        }
        let f = write_tmp("1.0,2.0,3\n0.0,1\n");
        assert!(matches!(load_csv(f.path(), false), Err(Error::Parse { line: 2, .. })));
        let f = write_tmp("1.0,2.5\n");
        assert!(matches!(load_csv(f.path(), false), Err(Error::Parse { column: 2, .. })));
        let f = write_tmp("3\n");
        assert!(load_csv(f.path(), false).is_err());
    }

    #[test]
    fn missing_file_names_path() {
        let err = load_csv(Path::new("/nonexistent/toy.csv"), false).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/toy.csv"));
    }

    #[test]
    fn merge_equal_counts_into_pairs() {
        let t = table(&[1, 2, 3, 4, 5, 6, 1, 2, 3, 4, 5, 6]);
        let map = merge_map(&t, 3).unwrap();
        let got: Vec<usize> = (1..=6).map(|y| map[&y]).collect();
        assert_eq!(got, vec![1, 1, 2, 2, 3, 3]);
    }

    #[test]
    fn merge_is_rank_compression_when_k_matches() {
        let t = table(&[10, 40, 20, 40, 10]);
        let merged = merge_classes(&t, 3).unwrap();
        assert_eq!(merged.labels(), &[1, 3, 2, 3, 1]);
    }

    #[test]
    fn merge_needs_enough_labels() {
        assert!(merge_classes(&table(&[1, 2, 1]), 3).is_err());
    }

    #[test]
    fn merge_balances_by_brute_force() {
        // counts 5,1,1,1,4,3 into 3 bins; enumerate all cut pairs
        let mut labels = Vec::new();
        for (y, c) in [(1, 5), (2, 1), (3, 1), (4, 1), (5, 4), (6, 3)] {
            labels.extend(std::iter::repeat(y).take(c));
        }
        let sizes = [5usize, 1, 1, 1, 4, 3];
        let mut best = (u128::MAX, 0, 0);
        for a in 1..6 {
            for b in a + 1..6 {
                let s1: usize = sizes[..a].iter().sum();
                let s2: usize = sizes[a..b].iter().sum();
                let s3: usize = sizes[b..].iter().sum();
                let c = (s1 * s1 + s2 * s2 + s3 * s3) as u128;
                if c < best.0 {
                    best = (c, a, b);
                }
            }
        }
        let map = merge_map(&table(&labels), 3).unwrap();
        for (i, y) in (1..=6).enumerate() {
            let expected = if i < best.1 { 1 } else if i < best.2 { 2 } else { 3 };
            assert_eq!(map[&y], expected);
        }
    }

    proptest! {
        #[test]
        fn merge_monotone_and_onto(labels in prop::collection::vec(-5i64..20, 1..60), k in 2usize..5) {
            let t = table(&labels);
            let distinct: std::collections::BTreeSet<_> = labels.iter().copied().collect();
            prop_assume!(distinct.len() >= k);
            let map = merge_map(&t, k).unwrap();
            let merged: Vec<usize> = map.values().copied().collect();
            prop_assert!(merged.windows(2).all(|w| w[0] <= w[1]));
            let hit: std::collections::BTreeSet<_> = merged.iter().copied().collect();
            prop_assert_eq!(hit, (1..=k).collect());
        }

        #[test]
        fn splits_partition_rows(n in 12usize..80, seed in any::<u64>(), frac in 0.05f64..0.95) {
            let t = Synthetic::new(n, 2, 3, seed).generate().unwrap();
            let spec = SplitSpec { n_labeled: 10, seed, unlabeled_fraction: frac, standardize: false, ..SplitSpec::default() };
            let (train, test) = make_splits(&t, &spec).unwrap();
            prop_assert_eq!(train.labeled.len() + train.unlabeled.len() + test.len(), n);
            let mut rows: Vec<Vec<f64>> = train.labeled.iter().map(|p| p.x.clone())
                .chain(train.unlabeled.iter().cloned())
                .chain(test.iter().map(|p| p.x.clone()))
                .collect();
            let mut all = t.features().to_vec();
            rows.sort_by(|a, b| a.partial_cmp(b).unwrap());
            all.sort_by(|a, b| a.partial_cmp(b).unwrap());
            prop_assert_eq!(rows, all);
        }
    }

    #[test]
    fn split_sizes() {
        let t = Synthetic::new(100, 3, 3, 1).generate().unwrap();
        let (train, test) = make_splits(&t, &SplitSpec::default()).unwrap();
        assert_eq!(train.labeled.len(), 30);
        assert_eq!(train.unlabeled.len(), 35);
        assert_eq!(test.len(), 35);
    }

    #[test]
    fn splits_are_deterministic() {
        let t = Synthetic::new(100, 3, 3, 2).generate().unwrap();
        let spec = SplitSpec {
            seed: 9,
            ..SplitSpec::default()
        };
        let a = make_splits(&t, &spec).unwrap();
        let b = make_splits(&t, &spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn standardized_pools_have_unit_scale() {
        let mut t = Synthetic::new(200, 3, 3, 3).generate().unwrap();
        for x in t.features.iter_mut() {
            x[0] = 5.0 * x[0] + 100.0;
            x[2] = 7.5;
        }
        let (train, _) = make_splits(&t, &SplitSpec::default()).unwrap();
        let rows: Vec<&[f64]> = train
            .labeled
            .iter()
            .map(|p| p.x.as_slice())
            .chain(train.unlabeled.iter().map(Vec::as_slice))
            .collect();
        let n = rows.len() as f64;
        for j in 0..2 {
            let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
            assert!(mean.abs() < 1e-10, "mean {mean}");
            assert!((var.sqrt() - 1.0).abs() < 1e-10, "sd {}", var.sqrt());
        }
        assert!(rows.iter().all(|r| r[2].abs() < 1e-10));
    }

    #[test]
    fn too_few_rows() {
        let t = Synthetic::new(31, 2, 3, 0).generate().unwrap();
        assert!(make_splits(&t, &SplitSpec::default()).is_err());
    }

    #[test]
    fn synthetic_is_balanced_and_seeded() {
        let g = Synthetic::new(300, 5, 3, 4);
        let t = g.generate().unwrap();
        assert_eq!(t, g.generate().unwrap());
        for y in 1..=3 {
            assert_eq!(t.labels().iter().filter(|&&l| l == y).count(), 100);
        }
        let noisy = Synthetic {
            label_noise: 0.1,
            ..g
        }
        .generate()
        .unwrap();
        let flipped = t.labels().iter().zip(noisy.labels()).filter(|(a, b)| a != b).count();
        assert!((15..=45).contains(&flipped), "{flipped}");
    }

    #[test]
    fn csv_round_trip() {
        let t = Synthetic::new(20, 2, 3, 5).generate().unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        t.write_csv(f.as_file()).unwrap();
        assert_eq!(load_csv(f.path(), false).unwrap(), t);
    }
}
