//! Datasets, synthetic generators, CSV I/O and forget masks.
//!
//! Dataset CSV layout: a header `f0,...,f{D-1},label` followed by one row per
//! sample. Files written for biased datasets carry an extra trailing `group`
//! column. Floats are written in shortest round-trip form.
//!
//! Forget mask files hold one training index per line, ascending, each line
//! newline-terminated.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::{Matrix, RngStream};

/// Distance between neighbouring class means produced by [`gen_blobs`].
pub const BLOB_MEAN_SPACING: f64 = 2.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    #[default]
    Train,
    Test,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Vec<usize>,
    pub classes: usize,
    pub split: Split,
}

/// Per-sample binary attribute (e.g. the spurious attribute of a biased set).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupLabels {
    pub group: Vec<usize>,
}

/// Sorted, duplicate-free indices into a training set.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ForgetMask {
    indices: Vec<usize>,
}

impl Dataset {
    pub fn new(x: Matrix, y: Vec<usize>, classes: usize, split: Split) -> Result<Self> {
        if x.rows() == 0 {
            return Err(Error::BadSpec("dataset has no samples".into()));
        }
        if y.len() != x.rows() {
            return Err(Error::Shape(format!("{} labels for {} rows", y.len(), x.rows())));
        }
        if let Some(&label) = y.iter().find(|&&l| l >= classes) {
            return Err(Error::LabelOutOfRange { label, classes });
        }
        if !x.is_finite() {
            return Err(Error::BadSpec("non-finite feature".into()));
        }
        Ok(Self { x, y, classes, split })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    /// Rows `idx` in order; keeps the class count and split. May be empty.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            classes: self.classes,
            split: self.split,
        }
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }

    /// Indices of samples whose label is `class`.
    pub fn class_indices(&self, class: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.y[i] == class).collect()
    }

    /// `(forget, retain)` subsets for a mask.
    pub fn partition(&self, mask: &ForgetMask) -> (Dataset, Dataset) {
        (self.subset(mask.indices()), self.subset(&mask.complement(self.len())))
    }
}

impl ForgetMask {
    /// Sorts and validates; rejects duplicates and out-of-range indices.
    pub fn new(mut indices: Vec<usize>, n: usize) -> Result<Self> {
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::BadSpec("duplicate index in forget mask".into()));
        }
        if let Some(&last) = indices.last() {
            if last >= n {
                return Err(Error::BadSpec(format!("mask index {last} out of range for {n} samples")));
            }
        }
        Ok(Self { indices })
    }

    pub fn empty() -> Self {
        Self { indices: Vec::new() }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    /// Indices in `[0, n)` not in the mask, ascending.
    pub fn complement(&self, n: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(n.saturating_sub(self.len()));
        let mut it = self.indices.iter().peekable();
        for i in 0..n {
            if it.peek() == Some(&&i) {
                it.next();
            } else {
                out.push(i);
            }
        }
        out
    }

    /// 0/1 indicator vector of length `n`.
    pub fn indicator(&self, n: usize) -> Vec<f64> {
        let mut w = vec![0.0; n];
        for &i in &self.indices {
            w[i] = 1.0;
        }
        w
    }

    pub fn to_file_string(&self) -> String {
        let mut s = String::new();
        for i in &self.indices {
            writeln!(s, "{i}").unwrap();
        }
        s
    }

    pub fn parse(text: &str, n: usize) -> Result<Self> {
        let mut idx = Vec::new();
        for (row, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let v = line.trim().parse::<usize>().map_err(|e| Error::Parse {
                row: row + 1,
                column: "index".into(),
                message: e.to_string(),
            })?;
            idx.push(v);
        }
        Self::new(idx, n)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_file_string())?;
        Ok(())
    }

    pub fn load(path: &Path, n: usize) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?, n)
    }
}

/// Indices of the `m` largest weights; ties go to the lower index.
pub fn mask_from_weights(w: &[f64], m: usize) -> Result<ForgetMask> {
    let n = w.len();
    if m > n {
        return Err(Error::Budget { m, n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| w[b].total_cmp(&w[a]).then(a.cmp(&b)));
    order.truncate(m);
    ForgetMask::new(order, n)
}

/// Mean of class `c` among `classes` blobs in `dim` dimensions.
///
/// Two classes sit at `±1` on the first axis. With three or more classes and
/// `dim >= 2`, means lie on a circle in the first two axes with neighbouring
/// means [`BLOB_MEAN_SPACING`] apart; with `dim == 1` they are evenly spaced
/// on the line.
pub fn blob_mean(c: usize, classes: usize, dim: usize) -> Vec<f64> {
    let mut mean = vec![0.0; dim];
    if classes == 1 {
        return mean;
    }
    if classes == 2 || dim == 1 {
        let center = (classes - 1) as f64 / 2.0;
        mean[0] = (c as f64 - center) * BLOB_MEAN_SPACING;
        return mean;
    }
    let radius = BLOB_MEAN_SPACING / (2.0 * (std::f64::consts::PI / classes as f64).sin());
    let angle = 2.0 * std::f64::consts::PI * c as f64 / classes as f64;
    mean[0] = radius * angle.cos();
    mean[1] = radius * angle.sin();
    mean
}

/// Isotropic Gaussian blobs; sample `i` has label `i % classes`.
pub fn gen_blobs(n_per_class: usize, classes: usize, dim: usize, spread: f64, rng: RngStream) -> Result<Dataset> {
    if n_per_class == 0 || classes == 0 || dim == 0 || !(spread > 0.0) || !spread.is_finite() {
        return Err(Error::BadSpec(format!(
            "gen_blobs(n_per_class={n_per_class}, classes={classes}, dim={dim}, spread={spread})"
        )));
    }
    let means: Vec<Vec<f64>> = (0..classes).map(|c| blob_mean(c, classes, dim)).collect();
    let n = n_per_class * classes;
    let mut r = rng.rng();
    let mut data = Vec::with_capacity(n * dim);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % classes;
        for &m in &means[c] {
            let z: f64 = r.sample(StandardNormal);
            data.push(m + spread * z);
        }
        y.push(c);
    }
    Dataset::new(Matrix::from_vec(n, dim, data)?, y, classes, Split::Train)
}

/// Binary task with a spurious binary attribute.
///
/// Each label is a fair coin; the group equals the label with probability
/// `correlation`. Feature 0 carries the label (means `±1`, noise 1.0) and
/// feature 1 carries the group (means `±1.5`, noise 0.5), so a classifier
/// picks up the group as a shortcut and the label-aligned majority is easy.
pub fn gen_biased(n: usize, correlation: f64, rng: RngStream) -> Result<(Dataset, GroupLabels)> {
    if n == 0 || !(0.0..=1.0).contains(&correlation) {
        return Err(Error::BadSpec(format!("gen_biased(n={n}, correlation={correlation})")));
    }
    let mut r = rng.rng();
    let mut data = Vec::with_capacity(2 * n);
    let mut y = Vec::with_capacity(n);
    let mut group = Vec::with_capacity(n);
    for _ in 0..n {
        let label = usize::from(r.random_bool(0.5));
        let aligned = r.random_bool(correlation);
        let g = if aligned { label } else { 1 - label };
        let z0: f64 = r.sample(StandardNormal);
        let z1: f64 = r.sample(StandardNormal);
        data.push(if label == 1 { 1.0 } else { -1.0 } + 1.0 * z0);
        data.push(if g == 1 { 1.5 } else { -1.5 } + 0.5 * z1);
        y.push(label);
        group.push(g);
    }
    let ds = Dataset::new(Matrix::from_vec(n, 2, data)?, y, 2, Split::Train)?;
    Ok((ds, GroupLabels { group }))
}

/// Fraction of samples whose group equals their label.
pub fn alignment_fraction(ds: &Dataset, groups: &GroupLabels, idx: &[usize]) -> f64 {
    if idx.is_empty() {
        return 0.0;
    }
    idx.iter().filter(|&&i| groups.group[i] == ds.y[i]).count() as f64 / idx.len() as f64
}

fn csv_text(ds: &Dataset, groups: Option<&GroupLabels>) -> String {
    let mut s = String::new();
    let header: Vec<String> = (0..ds.dim()).map(|j| format!("f{j}")).collect();
    s.push_str(&header.join(","));
    s.push_str(",label");
    if groups.is_some() {
        s.push_str(",group");
    }
    s.push('\n');
    for i in 0..ds.len() {
        for v in ds.x.row(i) {
            write!(s, "{v:?},").unwrap();
        }
        write!(s, "{}", ds.y[i]).unwrap();
        if let Some(g) = groups {
            write!(s, ",{}", g.group[i]).unwrap();
        }
        s.push('\n');
    }
    s
}

pub fn save_csv(ds: &Dataset, path: &Path) -> Result<()> {
    std::fs::write(path, csv_text(ds, None))?;
    Ok(())
}

pub fn save_csv_with_groups(ds: &Dataset, groups: &GroupLabels, path: &Path) -> Result<()> {
    std::fs::write(path, csv_text(ds, Some(groups)))?;
    Ok(())
}

pub fn load_csv(path: &Path) -> Result<Dataset> {
    Ok(parse_csv(&std::fs::read_to_string(path)?, &path.display().to_string())?.0)
}

pub fn load_csv_with_groups(path: &Path) -> Result<(Dataset, Option<GroupLabels>)> {
    parse_csv(&std::fs::read_to_string(path)?, &path.display().to_string())
}

/// Parses dataset CSV text. `origin` names the source in errors. Row numbers
/// in errors are 1-based file lines (the header is row 1). The class count is
/// one more than the largest label.
pub fn parse_csv(text: &str, origin: &str) -> Result<(Dataset, Option<GroupLabels>)> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::EmptyFile(origin.to_string()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let has_group = cols.last() == Some(&"group");
    let n_meta = if has_group { 2 } else { 1 };
    if cols.len() < n_meta + 1 || cols[cols.len() - n_meta] != "label" {
        return Err(Error::Parse { row: 1, column: "header".into(), message: "expected f0,...,label".into() });
    }
    let dim = cols.len() - n_meta;
    for (j, c) in cols[..dim].iter().enumerate() {
        if *c != format!("f{j}") {
            return Err(Error::Parse { row: 1, column: c.to_string(), message: format!("expected f{j}") });
        }
    }

    let mut data = Vec::new();
    let mut y = Vec::new();
    let mut group = Vec::new();
    for (line_no, line) in lines {
        let row = line_no + 1;
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != cols.len() {
            return Err(Error::Parse {
                row,
                column: "*".into(),
                message: format!("expected {} cells, found {}", cols.len(), cells.len()),
            });
        }
        for j in 0..dim {
            let v = cells[j].parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
                row,
                column: cols[j].to_string(),
                message: format!("not a finite number: '{}'", cells[j]),
            })?;
            data.push(v);
        }
        let parse_int = |j: usize| {
            cells[j].parse::<usize>().map_err(|_| Error::Parse {
                row,
                column: cols[j].to_string(),
                message: format!("not a non-negative integer: '{}'", cells[j]),
            })
        };
        y.push(parse_int(dim)?);
        if has_group {
            group.push(parse_int(dim + 1)?);
        }
    }
    if y.is_empty() {
        return Err(Error::EmptyFile(origin.to_string()));
    }
    let classes = y.iter().max().unwrap() + 1;
    let n = y.len();
    let ds = Dataset::new(Matrix::from_vec(n, dim, data)?, y, classes, Split::Train)?;
    Ok((ds, has_group.then_some(GroupLabels { group })))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn blobs_collapse_with_tiny_spread() {
        let ds = gen_blobs(10, 3, 4, 1e-12, RngStream::new(1, 0)).unwrap();
        for i in 0..ds.len() {
            let mean = blob_mean(ds.y[i], 3, 4);
            for (v, m) in ds.x.row(i).iter().zip(&mean) {
                assert!((v - m).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn blobs_are_reproducible() {
        let a = gen_blobs(20, 3, 2, 0.5, RngStream::new(4, 1)).unwrap();
        let b = gen_blobs(20, 3, 2, 0.5, RngStream::new(4, 1)).unwrap();
        assert_eq!(a, b);
        let c = gen_blobs(20, 3, 2, 0.5, RngStream::new(4, 2)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn blob_means_are_spaced() {
        for classes in [2usize, 3, 5, 8] {
            for dim in [1usize, 2, 3] {
                let means: Vec<Vec<f64>> = (0..classes).map(|c| blob_mean(c, classes, dim)).collect();
                let mut min_d = f64::INFINITY;
                for a in 0..classes {
                    for b in a + 1..classes {
                        let d: f64 = means[a].iter().zip(&means[b]).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
                        min_d = min_d.min(d);
                    }
                }
                assert!((min_d - BLOB_MEAN_SPACING).abs() < 1e-9, "classes={classes} dim={dim} min={min_d}");
            }
        }
    }

    #[test]
    fn blobs_reject_bad_spec() {
        assert!(gen_blobs(0, 2, 2, 0.3, RngStream::new(0, 0)).is_err());
        assert!(gen_blobs(5, 2, 2, 0.0, RngStream::new(0, 0)).is_err());
    }

    fn binomial_ok(frac: f64, p: f64, n: usize) -> bool {
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        (frac - p).abs() <= 3.0 * sigma
    }

    #[test]
    fn biased_alignment_rates() {
        let (ds, g) = gen_biased(2000, 0.5, RngStream::new(3, 0)).unwrap();
        let all: Vec<usize> = (0..ds.len()).collect();
        assert!(binomial_ok(alignment_fraction(&ds, &g, &all), 0.5, 2000));

        let (ds, g) = gen_biased(500, 1.0, RngStream::new(3, 0)).unwrap();
        assert_eq!(g.group, ds.y);

        let (ds, g) = gen_biased(2000, 0.9, RngStream::new(9, 0)).unwrap();
        let frac = alignment_fraction(&ds, &g, &all);
        assert!((frac - 0.9).abs() <= 0.02, "{frac}");
        assert!(gen_biased(10, 1.5, RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn biased_alignment_over_many_seeds() {
        // E[group == label] = correlation, 3 sigma per seed
        for seed in 0..10 {
            let (ds, g) = gen_biased(1000, 0.7, RngStream::new(seed, 5)).unwrap();
            let all: Vec<usize> = (0..ds.len()).collect();
            assert!(binomial_ok(alignment_fraction(&ds, &g, &all), 0.7, 1000));
        }
    }

    #[test]
    fn csv_single_row() {
        let (ds, groups) = parse_csv("f0,label\n1.5,0", "inline").unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.dim(), 1);
        assert_eq!(ds.y, vec![0]);
        assert_eq!(ds.x.get(0, 0), 1.5);
        assert!(groups.is_none());
    }

    #[test]
    fn csv_round_trip() {
        let ds = gen_blobs(15, 3, 4, 0.7, RngStream::new(12, 0)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        save_csv(&ds, &path).unwrap();
        assert_eq!(load_csv(&path).unwrap(), ds);

        let (b, g) = gen_biased(40, 0.8, RngStream::new(1, 0)).unwrap();
        save_csv_with_groups(&b, &g, &path).unwrap();
        let (b2, g2) = load_csv_with_groups(&path).unwrap();
        assert_eq!(b2, b);
        assert_eq!(g2, Some(g));
        // the plain loader ignores the group column
        assert_eq!(load_csv(&path).unwrap(), b);
    }

    #[test]
    fn csv_errors_name_the_cell() {
        match parse_csv("f0,label\nabc,0\n", "inline") {
            Err(Error::Parse { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "f0");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_csv("", "inline"), Err(Error::EmptyFile(_))));
        assert!(matches!(parse_csv("f0,label\n", "inline"), Err(Error::EmptyFile(_))));
        assert!(matches!(parse_csv("f0,label\n1.0,x\n", "inline"), Err(Error::Parse { row: 2, .. })));
    }

    #[test]
    fn mask_from_weights_examples() {
        assert_eq!(mask_from_weights(&[0.9, 0.1, 0.8], 2).unwrap().indices(), &[0, 2]);
        assert_eq!(mask_from_weights(&[0.3; 5], 2).unwrap().indices(), &[0, 1]);
        assert!(matches!(mask_from_weights(&[0.1, 0.2], 3), Err(Error::Budget { m: 3, n: 2 })));
    }

    #[test]
    fn mask_from_weights_matches_sort_oracle() {
        let mut r = RngStream::new(77, 0).rng();
        for _ in 0..50 {
            let w: Vec<f64> = (0..20).map(|_| r.random_range(0.0..1.0)).collect();
            // full sort oracle: sort (value desc, index asc) pairs
            let mut pairs: Vec<(f64, usize)> = w.iter().copied().zip(0..).collect();
            pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
            let mut expect: Vec<usize> = pairs[..5].iter().map(|p| p.1).collect();
            expect.sort();
            assert_eq!(mask_from_weights(&w, 5).unwrap().indices(), expect.as_slice());
        }
    }

    #[test]
    fn mask_file_round_trip() {
        let m = ForgetMask::new(vec![7, 2, 4], 10).unwrap();
        assert_eq!(m.to_file_string(), "2\n4\n7\n");
        assert_eq!(ForgetMask::parse(&m.to_file_string(), 10).unwrap(), m);
        assert!(ForgetMask::new(vec![1, 1], 10).is_err());
        assert!(ForgetMask::new(vec![10], 10).is_err());
    }

    proptest! {
        #[test]
        fn mask_and_complement_partition(n in 1usize..60, picks in proptest::collection::vec(0usize..60, 0..30)) {
            let idx: Vec<usize> = {
                let mut v: Vec<usize> = picks.into_iter().filter(|&i| i < n).collect();
                v.sort(); v.dedup(); v
            };
            let mask = ForgetMask::new(idx, n).unwrap();
            let comp = mask.complement(n);
            prop_assert_eq!(mask.len() + comp.len(), n);
            let mut all: Vec<usize> = mask.indices().iter().chain(&comp).copied().collect();
            all.sort();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        }
    }
}
