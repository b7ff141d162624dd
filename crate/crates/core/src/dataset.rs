//! The labeled set of target (label 1) and instrumental (label 0) draws.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::distributions::Distribution;
use crate::error::{Error, Result};
use crate::points::Points;
use crate::rng::RngStream;

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    points: Points,
    labels: Vec<u8>,
    n0: usize,
    n1: usize,
}

impl LabeledDataset {
    pub fn new(points: Points, labels: Vec<u8>) -> Result<Self> {
        if points.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                found: labels.len(),
            });
        }
        if let Some(bad) = labels.iter().find(|&&k| k > 1) {
            return Err(Error::invalid(format!("label {bad} is not 0 or 1")));
        }
        let n1 = labels.iter().filter(|&&k| k == 1).count();
        Ok(Self {
            n0: labels.len() - n1,
            n1,
            points,
            labels,
        })
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            points: Points::new(dim),
            labels: Vec::new(),
            n0: 0,
            n1: 0,
        }
    }

    /// Concatenates the two classes and shuffles rows with `rng`.
    pub fn from_classes(class1: &Points, class0: &Points, rng: &mut RngStream) -> Result<Self> {
        if class1.dim() != class0.dim() {
            return Err(Error::DimensionMismatch {
                expected: class1.dim(),
                found: class0.dim(),
            });
        }
        let mut order: Vec<(usize, u8)> = (0..class1.len())
            .map(|i| (i, 1))
            .chain((0..class0.len()).map(|i| (i, 0)))
            .collect();
        rng.shuffle(&mut order);
        let mut points = Points::with_capacity(class1.dim(), order.len());
        let mut labels = Vec::with_capacity(order.len());
        for (i, k) in order {
            points.push(if k == 1 { class1.row(i) } else { class0.row(i) });
            labels.push(k);
        }
        Self::new(points, labels)
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n0(&self) -> usize {
        self.n0
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn points(&self) -> &Points {
        &self.points
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], u8)> + '_ {
        self.points.rows().zip(self.labels.iter().copied())
    }

    /// Points carrying `label`, in dataset order.
    pub fn class_points(&self, label: u8) -> Points {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| self.labels[i] == label).collect();
        self.points.select(&idx)
    }

    pub fn select(&self, idx: &[usize]) -> LabeledDataset {
        let labels = idx.iter().map(|&i| self.labels[i]).collect();
        Self::new(self.points.select(idx), labels).expect("subset of a valid dataset")
    }

    /// Errors unless both classes are present.
    pub fn require_both_classes(&self) -> Result<()> {
        if self.n0 == 0 || self.n1 == 0 {
            return Err(Error::TooFewSamples(format!(
                "training needs both classes, have n1={} n0={}",
                self.n1, self.n0
            )));
        }
        Ok(())
    }

    /// CSV with header `x0,...,x{d-1},label`. Floats use 17 significant
    /// digits so loading gives back the same bits.
    pub fn to_csv_string(&self) -> String {
        let d = self.dim();
        let mut s = String::new();
        for j in 0..d {
            let _ = write!(s, "x{j},");
        }
        s.push_str("label\n");
        for (x, k) in self.iter() {
            for v in x {
                let _ = write!(s, "{v:.16e},");
            }
            let _ = writeln!(s, "{k}");
        }
        s
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_str(&text)
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "missing header".into(),
        })?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        let d = cols.len().saturating_sub(1);
        let header_ok = d >= 1
            && cols[d] == "label"
            && cols[..d].iter().enumerate().all(|(j, c)| *c == format!("x{j}"));
        if !header_ok {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header x0,...,x{{d-1}},label, got `{header}`"),
            });
        }
        let mut points = Points::new(d);
        let mut labels = Vec::new();
        let mut row = Vec::with_capacity(d);
        for (i, line) in lines {
            let lineno = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != d + 1 {
                return Err(Error::DimensionMismatch {
                    expected: d + 1,
                    found: fields.len(),
                });
            }
            row.clear();
            for f in &fields[..d] {
                let v: f64 = f.parse().map_err(|_| Error::Parse {
                    line: lineno,
                    message: format!("bad number `{f}`"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        line: lineno,
                        message: format!("non-finite coordinate `{f}`"),
                    });
                }
                row.push(v);
            }
            let label = match fields[d] {
                "0" => 0,
                "1" => 1,
                other => {
                    return Err(Error::Parse {
                        line: lineno,
                        message: format!("label must be 0 or 1, got `{other}`"),
                    })
                }
            };
            points.push(&row);
            labels.push(label);
        }
        Self::new(points, labels)
    }
}

/// `n1` draws of `p1` labeled 1 and `n0` draws of `p0` labeled 0, shuffled.
/// Class 1 is drawn first, then class 0, then the shuffle, all from `rng`.
pub fn build_dataset(
    p1: &Distribution,
    p0: &Distribution,
    n1: usize,
    n0: usize,
    rng: &mut RngStream,
) -> Result<LabeledDataset> {
    if n1 == 0 || n0 == 0 {
        return Err(Error::TooFewSamples("build_dataset needs n1, n0 >= 1".into()));
    }
    if p1.dim() != p0.dim() {
        return Err(Error::DimensionMismatch {
            expected: p1.dim(),
            found: p0.dim(),
        });
    }
    let c1 = p1.sample(n1, rng);
    let c0 = p0.sample(n0, rng);
    LabeledDataset::from_classes(&c1, &c0, rng)
}

#[derive(Clone, Debug)]
pub struct DatasetSplit {
    pub train: LabeledDataset,
    pub validation: LabeledDataset,
    pub split_fraction: f64,
}

/// Per-class split: `floor(fraction * n_k)` points of class `k` go to
/// train, the rest to validation. Each class needs at least two points and
/// must end up with at least one training point.
pub fn stratified_split(
    ds: &LabeledDataset,
    fraction: f64,
    rng: &mut RngStream,
) -> Result<DatasetSplit> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(format!("split fraction {fraction} not in (0,1)")));
    }
    if ds.n0 < 2 || ds.n1 < 2 {
        return Err(Error::TooFewSamples(format!(
            "stratified split needs >= 2 points per class, have n1={} n0={}",
            ds.n1, ds.n0
        )));
    }
    let mut train_idx = Vec::new();
    let mut val_idx = Vec::new();
    for label in [1u8, 0] {
        let mut idx: Vec<usize> = (0..ds.len()).filter(|&i| ds.labels[i] == label).collect();
        rng.shuffle(&mut idx);
        let n_train = (fraction * idx.len() as f64).floor() as usize;
        if n_train == 0 {
            return Err(Error::TooFewSamples(format!(
                "class {label} gets no training points at fraction {fraction}"
            )));
        }
        train_idx.extend_from_slice(&idx[..n_train]);
        val_idx.extend_from_slice(&idx[n_train..]);
    }
    train_idx.sort_unstable();
    val_idx.sort_unstable();
    Ok(DatasetSplit {
        train: ds.select(&train_idx),
        validation: ds.select(&val_idx),
        split_fraction: fraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::create_rng;

    fn gaussian_pair() -> (Distribution, Distribution) {
        (
            Distribution::normal_1d(0.0, 1.0).unwrap(),
            Distribution::normal_1d(0.0, 4.0).unwrap(),
        )
    }

    fn counts_dataset(n1: usize, n0: usize) -> LabeledDataset {
        let (p1, p0) = gaussian_pair();
        build_dataset(&p1, &p0, n1, n0, &mut create_rng(0, 0)).unwrap()
    }

    #[test]
    fn build_counts() {
        let ds = counts_dataset(100, 100);
        assert_eq!((ds.n0(), ds.n1(), ds.len()), (100, 100, 200));
        let ds = counts_dataset(1, 1);
        assert_eq!(ds.len(), 2);
        let (p1, p0) = gaussian_pair();
        assert!(build_dataset(&p1, &p0, 0, 3, &mut create_rng(0, 0)).is_err());
    }

    #[test]
    fn build_class_variances() {
        let ds = counts_dataset(5000, 5000);
        let v1 = ds.class_points(1).variance()[0];
        let v0 = ds.class_points(0).variance()[0];
        assert!((v1 - 1.0).abs() < 0.1, "{v1}");
        assert!((v0 - 4.0).abs() < 0.4, "{v0}");
    }

    #[test]
    fn build_is_shuffled() {
        let ds = counts_dataset(50, 50);
        assert_ne!(ds.labels()[..50].iter().filter(|&&k| k == 1).count(), 50);
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let ds = counts_dataset(20, 30);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        ds.save_csv(&path).unwrap();
        let back = LabeledDataset::load_csv(&path).unwrap();
        assert_eq!(back, ds);
        assert!(std::fs::read_to_string(&path).unwrap().starts_with("x0,label\n"));
    }

    #[test]
    fn csv_bad_label_names_line() {
        let err = LabeledDataset::from_csv_str("x0,x1,label\n1,2,0\n3,4,2\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_ragged_row() {
        let err = LabeledDataset::from_csv_str("x0,x1,label\n1,2,0\n3,1\n").unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn csv_header_only_loads_empty() {
        let ds = LabeledDataset::from_csv_str("x0,x1,label\n").unwrap();
        assert!(ds.is_empty());
        assert_eq!(ds.dim(), 2);
        assert!(ds.require_both_classes().is_err());
    }

    #[test]
    fn split_exact() {
        let ds = counts_dataset(100, 100);
        let s = stratified_split(&ds, 0.8, &mut create_rng(1, 0)).unwrap();
        assert_eq!((s.train.n1(), s.train.n0()), (80, 80));
        assert_eq!((s.validation.n1(), s.validation.n0()), (20, 20));
    }

    #[test]
    fn split_floors_to_train() {
        let ds = counts_dataset(3, 3);
        let s = stratified_split(&ds, 0.5, &mut create_rng(1, 0)).unwrap();
        assert_eq!((s.train.n1(), s.train.n0()), (1, 1));
        assert_eq!((s.validation.n1(), s.validation.n0()), (2, 2));
    }

    #[test]
    fn split_too_few() {
        let ds = counts_dataset(1, 100);
        assert!(matches!(
            stratified_split(&ds, 0.5, &mut create_rng(1, 0)),
            Err(Error::TooFewSamples(_))
        ));
    }

    #[test]
    fn split_is_disjoint_cover() {
        let ds = counts_dataset(37, 41);
        let s = stratified_split(&ds, 0.7, &mut create_rng(2, 0)).unwrap();
        assert_eq!(s.train.len() + s.validation.len(), ds.len());
        let mut all: Vec<u64> = s
            .train
            .points()
            .as_flat()
            .iter()
            .chain(s.validation.points().as_flat())
            .map(|v| v.to_bits())
            .collect();
        all.sort_unstable();
        let mut orig: Vec<u64> = ds.points().as_flat().iter().map(|v| v.to_bits()).collect();
        orig.sort_unstable();
        assert_eq!(all, orig);
    }
}
