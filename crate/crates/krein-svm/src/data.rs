//! Datasets: synthetic blob generation, file formats, and splits.
//!
//! Everything here is deterministic given its seed. Randomness comes from
//! ChaCha8 (`rand_chacha`, stream-stable across versions) seeded via
//! `seed_from_u64`; uniforms take the top 53 bits of `next_u64`, normals are
//! produced by an explicit Box–Muller transform (two fresh uniforms per
//! normal, no spare caching), and shuffles are a hand-written Fisher–Yates.
//! The draw order is part of the format: centers first, then the
//! center-to-class shuffle, then per-sample noise in center order.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

// ───────────────────────────── points ─────────────────────────────

/// A dense, row-major bundle of feature vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct Points {
    n: usize,
    dim: usize,
    data: Vec<f64>,
}

impl Points {
    pub fn new(n: usize, dim: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * dim, "Points storage size mismatch");
        Points { n, dim, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Points {
            n: rows.len(),
            dim,
            data,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim.max(1))
    }

    /// Rows at `indices`, in order.
    pub fn select(&self, indices: &[usize]) -> Points {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.point(i));
        }
        Points {
            n: indices.len(),
            dim: self.dim,
            data,
        }
    }
}

/// Labeled dataset; labels are exactly -1.0 or +1.0.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub points: Points,
    pub labels: Vec<f64>,
    /// Generator parameters when the data is synthetic.
    pub meta: Option<BlobConfig>,
}

impl Dataset {
    pub fn new(points: Points, labels: Vec<f64>) -> Result<Self> {
        if labels.len() != points.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                actual: labels.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|l| **l != 1.0 && **l != -1.0) {
            return Err(Error::Label(bad));
        }
        Ok(Dataset {
            points,
            labels,
            meta: None,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `(count of +1, count of -1)`.
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|l| **l > 0.0).count();
        (pos, self.labels.len() - pos)
    }

    /// Rows at `indices`, in order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            points: self.points.select(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            meta: self.meta.clone(),
        }
    }
}

// ───────────────────────────── blobs ─────────────────────────────

/// Parameters for the isotropic Gaussian blob generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlobConfig {
    pub n_samples: usize,
    pub dimension: usize,
    /// Number of cluster centers; must be even so classes get an equal share.
    pub n_centers: usize,
    /// Centers are drawn uniformly from this box, per coordinate.
    pub center_box: (f64, f64),
    pub cluster_std: f64,
    pub seed: u64,
}

impl BlobConfig {
    /// Defaults: 5 dimensions, 4 centers in `[-10, 10]`, spread 2.0.
    pub fn new(n_samples: usize, seed: u64) -> Self {
        BlobConfig {
            n_samples,
            dimension: 5,
            n_centers: 4,
            center_box: (-10.0, 10.0),
            cluster_std: 2.0,
            seed,
        }
    }
}

#[inline]
fn uniform01(rng: &mut ChaCha8Rng) -> f64 {
    // Top 53 bits of the stream, mapped to [0, 1).
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

/// One standard normal via Box–Muller; always consumes exactly two uniforms.
#[inline]
fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1 = 1.0 - uniform01(rng); // (0, 1] keeps the log finite
    let u2 = uniform01(rng);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// In-place Fisher–Yates shuffle.
fn shuffle<T>(v: &mut [T], rng: &mut ChaCha8Rng) {
    for i in (1..v.len()).rev() {
        // Unbiased enough at these sizes; 53-bit uniform scaled to 0..=i.
        let j = (uniform01(rng) * (i + 1) as f64) as usize;
        v.swap(i, j.min(i));
    }
}

/// Generates isotropic Gaussian blobs around uniformly drawn centers, with
/// half the centers per class and class sizes of `n/2` up to rounding.
///
/// Deterministic given the seed; see the module docs for the exact draw
/// order.
pub fn make_blobs(cfg: &BlobConfig) -> Result<Dataset> {
    if cfg.n_centers == 0 || cfg.n_centers % 2 != 0 {
        return Err(Error::InvalidConfig(format!(
            "n_centers must be even and nonzero, got {}",
            cfg.n_centers
        )));
    }
    if cfg.dimension == 0 {
        return Err(Error::InvalidConfig("dimension must be >= 1".into()));
    }
    if cfg.cluster_std < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "cluster_std must be >= 0, got {}",
            cfg.cluster_std
        )));
    }
    if cfg.center_box.1 < cfg.center_box.0 {
        return Err(Error::InvalidConfig(format!(
            "center_box must be ordered, got ({}, {})",
            cfg.center_box.0, cfg.center_box.1
        )));
    }
    let (n, d, c) = (cfg.n_samples, cfg.dimension, cfg.n_centers);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    // 1. Centers, row by row, coordinate by coordinate.
    let (lo, hi) = cfg.center_box;
    let width = hi - lo;
    let mut centers = Vec::with_capacity(c * d);
    for _ in 0..c * d {
        centers.push(lo + width * uniform01(&mut rng));
    }

    // 2. Class per center: half +1, half -1, shuffled.
    let mut center_class: Vec<f64> = (0..c).map(|i| if i < c / 2 { 1.0 } else { -1.0 }).collect();
    shuffle(&mut center_class, &mut rng);

    // 3. Per-center sample counts: each class splits its n/2 quota (the +1
    //    class absorbs an odd remainder) evenly over its centers, extras to
    //    the earliest centers of that class.
    let quota = [n - n / 2, n / 2]; // [+1, -1]
    let mut counts = vec![0usize; c];
    for (class_idx, &class) in [1.0, -1.0].iter().enumerate() {
        let members: Vec<usize> = (0..c).filter(|&i| center_class[i] == class).collect();
        let q = quota[class_idx];
        for (rank, &center) in members.iter().enumerate() {
            counts[center] = q / members.len() + usize::from(rank < q % members.len());
        }
    }

    // 4. Samples: center order, sample by sample, coordinate by coordinate.
    let mut data = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for center in 0..c {
        for _ in 0..counts[center] {
            for coord in 0..d {
                data.push(centers[center * d + coord] + cfg.cluster_std * normal(&mut rng));
            }
            labels.push(center_class[center]);
        }
    }

    let mut ds = Dataset::new(Points::new(n, d, data), labels)?;
    ds.meta = Some(cfg.clone());
    Ok(ds)
}

// ───────────────────────────── splits ─────────────────────────────

/// Seeded shuffle-and-cut split. The test set takes `round(test_fraction*n)`
/// rows; errors with `DegenerateSplit` when the training side loses a class.
pub fn train_test_split(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(0.0..=1.0).contains(&test_fraction) {
        return Err(Error::InvalidConfig(format!(
            "test_fraction must be in [0, 1], got {test_fraction}"
        )));
    }
    let n = ds.len();
    let n_test = ((test_fraction * n as f64).round() as usize).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffle(&mut order, &mut rng);
    let test = ds.select(&order[..n_test]);
    let train = ds.select(&order[n_test..]);
    let (pos, neg) = train.class_counts();
    if pos == 0 || neg == 0 {
        return Err(Error::DegenerateSplit { seed });
    }
    Ok((train, test))
}

// ───────────────────────────── libsvm format ─────────────────────────────

/// Maps a raw file label onto {-1, +1}; 0 is remapped to -1 (count returned
/// to the caller for a single warning), anything else is an error.
fn map_label(raw: f64, line: usize, remapped: &mut usize) -> Result<f64> {
    if raw == 1.0 || raw == -1.0 {
        Ok(raw)
    } else if raw == 0.0 {
        *remapped += 1;
        let _ = line;
        Ok(-1.0)
    } else {
        Err(Error::Label(raw))
    }
}

/// Loads a `label index:value ...` file (1-based, strictly ascending
/// indices). Missing indices are zeros; the dimension is the largest index
/// seen. Labels must be +/-1, with 0 accepted and remapped to -1 under a
/// logged warning.
pub fn load_libsvm(path: impl AsRef<Path>) -> Result<Dataset> {
    let text = fs::read_to_string(path)?;
    let mut rows: Vec<(f64, Vec<(usize, f64)>)> = Vec::new();
    let mut dim = 0usize;
    let mut remapped = 0usize;
    for (line_idx, line) in text.lines().enumerate() {
        let line_no = line_idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let label_tok = tokens.next().expect("non-empty line has a first token");
        let raw_label: f64 = label_tok.parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("invalid label {label_tok:?}"),
        })?;
        let label = map_label(raw_label, line_no, &mut remapped)?;
        let mut features = Vec::new();
        let mut prev_index = 0usize;
        for tok in tokens {
            let (idx_s, val_s) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line: line_no,
                message: format!("expected index:value, got {tok:?}"),
            })?;
            let index: usize = idx_s.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("invalid feature index {idx_s:?}"),
            })?;
            let value: f64 = val_s.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("invalid feature value {val_s:?}"),
            })?;
            if index == 0 || index <= prev_index {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!(
                        "feature indices must be 1-based and strictly ascending (index {index} after {prev_index})"
                    ),
                });
            }
            prev_index = index;
            dim = dim.max(index);
            features.push((index, value));
        }
        rows.push((label, features));
    }
    if remapped > 0 {
        log::warn!("remapped {remapped} label(s) 0 -> -1");
    }
    let n = rows.len();
    let mut data = vec![0.0; n * dim];
    let mut labels = Vec::with_capacity(n);
    for (i, (label, features)) in rows.into_iter().enumerate() {
        labels.push(label);
        for (index, value) in features {
            data[i * dim + (index - 1)] = value;
        }
    }
    Dataset::new(Points::new(n, dim, data), labels)
}

/// Writes `label index:value ...` lines. Values print in Rust's shortest
/// round-trip form, so a load gives back bitwise-identical floats; exact
/// zeros are omitted (the format is sparse).
pub fn save_libsvm(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    for i in 0..ds.len() {
        let _ = write!(out, "{}", if ds.labels[i] > 0.0 { "+1" } else { "-1" });
        for (j, &v) in ds.points.point(i).iter().enumerate() {
            if v != 0.0 {
                let _ = write!(out, " {}:{}", j + 1, v);
            }
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

// ───────────────────────────── csv format ─────────────────────────────

/// A CSV load: labeled when the file carries the trailing `label` column.
#[derive(Clone, Debug)]
pub enum LoadedData {
    Labeled(Dataset),
    Unlabeled(Points),
}

impl LoadedData {
    pub fn points(&self) -> &Points {
        match self {
            LoadedData::Labeled(ds) => &ds.points,
            LoadedData::Unlabeled(p) => p,
        }
    }

    pub fn labels(&self) -> Option<&[f64]> {
        match self {
            LoadedData::Labeled(ds) => Some(&ds.labels),
            LoadedData::Unlabeled(_) => None,
        }
    }

    pub fn into_dataset(self) -> Result<Dataset> {
        match self {
            LoadedData::Labeled(ds) => Ok(ds),
            LoadedData::Unlabeled(_) => Err(Error::InvalidConfig(
                "data file has no label column".into(),
            )),
        }
    }
}

/// Loads a `f0,...,f{d-1}[,label]` CSV. The header is validated literally;
/// the label column is optional and must be last.
pub fn load_csv(path: impl AsRef<Path>) -> Result<LoadedData> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "empty file".into(),
    })?;
    let cols: Vec<&str> = header.trim().split(',').map(str::trim).collect();
    let labeled = cols.last() == Some(&"label");
    let d = cols.len() - usize::from(labeled);
    if d == 0 {
        return Err(Error::Parse {
            line: 1,
            message: "no feature columns in header".into(),
        });
    }
    for (j, col) in cols[..d].iter().enumerate() {
        if *col != format!("f{j}") {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header column f{j}, got {col:?}"),
            });
        }
    }
    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut n = 0usize;
    let mut remapped = 0usize;
    for (line_idx, line) in lines {
        let line_no = line_idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim().split(',').map(str::trim).collect();
        if fields.len() != cols.len() {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected {} fields, got {}", cols.len(), fields.len()),
            });
        }
        for field in &fields[..d] {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("invalid value {field:?}"),
            })?;
            data.push(v);
        }
        if labeled {
            let raw: f64 = fields[d].parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("invalid label {:?}", fields[d]),
            })?;
            labels.push(map_label(raw, line_no, &mut remapped)?);
        }
        n += 1;
    }
    if remapped > 0 {
        log::warn!("remapped {remapped} label(s) 0 -> -1");
    }
    let points = Points::new(n, d, data);
    if labeled {
        Ok(LoadedData::Labeled(Dataset::new(points, labels)?))
    } else {
        Ok(LoadedData::Unlabeled(points))
    }
}

/// Writes the `f0,...,f{d-1},label` CSV form of a dataset.
pub fn save_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let d = ds.points.dim();
    let mut out = String::new();
    for j in 0..d {
        let _ = write!(out, "f{j},");
    }
    out.push_str("label\n");
    for i in 0..ds.len() {
        for &v in ds.points.point(i) {
            let _ = write!(out, "{v},");
        }
        let _ = writeln!(out, "{}", if ds.labels[i] > 0.0 { 1 } else { -1 });
    }
    fs::write(path, out)?;
    Ok(())
}

/// Loads a data file, dispatching on extension: `.csv` via [`load_csv`],
/// anything else as libsvm.
pub fn load_auto(path: impl AsRef<Path>) -> Result<LoadedData> {
    let p = path.as_ref();
    if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        load_csv(p)
    } else {
        Ok(LoadedData::Labeled(load_libsvm(p)?))
    }
}

// ───────────────────────────── tests ─────────────────────────────

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blobs_are_deterministic_given_seed() {
        let cfg = BlobConfig::new(40, 123);
        let a = make_blobs(&cfg).unwrap();
        let b = make_blobs(&cfg).unwrap();
        assert_eq!(a.points, b.points);
        assert_eq!(a.labels, b.labels);
        let c = make_blobs(&BlobConfig { seed: 124, ..cfg }).unwrap();
        assert_ne!(a.points, c.points);
    }

    #[test]
    fn blobs_split_classes_evenly() {
        let ds = make_blobs(&BlobConfig::new(100, 7)).unwrap();
        assert_eq!(ds.len(), 100);
        assert_eq!(ds.points.dim(), 5);
        assert_eq!(ds.class_counts(), (50, 50));
        // Odd sample count: the +1 class absorbs the extra.
        let odd = make_blobs(&BlobConfig::new(101, 7)).unwrap();
        assert_eq!(odd.class_counts(), (51, 50));
    }

    #[test]
    fn blobs_with_zero_std_sit_on_centers() {
        let cfg = BlobConfig {
            cluster_std: 0.0,
            ..BlobConfig::new(20, 3)
        };
        let ds = make_blobs(&cfg).unwrap();
        let mut distinct: Vec<Vec<f64>> = Vec::new();
        for p in ds.points.iter() {
            if !distinct.iter().any(|q| q == p) {
                distinct.push(p.to_vec());
            }
        }
        assert_eq!(distinct.len(), cfg.n_centers);
        for p in ds.points.iter() {
            for &v in p {
                assert!((-10.0..=10.0).contains(&v));
            }
        }
    }

    #[test]
    fn blobs_reject_odd_center_count() {
        let cfg = BlobConfig {
            n_centers: 3,
            ..BlobConfig::new(10, 0)
        };
        assert!(matches!(make_blobs(&cfg), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn split_halves_and_is_deterministic() {
        let ds = make_blobs(&BlobConfig::new(100, 5)).unwrap();
        let (train, test) = train_test_split(&ds, 0.5, 9).unwrap();
        assert_eq!(train.len(), 50);
        assert_eq!(test.len(), 50);
        let (train2, test2) = train_test_split(&ds, 0.5, 9).unwrap();
        assert_eq!(train.points, train2.points);
        assert_eq!(test.labels, test2.labels);
        let (train3, _) = train_test_split(&ds, 0.5, 10).unwrap();
        assert_ne!(train.points, train3.points);
    }

    #[test]
    fn split_reports_degenerate_training_side() {
        // One positive among three points; some seed must push it into the
        // single-row test split.
        let points = Points::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        let ds = Dataset::new(points, vec![1.0, -1.0, -1.0]).unwrap();
        let mut saw_degenerate = false;
        for seed in 0..32 {
            match train_test_split(&ds, 0.34, seed) {
                Err(Error::DegenerateSplit { .. }) => {
                    saw_degenerate = true;
                    break;
                }
                Ok((train, test)) => {
                    assert_eq!(train.len(), 2);
                    assert_eq!(test.len(), 1);
                }
                Err(other) => panic!("unexpected error {other:?}"),
            }
        }
        assert!(saw_degenerate);
    }

    #[test]
    fn libsvm_parses_sparse_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("toy.libsvm");
        fs::write(&path, "+1 1:0.5 3:2\n-1 2:-1.25\n").unwrap();
        let ds = load_libsvm(&path).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.points.dim(), 3);
        assert_eq!(ds.points.point(0), &[0.5, 0.0, 2.0]);
        assert_eq!(ds.points.point(1), &[0.0, -1.25, 0.0]);
        assert_eq!(ds.labels, vec![1.0, -1.0]);
    }

    #[test]
    fn libsvm_round_trips_bitwise() {
        let ds = make_blobs(&BlobConfig::new(30, 77)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("blobs.libsvm");
        save_libsvm(&ds, &path).unwrap();
        let back = load_libsvm(&path).unwrap();
        assert_eq!(back.points, ds.points);
        assert_eq!(back.labels, ds.labels);
    }

    #[test]
    fn libsvm_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.libsvm");
        fs::write(&path, "+1 1:0.5\n-1 1:abc\n").unwrap();
        match load_libsvm(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected Parse error, got {other:?}"),
        }
        fs::write(&path, "+1 2:1 1:2\n").unwrap();
        assert!(matches!(load_libsvm(&path), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn libsvm_maps_zero_labels_and_rejects_others() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("zero.libsvm");
        fs::write(&path, "0 1:1\n1 1:2\n").unwrap();
        let ds = load_libsvm(&path).unwrap();
        assert_eq!(ds.labels, vec![-1.0, 1.0]);
        fs::write(&path, "2 1:1\n").unwrap();
        assert!(matches!(load_libsvm(&path), Err(Error::Label(v)) if v == 2.0));
    }

    #[test]
    fn csv_round_trips_and_header_is_strict() {
        let ds = make_blobs(&BlobConfig::new(12, 5)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("blobs.csv");
        save_csv(&ds, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("f0,f1,f2,f3,f4,label\n"));
        match load_csv(&path).unwrap() {
            LoadedData::Labeled(back) => {
                assert_eq!(back.points, ds.points);
                assert_eq!(back.labels, ds.labels);
            }
            LoadedData::Unlabeled(_) => panic!("lost the label column"),
        }
        let bad = dir.path().join("bad.csv");
        fs::write(&bad, "x0,label\n1.0,1\n").unwrap();
        assert!(matches!(load_csv(&bad), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn csv_without_label_column_loads_points_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("unlabeled.csv");
        fs::write(&path, "f0,f1\n1.0,2.0\n3.5,-1.0\n").unwrap();
        match load_csv(&path).unwrap() {
            LoadedData::Unlabeled(p) => {
                assert_eq!(p.len(), 2);
                assert_eq!(p.point(1), &[3.5, -1.0]);
            }
            LoadedData::Labeled(_) => panic!("phantom label column"),
        }
    }
}
