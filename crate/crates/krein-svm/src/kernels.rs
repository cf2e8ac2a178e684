//! Kernel functions and Gram-matrix access.
//!
//! The centerpiece is [`GramProvider`], which hands out entries and whole
//! columns of the (optionally diagonally shifted) Gram matrix without ever
//! materializing it: columns are computed on demand and kept in a bounded
//! LRU cache. The provider also counts cache traffic and the number of
//! distinct matrix cells it has ever produced, which is how the "no full
//! Gram matrix needed" claim is checked.
//!
//! The shift is diagonal-only: with shift `lambda`, `entry(i, i)` is
//! `raw - 2*lambda` while off-diagonal entries are untouched, so raw and
//! shifted views share one column cache.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::data::Points;
use crate::error::{Error, Result};
use crate::linalg::{GramSource, SymMatrix};

/// Symmetry tolerance applied when loading a precomputed kernel matrix.
pub const PRECOMPUTED_SYMMETRY_TOL: f64 = 1e-10;

/// Default column-cache capacity: `min(l, 1024)` columns.
pub const DEFAULT_CACHE_COLUMNS: usize = 1024;

// ───────────────────────────── kernels ─────────────────────────────

/// Kernel function choice, serialized into saved models.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `<x, y>`
    Linear,
    /// `exp(-gamma * ||x - y||^2)`, `gamma > 0`
    Rbf { gamma: f64 },
    /// `tanh(a * <x, y> + r)` — the sigmoid kernel; indefinite for most
    /// parameter choices.
    Tanh { a: f64, r: f64 },
    /// Gram matrix supplied as a CSV file instead of a kernel function.
    Precomputed { matrix_path: PathBuf },
}

impl KernelSpec {
    /// Sigmoid kernel with the customary data-driven defaults
    /// `a = 1/dimension`, `r = -1`.
    pub fn tanh_defaults(dimension: usize) -> KernelSpec {
        KernelSpec::Tanh {
            a: 1.0 / dimension.max(1) as f64,
            r: -1.0,
        }
    }

    /// Validates parameter ranges.
    pub fn validate(&self) -> Result<()> {
        match self {
            KernelSpec::Rbf { gamma } if !(*gamma > 0.0) => Err(Error::InvalidConfig(format!(
                "rbf gamma must be > 0, got {gamma}"
            ))),
            _ => Ok(()),
        }
    }
}

#[inline]
fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Evaluates the kernel on a pair of points. Precomputed kernels have no
/// pointwise form and report an error.
pub fn eval_kernel(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    match spec {
        KernelSpec::Linear => Ok(dot(x, y)),
        KernelSpec::Rbf { gamma } => {
            let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            Ok((-gamma * sq).exp())
        }
        KernelSpec::Tanh { a, r } => Ok((a * dot(x, y) + r).tanh()),
        KernelSpec::Precomputed { .. } => Err(Error::Precomputed("pointwise evaluation")),
    }
}

/// Full Gram matrix; each unordered pair is evaluated exactly once.
pub fn gram_matrix(spec: &KernelSpec, points: &Points) -> Result<SymMatrix> {
    spec.validate()?;
    if let KernelSpec::Precomputed { matrix_path } = spec {
        let m = load_kernel_matrix_csv(matrix_path)?;
        if m.n() != points.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                actual: m.n(),
            });
        }
        return Ok(m);
    }
    let n = points.len();
    let mut out = SymMatrix::zeros(n.max(1));
    for i in 0..n {
        for j in 0..=i {
            out.set(i, j, eval_kernel(spec, points.point(i), points.point(j))?);
        }
    }
    Ok(out)
}

/// Loads an `l x l` numeric CSV (no header) and validates symmetry within
/// [`PRECOMPUTED_SYMMETRY_TOL`]; asymmetry is a hard error.
pub fn load_kernel_matrix_csv(path: impl AsRef<Path>) -> Result<SymMatrix> {
    let text = fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line_idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> =
            line.trim().split(',').map(|f| f.trim().parse()).collect();
        rows.push(row.map_err(|_| Error::Parse {
            line: line_idx + 1,
            message: "invalid matrix entry".into(),
        })?);
    }
    let n = rows.len();
    if n == 0 {
        return Err(Error::Parse {
            line: 1,
            message: "empty kernel matrix".into(),
        });
    }
    let mut full = Vec::with_capacity(n * n);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("matrix row has {} entries, expected {n}", row.len()),
            });
        }
        full.extend_from_slice(row);
    }
    SymMatrix::from_full(n, &full, PRECOMPUTED_SYMMETRY_TOL)
}

// ──────────────────────────── gram provider ────────────────────────────

/// Cache and instrumentation counters.
///
/// `hits`/`misses`/`evictions` describe whole-column requests;
/// `distinct_entries` counts matrix cells (ordered `(i, j)` positions) whose
/// value has ever been produced, mirrors included — a full materialization
/// is exactly `l*l`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    pub evictions: u64,
    pub distinct_entries: u64,
}

/// Tracks which unordered pairs have been produced, in a packed bitset.
struct EntryTracker {
    n: usize,
    bits: Vec<u64>,
    ordered_count: u64,
}

impl EntryTracker {
    fn new(n: usize) -> Self {
        let pairs = n * (n + 1) / 2;
        EntryTracker {
            n,
            bits: vec![0; pairs.div_ceil(64)],
            ordered_count: 0,
        }
    }

    #[inline]
    fn mark(&mut self, i: usize, j: usize) {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let bit = r * (r + 1) / 2 + c;
        let (word, mask) = (bit / 64, 1u64 << (bit % 64));
        if self.bits[word] & mask == 0 {
            self.bits[word] |= mask;
            self.ordered_count += if r == c { 1 } else { 2 };
        }
    }

    fn mark_column(&mut self, j: usize) {
        for i in 0..self.n {
            self.mark(i, j);
        }
    }

    fn mark_all(&mut self) {
        for w in &mut self.bits {
            *w = !0;
        }
        self.ordered_count = (self.n * self.n) as u64;
    }
}

enum Source {
    Kernel { spec: KernelSpec, points: Points },
    Matrix(SymMatrix),
}

struct CacheState {
    columns: HashMap<usize, Arc<[f64]>>,
    by_age: BTreeMap<u64, usize>,
    stamp_of: HashMap<usize, u64>,
    next_stamp: u64,
    hits: u64,
    misses: u64,
    evictions: u64,
    tracker: EntryTracker,
}

impl CacheState {
    fn touch(&mut self, j: usize) {
        if let Some(old) = self.stamp_of.insert(j, self.next_stamp) {
            self.by_age.remove(&old);
        }
        self.by_age.insert(self.next_stamp, j);
        self.next_stamp += 1;
    }
}

/// Column-oriented access to a Gram matrix with a bounded LRU cache and a
/// diagonal shift.
///
/// The cache stores raw (unshifted) columns; both views read from it, so a
/// later `set_lambda` never invalidates anything. Internal state sits behind
/// a mutex, making shared use from several reader threads safe; the solver
/// itself drives a provider from a single thread.
pub struct GramProvider {
    source: Source,
    labels: Vec<f64>,
    lambda: f64,
    capacity: usize,
    state: Mutex<CacheState>,
}

impl GramProvider {
    /// Provider over a kernel function and points. `capacity` is the column
    /// cache size (`None` = `min(l, 1024)`). Precomputed specs load and
    /// validate their matrix here.
    pub fn new(
        spec: KernelSpec,
        points: Points,
        labels: Vec<f64>,
        capacity: Option<usize>,
    ) -> Result<Self> {
        spec.validate()?;
        if labels.len() != points.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                actual: labels.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|l| **l != 1.0 && **l != -1.0) {
            return Err(Error::Label(bad));
        }
        let n = points.len();
        if let KernelSpec::Precomputed { matrix_path } = &spec {
            let m = load_kernel_matrix_csv(matrix_path)?;
            if m.n() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: m.n(),
                });
            }
            return Ok(Self::build(Source::Matrix(m), labels, capacity));
        }
        Ok(Self::build(Source::Kernel { spec, points }, labels, capacity))
    }

    /// Provider with all labels +1; for spectrum inspection where labels are
    /// irrelevant.
    pub fn new_unlabeled(spec: KernelSpec, points: Points, capacity: Option<usize>) -> Result<Self> {
        let labels = vec![1.0; points.len()];
        Self::new(spec, points, labels, capacity)
    }

    /// Provider over an in-memory matrix. The matrix counts as precomputed:
    /// every cell is already "produced" for instrumentation purposes.
    pub fn from_matrix(matrix: SymMatrix, labels: Vec<f64>) -> Result<Self> {
        if labels.len() != matrix.n() {
            return Err(Error::DimensionMismatch {
                expected: matrix.n(),
                actual: labels.len(),
            });
        }
        Ok(Self::build(Source::Matrix(matrix), labels, None))
    }

    fn build(source: Source, labels: Vec<f64>, capacity: Option<usize>) -> Self {
        let n = labels.len();
        let mut tracker = EntryTracker::new(n);
        if matches!(source, Source::Matrix(_)) {
            tracker.mark_all();
        }
        GramProvider {
            source,
            labels,
            lambda: 0.0,
            capacity: capacity.unwrap_or(DEFAULT_CACHE_COLUMNS).max(1).min(n.max(1)),
            state: Mutex::new(CacheState {
                columns: HashMap::new(),
                by_age: BTreeMap::new(),
                stamp_of: HashMap::new(),
                next_stamp: 0,
                hits: 0,
                misses: 0,
                evictions: 0,
                tracker,
            }),
        }
    }

    /// Number of points (matrix order).
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Sets the diagonal shift. Cached columns stay valid (they are raw).
    pub fn set_lambda(&mut self, lambda: f64) {
        self.lambda = lambda;
    }

    fn check_index(&self, index: usize) -> Result<()> {
        if index >= self.len() {
            return Err(Error::IndexOutOfRange {
                index,
                size: self.len(),
            });
        }
        Ok(())
    }

    fn compute_column(&self, j: usize) -> Result<Arc<[f64]>> {
        let n = self.len();
        let mut col = Vec::with_capacity(n);
        match &self.source {
            Source::Kernel { spec, points } => {
                for i in 0..n {
                    col.push(eval_kernel(spec, points.point(i), points.point(j))?);
                }
            }
            Source::Matrix(m) => {
                for i in 0..n {
                    col.push(m.get(i, j));
                }
            }
        }
        Ok(col.into())
    }

    /// Raw (unshifted) column `j`, served through the cache.
    pub fn raw_column(&self, j: usize) -> Result<Arc<[f64]>> {
        self.check_index(j)?;
        {
            let mut state = self.state.lock().unwrap();
            if let Some(col) = state.columns.get(&j).cloned() {
                state.hits += 1;
                state.touch(j);
                return Ok(col);
            }
        }
        // Compute outside the lock; recheck on insert in case of a race.
        let col = self.compute_column(j)?;
        let mut state = self.state.lock().unwrap();
        if let Some(existing) = state.columns.get(&j).cloned() {
            state.hits += 1;
            state.touch(j);
            return Ok(existing);
        }
        state.misses += 1;
        if matches!(self.source, Source::Kernel { .. }) {
            state.tracker.mark_column(j);
        }
        while state.columns.len() >= self.capacity {
            let (&stamp, &victim) = state.by_age.iter().next().expect("cache is non-empty");
            state.by_age.remove(&stamp);
            state.stamp_of.remove(&victim);
            state.columns.remove(&victim);
            state.evictions += 1;
        }
        state.columns.insert(j, col.clone());
        state.touch(j);
        Ok(col)
    }

    /// Shifted column `j`: the raw column with `2*lambda` subtracted from its
    /// diagonal cell.
    pub fn column(&self, j: usize) -> Result<Vec<f64>> {
        let raw = self.raw_column(j)?;
        let mut col = raw.to_vec();
        col[j] -= 2.0 * self.lambda;
        Ok(col)
    }

    /// Raw kernel entry `(i, j)`. Reads a cached column when one covers the
    /// cell; otherwise evaluates the single pair without touching the cache.
    pub fn raw_entry(&self, i: usize, j: usize) -> Result<f64> {
        self.check_index(i)?;
        self.check_index(j)?;
        {
            let state = self.state.lock().unwrap();
            if let Some(col) = state.columns.get(&j) {
                return Ok(col[i]);
            }
            if let Some(col) = state.columns.get(&i) {
                return Ok(col[j]);
            }
        }
        let v = match &self.source {
            Source::Kernel { spec, points } => eval_kernel(spec, points.point(i), points.point(j))?,
            Source::Matrix(m) => m.get(i, j),
        };
        if matches!(self.source, Source::Kernel { .. }) {
            self.state.lock().unwrap().tracker.mark(i, j);
        }
        Ok(v)
    }

    /// Shifted entry: `raw - 2*lambda` on the diagonal, raw elsewhere.
    pub fn entry(&self, i: usize, j: usize) -> Result<f64> {
        let raw = self.raw_entry(i, j)?;
        Ok(if i == j { raw - 2.0 * self.lambda } else { raw })
    }

    /// Label-signed shifted entry `y_i * y_j * entry(i, j)`.
    pub fn labeled_entry(&self, i: usize, j: usize) -> Result<f64> {
        Ok(self.labels[i] * self.labels[j] * self.entry(i, j)?)
    }

    /// Full raw matrix in one piece. Bypasses the column cache and marks
    /// every cell as produced.
    pub fn full_matrix(&self) -> Result<SymMatrix> {
        let n = self.len();
        let m = match &self.source {
            Source::Matrix(m) => m.clone(),
            Source::Kernel { spec, points } => {
                let mut out = SymMatrix::zeros(n.max(1));
                for i in 0..n {
                    for j in 0..=i {
                        out.set(i, j, eval_kernel(spec, points.point(i), points.point(j))?);
                    }
                }
                out
            }
        };
        self.state.lock().unwrap().tracker.mark_all();
        Ok(m)
    }

    pub fn stats(&self) -> CacheStats {
        let state = self.state.lock().unwrap();
        CacheStats {
            hits: state.hits,
            misses: state.misses,
            evictions: state.evictions,
            distinct_entries: state.tracker.ordered_count,
        }
    }

    /// Raw-matrix view implementing [`GramSource`], for eigenvalue
    /// estimation.
    pub fn raw_view(&self) -> RawGramView<'_> {
        RawGramView { provider: self }
    }
}

/// Borrowed raw (unshifted) view of a provider.
pub struct RawGramView<'a> {
    provider: &'a GramProvider,
}

impl GramSource for RawGramView<'_> {
    fn dim(&self) -> usize {
        self.provider.len()
    }

    fn column(&self, j: usize) -> Arc<[f64]> {
        self.provider
            .raw_column(j)
            .expect("column index in range for GramSource")
    }
}

// ───────────────────────────── tests ─────────────────────────────

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_blobs, BlobConfig};
    use crate::linalg::{eig_sym, min_eigenvalue_estimate, EigEstimate};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn toy_points() -> Points {
        Points::from_rows(&[
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 2.0],
            vec![3.0, 4.0],
            vec![-1.0, 0.5],
        ])
        .unwrap()
    }

    #[test]
    fn eval_kernel_hand_values() {
        assert_abs_diff_eq!(
            eval_kernel(&KernelSpec::Linear, &[1.0, 2.0], &[3.0, 4.0]).unwrap(),
            11.0
        );
        let rbf = KernelSpec::Rbf { gamma: 0.7 };
        assert_abs_diff_eq!(eval_kernel(&rbf, &[2.0, -1.0], &[2.0, -1.0]).unwrap(), 1.0);
        let tanh = KernelSpec::Tanh { a: 1.0, r: 0.0 };
        assert_abs_diff_eq!(
            eval_kernel(&tanh, &[1.0, 0.0], &[1.0, 0.0]).unwrap(),
            0.7615941559557649,
            epsilon = 1e-15
        );
    }

    #[test]
    fn eval_kernel_rejects_bad_input() {
        assert!(matches!(
            eval_kernel(&KernelSpec::Linear, &[1.0], &[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        let spec = KernelSpec::Rbf { gamma: 0.0 };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn gram_matrix_matches_pointwise_eval() {
        let pts = toy_points();
        let spec = KernelSpec::Tanh { a: 2.0, r: -1.0 };
        let g = gram_matrix(&spec, &pts).unwrap();
        for i in 0..pts.len() {
            for j in 0..pts.len() {
                let direct = eval_kernel(&spec, pts.point(i), pts.point(j)).unwrap();
                assert_eq!(g.get(i, j), direct);
            }
        }
        // Identity rows under the linear kernel give the identity Gram.
        let id_pts = Points::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let g = gram_matrix(&KernelSpec::Linear, &id_pts).unwrap();
        assert_eq!(g, SymMatrix::identity(2));
    }

    #[test]
    fn provider_shift_touches_only_diagonal() {
        let pts = toy_points();
        let labels = vec![1.0, -1.0, 1.0, -1.0, 1.0];
        let mut p = GramProvider::new(KernelSpec::Linear, pts, labels, None).unwrap();
        let raw_diag = p.raw_entry(2, 2).unwrap();
        let raw_off = p.raw_entry(2, 3).unwrap();
        p.set_lambda(-2.0);
        assert_eq!(p.entry(2, 2).unwrap(), raw_diag + 4.0);
        assert_eq!(p.entry(2, 3).unwrap(), raw_off);
        // labeled: y_2 * y_3 = -1
        assert_eq!(p.labeled_entry(2, 3).unwrap(), -raw_off);
        assert_eq!(p.labeled_entry(2, 2).unwrap(), raw_diag + 4.0);
        p.set_lambda(-1.0);
        let col = p.column(3).unwrap();
        let raw = p.raw_column(3).unwrap();
        assert_eq!(col[3], raw[3] + 2.0);
        assert_eq!(col[0], raw[0]);
    }

    #[test]
    fn cache_hits_are_bitwise_identical_and_counted() {
        let pts = toy_points();
        let p = GramProvider::new_unlabeled(KernelSpec::Rbf { gamma: 0.3 }, pts, None).unwrap();
        let first = p.raw_column(1).unwrap();
        let second = p.raw_column(1).unwrap();
        assert!(Arc::ptr_eq(&first, &second));
        let stats = p.stats();
        assert_eq!(stats.hits, 1);
        assert_eq!(stats.misses, 1);
        assert_eq!(stats.evictions, 0);
    }

    #[test]
    fn cache_evicts_least_recently_used() {
        let pts = toy_points();
        let p = GramProvider::new_unlabeled(KernelSpec::Linear, pts, Some(2)).unwrap();
        let c0 = p.raw_column(0).unwrap().to_vec();
        let _ = p.raw_column(1).unwrap();
        let _ = p.raw_column(0).unwrap(); // 0 now most recent
        let _ = p.raw_column(2).unwrap(); // evicts 1
        let stats = p.stats();
        assert_eq!(stats.evictions, 1);
        assert_eq!(stats.hits, 1);
        // Column 0 survived; column 1 must be recomputed (a miss).
        let again0 = p.raw_column(0).unwrap().to_vec();
        assert_eq!(again0, c0);
        let before = p.stats().misses;
        let _ = p.raw_column(1).unwrap();
        assert_eq!(p.stats().misses, before + 1);
    }

    #[test]
    fn distinct_entry_accounting() {
        let pts = toy_points(); // 5 points
        let p = GramProvider::new_unlabeled(KernelSpec::Linear, pts, None).unwrap();
        assert_eq!(p.stats().distinct_entries, 0);
        let _ = p.raw_column(0).unwrap();
        // Column 0 plus its mirror row: 5 + 4 cells.
        assert_eq!(p.stats().distinct_entries, 9);
        let _ = p.raw_column(1).unwrap();
        // Column 1 adds 5 + 4 minus the two cells shared with column 0.
        assert_eq!(p.stats().distinct_entries, 16);
        let _ = p.raw_entry(3, 4).unwrap();
        assert_eq!(p.stats().distinct_entries, 18);
        let _ = p.full_matrix().unwrap();
        assert_eq!(p.stats().distinct_entries, 25);
    }

    #[test]
    fn precomputed_csv_loads_and_validates_symmetry() {
        let dir = tempfile::tempdir().unwrap();
        let good = dir.path().join("k.csv");
        std::fs::write(&good, "1.0, 0.5\n0.5, 2.0\n").unwrap();
        let m = load_kernel_matrix_csv(&good).unwrap();
        assert_eq!(m.get(0, 1), 0.5);
        let bad = dir.path().join("bad.csv");
        std::fs::write(&bad, "1.0, 0.5\n0.5000001, 2.0\n").unwrap();
        assert!(matches!(
            load_kernel_matrix_csv(&bad),
            Err(Error::Asymmetric { .. })
        ));
        let jagged = dir.path().join("jagged.csv");
        std::fs::write(&jagged, "1.0, 0.5\n0.5\n").unwrap();
        assert!(matches!(
            load_kernel_matrix_csv(&jagged),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn precomputed_provider_serves_matrix_and_counts_all_entries() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.csv");
        std::fs::write(&path, "1.0,0.25\n0.25,1.0\n").unwrap();
        let pts = Points::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let p = GramProvider::new(
            KernelSpec::Precomputed { matrix_path: path },
            pts,
            vec![1.0, -1.0],
            None,
        )
        .unwrap();
        assert_eq!(p.raw_entry(0, 1).unwrap(), 0.25);
        assert_eq!(p.stats().distinct_entries, 4);
    }

    #[test]
    fn tanh_gram_on_blobs_is_indefinite() {
        let ds = make_blobs(&BlobConfig::new(40, 2)).unwrap();
        let g = gram_matrix(&KernelSpec::Tanh { a: 1.0, r: -1.0 }, &ds.points).unwrap();
        let eig = eig_sym(&g).unwrap();
        assert!(
            eig.values[0] < -1e-6,
            "expected a negative eigenvalue, got {}",
            eig.values[0]
        );
    }

    #[test]
    fn raw_view_feeds_eigenvalue_estimation() {
        let pts = toy_points();
        let p = GramProvider::new_unlabeled(KernelSpec::Linear, pts.clone(), None).unwrap();
        let via_view = min_eigenvalue_estimate(&p.raw_view(), EigEstimate::Exact).unwrap();
        let direct = gram_matrix(&KernelSpec::Linear, &pts).unwrap();
        let via_matrix = min_eigenvalue_estimate(&direct, EigEstimate::Exact).unwrap();
        assert_abs_diff_eq!(via_view, via_matrix, epsilon = 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        /// Cache transparency: any access pattern through a tiny cache
        /// returns exactly what a directly computed Gram matrix holds.
        #[test]
        fn prop_cache_is_transparent(
            accesses in proptest::collection::vec((0usize..8, 0usize..8), 1..60),
            capacity in 1usize..4,
            lambda in -3.0f64..0.0,
        ) {
            let ds = make_blobs(&BlobConfig {
                dimension: 3,
                ..BlobConfig::new(8, 99)
            }).unwrap();
            let spec = KernelSpec::Tanh { a: 0.5, r: -1.0 };
            let reference = gram_matrix(&spec, &ds.points).unwrap();
            let mut p = GramProvider::new(
                spec,
                ds.points.clone(),
                ds.labels.clone(),
                Some(capacity),
            ).unwrap();
            p.set_lambda(lambda);
            for (i, j) in accesses {
                let expected_raw = reference.get(i, j);
                prop_assert_eq!(p.raw_entry(i, j).unwrap(), expected_raw);
                let shift = if i == j { -2.0 * lambda } else { 0.0 };
                prop_assert_eq!(p.entry(i, j).unwrap(), expected_raw + shift);
                let col = p.column(j).unwrap();
                prop_assert_eq!(col[i], expected_raw + shift);
            }
        }
    }
}
