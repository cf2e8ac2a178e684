//! Active-set SVM training for kernels that need not be positive
//! semidefinite.
//!
//! The primary route (`train_triksvm`) works on the diagonally shifted
//! surrogate `K~ = K - 2*lambda*I` served by a [`GramProvider`]: each
//! iteration solves the KKT linear system on the free support vectors,
//! projects the solution back into the box if a coefficient escaped, and
//! scans the remaining points for margin violations using the *original*
//! kernel together with the back-transitioned coefficients. Only columns
//! touching the working set are ever requested, so the full Gram matrix is
//! never formed.
//!
//! The baseline route (`train_ksvm`) eigendecomposes the full Gram matrix,
//! flips negative eigenvalues, trains a standard SVM on the flipped matrix
//! and projects the solution back through `U*sign(D)*U^T`, which densifies
//! the coefficient vector.
//!
//! A brute-force projected-gradient solver (`qp_oracle`) and an independent
//! certificate checker (`verify_kkt`) back the test suite.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Points};
use crate::decomposition::{choose_lambda, flip_decompose, transition_shift};
use crate::error::{Error, Result};
use crate::kernels::{eval_kernel, CacheStats, GramProvider, KernelSpec};
use crate::linalg::{min_eigenvalue_estimate, solve_sym, EigEstimate, SymMatrix};

pub const DEFAULT_KKT_TOL: f64 = 1e-6;
pub const DEFAULT_SINGULAR_JITTER: f64 = 1e-10;
/// Box value used by [`SolverConfig::hard_preset`], large enough that the
/// upper bound never binds on sane data.
pub const HARD_MARGIN_C: f64 = 1e9;
/// Default iteration cap is this factor times the number of training points.
pub const MAX_ITERATIONS_FACTOR: usize = 50;
/// Normalized tolerance for the surrogate/native agreement identity
/// `G alpha = G~ alpha~` on the working set.
pub const TRANSITION_RESIDUAL_TOL: f64 = 1e-8;
/// Iterations the dual objective may sit flat (degenerate pivots) before the
/// loop stops and reports the run as unconverged, as a multiple of the
/// problem size.
const STALL_LIMIT_FACTOR: usize = 2;

// ─────────────────────────── configuration ───────────────────────────

/// Whether the box constraint is enforced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MarginMode {
    /// No upper bound on coefficients; no bounded support vectors exist.
    Hard,
    /// Coefficients live in `[0, C]`.
    Soft,
}

/// How the diagonal shift is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LambdaMode {
    /// Full eigendecomposition of the Gram matrix (exact smallest
    /// eigenvalue). Scans every matrix entry.
    AutoExact,
    /// Shifted power iteration; falls back to the Gershgorin bound if the
    /// iteration stalls.
    AutoPower,
    /// Gershgorin disc bound (cheap, conservative).
    AutoGershgorin,
    /// Caller-supplied shift, must be `<= 0`. The spectrum is not checked,
    /// which keeps training from touching entries it would not otherwise
    /// need.
    Fixed(f64),
}

/// Initial working set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InitialSv {
    /// First training example of each class.
    OnePerClass,
    /// Explicit indices.
    Provided(Vec<usize>),
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    /// Box constraint; ignored in [`MarginMode::Hard`].
    pub c: f64,
    pub margin: MarginMode,
    pub lambda_mode: LambdaMode,
    /// Multiplier (`>= 1`) applied to the smallest-eigenvalue estimate when
    /// choosing the shift automatically.
    pub safety: f64,
    pub kkt_tol: f64,
    /// Diagonal jitter for the one retry after a singular working-set
    /// system.
    pub singular_jitter: f64,
    /// `None` = `50 * l`.
    pub max_iterations: Option<usize>,
    /// Column-cache capacity; `None` = `min(l, 1024)`.
    pub cache_columns: Option<usize>,
    pub initial_sv: InitialSv,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            c: 1.0,
            margin: MarginMode::Soft,
            lambda_mode: LambdaMode::AutoExact,
            safety: 1.05,
            kkt_tol: DEFAULT_KKT_TOL,
            singular_jitter: DEFAULT_SINGULAR_JITTER,
            max_iterations: None,
            cache_columns: None,
            initial_sv: InitialSv::OnePerClass,
        }
    }
}

impl SolverConfig {
    /// Soft margin with a box so large it never binds.
    pub fn hard_preset() -> Self {
        SolverConfig {
            c: HARD_MARGIN_C,
            ..SolverConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) {
            return Err(Error::InvalidConfig(format!("C must be > 0, got {}", self.c)));
        }
        if !(self.safety >= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "safety must be >= 1, got {}",
                self.safety
            )));
        }
        if !(self.kkt_tol > 0.0) || !(self.singular_jitter > 0.0) {
            return Err(Error::InvalidConfig("tolerances must be > 0".into()));
        }
        if self.max_iterations == Some(0) {
            return Err(Error::InvalidConfig("max_iterations must be >= 1".into()));
        }
        if let LambdaMode::Fixed(v) = self.lambda_mode {
            if v > 0.0 {
                return Err(Error::NotNegativeEnough { lambda: v });
            }
        }
        if let InitialSv::Provided(idx) = &self.initial_sv {
            if idx.is_empty() {
                return Err(Error::InvalidConfig("initial SV set is empty".into()));
            }
        }
        Ok(())
    }

    fn box_c(&self) -> Option<f64> {
        match self.margin {
            MarginMode::Hard => None,
            MarginMode::Soft => Some(self.c),
        }
    }
}

// ─────────────────────────── model types ───────────────────────────

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Diagnostics {
    /// `"trik"` or `"ksvm"`.
    pub method: String,
    pub iterations: usize,
    pub sv_count: usize,
    pub bsv_count: usize,
    pub converged: bool,
    /// Smallest-eigenvalue estimate behind an automatic shift, when one was
    /// computed.
    pub lambda_estimate: Option<f64>,
    /// Largest normalized residual of `G alpha = G~ alpha~` observed across
    /// iterations.
    pub max_transition_residual: f64,
    pub cache: CacheStats,
}

/// A fitted classifier: support set, native-space coefficients, bias.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainedModel {
    pub kernel: KernelSpec,
    pub lambda: f64,
    /// Box constraint used in training; `None` for a true hard margin.
    pub c: Option<f64>,
    pub b: f64,
    pub dimension: usize,
    pub support_points: Vec<Vec<f64>>,
    pub support_labels: Vec<f64>,
    /// Coefficients aligned with `support_points`; exact zeros are never
    /// stored.
    pub alpha: Vec<f64>,
    pub diagnostics: Diagnostics,
}

impl TrainedModel {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = File::create(path)?;
        serde_json::to_writer_pretty(BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<TrainedModel> {
        let file = File::open(path)?;
        Ok(serde_json::from_reader(BufReader::new(file))?)
    }
}

/// Dense per-point view of a finished run; index space is the training set.
#[derive(Clone, Debug, Serialize)]
pub struct FitReport {
    /// Surrogate-space coefficients (box duals), dense over all points.
    pub alpha_tilde: Vec<f64>,
    /// Native-space coefficients, dense over all points.
    pub alpha: Vec<f64>,
    pub sv: Vec<usize>,
    pub bsv: Vec<usize>,
    pub b: f64,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub max_transition_residual: f64,
}

pub struct FitResult {
    pub model: TrainedModel,
    pub report: FitReport,
}

// ─────────────────────────── prediction ───────────────────────────

#[inline]
fn sign_plus(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Decision values and hard labels for a batch of points. Scores use the
/// original kernel with the native-space coefficients; `sign(0)` is `+1`.
pub fn predict(model: &TrainedModel, points: &Points) -> Result<(Vec<f64>, Vec<f64>)> {
    if points.dim() != model.dimension && !points.is_empty() && !model.support_points.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: model.dimension,
            actual: points.dim(),
        });
    }
    let mut scores = Vec::with_capacity(points.len());
    for x in points.iter() {
        let mut f = model.b;
        for ((sp, &yl), &a) in model
            .support_points
            .iter()
            .zip(&model.support_labels)
            .zip(&model.alpha)
        {
            f += a * yl * eval_kernel(&model.kernel, sp, x)?;
        }
        scores.push(f);
    }
    let labels = scores.iter().map(|&s| sign_plus(s)).collect();
    Ok((labels, scores))
}

/// Fraction of correct predictions.
pub fn accuracy(predicted: &[f64], truth: &[f64]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    let hits = predicted
        .iter()
        .zip(truth)
        .filter(|(p, t)| p == t)
        .count();
    hits as f64 / truth.len() as f64
}

// ─────────────────────────── active-set core ───────────────────────────

#[derive(Clone, Copy, PartialEq, Eq)]
enum Status {
    Rest,
    Sv,
    Bsv,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Bound {
    Lower,
    Upper,
}

/// First bound crossed along the segment from `prev` to `next`, as
/// `(t, position, bound)`. `None` when every endpoint coefficient lies
/// strictly inside the box. Ties pick the smallest training index.
fn first_crossing(
    prev: &[f64],
    next: &[f64],
    box_c: Option<f64>,
    sv: &[usize],
) -> Option<(f64, usize, Bound)> {
    let mut best: Option<(f64, usize, Bound)> = None;
    for pos in 0..sv.len() {
        let (p, n) = (prev[pos], next[pos]);
        let candidate = if n <= 0.0 {
            let t = if p <= 0.0 { 0.0 } else { p / (p - n) };
            Some((t, Bound::Lower))
        } else if box_c.is_some_and(|c| n >= c) {
            let c = box_c.unwrap();
            let t = if p >= c { 0.0 } else { (c - p) / (n - p) };
            Some((t, Bound::Upper))
        } else {
            None
        };
        if let Some((t, bound)) = candidate {
            let better = match best {
                None => true,
                Some((bt, bpos, _)) => t < bt || (t == bt && sv[pos] < sv[bpos]),
            };
            if better {
                best = Some((t, pos, bound));
            }
        }
    }
    best
}

struct ColumnMap {
    cols: BTreeMap<usize, Arc<[f64]>>,
}

impl ColumnMap {
    fn fetch(provider: &GramProvider, indices: impl Iterator<Item = usize>) -> Result<Self> {
        let mut cols = BTreeMap::new();
        for j in indices {
            cols.insert(j, provider.raw_column(j)?);
        }
        Ok(ColumnMap { cols })
    }

    #[inline]
    fn raw(&self, i: usize, j: usize) -> f64 {
        self.cols[&j][i]
    }
}

/// Solves the bordered working-set system
/// `[[G~_ss, y_s], [y_s^T, 0]] (a, b) = (rhs, rhs_b)`; the right side
/// carries the bounded points' fixed contribution under a soft margin.
/// Returns the new free coefficients and bias.
fn solve_working_system(
    cols: &ColumnMap,
    y: &[f64],
    lambda: f64,
    sv: &[usize],
    bsv: &[usize],
    box_c: Option<f64>,
    jitter: f64,
) -> Result<(Vec<f64>, f64)> {
    let s = sv.len();
    let mut a = SymMatrix::zeros(s + 1);
    for p in 0..s {
        for q in 0..=p {
            let (ip, iq) = (sv[p], sv[q]);
            let mut v = y[ip] * y[iq] * cols.raw(ip, iq);
            if ip == iq {
                v -= 2.0 * lambda;
            }
            a.set(p, q, v);
        }
        a.set(s, p, y[sv[p]]);
    }
    let mut rhs = vec![1.0; s];
    rhs.push(0.0);
    if let Some(c) = box_c {
        if !bsv.is_empty() {
            for p in 0..s {
                let ip = sv[p];
                let fixed: f64 = bsv.iter().map(|&j| y[ip] * y[j] * cols.raw(ip, j)).sum();
                rhs[p] -= c * fixed;
            }
            rhs[s] = -c * bsv.iter().map(|&j| y[j]).sum::<f64>();
        }
    }
    let solution = match solve_sym(&a, &rhs) {
        Ok(x) => x,
        Err(Error::SingularMatrix { .. }) => {
            let mut jittered = a.clone();
            for p in 0..s {
                jittered.set(p, p, jittered.get(p, p) + jitter);
            }
            solve_sym(&jittered, &rhs)?
        }
        Err(e) => return Err(e),
    };
    let b = solution[s];
    Ok((solution[..s].to_vec(), b))
}

/// Back-transition on the free block, with the same jittered retry policy
/// as the working-set solve. Returns the native coefficients together with
/// the normalized residual of `G a = G~ a~`.
fn transition_free_block(
    cols: &ColumnMap,
    y: &[f64],
    lambda: f64,
    sv: &[usize],
    alpha_tilde: &[f64],
    jitter: f64,
) -> Result<(Vec<f64>, f64)> {
    let s = sv.len();
    if s == 0 {
        return Ok((Vec::new(), 0.0));
    }
    let g = SymMatrix::from_fn(s, |p, q| y[sv[p]] * y[sv[q]] * cols.raw(sv[p], sv[q]));
    let alpha = match transition_shift(&g, lambda, alpha_tilde) {
        Ok(a) => a,
        Err(Error::SingularMatrix { .. }) => {
            let mut jittered = g.clone();
            jittered.add_diag(jitter);
            transition_shift(&jittered, lambda, alpha_tilde)?
        }
        Err(e) => return Err(e),
    };
    let ga = g.matvec(&alpha);
    let gat = g.matvec(alpha_tilde);
    let mut residual = 0.0f64;
    for p in 0..s {
        let surrogate = gat[p] - 2.0 * lambda * alpha_tilde[p];
        residual = residual.max((ga[p] - surrogate).abs());
    }
    let scale = g.max_abs().max(1.0);
    Ok((alpha, residual / scale))
}

fn dual_objective(
    cols: &ColumnMap,
    y: &[f64],
    lambda: f64,
    sv: &[usize],
    bsv: &[usize],
    alpha_sv: &[f64],
    c: f64,
) -> f64 {
    let support: Vec<(usize, f64)> = sv
        .iter()
        .zip(alpha_sv)
        .map(|(&i, &a)| (i, a))
        .chain(bsv.iter().map(|&j| (j, c)))
        .collect();
    let linear: f64 = support.iter().map(|&(_, a)| a).sum();
    let mut quad = 0.0;
    for &(i, ai) in &support {
        for &(j, aj) in &support {
            let mut g = y[i] * y[j] * cols.raw(i, j);
            if i == j {
                g -= 2.0 * lambda;
            }
            quad += ai * aj * g;
        }
    }
    linear - 0.5 * quad
}

struct CoreSolution {
    alpha_tilde: Vec<f64>,
    alpha: Vec<f64>,
    b: f64,
    sv: Vec<usize>,
    bsv: Vec<usize>,
    iterations: usize,
    converged: bool,
    max_transition_residual: f64,
    objective: f64,
}

fn initial_working_set(
    y: &[f64],
    policy: &InitialSv,
) -> Result<Vec<usize>> {
    match policy {
        InitialSv::OnePerClass => {
            let pos = y.iter().position(|&v| v == 1.0);
            let neg = y.iter().position(|&v| v == -1.0);
            match (pos, neg) {
                (Some(p), Some(n)) => Ok(vec![p.min(n), p.max(n)]),
                _ => Err(Error::DegenerateData),
            }
        }
        InitialSv::Provided(indices) => {
            let mut seen = vec![false; y.len()];
            for &i in indices {
                if i >= y.len() {
                    return Err(Error::IndexOutOfRange {
                        index: i,
                        size: y.len(),
                    });
                }
                if seen[i] {
                    return Err(Error::InvalidConfig(format!(
                        "duplicate initial SV index {i}"
                    )));
                }
                seen[i] = true;
            }
            Ok(indices.clone())
        }
    }
}

/// The training loop shared by both routes. The provider supplies the
/// (possibly shifted) surrogate; `provider.lambda()` controls the diagonal.
fn run_active_set(provider: &GramProvider, config: &SolverConfig) -> Result<CoreSolution> {
    let l = provider.len();
    let y = provider.labels().to_vec();
    let lambda = provider.lambda();
    let box_c = config.box_c();
    let max_iterations = config.max_iterations.unwrap_or(MAX_ITERATIONS_FACTOR * l.max(1));

    let mut status = vec![Status::Rest; l];
    let mut sv = initial_working_set(&y, &config.initial_sv)?;
    for &i in &sv {
        status[i] = Status::Sv;
    }
    let mut alpha_prev: Vec<f64> = vec![0.0; sv.len()];
    let mut bsv: Vec<usize> = Vec::new();
    let mut b = 0.0;
    let mut iterations = 0usize;
    let mut converged = false;
    let mut max_residual = 0.0f64;
    // Degenerate pivots (t = 0 clips, sterile refills) leave the dual
    // objective flat; a long flat run means the loop is cycling, not
    // converging, and honesty beats burning the full iteration budget.
    let mut best_objective = f64::NEG_INFINITY;
    let mut stall = 0usize;
    let stall_limit = (STALL_LIMIT_FACTOR * l).max(100);

    let evict_latest = |sv: &mut Vec<usize>, alpha_prev: &mut Vec<f64>, status: &mut [Status]| {
        if let Some(i) = sv.pop() {
            alpha_prev.pop();
            status[i] = Status::Rest;
            log::debug!("evicting most recently added support vector {i}");
        }
    };

    while iterations < max_iterations {
        iterations += 1;
        if sv.is_empty() {
            // The free set emptied out. With only bounded and rest points
            // left, the state is optimal exactly when some bias keeps every
            // bounded margin at or below 1 and every rest margin at or above
            // 1; the feasible interval also pins the bias we report.
            // Otherwise the worst violators re-enter and the loop resumes —
            // refilling with violators only, since arbitrary rest points get
            // clipped straight back out and the loop would never terminate.
            let cols = ColumnMap::fetch(provider, bsv.iter().copied())?;
            let cval = box_c.unwrap_or(0.0);
            let mut lo = f64::NEG_INFINITY;
            let mut hi = f64::INFINITY;
            let mut surrogate = vec![0.0; l];
            let mut native = vec![0.0; l];
            for i in 0..l {
                match status[i] {
                    Status::Bsv => {
                        let mut f = 0.0;
                        for &j in &bsv {
                            let mut k = cols.raw(i, j);
                            if i == j {
                                k -= 2.0 * lambda;
                            }
                            f += cval * y[j] * k;
                        }
                        surrogate[i] = f;
                        if y[i] > 0.0 {
                            hi = hi.min(1.0 - f);
                        } else {
                            lo = lo.max(-1.0 - f);
                        }
                    }
                    Status::Rest => {
                        let mut f = 0.0;
                        for &j in &bsv {
                            f += cval * y[j] * cols.raw(i, j);
                        }
                        native[i] = f;
                        if y[i] > 0.0 {
                            lo = lo.max(1.0 - f);
                        } else {
                            hi = hi.min(-1.0 - f);
                        }
                    }
                    Status::Sv => unreachable!("free set is empty"),
                }
            }
            b = match (lo.is_finite(), hi.is_finite()) {
                (true, true) => 0.5 * (lo + hi),
                (true, false) => lo,
                (false, true) => hi,
                (false, false) => 0.0,
            };
            if lo <= hi + 2.0 * config.kkt_tol {
                converged = true;
                break;
            }
            let mut entered = false;
            for class in [1.0, -1.0] {
                let mut worst: Option<(f64, usize)> = None;
                for i in 0..l {
                    if status[i] != Status::Rest || y[i] != class {
                        continue;
                    }
                    let m = y[i] * (native[i] + b);
                    if m < 1.0 - config.kkt_tol && worst.map_or(true, |(wm, _)| m < wm) {
                        worst = Some((m, i));
                    }
                }
                if let Some((_, i)) = worst {
                    status[i] = Status::Sv;
                    sv.push(i);
                    alpha_prev.push(0.0);
                    entered = true;
                }
            }
            if !entered {
                // No rest violators, so a bounded margin sticks out past 1.
                let mut release: Option<(f64, usize)> = None;
                for (pos, &j) in bsv.iter().enumerate() {
                    let m = y[j] * (surrogate[j] + b);
                    if m > 1.0 + config.kkt_tol && release.map_or(true, |(rm, _)| m > rm) {
                        release = Some((m, pos));
                    }
                }
                match release {
                    Some((_, pos)) => {
                        let idx = bsv.remove(pos);
                        status[idx] = Status::Sv;
                        sv.push(idx);
                        alpha_prev.push(cval);
                    }
                    None => {
                        // Every individual margin clears its tolerance even
                        // though the joint interval missed by a hair; accept.
                        converged = true;
                        break;
                    }
                }
            }
            if sv.len() == 1 {
                // A lone entrant is pinned by the equality constraint, so
                // the next solve cannot move it. Pair it with the most
                // tensioned point of the opposite class to open a direction.
                let need = -y[sv[0]];
                let mut from_rest: Option<(f64, usize)> = None;
                for i in 0..l {
                    if status[i] == Status::Rest && y[i] == need {
                        let tension = 1.0 - y[i] * (native[i] + b);
                        if from_rest.map_or(true, |(t0, _)| tension > t0) {
                            from_rest = Some((tension, i));
                        }
                    }
                }
                let mut from_box: Option<(f64, usize)> = None;
                for (pos, &j) in bsv.iter().enumerate() {
                    if y[j] == need {
                        let tension = y[j] * (surrogate[j] + b) - 1.0;
                        if from_box.map_or(true, |(t0, _)| tension > t0) {
                            from_box = Some((tension, pos));
                        }
                    }
                }
                match (from_rest, from_box) {
                    (Some((tr, i)), Some((tb, _))) if tr >= tb => {
                        status[i] = Status::Sv;
                        sv.push(i);
                        alpha_prev.push(0.0);
                    }
                    (_, Some((_, pos))) => {
                        let idx = bsv.remove(pos);
                        status[idx] = Status::Sv;
                        sv.push(idx);
                        alpha_prev.push(cval);
                    }
                    (Some((_, i)), None) => {
                        status[i] = Status::Sv;
                        sv.push(i);
                        alpha_prev.push(0.0);
                    }
                    (None, None) => {}
                }
            }
            log::debug!(
                "iteration {iterations}: refilled the empty free set with {} candidates",
                sv.len()
            );
            stall += 1;
            if stall > stall_limit {
                log::warn!("no progress across {stall} degenerate iterations; stopping");
                break;
            }
            continue;
        }
        let cols = ColumnMap::fetch(provider, sv.iter().chain(bsv.iter()).copied())?;

        // Working-set solve.
        let solved = solve_working_system(
            &cols,
            &y,
            lambda,
            &sv,
            &bsv,
            box_c,
            config.singular_jitter,
        );
        let (alpha_new, b_new) = match solved {
            Ok(v) => v,
            Err(Error::SingularMatrix { .. }) => {
                evict_latest(&mut sv, &mut alpha_prev, &mut status);
                continue;
            }
            Err(e) => return Err(e),
        };

        // Box admissibility along the segment from the last admissible
        // point: the first coefficient to hit a bound leaves the free set.
        if let Some((t, pos, bound)) = first_crossing(&alpha_prev, &alpha_new, box_c, &sv) {
            for q in 0..sv.len() {
                alpha_prev[q] += t * (alpha_new[q] - alpha_prev[q]);
            }
            let idx = sv.remove(pos);
            alpha_prev.remove(pos);
            match bound {
                Bound::Lower => {
                    status[idx] = Status::Rest;
                    log::debug!("iteration {iterations}: {idx} left the free set at 0");
                }
                Bound::Upper => {
                    status[idx] = Status::Bsv;
                    bsv.push(idx);
                    log::debug!("iteration {iterations}: {idx} hit the box at C");
                }
            }
            let w = dual_objective(&cols, &y, lambda, &sv, &bsv, &alpha_prev, config.c);
            if w > best_objective + 1e-12 * (1.0 + best_objective.abs()) {
                best_objective = w;
                stall = 0;
            } else {
                stall += 1;
                if stall > stall_limit {
                    log::warn!("dual objective stalled across {stall} pivots; stopping");
                    break;
                }
            }
            continue;
        }
        alpha_prev = alpha_new;
        b = b_new;

        // Native-space coefficients for the margin sweep.
        let transitioned = transition_free_block(
            &cols,
            &y,
            lambda,
            &sv,
            &alpha_prev,
            config.singular_jitter,
        );
        let (alpha_sv, residual) = match transitioned {
            Ok(v) => v,
            Err(Error::SingularMatrix { .. }) => {
                evict_latest(&mut sv, &mut alpha_prev, &mut status);
                continue;
            }
            Err(e) => return Err(e),
        };
        max_residual = max_residual.max(residual);

        let objective_now = dual_objective(&cols, &y, lambda, &sv, &bsv, &alpha_prev, config.c);
        log::debug!(
            "iteration {iterations}: |sv|={} |bsv|={} objective={objective_now:.9}",
            sv.len(),
            bsv.len()
        );
        if objective_now > best_objective + 1e-12 * (1.0 + best_objective.abs()) {
            best_objective = objective_now;
            stall = 0;
        } else {
            // No break here: the sweeps below may still declare convergence
            // on this very state.
            stall += 1;
        }

        // Margin sweep over unused points, in the native space: original
        // kernel entries with the transitioned coefficients.
        let mut worst: Option<(f64, usize)> = None;
        for i in 0..l {
            if status[i] != Status::Rest {
                continue;
            }
            let mut f = 0.0;
            for (p, &a) in alpha_sv.iter().enumerate() {
                f += a * y[sv[p]] * cols.raw(i, sv[p]);
            }
            if let Some(c) = box_c {
                for &j in &bsv {
                    f += c * y[j] * cols.raw(i, j);
                }
            }
            let m = y[i] * (f + b);
            if m < 1.0 - config.kkt_tol && worst.map_or(true, |(wm, _)| m < wm) {
                worst = Some((m, i));
            }
        }
        if let Some((_, i)) = worst {
            status[i] = Status::Sv;
            sv.push(i);
            alpha_prev.push(0.0);
            continue;
        }

        // Bounded points whose surrogate margin has risen clear of 1 no
        // longer belong at the box: release the largest such margin back
        // into the free set.
        if let Some(c) = box_c {
            let mut release: Option<(f64, usize)> = None;
            for (pos, &j) in bsv.iter().enumerate() {
                let mut f = 0.0;
                for (p, &a) in alpha_prev.iter().enumerate() {
                    f += a * y[sv[p]] * cols.raw(j, sv[p]);
                }
                for &j2 in &bsv {
                    let mut k = cols.raw(j, j2);
                    if j == j2 {
                        k -= 2.0 * lambda;
                    }
                    f += c * y[j2] * k;
                }
                let m = y[j] * (f + b);
                if m > 1.0 + config.kkt_tol && release.map_or(true, |(rm, _)| m > rm) {
                    release = Some((m, pos));
                }
            }
            if let Some((_, pos)) = release {
                let idx = bsv.remove(pos);
                status[idx] = Status::Sv;
                sv.push(idx);
                alpha_prev.push(c);
                log::debug!("iteration {iterations}: releasing {idx} from the box");
                continue;
            }
        }

        converged = true;
        break;
    }

    if !converged && iterations >= max_iterations {
        log::warn!("stopping after {iterations} iterations without convergence");
    }

    // Final assembly from the last admissible state.
    let cols = ColumnMap::fetch(provider, sv.iter().chain(bsv.iter()).copied())?;
    let (alpha_sv, residual) = transition_free_block(
        &cols,
        &y,
        lambda,
        &sv,
        &alpha_prev,
        config.singular_jitter,
    )?;
    max_residual = max_residual.max(residual);
    let objective = dual_objective(&cols, &y, lambda, &sv, &bsv, &alpha_prev, config.c);

    let mut alpha_tilde = vec![0.0; l];
    let mut alpha = vec![0.0; l];
    for (p, &i) in sv.iter().enumerate() {
        alpha_tilde[i] = alpha_prev[p];
        alpha[i] = alpha_sv[p];
    }
    for &j in &bsv {
        alpha_tilde[j] = config.c;
        alpha[j] = config.c;
    }

    Ok(CoreSolution {
        alpha_tilde,
        alpha,
        b,
        sv,
        bsv,
        iterations,
        converged,
        max_transition_residual: max_residual,
        objective,
    })
}

// ─────────────────────────── training routes ───────────────────────────

fn check_classes(data: &Dataset) -> Result<()> {
    let (pos, neg) = data.class_counts();
    if pos == 0 || neg == 0 || data.len() < 2 {
        return Err(Error::DegenerateData);
    }
    Ok(())
}

fn resolve_lambda(
    provider: &GramProvider,
    config: &SolverConfig,
) -> Result<(f64, Option<f64>)> {
    let estimate = match config.lambda_mode {
        LambdaMode::Fixed(v) => {
            if v > 0.0 {
                return Err(Error::NotNegativeEnough { lambda: v });
            }
            return Ok((v, None));
        }
        LambdaMode::AutoExact => min_eigenvalue_estimate(&provider.raw_view(), EigEstimate::Exact)?,
        LambdaMode::AutoGershgorin => {
            min_eigenvalue_estimate(&provider.raw_view(), EigEstimate::Gershgorin)?
        }
        LambdaMode::AutoPower => {
            match min_eigenvalue_estimate(&provider.raw_view(), EigEstimate::ShiftedPower) {
                Ok(v) => v,
                Err(Error::NoConvergence { .. }) => {
                    log::warn!("power iteration stalled; using the Gershgorin bound instead");
                    min_eigenvalue_estimate(&provider.raw_view(), EigEstimate::Gershgorin)?
                }
                Err(e) => return Err(e),
            }
        }
    };
    Ok((choose_lambda(estimate, config.safety), Some(estimate)))
}

fn build_model(
    data: &Dataset,
    kernel: KernelSpec,
    lambda: f64,
    config: &SolverConfig,
    core: &CoreSolution,
    method: &str,
    lambda_estimate: Option<f64>,
    cache: CacheStats,
) -> TrainedModel {
    let mut support_points = Vec::new();
    let mut support_labels = Vec::new();
    let mut alpha = Vec::new();
    for i in 0..data.len() {
        if core.alpha[i] != 0.0 {
            support_points.push(data.points.point(i).to_vec());
            support_labels.push(data.labels[i]);
            alpha.push(core.alpha[i]);
        }
    }
    TrainedModel {
        kernel,
        lambda,
        c: config.box_c(),
        b: core.b,
        dimension: data.points.dim(),
        support_points,
        support_labels,
        alpha,
        diagnostics: Diagnostics {
            method: method.to_string(),
            iterations: core.iterations,
            sv_count: core.sv.len(),
            bsv_count: core.bsv.len(),
            converged: core.converged,
            lambda_estimate,
            max_transition_residual: core.max_transition_residual,
            cache,
        },
    }
}

fn to_fit_result(
    data: &Dataset,
    kernel: KernelSpec,
    lambda: f64,
    config: &SolverConfig,
    core: CoreSolution,
    method: &str,
    lambda_estimate: Option<f64>,
    cache: CacheStats,
) -> FitResult {
    let model = build_model(
        data,
        kernel,
        lambda,
        config,
        &core,
        method,
        lambda_estimate,
        cache,
    );
    FitResult {
        model,
        report: FitReport {
            alpha_tilde: core.alpha_tilde,
            alpha: core.alpha,
            sv: core.sv,
            bsv: core.bsv,
            b: core.b,
            objective: core.objective,
            iterations: core.iterations,
            converged: core.converged,
            max_transition_residual: core.max_transition_residual,
        },
    }
}

/// Trains on the diagonally shifted surrogate, never materializing the full
/// Gram matrix. Hitting the iteration cap is not an error: the result is
/// returned with `converged = false` in its diagnostics.
pub fn train_triksvm(
    data: &Dataset,
    kernel: &KernelSpec,
    config: &SolverConfig,
) -> Result<FitResult> {
    config.validate()?;
    check_classes(data)?;
    let mut provider = GramProvider::new(
        kernel.clone(),
        data.points.clone(),
        data.labels.clone(),
        config.cache_columns,
    )?;
    let (lambda, estimate) = resolve_lambda(&provider, config)?;
    log::info!("shift lambda = {lambda} (estimate {estimate:?})");
    provider.set_lambda(lambda);
    let core = run_active_set(&provider, config)?;
    Ok(to_fit_result(
        data,
        kernel.clone(),
        lambda,
        config,
        core,
        "trik",
        estimate,
        provider.stats(),
    ))
}

/// Baseline: flips the negative eigenvalues of the full Gram matrix, trains
/// a standard SVM on the flipped matrix and projects the coefficients back,
/// which makes them dense.
pub fn train_ksvm(data: &Dataset, kernel: &KernelSpec, config: &SolverConfig) -> Result<FitResult> {
    config.validate()?;
    check_classes(data)?;
    let provider = GramProvider::new(
        kernel.clone(),
        data.points.clone(),
        data.labels.clone(),
        config.cache_columns,
    )?;
    let k = provider.full_matrix()?;
    let flip = flip_decompose(&k)?;
    let inner = GramProvider::from_matrix(flip.k_tilde.clone(), data.labels.clone())?;
    let mut core = run_active_set(&inner, config)?;

    // Project back: the flip projection acts on signed coefficients over
    // the whole training set, so sparsity is lost here.
    let y = &data.labels;
    let beta_tilde: Vec<f64> = core
        .alpha_tilde
        .iter()
        .zip(y)
        .map(|(&a, &yl)| a * yl)
        .collect();
    let beta = flip.apply_projection(&beta_tilde);
    core.alpha = beta.iter().zip(y).map(|(&bt, &yl)| bt * yl).collect();

    // Agreement of the two readings of the decision values, over all rows.
    let lhs = k.matvec(&beta);
    let rhs = flip.k_tilde.matvec(&beta_tilde);
    let scale = flip.k_tilde.max_abs().max(1.0);
    let mut residual = 0.0f64;
    for (a, c) in lhs.iter().zip(&rhs) {
        residual = residual.max((a - c).abs());
    }
    core.max_transition_residual = core.max_transition_residual.max(residual / scale);

    let min_eig = flip.eigen.values.first().copied();
    Ok(to_fit_result(
        data,
        kernel.clone(),
        0.0,
        config,
        core,
        "ksvm",
        min_eig,
        provider.stats(),
    ))
}

// ─────────────────────────── certification ───────────────────────────

/// Independent recomputation of the optimality certificate for a finished
/// run.
#[derive(Clone, Debug)]
pub struct KktReport {
    /// Smallest surrogate coefficient (must be `>= 0`).
    pub min_alpha_tilde: f64,
    /// Largest excess over the box, `max(a~) - C`; `-inf` under a hard
    /// margin.
    pub max_box_excess: f64,
    /// `|a~ . y|`.
    pub equality_residual: f64,
    /// `max |y_i (f~(x_i) + b) - 1|` over free support vectors, surrogate
    /// kernel.
    pub max_sv_margin_deviation: f64,
    /// `min y_i (f(x_i) + b)` over unused points, original kernel with
    /// native coefficients; `+inf` when no point is at rest.
    pub min_rest_margin: f64,
    /// Normalized `max |G a - G~ a~|` over the free block.
    pub max_transition_residual: f64,
}

impl KktReport {
    /// The four certificate checks: box feasibility and the equality
    /// constraint at `kkt_tol`, margins at `10 * kkt_tol`, and the
    /// fixed agreement tolerance for the two coefficient readings.
    pub fn passes(&self, kkt_tol: f64) -> bool {
        self.min_alpha_tilde >= -kkt_tol
            && self.max_box_excess <= kkt_tol
            && self.equality_residual <= kkt_tol
            && self.max_sv_margin_deviation <= 10.0 * kkt_tol
            && self.min_rest_margin >= 1.0 - 10.0 * kkt_tol
            && self.max_transition_residual <= TRANSITION_RESIDUAL_TOL
    }
}

/// Recomputes the optimality certificate of `fit` on its training set from
/// scratch (fresh kernel evaluations, fresh linear algebra).
pub fn verify_kkt(data: &Dataset, fit: &FitResult) -> Result<KktReport> {
    let model = &fit.model;
    let report = &fit.report;
    let l = data.len();
    let y = &data.labels;
    let lambda = model.lambda;

    // Surrogate matrix for the margin checks. The baseline's surrogate is
    // the eigen-flip, not a diagonal shift, so it is rebuilt here.
    let (k, k_tilde): (SymMatrix, SymMatrix) = {
        let provider = GramProvider::new(
            model.kernel.clone(),
            data.points.clone(),
            y.clone(),
            None,
        )?;
        let k = provider.full_matrix()?;
        if model.diagnostics.method == "ksvm" {
            let flip = flip_decompose(&k)?;
            (k, flip.k_tilde)
        } else {
            let mut kt = k.clone();
            kt.add_diag(-2.0 * lambda);
            (k, kt)
        }
    };

    let mut min_alpha = f64::INFINITY;
    let mut max_excess = f64::NEG_INFINITY;
    let mut dot_y = 0.0;
    for i in 0..l {
        let a = report.alpha_tilde[i];
        min_alpha = min_alpha.min(a);
        max_excess = max_excess.max(match model.c {
            Some(c) => a - c,
            None => f64::NEG_INFINITY,
        });
        dot_y += a * y[i];
    }

    let f_tilde = |i: usize| -> f64 {
        let mut f = 0.0;
        for j in 0..l {
            if report.alpha_tilde[j] != 0.0 {
                f += report.alpha_tilde[j] * y[j] * k_tilde.get(i, j);
            }
        }
        f + report.b
    };
    let f_native = |i: usize| -> f64 {
        let mut f = 0.0;
        for j in 0..l {
            if report.alpha[j] != 0.0 {
                f += report.alpha[j] * y[j] * k.get(i, j);
            }
        }
        f + report.b
    };

    let mut max_sv_dev = 0.0f64;
    for &i in &report.sv {
        max_sv_dev = max_sv_dev.max((y[i] * f_tilde(i) - 1.0).abs());
    }

    let in_support: Vec<bool> = {
        let mut v = vec![false; l];
        for &i in report.sv.iter().chain(&report.bsv) {
            v[i] = true;
        }
        v
    };
    let mut min_rest = f64::INFINITY;
    for i in 0..l {
        if !in_support[i] {
            min_rest = min_rest.min(y[i] * f_native(i));
        }
    }

    // Agreement of the two coefficient readings on the free block.
    let sv = &report.sv;
    let mut max_res = 0.0f64;
    let mut scale = 1.0f64;
    for &i in sv {
        let mut lhs = 0.0;
        let mut rhs = 0.0;
        for &j in sv {
            let g = y[i] * y[j] * k.get(i, j);
            let gt = y[i] * y[j] * k_tilde.get(i, j);
            lhs += g * report.alpha[j];
            rhs += gt * report.alpha_tilde[j];
            scale = scale.max(gt.abs());
        }
        max_res = max_res.max((lhs - rhs).abs());
    }

    Ok(KktReport {
        min_alpha_tilde: if l == 0 { 0.0 } else { min_alpha },
        max_box_excess: max_excess,
        equality_residual: dot_y.abs(),
        max_sv_margin_deviation: max_sv_dev,
        min_rest_margin: min_rest,
        max_transition_residual: max_res / scale,
    })
}

// ─────────────────────────── brute-force oracle ───────────────────────────

/// Exact Euclidean projection onto `{a : y.a = 0, 0 <= a <= c}` by
/// bisection on the hyperplane multiplier.
fn project_feasible(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let clip = |mu: f64| -> Vec<f64> {
        v.iter()
            .zip(y)
            .map(|(&vi, &yi)| (vi - mu * yi).clamp(0.0, c))
            .collect()
    };
    let along = |a: &[f64]| -> f64 { a.iter().zip(y).map(|(&ai, &yi)| ai * yi).sum() };
    let bound = v.iter().fold(0.0f64, |m, &vi| m.max(vi.abs())) + c + 1.0;
    let (mut lo, mut hi) = (-bound, bound);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if along(&clip(mid)) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    clip(0.5 * (lo + hi))
}

/// Projected-gradient ascent on the box-constrained dual, for small test
/// problems: maximize `sum(a) - a^T G~ a / 2` over the feasible set. Stops
/// when the objective moves by less than `1e-12` between iterations.
pub fn qp_oracle(g_tilde: &SymMatrix, y: &[f64], c: f64) -> Vec<f64> {
    let l = y.len();
    if l == 0 || c <= 0.0 {
        return vec![0.0; l];
    }
    // Gershgorin bound on the largest eigenvalue sets the step size.
    let mut lip = 0.0f64;
    for i in 0..l {
        let mut row = 0.0;
        for j in 0..l {
            row += g_tilde.get(i, j).abs();
        }
        lip = lip.max(row);
    }
    let step = 1.0 / lip.max(1e-12);
    let objective = |a: &[f64]| -> f64 {
        let ga = g_tilde.matvec(a);
        a.iter().sum::<f64>() - 0.5 * a.iter().zip(&ga).map(|(x, g)| x * g).sum::<f64>()
    };
    let mut alpha = project_feasible(&vec![0.0; l], y, c);
    let mut best = objective(&alpha);
    for _ in 0..2_000_000 {
        let ga = g_tilde.matvec(&alpha);
        let moved: Vec<f64> = alpha
            .iter()
            .zip(&ga)
            .map(|(&a, &g)| a + step * (1.0 - g))
            .collect();
        let next = project_feasible(&moved, y, c);
        // Run to the numerical fixed point: stop only once the projected
        // step no longer moves the iterate or the objective gain is below
        // machine resolution. A looser absolute threshold quits early on
        // badly scaled matrices, where the 1/L step makes per-iteration
        // gains tiny long before the coefficients settle.
        let shift = alpha
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        let obj = objective(&next);
        alpha = next;
        if shift < 1e-13 * (1.0 + c) || (obj - best).abs() < 1e-16 * (1.0 + best.abs()) {
            break;
        }
        best = best.max(obj);
    }
    alpha
}

// ─────────────────────────── tests ───────────────────────────
