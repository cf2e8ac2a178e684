//! Dense symmetric linear algebra.
//!
//! Everything the solvers need lives here: exact symmetric storage, a cyclic
//! Jacobi eigendecomposition, a Bunch–Kaufman `LDL^T` solve for the (possibly
//! indefinite) KKT systems, a Cholesky-based definiteness check, and three
//! estimators for the least eigenvalue of a symmetric matrix that is only
//! available column by column.
//!
//! All routines are sequential and deterministic: identical inputs produce
//! bitwise identical outputs.

use std::sync::Arc;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Relative pivot tolerance: a factorization reports `SingularMatrix` when a
/// pivot magnitude drops below `SINGULAR_TOL_FACTOR * max(1, ||A||_max)`.
pub const SINGULAR_TOL_FACTOR: f64 = 1e-12;

/// Accuracy slack granted to the shifted power method relative to the exact
/// least eigenvalue.
pub const EIG_SLACK: f64 = 1e-6;

/// Cyclic Jacobi sweep budget before giving up.
const JACOBI_MAX_SWEEPS: usize = 100;

/// Power iteration stops once the Rayleigh quotient moves less than this.
const POWER_RQ_TOL: f64 = 1e-9;

/// Fixed seed for the power iteration start vector, so estimates are
/// reproducible run to run.
const POWER_SEED: u64 = 0x9E37_79B9_7F4A_7C15;

// ───────────────────────────── storage ─────────────────────────────

/// Symmetric matrix with packed lower-triangular storage.
///
/// Only `n*(n+1)/2` entries are stored, so `get(i, j) == get(j, i)` holds
/// exactly by construction rather than by discipline.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    n: usize,
    /// Row-major packed lower triangle: entry `(i, j)` with `i >= j` lives at
    /// `i*(i+1)/2 + j`.
    data: Vec<f64>,
}

impl SymMatrix {
    /// Zero matrix of order `n` (`n >= 1`).
    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1, "SymMatrix requires n >= 1");
        SymMatrix {
            n,
            data: vec![0.0; n * (n + 1) / 2],
        }
    }

    /// Identity matrix of order `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = SymMatrix::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Builds from a callback evaluated once per lower-triangle entry
    /// (`i >= j`).
    pub fn from_fn<F: FnMut(usize, usize) -> f64>(n: usize, mut f: F) -> Self {
        let mut m = SymMatrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                m.data[i * (i + 1) / 2 + j] = f(i, j);
            }
        }
        m
    }

    /// Builds from full square row-major data, validating symmetry within
    /// `tol` (hard error beyond it). The lower triangle is the one stored.
    pub fn from_full(n: usize, full: &[f64], tol: f64) -> Result<Self> {
        if full.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                actual: full.len(),
            });
        }
        for i in 0..n {
            for j in 0..i {
                let delta = (full[i * n + j] - full[j * n + i]).abs();
                if delta > tol {
                    return Err(Error::Asymmetric { i, j, delta, tol });
                }
            }
        }
        Ok(SymMatrix::from_fn(n, |i, j| full[i * n + j]))
    }

    /// Matrix order.
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        r * (r + 1) / 2 + c
    }

    /// Entry `(i, j)`; panics when out of range.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.n && j < self.n, "SymMatrix index out of range");
        self.data[self.idx(i, j)]
    }

    /// Sets entry `(i, j)` (and by symmetry `(j, i)`).
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(i < self.n && j < self.n, "SymMatrix index out of range");
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    /// Adds `d` to every diagonal entry.
    pub fn add_diag(&mut self, d: f64) {
        for i in 0..self.n {
            let k = i * (i + 1) / 2 + i;
            self.data[k] += d;
        }
    }

    /// Largest absolute entry (`||A||_max`), 0 for the zero matrix.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, &v| m.max(v.abs()))
    }

    /// Column `j` as an owned vector.
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, j)).collect()
    }

    /// Full row-major `n x n` copy.
    pub fn to_full(&self) -> Vec<f64> {
        let n = self.n;
        let mut full = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = self.data[i * (i + 1) / 2 + j];
                full[i * n + j] = v;
                full[j * n + i] = v;
            }
        }
        full
    }

    /// `A x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "matvec dimension mismatch");
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let mut acc = 0.0;
            for j in 0..self.n {
                acc += self.get(i, j) * x[j];
            }
            y[i] = acc;
        }
        y
    }
}

/// Dense rectangular matrix, row-major. Used for eigenvector bundles.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    /// Column `j` as an owned vector.
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// `A x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        let mut y = vec![0.0; self.rows];
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            y[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
        y
    }

    /// `A^T x`.
    pub fn transpose_matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows, "matvec dimension mismatch");
        let mut y = vec![0.0; self.cols];
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            for (yj, a) in y.iter_mut().zip(row) {
                *yj += a * x[i];
            }
        }
        y
    }
}

/// Result of `eig_sym`: `A = U diag(values) U^T` with orthonormal columns in
/// `U` and `values` sorted ascending.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    /// Eigenvalues, ascending.
    pub values: Vec<f64>,
    /// Eigenvector matrix; column `k` pairs with `values[k]`.
    pub vectors: Matrix,
}

// ──────────────────────── eigendecomposition ────────────────────────

/// Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Classic threshold strategy: during the first sweeps only off-diagonal
/// entries above a shrinking threshold are annihilated, and an entry that is
/// negligible against both of its diagonal neighbours is flushed to zero
/// outright. Converges quadratically once the matrix is nearly diagonal;
/// errors out with `NoConvergence` after 100 sweeps.
pub fn eig_sym(a: &SymMatrix) -> Result<EigenDecomposition> {
    let n = a.n();
    let mut m = a.to_full();
    // Eigenvectors are accumulated transposed (row p = eigenvector p) so a
    // rotation touches two contiguous rows.
    let mut vt = vec![0.0; n * n];
    for i in 0..n {
        vt[i * n + i] = 1.0;
    }
    let mut d: Vec<f64> = (0..n).map(|i| m[i * n + i]).collect();
    let mut b = d.clone();
    let mut z = vec![0.0; n];

    let mut converged = false;
    for sweep in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[p * n + q].abs();
            }
        }
        if off == 0.0 {
            converged = true;
            break;
        }
        let tresh = if sweep < 3 {
            0.2 * off / (n * n) as f64
        } else {
            0.0
        };
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                let g = 100.0 * apq.abs();
                // After four sweeps, skip the rotation when the off-diagonal
                // entry no longer affects either diagonal at working
                // precision.
                if sweep > 3 && d[p].abs() + g == d[p].abs() && d[q].abs() + g == d[q].abs() {
                    m[p * n + q] = 0.0;
                    continue;
                }
                if apq.abs() <= tresh {
                    continue;
                }
                let h = d[q] - d[p];
                let t = if h.abs() + g == h.abs() {
                    apq / h
                } else {
                    let theta = 0.5 * h / apq;
                    let mut t = 1.0 / (theta.abs() + (1.0 + theta * theta).sqrt());
                    if theta < 0.0 {
                        t = -t;
                    }
                    t
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);
                let h = t * apq;
                z[p] -= h;
                z[q] += h;
                d[p] -= h;
                d[q] += h;
                m[p * n + q] = 0.0;
                let rotate = |m: &mut [f64], a: usize, b: usize| {
                    let g = m[a];
                    let h = m[b];
                    m[a] = g - s * (h + g * tau);
                    m[b] = h + s * (g - h * tau);
                };
                for j in 0..p {
                    rotate(&mut m, j * n + p, j * n + q);
                }
                for j in (p + 1)..q {
                    rotate(&mut m, p * n + j, j * n + q);
                }
                for j in (q + 1)..n {
                    rotate(&mut m, p * n + j, q * n + j);
                }
                // Rows p and q of V^T live side by side; rotate them in lock
                // step.
                for j in 0..n {
                    rotate(&mut vt, p * n + j, q * n + j);
                }
            }
        }
        for i in 0..n {
            b[i] += z[i];
            d[i] = b[i];
            z[i] = 0.0;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            method: "jacobi eigendecomposition",
            limit: JACOBI_MAX_SWEEPS,
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).expect("eigenvalue is NaN"));
    let values: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (k, &src) in order.iter().enumerate() {
        for i in 0..n {
            vectors.set(i, k, vt[src * n + i]);
        }
    }
    Ok(EigenDecomposition { values, vectors })
}

// ─────────────────────────── factorizations ───────────────────────────

/// Reports whether `A + jitter*I` admits a Cholesky factorization with every
/// pivot strictly positive — i.e. whether it is numerically positive
/// definite. Never errors; failure to factor is the `false` answer.
pub fn cholesky_check(a: &SymMatrix, jitter: f64) -> bool {
    let n = a.n();
    // Packed lower-triangle working copy, factored in place.
    let mut w: Vec<f64> = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in 0..=i {
            let mut v = a.get(i, j);
            if i == j {
                v += jitter;
            }
            w.push(v);
        }
    }
    let at = |i: usize, j: usize| i * (i + 1) / 2 + j;
    for k in 0..n {
        let mut pivot = w[at(k, k)];
        for m in 0..k {
            pivot -= w[at(k, m)] * w[at(k, m)];
        }
        if !(pivot > 0.0) {
            return false;
        }
        let lkk = pivot.sqrt();
        w[at(k, k)] = lkk;
        for i in (k + 1)..n {
            let mut v = w[at(i, k)];
            for m in 0..k {
                v -= w[at(i, m)] * w[at(k, m)];
            }
            w[at(i, k)] = v / lkk;
        }
    }
    true
}

/// `LDL^T` factorization with Bunch–Kaufman partial pivoting, kept as a full
/// working square so symmetric interchanges stay simple.
struct Ldlt {
    n: usize,
    /// Strictly-lower multipliers plus the (block-)diagonal of `D`.
    m: Vec<f64>,
    /// `perm[i]` = original row living at position `i` after pivoting.
    perm: Vec<usize>,
    /// Block starts: `true` entries at `k` (and `k+1` cleared) mark a 2x2
    /// pivot beginning at `k`.
    block2: Vec<bool>,
}

fn ldlt_factor(a: &SymMatrix, tol: f64) -> Result<Ldlt> {
    let n = a.n();
    let mut m = a.to_full();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut block2 = vec![false; n];
    // Bunch–Kaufman constant: bounds element growth while preferring cheap
    // 1x1 pivots.
    let alpha = (1.0 + 17.0_f64.sqrt()) / 8.0;

    let swap = |m: &mut Vec<f64>, perm: &mut Vec<usize>, r: usize, s: usize| {
        if r == s {
            return;
        }
        for j in 0..n {
            m.swap(r * n + j, s * n + j);
        }
        for i in 0..n {
            m.swap(i * n + r, i * n + s);
        }
        perm.swap(r, s);
    };

    let mut k = 0;
    while k < n {
        let absakk = m[k * n + k].abs();
        let mut imax = k;
        let mut colmax = 0.0;
        for i in (k + 1)..n {
            let v = m[i * n + k].abs();
            if v > colmax {
                colmax = v;
                imax = i;
            }
        }
        if absakk.max(colmax) < tol {
            return Err(Error::SingularMatrix {
                pivot: absakk.max(colmax),
                tol,
            });
        }

        let mut two_by_two = false;
        if absakk < alpha * colmax {
            let mut rowmax = 0.0f64;
            for j in k..n {
                if j != imax {
                    rowmax = rowmax.max(m[imax * n + j].abs());
                }
            }
            if absakk * rowmax < alpha * colmax * colmax {
                if m[imax * n + imax].abs() >= alpha * rowmax {
                    // Large diagonal away from k: bring it here for a 1x1
                    // pivot.
                    swap(&mut m, &mut perm, k, imax);
                } else {
                    // No safe 1x1 pivot: take the 2x2 block (k, imax).
                    swap(&mut m, &mut perm, k + 1, imax);
                    two_by_two = true;
                }
            }
        }

        if !two_by_two {
            let d = m[k * n + k];
            if d.abs() < tol {
                return Err(Error::SingularMatrix {
                    pivot: d.abs(),
                    tol,
                });
            }
            let col: Vec<f64> = ((k + 1)..n).map(|i| m[i * n + k]).collect();
            for (ii, i) in ((k + 1)..n).enumerate() {
                let w = col[ii] / d;
                for j in (k + 1)..=i {
                    m[i * n + j] -= w * col[j - k - 1];
                }
                m[i * n + k] = w;
            }
            // Restore symmetry of the trailing block from its lower half.
            for i in (k + 1)..n {
                for j in (k + 1)..i {
                    m[j * n + i] = m[i * n + j];
                }
            }
            k += 1;
        } else {
            let d11 = m[k * n + k];
            let d21 = m[(k + 1) * n + k];
            let d22 = m[(k + 1) * n + k + 1];
            let det = d11 * d22 - d21 * d21;
            // Condition the 2x2 pivot on its determinant relative to its
            // largest entry.
            let scale = d11.abs().max(d21.abs()).max(d22.abs());
            if det.abs() < tol * scale.max(1.0) {
                return Err(Error::SingularMatrix {
                    pivot: det.abs(),
                    tol,
                });
            }
            let c1: Vec<f64> = ((k + 2)..n).map(|i| m[i * n + k]).collect();
            let c2: Vec<f64> = ((k + 2)..n).map(|i| m[i * n + k + 1]).collect();
            for (ii, i) in ((k + 2)..n).enumerate() {
                // (w1, w2) = (c1, c2) * inv(D2)
                let w1 = (d22 * c1[ii] - d21 * c2[ii]) / det;
                let w2 = (d11 * c2[ii] - d21 * c1[ii]) / det;
                for j in (k + 2)..=i {
                    m[i * n + j] -= w1 * c1[j - k - 2] + w2 * c2[j - k - 2];
                }
                m[i * n + k] = w1;
                m[i * n + k + 1] = w2;
            }
            for i in (k + 2)..n {
                for j in (k + 2)..i {
                    m[j * n + i] = m[i * n + j];
                }
            }
            block2[k] = true;
            k += 2;
        }
    }
    Ok(Ldlt { n, m, perm, block2 })
}

impl Ldlt {
    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let m = &self.m;
        // Permute, forward-substitute through unit-lower L, divide by the
        // block diagonal, back-substitute, un-permute.
        let mut z: Vec<f64> = (0..n).map(|i| b[self.perm[i]]).collect();
        let mut k = 0;
        while k < n {
            if self.block2[k] {
                for i in (k + 2)..n {
                    z[i] -= m[i * n + k] * z[k] + m[i * n + k + 1] * z[k + 1];
                }
                k += 2;
            } else {
                for i in (k + 1)..n {
                    z[i] -= m[i * n + k] * z[k];
                }
                k += 1;
            }
        }
        let mut k = 0;
        while k < n {
            if self.block2[k] {
                let d11 = m[k * n + k];
                let d21 = m[(k + 1) * n + k];
                let d22 = m[(k + 1) * n + k + 1];
                let det = d11 * d22 - d21 * d21;
                let (z1, z2) = (z[k], z[k + 1]);
                z[k] = (d22 * z1 - d21 * z2) / det;
                z[k + 1] = (d11 * z2 - d21 * z1) / det;
                k += 2;
            } else {
                z[k] /= m[k * n + k];
                k += 1;
            }
        }
        let mut k = n;
        while k > 0 {
            let start = if k >= 2 && self.block2[k - 2] { k - 2 } else { k - 1 };
            let width = k - start;
            for col in start..(start + width) {
                let mut acc = z[col];
                for i in (start + width)..n {
                    acc -= m[i * n + col] * z[i];
                }
                z[col] = acc;
            }
            k = start;
        }
        let mut x = vec![0.0; n];
        for i in 0..n {
            x[self.perm[i]] = z[i];
        }
        x
    }
}

/// Gaussian elimination with partial pivoting — fallback path when the
/// symmetric pivoting strategy rejects a system the plain LU can still
/// handle.
fn lu_solve(a: &SymMatrix, b: &[f64], tol: f64) -> Result<Vec<f64>> {
    let n = a.n();
    let mut m = a.to_full();
    let mut x = b.to_vec();
    for k in 0..n {
        let mut p = k;
        let mut best = m[k * n + k].abs();
        for i in (k + 1)..n {
            let v = m[i * n + k].abs();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best < tol {
            return Err(Error::SingularMatrix { pivot: best, tol });
        }
        if p != k {
            for j in 0..n {
                m.swap(k * n + j, p * n + j);
            }
            x.swap(k, p);
        }
        for i in (k + 1)..n {
            let w = m[i * n + k] / m[k * n + k];
            if w != 0.0 {
                for j in (k + 1)..n {
                    m[i * n + j] -= w * m[k * n + j];
                }
                x[i] -= w * x[k];
            }
        }
    }
    for k in (0..n).rev() {
        let mut acc = x[k];
        for j in (k + 1)..n {
            acc -= m[k * n + j] * x[j];
        }
        x[k] = acc / m[k * n + k];
    }
    Ok(x)
}

/// Solves `A x = b` for symmetric (possibly indefinite) `A`.
///
/// Primary path is `LDL^T` with Bunch–Kaufman pivoting; if that rejects the
/// system, one partial-pivot LU attempt follows before reporting
/// `SingularMatrix`. Pivots are judged against
/// `SINGULAR_TOL_FACTOR * max(1, ||A||_max)`.
pub fn solve_sym(a: &SymMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != a.n() {
        return Err(Error::DimensionMismatch {
            expected: a.n(),
            actual: b.len(),
        });
    }
    let tol = SINGULAR_TOL_FACTOR * a.max_abs().max(1.0);
    match ldlt_factor(a, tol) {
        Ok(f) => Ok(f.solve(b)),
        Err(_) => lu_solve(a, b, tol),
    }
}

/// Solves `A X = B` column by column.
pub fn solve_sym_many(a: &SymMatrix, columns: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    columns.iter().map(|b| solve_sym(a, b)).collect()
}

// ───────────────────── least-eigenvalue estimates ─────────────────────

/// Column-wise view of a symmetric matrix; lets estimators work off a Gram
/// provider without ever asking for the full matrix in one piece.
pub trait GramSource {
    /// Matrix order.
    fn dim(&self) -> usize;
    /// Full column `j`.
    fn column(&self, j: usize) -> Arc<[f64]>;
}

impl GramSource for SymMatrix {
    fn dim(&self) -> usize {
        self.n()
    }

    fn column(&self, j: usize) -> Arc<[f64]> {
        SymMatrix::column(self, j).into()
    }
}

/// How to estimate the least eigenvalue.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EigEstimate {
    /// Full Jacobi eigendecomposition; exact but needs the whole matrix.
    Exact,
    /// Power iteration on `c*I - K` with `c` the Gershgorin upper bound.
    ShiftedPower,
    /// Gershgorin disc lower bound: `min_i (K_ii - sum_{j != i} |K_ij|)`.
    /// Never above the true least eigenvalue.
    Gershgorin,
}

/// Estimates the least eigenvalue of the symmetric matrix behind `src`.
///
/// `Exact` and `ShiftedPower` land within [`EIG_SLACK`] of the true value
/// (the power method errs on the high side by at most the slack);
/// `Gershgorin` is a possibly loose lower bound. `ShiftedPower` stops when
/// the Rayleigh quotient moves less than 1e-9 and gives up with
/// `NoConvergence` after `10 * dim` iterations — callers typically fall back
/// to `Gershgorin`, which cannot fail.
pub fn min_eigenvalue_estimate<S: GramSource + ?Sized>(src: &S, method: EigEstimate) -> Result<f64> {
    let n = src.dim();
    match method {
        EigEstimate::Exact => {
            let mut full = vec![0.0; n * n];
            for j in 0..n {
                let col = src.column(j);
                for i in 0..n {
                    full[i * n + j] = col[i];
                }
            }
            // Columns of an exactly symmetric source mirror each other, so
            // symmetry holds to the last bit here.
            let m = SymMatrix::from_fn(n, |i, j| full[i * n + j]);
            let eig = eig_sym(&m)?;
            Ok(eig.values[0])
        }
        EigEstimate::Gershgorin => {
            let mut bound = f64::INFINITY;
            for j in 0..n {
                let col = src.column(j);
                let diag = col[j];
                let radius: f64 = col
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != j)
                    .map(|(_, v)| v.abs())
                    .sum();
                bound = bound.min(diag - radius);
            }
            Ok(bound)
        }
        EigEstimate::ShiftedPower => {
            // Materialize a local working copy once; the iteration itself
            // then runs on fast contiguous rows.
            let mut full = vec![0.0; n * n];
            let mut c = f64::NEG_INFINITY;
            for j in 0..n {
                let col = src.column(j);
                let mut radius = 0.0;
                for i in 0..n {
                    full[i * n + j] = col[i];
                    if i != j {
                        radius += col[i].abs();
                    }
                }
                c = c.max(col[j] + radius);
            }
            // B = c*I - K is positive semidefinite by Gershgorin; its top
            // eigenvalue is c - lambda_min(K).
            let mut rng = ChaCha8Rng::seed_from_u64(POWER_SEED);
            let mut x: Vec<f64> = (0..n)
                .map(|_| (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 - 0.5)
                .collect();
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            for v in &mut x {
                *v /= norm;
            }
            let max_iters = 10 * n;
            let mut mu_prev = f64::INFINITY;
            for _ in 0..max_iters {
                // y = B x = c*x - K*x
                let mut y = vec![0.0; n];
                for i in 0..n {
                    let row = &full[i * n..(i + 1) * n];
                    let kx: f64 = row.iter().zip(&x).map(|(a, b)| a * b).sum();
                    y[i] = c * x[i] - kx;
                }
                let mu: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
                let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm <= f64::MIN_POSITIVE {
                    // B annihilates x: K acts as c*I on it; with the Gershgorin
                    // bound this only happens for K = c*I.
                    return Ok(c - mu);
                }
                for (xi, yi) in x.iter_mut().zip(&y) {
                    *xi = yi / norm;
                }
                if (mu - mu_prev).abs() < POWER_RQ_TOL {
                    return Ok(c - mu);
                }
                mu_prev = mu;
            }
            Err(Error::NoConvergence {
                method: "shifted power iteration",
                limit: max_iters,
            })
        }
    }
}

// ───────────────────────────── tests ─────────────────────────────

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand_chacha::rand_core::RngCore;

    /// Independent oracle: naive Gaussian elimination with partial pivoting,
    /// written without reference to the production code paths.
    fn gaussian_elimination_oracle(a_full: &[f64], b: &[f64], n: usize) -> Vec<f64> {
        let mut m = a_full.to_vec();
        let mut x = b.to_vec();
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| {
                    m[i * n + k]
                        .abs()
                        .partial_cmp(&m[j * n + k].abs())
                        .unwrap()
                })
                .unwrap();
            for j in 0..n {
                m.swap(k * n + j, p * n + j);
            }
            x.swap(k, p);
            assert!(m[k * n + k].abs() > 1e-12, "oracle hit a singular pivot");
            for i in (k + 1)..n {
                let f = m[i * n + k] / m[k * n + k];
                for j in k..n {
                    m[i * n + j] -= f * m[k * n + j];
                }
                x[i] -= f * x[k];
            }
        }
        for k in (0..n).rev() {
            for j in (k + 1)..n {
                x[k] -= m[k * n + j] * x[j];
            }
            x[k] /= m[k * n + k];
        }
        x
    }

    fn seeded_symmetric(n: usize, seed: u64) -> SymMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut uniform = move || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        SymMatrix::from_fn(n, |_, _| 4.0 * uniform() - 2.0)
    }

    fn reconstruct(eig: &EigenDecomposition) -> Vec<f64> {
        let n = eig.values.len();
        let mut full = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += eig.vectors.get(i, k) * eig.values[k] * eig.vectors.get(j, k);
                }
                full[i * n + j] = acc;
            }
        }
        full
    }

    #[test]
    fn sym_storage_is_exactly_symmetric() {
        let mut m = SymMatrix::zeros(3);
        m.set(2, 0, 1.5);
        assert_eq!(m.get(0, 2), 1.5);
        assert_eq!(m.get(2, 0), 1.5);
        m.set(0, 2, -0.25);
        assert_eq!(m.get(2, 0), -0.25);
    }

    #[test]
    fn from_full_rejects_asymmetry_beyond_tol() {
        let full = vec![1.0, 2.0, 2.0 + 1e-6, 3.0];
        assert!(matches!(
            SymMatrix::from_full(2, &full, 1e-10),
            Err(Error::Asymmetric { .. })
        ));
        assert!(SymMatrix::from_full(2, &full, 1e-3).is_ok());
    }

    #[test]
    fn solve_identity_returns_rhs() {
        let a = SymMatrix::identity(3);
        let b = vec![3.0, -1.0, 2.5];
        let x = solve_sym(&a, &b).unwrap();
        assert_eq!(x, b);
    }

    #[test]
    fn solve_diagonal_divides() {
        let mut a = SymMatrix::zeros(3);
        for (i, d) in [2.0, 4.0, -8.0].iter().enumerate() {
            a.set(i, i, *d);
        }
        let x = solve_sym(&a, &[2.0, 2.0, 2.0]).unwrap();
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(x[1], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(x[2], -0.25, epsilon = 1e-14);
    }

    #[test]
    fn solve_matches_gaussian_elimination_oracle_on_spd_system() {
        // Seeded SPD matrix: A = R^T R + I with R random 8x8.
        let n = 8;
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut uniform = move || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        let r: Vec<f64> = (0..n * n).map(|_| 2.0 * uniform() - 1.0).collect();
        let a = SymMatrix::from_fn(n, |i, j| {
            let mut acc = if i == j { 1.0 } else { 0.0 };
            for k in 0..n {
                acc += r[k * n + i] * r[k * n + j];
            }
            acc
        });
        let b: Vec<f64> = (0..n).map(|i| (i as f64) - 3.0).collect();
        let x = solve_sym(&a, &b).unwrap();
        let oracle = gaussian_elimination_oracle(&a.to_full(), &b, n);
        for i in 0..n {
            assert_abs_diff_eq!(x[i], oracle[i], epsilon = 1e-10);
        }
    }

    #[test]
    fn solve_handles_indefinite_kkt_shaped_system() {
        // Saddle system [[G, y], [y^T, 0]] — zero diagonal entry forces the
        // 2x2 pivot path.
        let a = SymMatrix::from_fn(3, |i, j| match (i, j) {
            (0, 0) => 1.0,
            (1, 0) => 1.0,
            (1, 1) => 1.0,
            (2, 0) => 1.0,
            (2, 1) => -1.0,
            (2, 2) => 0.0,
            _ => unreachable!(),
        });
        let x = solve_sym(&a, &[1.0, 1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(x[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(x[2], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn solve_reports_singular_matrix() {
        let a = SymMatrix::from_fn(2, |_, _| 1.0);
        match solve_sym(&a, &[1.0, 2.0]) {
            Err(Error::SingularMatrix { .. }) => {}
            other => panic!("expected SingularMatrix, got {other:?}"),
        }
    }

    #[test]
    fn cholesky_check_accepts_identity_rejects_indefinite() {
        assert!(cholesky_check(&SymMatrix::identity(2), 0.0));
        let flip = SymMatrix::from_fn(2, |i, j| if i != j { 1.0 } else { 0.0 });
        assert!(!cholesky_check(&flip, 0.0));
    }

    #[test]
    fn cholesky_check_jitter_rescues_semidefinite_boundary() {
        // Eigenvalues {0, 2}: strictly positive pivots only thanks to the
        // jitter.
        let ones = SymMatrix::from_fn(2, |_, _| 1.0);
        assert!(cholesky_check(&ones, 1e-12));
    }

    #[test]
    fn eig_diagonal_matrix_sorts_ascending() {
        let mut a = SymMatrix::zeros(3);
        for (i, d) in [3.0, 1.0, 2.0].iter().enumerate() {
            a.set(i, i, *d);
        }
        let eig = eig_sym(&a).unwrap();
        assert_abs_diff_eq!(eig.values[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(eig.values[1], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(eig.values[2], 3.0, epsilon = 1e-12);
        // Eigenvectors are signed permutation columns.
        for k in 0..3 {
            let col = eig.vectors.column(k);
            let src = [1usize, 2, 0][k];
            for i in 0..3 {
                let expected = if i == src { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(col[i].abs(), expected, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn eig_two_by_two_exchange_matrix() {
        let a = SymMatrix::from_fn(2, |i, j| if i != j { 1.0 } else { 0.0 });
        let eig = eig_sym(&a).unwrap();
        assert_abs_diff_eq!(eig.values[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(eig.values[1], 1.0, epsilon = 1e-14);
        let s = 1.0 / 2.0_f64.sqrt();
        // Columns are (1, -1)/sqrt(2) and (1, 1)/sqrt(2) up to sign.
        let v0 = eig.vectors.column(0);
        let v1 = eig.vectors.column(1);
        assert_abs_diff_eq!((v0[0] * v0[1]).abs(), s * s, epsilon = 1e-12);
        assert!(v0[0] * v0[1] < 0.0);
        assert!(v1[0] * v1[1] > 0.0);
    }

    #[test]
    fn eig_reconstructs_seeded_dense_matrix() {
        let a = seeded_symmetric(10, 7);
        let eig = eig_sym(&a).unwrap();
        let rec = reconstruct(&eig);
        let scale = a.max_abs().max(1.0);
        for i in 0..10 {
            for j in 0..10 {
                assert!(
                    (rec[i * 10 + j] - a.get(i, j)).abs() <= 1e-8 * scale,
                    "reconstruction off at ({i},{j})"
                );
            }
        }
        // Orthogonality: U^T U = I.
        for p in 0..10 {
            for q in 0..10 {
                let dot: f64 = (0..10)
                    .map(|i| eig.vectors.get(i, p) * eig.vectors.get(i, q))
                    .sum();
                let expected = if p == q { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(dot, expected, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn min_eig_exact_on_diagonal() {
        let mut a = SymMatrix::zeros(3);
        for (i, d) in [2.0, -3.0, 5.0].iter().enumerate() {
            a.set(i, i, *d);
        }
        let est = min_eigenvalue_estimate(&a, EigEstimate::Exact).unwrap();
        assert_abs_diff_eq!(est, -3.0, epsilon = 1e-12);
        // No off-diagonal mass: the Gershgorin bound is tight here.
        let g = min_eigenvalue_estimate(&a, EigEstimate::Gershgorin).unwrap();
        assert_abs_diff_eq!(g, -3.0, epsilon = 1e-15);
    }

    #[test]
    fn min_eig_gershgorin_exchange_matrix() {
        let a = SymMatrix::from_fn(2, |i, j| if i != j { 1.0 } else { 0.0 });
        let g = min_eigenvalue_estimate(&a, EigEstimate::Gershgorin).unwrap();
        assert_abs_diff_eq!(g, -1.0, epsilon = 1e-15);
    }

    #[test]
    fn min_eig_power_tracks_exact_on_seeded_matrix() {
        let a = seeded_symmetric(20, 11);
        let exact = min_eigenvalue_estimate(&a, EigEstimate::Exact).unwrap();
        let power = min_eigenvalue_estimate(&a, EigEstimate::ShiftedPower).unwrap();
        assert!(
            (power - exact).abs() <= EIG_SLACK,
            "power {power} vs exact {exact}"
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn prop_eig_reconstructs(n in 1usize..12, seed in 0u64..1_000) {
            let a = seeded_symmetric(n, seed);
            let eig = eig_sym(&a).unwrap();
            let rec = reconstruct(&eig);
            let scale = a.max_abs().max(1.0);
            for i in 0..n {
                for j in 0..n {
                    prop_assert!((rec[i * n + j] - a.get(i, j)).abs() <= 1e-8 * scale);
                }
            }
            // Ascending order.
            for k in 1..n {
                prop_assert!(eig.values[k] >= eig.values[k - 1]);
            }
        }

        #[test]
        fn prop_solve_residual_small(n in 1usize..10, seed in 0u64..1_000) {
            let mut a = seeded_symmetric(n, seed);
            // Keep conditioning sane: push eigenvalues away from zero while
            // staying indefinite for larger n.
            for i in 0..n {
                let d = a.get(i, i);
                a.set(i, i, d + if i % 2 == 0 { 3.0 } else { -3.0 });
            }
            let eig = eig_sym(&a).unwrap();
            prop_assume!(eig.values.iter().all(|v| v.abs() > 1e-6));
            let b: Vec<f64> = (0..n).map(|i| (seed as f64 * 0.01) + i as f64).collect();
            let x = solve_sym(&a, &b).unwrap();
            let ax = a.matvec(&x);
            let b_norm = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let tol = 1e-8 * a.max_abs().max(b_norm).max(1.0);
            for i in 0..n {
                prop_assert!((ax[i] - b[i]).abs() <= tol);
            }
        }

        #[test]
        fn prop_cholesky_check_matches_eigenvalue_sign(n in 1usize..10, seed in 0u64..1_000) {
            let a = seeded_symmetric(n, seed);
            let eig = eig_sym(&a).unwrap();
            let min = eig.values[0];
            let scale = a.max_abs();
            // Stay away from the semidefinite boundary where the answer is
            // legitimately rounding-dependent.
            prop_assume!(min.abs() > 2e-10 * scale.max(1.0));
            let expected = min > 0.0;
            prop_assert_eq!(cholesky_check(&a, 0.0), expected);
        }

        #[test]
        fn prop_gershgorin_never_exceeds_min_eigenvalue(n in 1usize..12, seed in 0u64..1_000) {
            let a = seeded_symmetric(n, seed);
            let exact = min_eigenvalue_estimate(&a, EigEstimate::Exact).unwrap();
            let g = min_eigenvalue_estimate(&a, EigEstimate::Gershgorin).unwrap();
            prop_assert!(g <= exact + 1e-12);
        }
    }
}
