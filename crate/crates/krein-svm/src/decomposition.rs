//! Decompositions of an indefinite kernel matrix into a positive
//! semidefinite surrogate plus the projection that maps coefficients found
//! on the surrogate back to the original matrix.
//!
//! Two routes are provided:
//!
//! * **Spectral shift** — `K~ = K - 2*lambda*I` for a shift `lambda <=
//!   min(eigenvalue, 0)`. The surrogate differs from `K` only on the
//!   diagonal, so it can be streamed column-by-column without ever forming
//!   `K` in full; the projection is `I - 2*lambda*K^{-1}`, applied through a
//!   linear solve on the (small) support block.
//! * **Eigen flip** — `K~ = U*|D|*U^T` from a full eigendecomposition
//!   `K = U*D*U^T`; the projection is `U*sign(D)*U^T`. This is the dense
//!   baseline: it touches every matrix entry by construction.

use crate::error::{Error, Result};
use crate::linalg::{cholesky_check, eig_sym, solve_sym, EigenDecomposition, Matrix, SymMatrix};

/// Jitter factor for the positive-semidefiniteness check of `K - lambda*I`:
/// the probe adds `1e-10 * max|K|` to the diagonal before factorizing.
pub const SHIFT_CHECK_JITTER_FACTOR: f64 = 1e-10;

/// Picks the diagonal shift from a smallest-eigenvalue estimate:
/// `safety * min(estimate, 0)`. A positive estimate (already positive
/// semidefinite matrix) clamps to zero so the surrogate is the matrix
/// itself. `safety` must be at least 1 so the shift never undershoots the
/// estimate.
pub fn choose_lambda(min_eig_estimate: f64, safety: f64) -> f64 {
    safety * min_eig_estimate.min(0.0)
}

// ───────────────────────────── shift ─────────────────────────────

/// Spectral-shift decomposition `K = k_plus - k_minus`,
/// `K~ = k_plus + k_minus` with `k_plus = K - lambda*I` and
/// `k_minus = -lambda*I`.
#[derive(Clone, Debug)]
pub struct ShiftDecomposition {
    pub lambda: f64,
    pub k_plus: SymMatrix,
    pub k_minus: SymMatrix,
    pub k_tilde: SymMatrix,
}

/// Validates that `k - lambda*I` is positive semidefinite (within a jittered
/// Cholesky probe), i.e. that `lambda` sits at or below the smallest
/// eigenvalue and at or below zero.
pub fn validate_shift(k: &SymMatrix, lambda: f64) -> Result<()> {
    if lambda > 0.0 {
        return Err(Error::NotNegativeEnough { lambda });
    }
    let mut probe = k.clone();
    probe.add_diag(-lambda);
    if !cholesky_check(&probe, SHIFT_CHECK_JITTER_FACTOR * k.max_abs()) {
        return Err(Error::NotNegativeEnough { lambda });
    }
    Ok(())
}

/// Splits `k` by the diagonal shift `lambda`, verifying positive
/// semidefiniteness of the positive part first.
pub fn shift_decompose(k: &SymMatrix, lambda: f64) -> Result<ShiftDecomposition> {
    validate_shift(k, lambda)?;
    let mut k_plus = k.clone();
    k_plus.add_diag(-lambda);
    let mut k_minus = SymMatrix::zeros(k.n());
    k_minus.add_diag(-lambda);
    let mut k_tilde = k.clone();
    k_tilde.add_diag(-2.0 * lambda);
    Ok(ShiftDecomposition {
        lambda,
        k_plus,
        k_minus,
        k_tilde,
    })
}

/// Maps surrogate coefficients back through `I - 2*lambda*G^{-1}`, where `g`
/// is the Gram block of the points carrying nonzero coefficients:
/// `alpha = alpha~ - 2*lambda * solve(g, alpha~)`. At `lambda = 0` the
/// projection is the identity and the solve is skipped entirely.
pub fn transition_shift(g: &SymMatrix, lambda: f64, alpha_tilde: &[f64]) -> Result<Vec<f64>> {
    if g.n() != alpha_tilde.len() {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            actual: alpha_tilde.len(),
        });
    }
    if lambda == 0.0 {
        return Ok(alpha_tilde.to_vec());
    }
    let z = solve_sym(g, alpha_tilde)?;
    Ok(alpha_tilde
        .iter()
        .zip(&z)
        .map(|(a, zi)| a - 2.0 * lambda * zi)
        .collect())
}

// ───────────────────────────── flip ─────────────────────────────

/// Eigen-flip decomposition: full spectrum of `K`, the flipped surrogate
/// `K~ = U*|D|*U^T`, and the signs defining the projection.
#[derive(Clone, Debug)]
pub struct FlipDecomposition {
    pub eigen: EigenDecomposition,
    /// `sign(d_k)`, with zero eigenvalues mapped to `+1` so the projection
    /// stays an involution.
    pub signs: Vec<f64>,
    pub k_tilde: SymMatrix,
}

/// Computes the eigen-flip surrogate of `k`.
pub fn flip_decompose(k: &SymMatrix) -> Result<FlipDecomposition> {
    let eigen = eig_sym(k)?;
    let n = k.n();
    let signs: Vec<f64> = eigen
        .values
        .iter()
        .map(|&d| if d >= 0.0 { 1.0 } else { -1.0 })
        .collect();
    let mut k_tilde = SymMatrix::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            let mut acc = 0.0;
            for (kk, &d) in eigen.values.iter().enumerate() {
                acc += d.abs() * eigen.vectors.get(i, kk) * eigen.vectors.get(j, kk);
            }
            k_tilde.set(i, j, acc);
        }
    }
    Ok(FlipDecomposition {
        eigen,
        signs,
        k_tilde,
    })
}

impl FlipDecomposition {
    /// Applies the projection `U*sign(D)*U^T` to a coefficient vector
    /// without materializing the projection matrix.
    pub fn apply_projection(&self, v: &[f64]) -> Vec<f64> {
        let mut w = self.eigen.vectors.transpose_matvec(v);
        for (wk, s) in w.iter_mut().zip(&self.signs) {
            *wk *= s;
        }
        self.eigen.vectors.matvec(&w)
    }

    /// The projection matrix itself; test and diagnostic use only.
    pub fn projection_matrix(&self) -> Matrix {
        let n = self.eigen.values.len();
        let mut p = Matrix::zeros(n, n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let col = self.apply_projection(&e);
            for i in 0..n {
                p.set(i, j, col[i]);
            }
        }
        p
    }
}

/// Maps surrogate coefficients back through the flip projection.
pub fn transition_flip(flip: &FlipDecomposition, alpha_tilde: &[f64]) -> Result<Vec<f64>> {
    if flip.eigen.values.len() != alpha_tilde.len() {
        return Err(Error::DimensionMismatch {
            expected: flip.eigen.values.len(),
            actual: alpha_tilde.len(),
        });
    }
    Ok(flip.apply_projection(alpha_tilde))
}

// ───────────────────────────── tests ─────────────────────────────
