//! Dense linear algebra helpers shared by the extended quadratic algebra.
//!
//! Everything here works on `nalgebra::DMatrix<f64>` and handles the empty
//! shapes (zero rows or zero columns) that show up constantly once
//! constraint sets are allowed to be empty.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Relative singular value cutoff: sigma counts as nonzero iff
/// `sigma > RANK_RTOL * max(sigma_max, 1)`.
pub const RANK_RTOL: f64 = 1e-10;

/// Feasibility tolerance for `Fx + g = 0`, blended absolute/relative in `||g||_inf`.
pub const FEAS_TOL: f64 = 1e-8;

/// Eigenvalue slack for semidefiniteness tests, relative to `max(1, |lambda|_max)`.
pub const PSD_TOL: f64 = 1e-9;

/// Tolerance for the range test `(I - A A^+) B = 0`, relative to `max(1, ||B||_F)`.
pub const RANGE_TOL: f64 = 1e-8;

/// Thin split of a full SVD into range and nullspace parts.
///
/// `m = u1 * diag(sigma) * v1^T`, and `v2` spans the nullspace of `m` with
/// orthonormal columns. Singular values are sorted in decreasing order.
#[derive(Clone, Debug)]
pub struct SvdSplit {
    pub u1: DMatrix<f64>,
    pub sigma: DVector<f64>,
    pub v1: DMatrix<f64>,
    pub v2: DMatrix<f64>,
}

impl SvdSplit {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }
}

/// Computes a rank-revealing SVD of `m` including a full nullspace basis.
///
/// Uses faer's full SVD; nalgebra's loses accuracy on rank-deficient input.
pub fn svd_split(m: &DMatrix<f64>) -> SvdSplit {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return SvdSplit {
            u1: DMatrix::zeros(rows, 0),
            sigma: DVector::zeros(0),
            v1: DMatrix::zeros(cols, 0),
            v2: DMatrix::identity(cols, cols),
        };
    }
    let Ok(svd) = faer::Mat::<f64>::from_fn(rows, cols, |i, j| m[(i, j)]).svd() else {
        // Only non-finite input fails; keep the NaNs flowing so callers see them.
        let k = rows.min(cols);
        return SvdSplit {
            u1: DMatrix::from_element(rows, k, f64::NAN),
            sigma: DVector::from_element(k, f64::NAN),
            v1: DMatrix::from_element(cols, k, f64::NAN),
            v2: DMatrix::from_element(cols, cols - k, f64::NAN),
        };
    };
    let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());

    // faer returns singular values in nonincreasing order.
    let smax = if s.nrows() > 0 { s[0] } else { 0.0 };
    let cutoff = RANK_RTOL * smax.max(1.0);
    let r = (0..s.nrows()).take_while(|&i| s[i] > cutoff).count();

    let u1 = DMatrix::from_fn(rows, r, |i, j| u[(i, j)]);
    let sigma = DVector::from_fn(r, |i, _| s[i]);
    let v1 = DMatrix::from_fn(cols, r, |i, j| v[(i, j)]);
    let v2 = DMatrix::from_fn(cols, cols - r, |i, j| v[(i, r + j)]);
    SvdSplit { u1, sigma, v1, v2 }
}

/// Moore-Penrose pseudo-inverse with the crate-wide rank cutoff.
pub fn pinv(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (rows, cols) = m.shape();
    let s = svd_split(m);
    if s.rank() == 0 {
        return DMatrix::zeros(cols, rows);
    }
    let inv_sigma = DMatrix::from_diagonal(&s.sigma.map(|x| 1.0 / x));
    &s.v1 * inv_sigma * s.u1.transpose()
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of the symmetric part of `m`; empty for a 0x0 input.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> DVector<f64> {
    if m.nrows() == 0 {
        return DVector::zeros(0);
    }
    SymmetricEigen::new(symmetrize(m)).eigenvalues
}

fn eig_extremes(m: &DMatrix<f64>) -> Option<(f64, f64)> {
    let ev = sym_eigenvalues(m);
    if ev.is_empty() {
        return None;
    }
    let lmin = ev.iter().cloned().fold(f64::INFINITY, f64::min);
    let amax = ev.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
    Some((lmin, amax))
}

/// `m` is positive semidefinite up to `PSD_TOL`. Vacuously true for 0x0.
pub fn is_psd(m: &DMatrix<f64>) -> bool {
    match eig_extremes(m) {
        None => true,
        Some((lmin, amax)) => lmin.is_finite() && lmin >= -PSD_TOL * amax.max(1.0),
    }
}

/// `m` is positive definite with margin `PSD_TOL`. Vacuously true for 0x0.
pub fn is_pd(m: &DMatrix<f64>) -> bool {
    match eig_extremes(m) {
        None => true,
        Some((lmin, amax)) => lmin.is_finite() && lmin > PSD_TOL * amax.max(1.0),
    }
}

/// Tests `R(a) ⊇ R(b)` through `||(I - a a^+) b||_F <= RANGE_TOL * max(1, ||b||_F)`.
pub fn range_contains(a: &DMatrix<f64>, b: &DMatrix<f64>) -> bool {
    assert_eq!(a.nrows(), b.nrows(), "range_contains: row counts differ");
    if b.ncols() == 0 || b.nrows() == 0 {
        return true;
    }
    let s = svd_split(a);
    // (I - U1 U1^T) b
    let resid = b - &s.u1 * (s.u1.transpose() * b);
    resid.norm() <= RANGE_TOL * b.norm().max(1.0)
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

pub fn vec_max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Stacks two matrices with equal column counts vertically.
pub fn vstack(top: &DMatrix<f64>, bottom: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(top.ncols(), bottom.ncols());
    let mut out = DMatrix::zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.rows_mut(0, top.nrows()).copy_from(top);
    out.rows_mut(top.nrows(), bottom.nrows()).copy_from(bottom);
    out
}

pub fn vstack_vec(top: &DVector<f64>, bottom: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(top.len() + bottom.len());
    out.rows_mut(0, top.len()).copy_from(top);
    out.rows_mut(top.len(), bottom.len()).copy_from(bottom);
    out
}

/// Builds the symmetric `(n+1)x(n+1)` matrix `[[p, q], [q^T, r]]`.
pub fn augment(p: &DMatrix<f64>, q: &DVector<f64>, r: f64) -> DMatrix<f64> {
    let n = p.nrows();
    let mut m = DMatrix::zeros(n + 1, n + 1);
    m.view_mut((0, 0), (n, n)).copy_from(p);
    m.view_mut((0, n), (n, 1)).copy_from(q);
    m.view_mut((n, 0), (1, n)).copy_from(&q.transpose());
    m[(n, n)] = r;
    m
}

/// Builds the affine lift `[[a, b], [0, 1]]` of the map `z -> a z + b`.
pub fn affine_lift(a: &DMatrix<f64>, b: &DVector<f64>) -> DMatrix<f64> {
    let (rows, cols) = a.shape();
    let mut t = DMatrix::zeros(rows + 1, cols + 1);
    t.view_mut((0, 0), (rows, cols)).copy_from(a);
    t.view_mut((0, cols), (rows, 1)).copy_from(b);
    t[(rows, cols)] = 1.0;
    t
}
