//! Extended quadratic functions: a quadratic plus the indicator of an affine set.
//!
//! An [`ExtendedQuadratic`] over `R^n` is
//!
//! ```text
//! f(x) = 1/2 [x; 1]^T [[P, q], [q^T, r]] [x; 1]   if F x + g = 0
//!      = +inf                                      otherwise
//! ```
//!
//! The family is closed under addition, scalar multiplication, affine
//! pre-composition and (barring the pathologies reported by
//! [`Minimization`]) partial minimization. Those four operations are all
//! dynamic programming needs.
//!
//! Improper values (infeasible constraints) are ordinary values here: `add`
//! can produce one and [`ExtendedQuadratic::is_proper`] reports it.

use crate::json::{list_to_vec, mat_to_rows, rows_to_mat, vec_to_list};
use crate::linalg::{
    self, affine_lift, augment, is_pd, is_psd, max_abs, pinv, svd_split, symmetrize, vec_max_abs,
    vstack, vstack_vec, FEAS_TOL,
};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance used when comparing coefficients in `equals`.
const COEFF_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExtQuadError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("operation requires a proper extended quadratic")]
    ImproperInput,
}

fn mismatch(msg: impl Into<String>) -> ExtQuadError {
    ExtQuadError::DimensionMismatch(msg.into())
}

/// Quadratic function with embedded linear equality constraints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ExtQuadJson", into = "ExtQuadJson")]
pub struct ExtendedQuadratic {
    p: DMatrix<f64>,
    q: DVector<f64>,
    r: f64,
    f: DMatrix<f64>,
    g: DVector<f64>,
}

/// Free parameter form `{x | Fx + g = 0} = {V2 z + x0}` with `V2^T V2 = I`.
#[derive(Clone, Debug)]
pub struct FreeParamRep {
    pub x0: DVector<f64>,
    pub v2: DMatrix<f64>,
}

impl FreeParamRep {
    /// Number of free parameters, `n - rank(F)`.
    pub fn l(&self) -> usize {
        self.v2.ncols()
    }

    pub fn point(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.v2 * z + &self.x0
    }
}

/// SVD-derived description of a feasible constraint set.
#[derive(Clone, Debug)]
struct ConstraintBasis {
    x0: DVector<f64>,
    v1: DMatrix<f64>,
    v2: DMatrix<f64>,
    /// `Sigma^-1 U1^T g`, the offset of the reduced form `V1^T x + g_red = 0`.
    g_red: DVector<f64>,
}

impl ConstraintBasis {
    fn rank(&self) -> usize {
        self.v1.ncols()
    }
}

fn analyze(f: &DMatrix<f64>, g: &DVector<f64>) -> Option<ConstraintBasis> {
    let s = svd_split(f);
    let ut_g = s.u1.transpose() * g;
    let resid = g - &s.u1 * &ut_g;
    if vec_max_abs(&resid) > FEAS_TOL * vec_max_abs(g).max(1.0) {
        return None;
    }
    let g_red = ut_g.component_div(&s.sigma);
    let x0 = -(&s.v1 * &g_red);
    Some(ConstraintBasis {
        x0,
        v1: s.v1,
        v2: s.v2,
        g_red,
    })
}

/// Free parameter representation of `{x | Fx + g = 0}`, or `None` if infeasible.
pub fn free_param(f: &DMatrix<f64>, g: &DVector<f64>) -> Option<FreeParamRep> {
    assert_eq!(f.nrows(), g.len(), "free_param: F and g row counts differ");
    analyze(f, g).map(|b| FreeParamRep { x0: b.x0, v2: b.v2 })
}

/// Checks `R(a) ⊇ R(b)`.
pub fn range_contains(a: &DMatrix<f64>, b: &DMatrix<f64>) -> bool {
    linalg::range_contains(a, b)
}

/// `x -> A x + b`. Used for policies and for pre-composition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AffineMapJson", into = "AffineMapJson")]
pub struct AffineMap {
    a: DMatrix<f64>,
    b: DVector<f64>,
}

impl AffineMap {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self, ExtQuadError> {
        if a.nrows() != b.len() {
            return Err(mismatch(format!(
                "affine map gain has {} rows but offset has length {}",
                a.nrows(),
                b.len()
            )));
        }
        Ok(Self { a, b })
    }

    pub fn linear(a: DMatrix<f64>) -> Self {
        let b = DVector::zeros(a.nrows());
        Self { a, b }
    }

    pub fn identity(n: usize) -> Self {
        Self::linear(DMatrix::identity(n, n))
    }

    pub fn zero(out_dim: usize, in_dim: usize) -> Self {
        Self::linear(DMatrix::zeros(out_dim, in_dim))
    }

    pub fn gain(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn in_dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>, ExtQuadError> {
        if x.len() != self.in_dim() {
            return Err(mismatch(format!(
                "affine map expects input of length {}, got {}",
                self.in_dim(),
                x.len()
            )));
        }
        Ok(&self.a * x + &self.b)
    }
}

/// Outcome of minimizing an extended quadratic over a trailing block of variables.
#[derive(Clone, Debug)]
pub enum Minimization {
    Attained {
        value: ExtendedQuadratic,
        minimizer: AffineMap,
    },
    /// Negative curvature along some feasible direction in `u`.
    NonconvexInU,
    /// Convex in `u` but the KKT range condition fails, so the infimum is `-inf` somewhere.
    UnboundedBelow,
    /// Constraints are infeasible, either jointly or after eliminating `u`.
    Improper,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MinStatus {
    Ok,
    NonconvexInU,
    UnboundedBelow,
    Improper,
}

impl Minimization {
    pub fn status(&self) -> MinStatus {
        match self {
            Minimization::Attained { .. } => MinStatus::Ok,
            Minimization::NonconvexInU => MinStatus::NonconvexInU,
            Minimization::UnboundedBelow => MinStatus::UnboundedBelow,
            Minimization::Improper => MinStatus::Improper,
        }
    }
}

impl ExtendedQuadratic {
    /// Builds `f` from its five coefficients. `P` is replaced by `(P + P^T)/2`.
    pub fn new(
        p: DMatrix<f64>,
        q: DVector<f64>,
        r: f64,
        f: DMatrix<f64>,
        g: DVector<f64>,
    ) -> Result<Self, ExtQuadError> {
        let n = q.len();
        if p.shape() != (n, n) {
            return Err(mismatch(format!("P is {:?}, expected {n}x{n}", p.shape())));
        }
        if f.ncols() != n {
            return Err(mismatch(format!("F has {} columns, expected {n}", f.ncols())));
        }
        if f.nrows() != g.len() {
            return Err(mismatch(format!(
                "F has {} rows but g has length {}",
                f.nrows(),
                g.len()
            )));
        }
        Ok(Self {
            p: symmetrize(&p),
            q,
            r,
            f,
            g,
        })
    }

    /// Unconstrained quadratic `1/2 x^T P x + q^T x + r/2`.
    pub fn quadratic(p: DMatrix<f64>, q: DVector<f64>, r: f64) -> Result<Self, ExtQuadError> {
        let n = q.len();
        Self::new(p, q, r, DMatrix::zeros(0, n), DVector::zeros(0))
    }

    /// Builds from the `(n+1)x(n+1)` coefficient matrix `[[P, q], [q^T, r]]`.
    pub fn from_coefficients(
        m: &DMatrix<f64>,
        f: DMatrix<f64>,
        g: DVector<f64>,
    ) -> Result<Self, ExtQuadError> {
        if m.nrows() == 0 || m.nrows() != m.ncols() {
            return Err(mismatch(format!(
                "coefficient matrix must be square and nonempty, got {:?}",
                m.shape()
            )));
        }
        let n = m.nrows() - 1;
        let m = symmetrize(m);
        let p = m.view((0, 0), (n, n)).into_owned();
        let q = m.view((0, n), (n, 1)).column(0).into_owned();
        Self::new(p, q, m[(n, n)], f, g)
    }

    pub fn zero(n: usize) -> Self {
        Self {
            p: DMatrix::zeros(n, n),
            q: DVector::zeros(n),
            r: 0.0,
            f: DMatrix::zeros(0, n),
            g: DVector::zeros(0),
        }
    }

    /// Indicator of `{x | Fx + g = 0}` (zero quadratic part).
    pub fn indicator(f: DMatrix<f64>, g: DVector<f64>) -> Result<Self, ExtQuadError> {
        let n = f.ncols();
        Self::new(DMatrix::zeros(n, n), DVector::zeros(n), 0.0, f, g)
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn q(&self) -> &DVector<f64> {
        &self.q
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn f(&self) -> &DMatrix<f64> {
        &self.f
    }

    pub fn g(&self) -> &DVector<f64> {
        &self.g
    }

    pub fn num_constraints(&self) -> usize {
        self.f.nrows()
    }

    pub fn is_constrained(&self) -> bool {
        self.f.nrows() > 0
    }

    /// The symmetric `(n+1)x(n+1)` matrix `[[P, q], [q^T, r]]`.
    pub fn coefficients(&self) -> DMatrix<f64> {
        augment(&self.p, &self.q, self.r)
    }

    /// Largest absolute value among `P`, `q`, `r`.
    pub fn max_abs_coefficient(&self) -> f64 {
        max_abs(&self.p).max(vec_max_abs(&self.q)).max(self.r.abs())
    }

    /// True if all of `P`, `q`, `r`, `F`, `g` are finite.
    pub fn is_finite(&self) -> bool {
        self.p.iter().all(|x| x.is_finite())
            && self.q.iter().all(|x| x.is_finite())
            && self.r.is_finite()
            && self.f.iter().all(|x| x.is_finite())
            && self.g.iter().all(|x| x.is_finite())
    }

    /// Quadratic part at `x`, ignoring the constraints.
    pub fn quadratic_part(&self, x: &DVector<f64>) -> f64 {
        0.5 * (x.dot(&(&self.p * x)) + 2.0 * self.q.dot(x) + self.r)
    }

    /// Constraint residual `||Fx + g||_inf`.
    pub fn residual(&self, x: &DVector<f64>) -> f64 {
        vec_max_abs(&(&self.f * x + &self.g))
    }

    /// `f(x)`, which is `+inf` off the constraint set.
    pub fn evaluate(&self, x: &DVector<f64>) -> Result<f64, ExtQuadError> {
        if x.len() != self.dim() {
            return Err(mismatch(format!(
                "point has length {}, function has dimension {}",
                x.len(),
                self.dim()
            )));
        }
        if self.residual(x) > FEAS_TOL * vec_max_abs(&self.g).max(1.0) {
            return Ok(f64::INFINITY);
        }
        Ok(self.quadratic_part(x))
    }

    pub fn free_param(&self) -> Option<FreeParamRep> {
        free_param(&self.f, &self.g)
    }

    pub fn is_proper(&self) -> bool {
        analyze(&self.f, &self.g).is_some()
    }

    /// Converts the constraints to orthonormal rows (`F F^T = I`).
    ///
    /// Returns `None` when the constraints are infeasible.
    pub fn reduce(&self) -> Option<Self> {
        let b = analyze(&self.f, &self.g)?;
        // Already orthonormal: keep the rows so reducing twice is a no-op.
        if b.v1.ncols() == self.f.nrows() && self.has_orthonormal_rows() {
            return Some(self.clone());
        }
        Some(Self {
            p: self.p.clone(),
            q: self.q.clone(),
            r: self.r,
            f: b.v1.transpose(),
            g: b.g_red,
        })
    }

    fn has_orthonormal_rows(&self) -> bool {
        let gram = &self.f * self.f.transpose();
        let p = gram.nrows();
        max_abs(&(gram - DMatrix::identity(p, p))) <= 1e-12
    }

    /// Reduced form if proper, otherwise `self` unchanged (and improper).
    fn reduce_or_keep(self) -> Self {
        match self.reduce() {
            Some(r) => r,
            None => self,
        }
    }

    fn basis(&self) -> Result<ConstraintBasis, ExtQuadError> {
        analyze(&self.f, &self.g).ok_or(ExtQuadError::ImproperInput)
    }

    /// True iff the two constraint sets are the same affine set.
    pub fn constraints_equal(&self, other: &Self) -> Result<bool, ExtQuadError> {
        if self.dim() != other.dim() {
            return Err(mismatch("constraints_equal on different dimensions"));
        }
        let a = self.basis()?;
        let b = other.basis()?;
        Ok(bases_equal(&a, &b))
    }

    /// True iff `self(x) == other(x)` for every `x`.
    pub fn equals(&self, other: &Self) -> bool {
        if self.dim() != other.dim() {
            return false;
        }
        let (a, b) = match (analyze(&self.f, &self.g), analyze(&other.f, &other.g)) {
            (None, None) => return true,
            (Some(a), Some(b)) => (a, b),
            _ => return false,
        };
        if !bases_equal(&a, &b) {
            return false;
        }
        let lift = affine_lift(&a.v2, &a.x0);
        let m1 = lift.transpose() * self.coefficients() * &lift;
        let m2 = lift.transpose() * other.coefficients() * &lift;
        let scale = max_abs(&m1).max(max_abs(&m2)).max(1.0);
        max_abs(&(m1 - m2)) <= COEFF_TOL * scale
    }

    /// Projected Hessian `V2^T P V2` on the constraint set.
    fn projected_hessian(&self, b: &ConstraintBasis) -> DMatrix<f64> {
        b.v2.transpose() * &self.p * &b.v2
    }

    pub fn is_convex(&self) -> Result<bool, ExtQuadError> {
        let b = self.basis()?;
        Ok(is_psd(&self.projected_hessian(&b)))
    }

    pub fn is_strictly_convex(&self) -> Result<bool, ExtQuadError> {
        let b = self.basis()?;
        Ok(is_pd(&self.projected_hessian(&b)))
    }

    pub fn is_nonnegative(&self) -> Result<bool, ExtQuadError> {
        let b = self.basis()?;
        let lift = affine_lift(&b.v2, &b.x0);
        Ok(is_psd(&(lift.transpose() * self.coefficients() * lift)))
    }

    /// Pointwise sum; constraints are stacked and the result reduced.
    ///
    /// If the stacked constraints are infeasible the unreduced (improper)
    /// sum is returned.
    pub fn add(&self, other: &Self) -> Result<Self, ExtQuadError> {
        if self.dim() != other.dim() {
            return Err(mismatch(format!(
                "cannot add dimension {} to dimension {}",
                self.dim(),
                other.dim()
            )));
        }
        let sum = Self {
            p: &self.p + &other.p,
            q: &self.q + &other.q,
            r: self.r + other.r,
            f: vstack(&self.f, &other.f),
            g: vstack_vec(&self.g, &other.g),
        };
        Ok(sum.reduce_or_keep())
    }

    /// Scales the quadratic part by `alpha`, keeping the constraints.
    ///
    /// For `alpha < 0` the result is still `+inf` off the constraint set.
    pub fn scale(&self, alpha: f64) -> Self {
        Self {
            p: &self.p * alpha,
            q: &self.q * alpha,
            r: self.r * alpha,
            f: self.f.clone(),
            g: self.g.clone(),
        }
    }

    /// `z -> f(A z + b)`, returned reduced (or unreduced if improper).
    pub fn precompose(&self, map: &AffineMap) -> Result<Self, ExtQuadError> {
        if map.out_dim() != self.dim() {
            return Err(mismatch(format!(
                "map output dimension {} does not match function dimension {}",
                map.out_dim(),
                self.dim()
            )));
        }
        let lift = affine_lift(&map.a, &map.b);
        let m = lift.transpose() * self.coefficients() * &lift;
        let f = &self.f * &map.a;
        let g = &self.f * &map.b + &self.g;
        Ok(Self::from_coefficients(&m, f, g)?.reduce_or_keep())
    }

    /// Minimizes over the trailing `nu` variables: `g(x) = inf_u f(x, u)`.
    ///
    /// On success returns the reduced value function and the affine
    /// minimizer `u*(x) = A x + b` obtained from the pseudo-inverse of the
    /// full KKT matrix.
    pub fn partial_min(&self, nx: usize, nu: usize) -> Result<Minimization, ExtQuadError> {
        if nx + nu != self.dim() {
            return Err(mismatch(format!(
                "split {nx} + {nu} does not match dimension {}",
                self.dim()
            )));
        }
        if !self.is_proper() {
            return Ok(Minimization::Improper);
        }
        let p_uu = self.p.view((nx, nx), (nu, nu)).into_owned();
        let p_ux = self.p.view((nx, 0), (nu, nx)).into_owned();
        let q_u = self.q.rows(nx, nu).into_owned();
        let f_x = self.f.columns(0, nx).into_owned();
        let f_u = self.f.columns(nx, nu).into_owned();
        let np = self.f.nrows();

        // Convexity in u over directions that keep F_u u fixed.
        let null_u = svd_split(&f_u).v2;
        if !is_psd(&(null_u.transpose() * &p_uu * &null_u)) {
            return Ok(Minimization::NonconvexInU);
        }

        // Induced constraint on x: F_x x + g must lie in R(F_u).
        let proj = DMatrix::identity(np, np) - &f_u * pinv(&f_u);
        let f_ind = &proj * &f_x;
        let g_ind = &proj * &self.g;
        let Some(xb) = analyze(&f_ind, &g_ind) else {
            return Ok(Minimization::Improper);
        };

        let dim_k = nu + np;
        let mut kkt = DMatrix::zeros(dim_k, dim_k);
        kkt.view_mut((0, 0), (nu, nu)).copy_from(&p_uu);
        kkt.view_mut((0, nu), (nu, np)).copy_from(&f_u.transpose());
        kkt.view_mut((nu, 0), (np, nu)).copy_from(&f_u);

        let lin = vstack(&p_ux, &f_x);
        let off = vstack_vec(&q_u, &self.g);
        let l = xb.v2.ncols();
        let mut rhs = DMatrix::zeros(dim_k, l + 1);
        rhs.columns_mut(0, l).copy_from(&(&lin * &xb.v2));
        rhs.column_mut(l).copy_from(&(&lin * &xb.x0 + &off));
        if !linalg::range_contains(&kkt, &rhs) {
            return Ok(Minimization::UnboundedBelow);
        }

        let kkt_pinv = pinv(&kkt);
        let top = kkt_pinv.rows(0, nu);
        // Adding 0.0 turns -0.0 into 0.0 so pinned inputs print as plain zeros.
        let gain = (top * &lin).map(|v| -v + 0.0);
        let offset = (top * &off).map(|v| -v + 0.0);

        let mut stack_a = DMatrix::zeros(nx + nu, nx);
        stack_a.view_mut((0, 0), (nx, nx)).fill_with_identity();
        stack_a.view_mut((nx, 0), (nu, nx)).copy_from(&gain);
        let mut stack_b = DVector::zeros(nx + nu);
        stack_b.rows_mut(nx, nu).copy_from(&offset);
        let restricted = self.precompose(&AffineMap {
            a: stack_a,
            b: stack_b,
        })?;
        let value = restricted.add(&Self::indicator(f_ind, g_ind)?)?;
        Ok(Minimization::Attained {
            value,
            minimizer: AffineMap {
                a: gain,
                b: offset,
            },
        })
    }
}

fn bases_equal(a: &ConstraintBasis, b: &ConstraintBasis) -> bool {
    if a.rank() != b.rank() {
        return false;
    }
    let tol = FEAS_TOL * vec_max_abs(&a.x0).max(vec_max_abs(&b.x0)).max(1.0);
    let cross = |x: &ConstraintBasis, y: &ConstraintBasis| {
        max_abs(&(x.v1.transpose() * &y.v2)) <= FEAS_TOL
            && vec_max_abs(&(x.v1.transpose() * &y.x0 + &x.g_red)) <= tol
    };
    cross(a, b) && cross(b, a)
}

#[derive(Serialize, Deserialize)]
struct ExtQuadJson {
    n: usize,
    #[serde(rename = "P")]
    p: Vec<Vec<f64>>,
    q: Vec<f64>,
    r: f64,
    #[serde(rename = "F")]
    f: Vec<Vec<f64>>,
    g: Vec<f64>,
}

impl From<ExtendedQuadratic> for ExtQuadJson {
    fn from(e: ExtendedQuadratic) -> Self {
        Self {
            n: e.dim(),
            p: mat_to_rows(&e.p),
            q: vec_to_list(&e.q),
            r: e.r,
            f: mat_to_rows(&e.f),
            g: vec_to_list(&e.g),
        }
    }
}

impl TryFrom<ExtQuadJson> for ExtendedQuadratic {
    type Error = String;

    fn try_from(j: ExtQuadJson) -> Result<Self, String> {
        let p = rows_to_mat(&j.p, j.n)?;
        let f = rows_to_mat(&j.f, j.n)?;
        let eq = ExtendedQuadratic::new(p, list_to_vec(&j.q), j.r, f, list_to_vec(&j.g))
            .map_err(|e| e.to_string())?;
        Ok(eq)
    }
}

#[derive(Serialize, Deserialize)]
struct AffineMapJson {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

impl From<AffineMap> for AffineMapJson {
    fn from(m: AffineMap) -> Self {
        Self {
            a: mat_to_rows(&m.a),
            b: vec_to_list(&m.b),
        }
    }
}

impl TryFrom<AffineMapJson> for AffineMap {
    type Error = String;

    fn try_from(j: AffineMapJson) -> Result<Self, String> {
        let a = crate::json::rows_to_mat_infer(&j.a)?;
        AffineMap::new(a, list_to_vec(&j.b)).map_err(|e| e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    fn quad(p: DMatrix<f64>, q: DVector<f64>, r: f64) -> ExtendedQuadratic {
        ExtendedQuadratic::quadratic(p, q, r).unwrap()
    }

    fn eq(
        p: DMatrix<f64>,
        q: DVector<f64>,
        r: f64,
        f: DMatrix<f64>,
        g: DVector<f64>,
    ) -> ExtendedQuadratic {
        ExtendedQuadratic::new(p, q, r, f, g).unwrap()
    }

    #[test]
    fn constructor_symmetrizes() {
        let f = quad(dmatrix![1.0, 2.0; 0.0, 1.0], dvector![0.0, 0.0], 0.0);
        assert_eq!(f.p(), &dmatrix![1.0, 1.0; 1.0, 1.0]);
    }

    #[test]
    fn constructor_rejects_bad_shapes() {
        let err = ExtendedQuadratic::new(
            DMatrix::zeros(2, 2),
            DVector::zeros(2),
            0.0,
            DMatrix::zeros(1, 3),
            DVector::zeros(1),
        );
        assert!(matches!(err, Err(ExtQuadError::DimensionMismatch(_))));
    }

    #[test]
    fn evaluate_examples() {
        let f = quad(dmatrix![1.0], dvector![0.0], 0.0);
        assert_eq!(f.evaluate(&dvector![2.0]).unwrap(), 2.0);
        let f = quad(dmatrix![1.0], dvector![1.0], 1.0);
        assert_eq!(f.evaluate(&dvector![1.0]).unwrap(), 2.0);
        let f = eq(dmatrix![1.0], dvector![0.0], 0.0, dmatrix![1.0], dvector![-1.0]);
        assert_eq!(f.evaluate(&dvector![0.0]).unwrap(), f64::INFINITY);
        assert!(f.evaluate(&dvector![0.0, 1.0]).is_err());
    }

    #[test]
    fn free_param_examples() {
        let fp = free_param(&DMatrix::zeros(0, 2), &DVector::zeros(0)).unwrap();
        assert_eq!(fp.x0, dvector![0.0, 0.0]);
        assert_eq!(fp.v2, DMatrix::identity(2, 2));

        let fp = free_param(&dmatrix![1.0, 0.0], &dvector![-1.0]).unwrap();
        assert!((fp.x0.clone() - dvector![1.0, 0.0]).norm() < 1e-15);
        assert_eq!(fp.l(), 1);
        assert!((fp.v2[(0, 0)]).abs() < 1e-15);
        assert!((fp.v2[(1, 0)].abs() - 1.0).abs() < 1e-15);

        assert!(free_param(&dmatrix![1.0, 0.0; 1.0, 0.0], &dvector![1.0, -1.0]).is_none());
    }

    #[test]
    fn reduce_examples() {
        let f = quad(dmatrix![1.0], dvector![0.0], 0.0);
        assert_eq!(f.reduce().unwrap(), f);

        let f = eq(DMatrix::zeros(2, 2), DVector::zeros(2), 0.0, dmatrix![2.0, 0.0], dvector![-2.0]);
        let r = f.reduce().unwrap();
        let sign = r.f()[(0, 0)].signum();
        assert!((r.f() * sign - dmatrix![1.0, 0.0]).norm() < 1e-15);
        assert!((r.g()[0] * sign + 1.0).abs() < 1e-15);

        // Rank-one stack; the reduced row and offset were worked out by hand:
        // U1 = (1,2)/sqrt5, sigma = sqrt5, V1 = e1, g' = U1^T g / sigma = 1.
        let f = eq(
            DMatrix::zeros(2, 2),
            DVector::zeros(2),
            0.0,
            dmatrix![1.0, 0.0; 2.0, 0.0],
            dvector![1.0, 2.0],
        );
        let r = f.reduce().unwrap();
        assert_eq!(r.num_constraints(), 1);
        let sign = r.f()[(0, 0)].signum();
        assert!((r.f() * sign - dmatrix![1.0, 0.0]).norm() < 1e-14);
        assert!((r.g()[0] * sign - 1.0).abs() < 1e-14);
        assert!((r.f() * r.f().transpose() - DMatrix::identity(1, 1)).norm() < 1e-14);
    }

    #[test]
    fn proper_examples() {
        assert!(ExtendedQuadratic::zero(3).is_proper());
        let f = ExtendedQuadratic::indicator(dmatrix![1.0], dvector![5.0]).unwrap();
        assert!(f.is_proper());
        let f = ExtendedQuadratic::indicator(dmatrix![1.0; 1.0], dvector![0.0, 1.0]).unwrap();
        assert!(!f.is_proper());
        assert!(f.reduce().is_none());
    }

    #[test]
    fn constraints_equal_examples() {
        let a = ExtendedQuadratic::indicator(dmatrix![1.0, 0.0], dvector![-1.0]).unwrap();
        let b = ExtendedQuadratic::indicator(dmatrix![3.0, 0.0], dvector![-3.0]).unwrap();
        let c = ExtendedQuadratic::indicator(dmatrix![1.0, 0.0], dvector![1.0]).unwrap();
        assert!(a.constraints_equal(&b).unwrap());
        assert!(!a.constraints_equal(&c).unwrap());

        let free = ExtendedQuadratic::zero(2);
        let zero_row = ExtendedQuadratic::indicator(dmatrix![0.0, 0.0], dvector![0.0]).unwrap();
        assert_eq!(zero_row.free_param().unwrap().l(), 2);
        assert!(free.constraints_equal(&zero_row).unwrap());

        let bad = ExtendedQuadratic::indicator(dmatrix![1.0, 0.0; 1.0, 0.0], dvector![0.0, 1.0])
            .unwrap();
        assert_eq!(a.constraints_equal(&bad), Err(ExtQuadError::ImproperInput));
    }

    #[test]
    fn equals_examples() {
        let f = eq(
            dmatrix![1.0, 0.3; 0.3, 2.0],
            dvector![1.0, -1.0],
            0.5,
            dmatrix![1.0, 1.0],
            dvector![0.2],
        );
        assert!(f.equals(&f));

        let a = eq(DMatrix::identity(2, 2), dvector![0.0, 1.0], 2.0, dmatrix![1.0, 0.0], dvector![0.0]);
        let b = eq(
            dmatrix![5.0, 0.0; 0.0, 1.0],
            dvector![0.0, 1.0],
            2.0,
            dmatrix![1.0, 0.0],
            dvector![0.0],
        );
        assert!(a.equals(&b));
        // Independent check: same values at feasible points x = (0, t).
        for t in [-3.0, -0.5, 0.0, 1.7, 10.0] {
            let x = dvector![0.0, t];
            assert_eq!(a.evaluate(&x).unwrap(), b.evaluate(&x).unwrap());
        }

        let a = quad(dmatrix![1.0], dvector![0.0], 0.0);
        let b = quad(dmatrix![2.0], dvector![0.0], 0.0);
        assert!(!a.equals(&b));
    }

    #[test]
    fn convexity_examples() {
        let point = eq(dmatrix![-1.0], dvector![0.0], 0.0, dmatrix![1.0], dvector![0.0]);
        assert!(point.is_convex().unwrap());
        assert!(point.is_strictly_convex().unwrap());

        let p = dmatrix![-1.0, 0.0; 0.0, 1.0];
        let on_line = eq(p.clone(), DVector::zeros(2), 0.0, dmatrix![1.0, 0.0], dvector![0.0]);
        assert!(on_line.is_convex().unwrap());
        let free = quad(p, DVector::zeros(2), 0.0);
        assert!(!free.is_convex().unwrap());

        let bad = ExtendedQuadratic::indicator(dmatrix![1.0; 1.0], dvector![0.0, 1.0]).unwrap();
        assert_eq!(bad.is_convex(), Err(ExtQuadError::ImproperInput));
    }

    #[test]
    fn nonnegative_examples() {
        assert!(quad(dmatrix![1.0], dvector![0.0], 0.0).is_nonnegative().unwrap());
        assert!(!quad(dmatrix![1.0], dvector![0.0], -1.0).is_nonnegative().unwrap());
        let at_zero = eq(dmatrix![-1.0], dvector![0.0], 0.0, dmatrix![1.0], dvector![0.0]);
        assert!(at_zero.is_nonnegative().unwrap());
    }

    #[test]
    fn add_examples() {
        let f = eq(
            dmatrix![2.0, 0.5; 0.5, 1.0],
            dvector![1.0, 0.0],
            3.0,
            dmatrix![1.0, -1.0],
            dvector![0.5],
        );
        assert!(f.add(&ExtendedQuadratic::zero(2)).unwrap().equals(&f));

        let s = quad(dmatrix![1.0], dvector![0.0], 0.0)
            .add(&quad(dmatrix![2.0], dvector![0.0], 0.0))
            .unwrap();
        assert_eq!(s.p(), &dmatrix![3.0]);

        let a = ExtendedQuadratic::indicator(dmatrix![1.0], dvector![0.0]).unwrap();
        let b = ExtendedQuadratic::indicator(dmatrix![1.0], dvector![-1.0]).unwrap();
        let s = a.add(&b).unwrap();
        assert!(!s.is_proper());
        assert_eq!(s.evaluate(&dvector![0.0]).unwrap(), f64::INFINITY);
        assert_eq!(s.evaluate(&dvector![1.0]).unwrap(), f64::INFINITY);
    }

    #[test]
    fn scale_examples() {
        let f = eq(dmatrix![2.0], dvector![1.0], 1.0, dmatrix![1.0], dvector![-1.0]);
        assert_eq!(f.scale(1.0), f);
        let z = f.scale(0.0);
        assert_eq!(z.evaluate(&dvector![1.0]).unwrap(), 0.0);
        assert_eq!(z.evaluate(&dvector![2.0]).unwrap(), f64::INFINITY);
        let neg = quad(dmatrix![2.0], dvector![0.0], 0.0).scale(-1.0);
        assert_eq!(neg.p(), &dmatrix![-2.0]);
        // Negative scaling keeps +inf off the constraint set.
        assert_eq!(f.scale(-1.0).evaluate(&dvector![0.0]).unwrap(), f64::INFINITY);
    }

    #[test]
    fn precompose_examples() {
        let f = eq(
            dmatrix![2.0, 0.5; 0.5, 1.0],
            dvector![1.0, 0.0],
            3.0,
            dmatrix![1.0, -1.0],
            dvector![0.5],
        );
        assert!(f.precompose(&AffineMap::identity(2)).unwrap().equals(&f));

        let half_sq = quad(dmatrix![1.0], dvector![0.0], 0.0);
        let map = AffineMap::new(dmatrix![2.0], dvector![1.0]).unwrap();
        let g = half_sq.precompose(&map).unwrap();
        assert_eq!(g.p(), &dmatrix![4.0]);
        assert_eq!(g.q(), &dvector![2.0]);
        assert_eq!(g.r(), 1.0);

        let pin = ExtendedQuadratic::indicator(dmatrix![1.0], dvector![0.0]).unwrap();
        let g = pin.precompose(&AffineMap::linear(dmatrix![1.0, 1.0])).unwrap();
        assert_eq!(g.num_constraints(), 1);
        let row = g.f().row(0).into_owned();
        assert!((row[0] - row[1]).abs() < 1e-15);
        assert!(row[0].abs() > 0.5);

        assert!(half_sq.precompose(&AffineMap::identity(2)).is_err());
    }

    #[test]
    fn partial_min_unconstrained() {
        // f(x,u) = 1/2 (x-u)^2 + 1/2 u^2
        let f = quad(dmatrix![1.0, -1.0; -1.0, 2.0], dvector![0.0, 0.0], 0.0);
        let Minimization::Attained { value, minimizer } = f.partial_min(1, 1).unwrap() else {
            panic!("expected attained minimum");
        };
        assert!((value.p()[(0, 0)] - 0.5).abs() < 1e-14);
        assert!((minimizer.gain()[(0, 0)] - 0.5).abs() < 1e-14);
        assert!(minimizer.offset()[0].abs() < 1e-14);
    }

    #[test]
    fn partial_min_constraint_eliminates_u() {
        // f(x,u) = 1/2 u^2 subject to x + u = 0
        let f = eq(
            dmatrix![0.0, 0.0; 0.0, 1.0],
            dvector![0.0, 0.0],
            0.0,
            dmatrix![1.0, 1.0],
            dvector![0.0],
        );
        let Minimization::Attained { value, minimizer } = f.partial_min(1, 1).unwrap() else {
            panic!("expected attained minimum");
        };
        assert!((value.p()[(0, 0)] - 1.0).abs() < 1e-12);
        assert_eq!(value.num_constraints(), 0);
        assert!((minimizer.gain()[(0, 0)] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn partial_min_statuses() {
        let f = quad(dmatrix![0.0, 0.0; 0.0, -1.0], dvector![0.0, 0.0], 0.0);
        assert_eq!(f.partial_min(1, 1).unwrap().status(), MinStatus::NonconvexInU);

        // Flat in u with a linear term in u: inf is -inf.
        let f = quad(dmatrix![1.0, 0.0; 0.0, 0.0], dvector![0.0, 1.0], 0.0);
        assert_eq!(f.partial_min(1, 1).unwrap().status(), MinStatus::UnboundedBelow);

        // Flat in u with no linear term: minimum attained (any u works).
        let f = quad(dmatrix![1.0, 0.0; 0.0, 0.0], dvector![0.0, 0.0], 0.0);
        assert_eq!(f.partial_min(1, 1).unwrap().status(), MinStatus::Ok);

        let f = ExtendedQuadratic::indicator(dmatrix![1.0, 0.0; 1.0, 0.0], dvector![0.0, 1.0])
            .unwrap();
        assert_eq!(f.partial_min(1, 1).unwrap().status(), MinStatus::Improper);

        assert!(f.partial_min(1, 2).is_err());
    }

    #[test]
    fn partial_min_induced_constraint() {
        // u is pinned by u = 1 and x is pinned by x = 2 through a second row;
        // the value is then defined only at x = 2.
        let f = eq(
            DMatrix::identity(2, 2),
            DVector::zeros(2),
            0.0,
            dmatrix![0.0, 1.0; 1.0, 0.0],
            dvector![-1.0, -2.0],
        );
        let Minimization::Attained { value, minimizer } = f.partial_min(1, 1).unwrap() else {
            panic!("expected attained minimum");
        };
        assert_eq!(value.num_constraints(), 1);
        assert_eq!(value.evaluate(&dvector![1.0]).unwrap(), f64::INFINITY);
        assert!((value.evaluate(&dvector![2.0]).unwrap() - 2.5).abs() < 1e-12);
        assert!((minimizer.apply(&dvector![2.0]).unwrap()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let f = eq(
            dmatrix![0.1, 1.0 / 3.0; 1.0 / 3.0, 2.0_f64.sqrt()],
            dvector![std::f64::consts::PI, -1e-300],
            7.0 / 11.0,
            dmatrix![0.2, 0.7],
            dvector![1e17 + 1.0],
        );
        let s = serde_json::to_string(&f).unwrap();
        let back: ExtendedQuadratic = serde_json::from_str(&s).unwrap();
        assert_eq!(back, f);

        let empty = ExtendedQuadratic::zero(3);
        let back: ExtendedQuadratic =
            serde_json::from_str(&serde_json::to_string(&empty).unwrap()).unwrap();
        assert_eq!(back, empty);

        let m = AffineMap::new(dmatrix![0.1, -0.2], dvector![1.0 / 7.0]).unwrap();
        let back: AffineMap = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn json_rejects_ragged_rows() {
        let s = r#"{"n":2,"P":[[1,0],[0]],"q":[0,0],"r":0,"F":[],"g":[]}"#;
        assert!(serde_json::from_str::<ExtendedQuadratic>(s).is_err());
    }
}
