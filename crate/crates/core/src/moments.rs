//! Exact expectations of quadratic forms under random affine maps.
//!
//! For a random augmented map `A = [[R], [0 .. 0 1]]` and a fixed quadratic
//! coefficient matrix `B`, `E[A^T B A]` only depends on the second moments
//! `E[A_li A_kj]`. [`SecondMomentTensor`] stores exactly those, densely.

use crate::extquad::ExtendedQuadratic;
use crate::linalg::{is_psd, symmetrize};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MomentsError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("covariance is not positive semidefinite")]
    NotPsd,
    #[error("value function has equality constraints; exact expectation needs unconstrained quadratics")]
    ConstraintsPresent,
}

/// `M[l][i][k][j] = E[A_li A_kj]` for an augmented map `A` of shape
/// `rows x cols` whose last row is the deterministic `[0 .. 0 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SecondMomentTensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl SecondMomentTensor {
    fn empty(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols * rows * cols],
        }
    }

    #[inline]
    fn idx(&self, l: usize, i: usize, k: usize, j: usize) -> usize {
        ((l * self.cols + i) * self.rows + k) * self.cols + j
    }

    pub fn get(&self, l: usize, i: usize, k: usize, j: usize) -> f64 {
        self.data[self.idx(l, i, k, j)]
    }

    /// Shape `(rows, cols)` of the augmented map.
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    fn augmented(top: &DMatrix<f64>) -> DMatrix<f64> {
        let (r, c) = top.shape();
        let mut a = DMatrix::zeros(r + 1, c);
        a.rows_mut(0, r).copy_from(top);
        a[(r, c - 1)] = 1.0;
        a
    }

    fn accumulate_outer(&mut self, a: &DMatrix<f64>, weight: f64) {
        for l in 0..self.rows {
            for i in 0..self.cols {
                let ali = a[(l, i)];
                if ali == 0.0 {
                    continue;
                }
                for k in 0..self.rows {
                    for j in 0..self.cols {
                        let id = self.idx(l, i, k, j);
                        self.data[id] += weight * ali * a[(k, j)];
                    }
                }
            }
        }
    }

    /// Tensor of a fixed map whose random rows are `top` (shape `r x c`).
    pub fn deterministic(top: &DMatrix<f64>) -> Self {
        let a = Self::augmented(top);
        let mut t = Self::empty(a.nrows(), a.ncols());
        t.accumulate_outer(&a, 1.0);
        t
    }

    /// Tensor from the mean of the random rows and the covariance of their
    /// column-major vectorization.
    pub fn from_mean_cov(mean: &DMatrix<f64>, cov: &DMatrix<f64>) -> Result<Self, MomentsError> {
        let (r, c) = mean.shape();
        if cov.shape() != (r * c, r * c) {
            return Err(MomentsError::DimensionMismatch(format!(
                "covariance is {:?}, expected {}x{}",
                cov.shape(),
                r * c,
                r * c
            )));
        }
        if !is_psd(cov) {
            return Err(MomentsError::NotPsd);
        }
        let mut t = Self::deterministic(mean);
        for l in 0..r {
            for i in 0..c {
                for k in 0..r {
                    for j in 0..c {
                        let id = t.idx(l, i, k, j);
                        t.data[id] += cov[(i * r + l, j * r + k)];
                    }
                }
            }
        }
        Ok(t)
    }

    /// Empirical tensor from draws of the random rows.
    pub fn from_samples(samples: &[DMatrix<f64>]) -> Result<Self, MomentsError> {
        let Some(first) = samples.first() else {
            return Err(MomentsError::DimensionMismatch("no samples".into()));
        };
        let (r, c) = first.shape();
        let mut t = Self::empty(r + 1, c);
        let w = 1.0 / samples.len() as f64;
        for s in samples {
            if s.shape() != (r, c) {
                return Err(MomentsError::DimensionMismatch(format!(
                    "sample is {:?}, expected {:?}",
                    s.shape(),
                    (r, c)
                )));
            }
            t.accumulate_outer(&Self::augmented(s), w);
        }
        Ok(t)
    }
}

/// Coefficients of `h(z) = E f(A z)` where `f` has coefficients `b`.
pub fn expected_precompose(
    b: &DMatrix<f64>,
    m: &SecondMomentTensor,
) -> Result<DMatrix<f64>, MomentsError> {
    if b.shape() != (m.rows, m.rows) {
        return Err(MomentsError::DimensionMismatch(format!(
            "coefficient matrix is {:?}, tensor expects {}x{}",
            b.shape(),
            m.rows,
            m.rows
        )));
    }
    let mut out = DMatrix::zeros(m.cols, m.cols);
    for l in 0..m.rows {
        for k in 0..m.rows {
            let blk = b[(l, k)];
            if blk == 0.0 {
                continue;
            }
            for i in 0..m.cols {
                for j in 0..m.cols {
                    out[(i, j)] += blk * m.get(l, i, k, j);
                }
            }
        }
    }
    Ok(symmetrize(&out))
}

/// The expectation of random quadratic coefficients is their mean.
pub fn expected_quadratic(mean: &DMatrix<f64>) -> DMatrix<f64> {
    symmetrize(mean)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MomentPair {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

/// Mean and covariance of `exp(y)` for `y ~ N(mu, sigma)`.
pub fn lognormal_moments(
    mu: &DVector<f64>,
    sigma: &DMatrix<f64>,
) -> Result<MomentPair, MomentsError> {
    let n = mu.len();
    if sigma.shape() != (n, n) {
        return Err(MomentsError::DimensionMismatch(format!(
            "Sigma is {:?}, expected {n}x{n}",
            sigma.shape()
        )));
    }
    if !is_psd(sigma) {
        return Err(MomentsError::NotPsd);
    }
    let sigma = symmetrize(sigma);
    let mean = DVector::from_fn(n, |i, _| (mu[i] + 0.5 * sigma[(i, i)]).exp());
    let covariance = DMatrix::from_fn(n, n, |i, j| mean[i] * mean[j] * sigma[(i, j)].exp_m1());
    Ok(MomentPair { mean, covariance })
}

/// First and second moments of one mode's stage data.
///
/// `dynamics` describes `(x, u, 1) -> (A x + B u + c, 1)`; `cost_mean` is
/// `E[G]` over `(x, u, 1)`.
#[derive(Clone, Debug)]
pub struct ModeMoments {
    pub dynamics: SecondMomentTensor,
    pub cost_mean: DMatrix<f64>,
}

impl ModeMoments {
    pub fn deterministic(
        a: &DMatrix<f64>,
        b: &DMatrix<f64>,
        c: &DVector<f64>,
        g: &DMatrix<f64>,
    ) -> Result<Self, MomentsError> {
        let top = dynamics_block(a, b, c)?;
        Self::from_parts(SecondMomentTensor::deterministic(&top), g)
    }

    /// `mean` is the mean of `[A B c]`; `cov` the covariance of its
    /// column-major vectorization.
    pub fn from_mean_cov(
        mean: &DMatrix<f64>,
        cov: &DMatrix<f64>,
        g: &DMatrix<f64>,
    ) -> Result<Self, MomentsError> {
        Self::from_parts(SecondMomentTensor::from_mean_cov(mean, cov)?, g)
    }

    fn from_parts(dynamics: SecondMomentTensor, g: &DMatrix<f64>) -> Result<Self, MomentsError> {
        let (_, cols) = dynamics.shape();
        if g.shape() != (cols, cols) {
            return Err(MomentsError::DimensionMismatch(format!(
                "cost matrix is {:?}, expected {cols}x{cols}",
                g.shape()
            )));
        }
        Ok(Self {
            dynamics,
            cost_mean: symmetrize(g),
        })
    }

    pub fn state_dim(&self) -> usize {
        self.dynamics.rows - 1
    }

    pub fn joint_dim(&self) -> usize {
        self.dynamics.cols - 1
    }

    /// `E[G] + gamma * sum_s w_s E[V_s(A x + B u + c)]`, unconstrained.
    pub fn expected_q(
        &self,
        continuation: &[(f64, &ExtendedQuadratic)],
        gamma: f64,
    ) -> Result<ExtendedQuadratic, MomentsError> {
        let mut coeffs = expected_quadratic(&self.cost_mean);
        for (w, v) in continuation {
            if v.is_constrained() {
                return Err(MomentsError::ConstraintsPresent);
            }
            if v.dim() != self.state_dim() {
                return Err(MomentsError::DimensionMismatch(format!(
                    "value function has dimension {}, dynamics produce {}",
                    v.dim(),
                    self.state_dim()
                )));
            }
            coeffs += expected_precompose(&v.coefficients(), &self.dynamics)? * (gamma * w);
        }
        let nz = self.joint_dim();
        ExtendedQuadratic::from_coefficients(&coeffs, DMatrix::zeros(0, nz), DVector::zeros(0))
            .map_err(|e| MomentsError::DimensionMismatch(e.to_string()))
    }
}

/// `[A B c]` as one `n x (n+m+1)` block.
pub fn dynamics_block(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DVector<f64>,
) -> Result<DMatrix<f64>, MomentsError> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || c.len() != n {
        return Err(MomentsError::DimensionMismatch(format!(
            "A {:?}, B {:?}, c {} are inconsistent",
            a.shape(),
            b.shape(),
            c.len()
        )));
    }
    let m = b.ncols();
    let mut top = DMatrix::zeros(n, n + m + 1);
    top.columns_mut(0, n).copy_from(a);
    top.columns_mut(n, m).copy_from(b);
    top.column_mut(n + m).copy_from(c);
    Ok(top)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extquad::AffineMap;
    use nalgebra::{dmatrix, dvector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_map_is_identity() {
        let m = SecondMomentTensor::deterministic(&dmatrix![1.0, 0.0]);
        let out = expected_precompose(&dmatrix![1.0, 0.0; 0.0, 0.0], &m).unwrap();
        assert_eq!(out, dmatrix![1.0, 0.0; 0.0, 0.0]);
    }

    #[test]
    fn sign_flip_has_unit_second_moment() {
        let m =
            SecondMomentTensor::from_samples(&[dmatrix![1.0, 0.0], dmatrix![-1.0, 0.0]]).unwrap();
        let out = expected_precompose(&dmatrix![1.0, 0.0; 0.0, 0.0], &m).unwrap();
        assert_eq!(out, dmatrix![1.0, 0.0; 0.0, 0.0]);
    }

    #[test]
    fn unit_mean_unit_variance_doubles() {
        let cov = dmatrix![1.0, 0.0; 0.0, 0.0];
        let m = SecondMomentTensor::from_mean_cov(&dmatrix![1.0, 0.0], &cov).unwrap();
        let exact = expected_precompose(&dmatrix![1.0, 0.0; 0.0, 0.0], &m).unwrap();
        assert_eq!(exact, dmatrix![2.0, 0.0; 0.0, 0.0]);

        // Monte Carlo oracle with 10^6 draws.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let normal = rand_distr::StandardNormal;
        let n = 1_000_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let z: f64 = rng.sample(normal);
            let k = 1.0 + z;
            acc += k * k;
        }
        assert!((acc / n as f64 - exact[(0, 0)]).abs() < 5e-3);
    }

    #[test]
    fn deterministic_tensor_matches_precompose() {
        let a = dmatrix![0.3, -1.2, 0.5; 2.0, 0.1, -0.4];
        let c = dvector![0.7, -0.2];
        let f = ExtendedQuadratic::quadratic(
            dmatrix![2.0, 0.3; 0.3, 1.0],
            dvector![0.5, -1.0],
            0.25,
        )
        .unwrap();
        let map = AffineMap::new(a.clone(), c.clone()).unwrap();
        let direct = f.precompose(&map).unwrap().coefficients();
        let mut top = DMatrix::zeros(2, 4);
        top.columns_mut(0, 3).copy_from(&a);
        top.column_mut(3).copy_from(&c);
        let via = expected_precompose(&f.coefficients(), &SecondMomentTensor::deterministic(&top))
            .unwrap();
        assert!((direct - via).norm() < 1e-12);
    }

    #[test]
    fn tensor_symmetry() {
        let mean = dmatrix![0.5, 1.0, -0.3];
        let cov = dmatrix![1.0, 0.2, 0.0; 0.2, 0.5, 0.1; 0.0, 0.1, 0.3];
        let t = SecondMomentTensor::from_mean_cov(&mean, &cov).unwrap();
        let (r, c) = t.shape();
        for l in 0..r {
            for i in 0..c {
                for k in 0..r {
                    for j in 0..c {
                        assert_eq!(t.get(l, i, k, j), t.get(k, j, l, i));
                    }
                }
            }
        }
        assert_eq!(t.get(1, 2, 1, 2), 1.0);
        assert_eq!(t.get(1, 0, 0, 1), 0.0);
        assert_eq!(t.get(0, 1, 1, 2), 1.0);
    }

    #[test]
    fn expected_quadratic_is_mean() {
        assert_eq!(expected_quadratic(&DMatrix::zeros(2, 2)), DMatrix::zeros(2, 2));
        assert_eq!(expected_quadratic(&DMatrix::identity(3, 3)), DMatrix::identity(3, 3));
    }

    #[test]
    fn averaged_coefficients_match_distribution_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let mut acc = DMatrix::zeros(2, 2);
        for _ in 0..n {
            let u: f64 = rng.random_range(0.0..2.0);
            acc += dmatrix![u, 0.5 * u; 0.5 * u, 3.0 * u];
        }
        let avg = expected_quadratic(&(acc / n as f64));
        assert!((avg - dmatrix![1.0, 0.5; 0.5, 3.0]).abs().max() < 0.02);
    }

    #[test]
    fn lognormal_examples() {
        let mp = lognormal_moments(&dvector![0.0], &dmatrix![0.0]).unwrap();
        assert_eq!(mp.mean, dvector![1.0]);
        assert_eq!(mp.covariance, dmatrix![0.0]);

        let mp = lognormal_moments(&dvector![0.0], &dmatrix![2f64.ln()]).unwrap();
        assert!((mp.mean[0] - 2f64.sqrt()).abs() < 1e-15);
        assert!((mp.covariance[(0, 0)] - 2.0).abs() < 1e-14);

        let mp = lognormal_moments(&dvector![0.1, -0.2], &dmatrix![0.3, 0.0; 0.0, 0.1]).unwrap();
        assert_eq!(mp.covariance[(0, 1)], 0.0);
        assert_eq!(mp.covariance[(1, 0)], 0.0);

        assert_eq!(
            lognormal_moments(&dvector![0.0, 0.0], &dmatrix![1.0, 2.0; 2.0, 1.0]),
            Err(MomentsError::NotPsd)
        );
    }

    #[test]
    fn expected_q_refuses_constraints() {
        let mm = ModeMoments::deterministic(
            &dmatrix![1.0],
            &dmatrix![1.0],
            &dvector![0.0],
            &DMatrix::identity(3, 3),
        )
        .unwrap();
        let v = ExtendedQuadratic::indicator(dmatrix![1.0], dvector![0.0]).unwrap();
        assert_eq!(
            mm.expected_q(&[(1.0, &v)], 1.0).unwrap_err(),
            MomentsError::ConstraintsPresent
        );
    }
}
