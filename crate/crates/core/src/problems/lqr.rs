use super::{quadratic_form_cost, require_pd, require_psd, require_square, shape_err, ProblemError};
use crate::dp::{FixedSampler, GaussianSampler, ModeDraw, ProblemSpec};
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

/// `x' = A x + B u + w`, `E w = 0`, `E w w^T = W`, cost `x^T Q x + u^T R u`.
#[derive(Clone, Debug)]
pub struct LqrData {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub w: Option<DMatrix<f64>>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

impl LqrData {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, q: DMatrix<f64>, r: DMatrix<f64>) -> Self {
        Self {
            a,
            b,
            w: None,
            q,
            r,
        }
    }

    pub fn with_noise(mut self, w: DMatrix<f64>) -> Self {
        self.w = Some(w);
        self
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn validate(&self) -> Result<(), ProblemError> {
        let (n, m) = (self.n(), self.m());
        require_square("A", &self.a, n)?;
        if self.b.nrows() != n {
            return Err(shape_err(format!("B has {} rows, expected {n}", self.b.nrows())));
        }
        require_square("Q", &self.q, n)?;
        require_square("R", &self.r, m)?;
        require_psd("Q", &self.q)?;
        require_pd("R", &self.r)?;
        if let Some(w) = &self.w {
            require_square("W", w, n)?;
            require_psd("W", w)?;
        }
        Ok(())
    }
}

/// Single-mode spec with horizon 1; set `horizon` for finite-horizon use.
pub fn lqr(data: &LqrData) -> Result<ProblemSpec, ProblemError> {
    data.validate()?;
    let (n, m) = (data.n(), data.m());
    let g = quadratic_form_cost(&data.q, &data.r);
    let mean = ModeDraw::new(data.a.clone(), data.b.clone(), DVector::zeros(n), g);
    match &data.w {
        Some(w) if w.iter().any(|&x| x != 0.0) => {
            let d = n * (n + m + 1);
            let mut cov = DMatrix::zeros(d, d);
            cov.view_mut((d - n, d - n), (n, n)).copy_from(w);
            let sampler = GaussianSampler::new(vec![(mean, cov)])?;
            let moments = sampler.moments()?;
            Ok(ProblemSpec::new(n, m, 1, 1, Arc::new(sampler)).with_moments(moments))
        }
        _ => {
            let sampler = FixedSampler::new(vec![mean]);
            let moments = sampler.moments(0)?;
            Ok(ProblemSpec::new(n, m, 1, 1, Arc::new(sampler)).with_moments(moments))
        }
    }
}

#[derive(Clone, Debug)]
pub struct RiccatiSolution {
    /// `V(x) = x^T P x`.
    pub p: DMatrix<f64>,
    /// `u = K x`.
    pub k: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Iterates `P <- Q + A^T P A - A^T P B (R + B^T P B)^{-1} B^T P A` from `P = 0`.
///
/// Stops when `||dP||_F <= 1e-12 max(1, ||P||_F)` or after `cap` iterations.
pub fn riccati_fixed_point(data: &LqrData, cap: usize) -> Result<RiccatiSolution, ProblemError> {
    data.validate()?;
    let (a, b, q, r) = (&data.a, &data.b, &data.q, &data.r);
    let gain = |p: &DMatrix<f64>| -> Result<DMatrix<f64>, ProblemError> {
        let s = r + b.transpose() * p * b;
        let rhs = b.transpose() * p * a;
        let chol = s.cholesky().ok_or(ProblemError::NotPd("R + B^T P B"))?;
        Ok(-chol.solve(&rhs))
    };
    let mut p = DMatrix::zeros(data.n(), data.n());
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cap {
        let k = gain(&p)?;
        // A^T P B (R + B^T P B)^{-1} B^T P A = -(B^T P A)^T K
        let next = q + a.transpose() * &p * a + (b.transpose() * &p * a).transpose() * &k;
        let next = (&next + next.transpose()) * 0.5;
        iterations += 1;
        let delta = (&next - &p).norm();
        p = next;
        if delta <= 1e-12 * p.norm().max(1.0) {
            converged = true;
            break;
        }
    }
    let k = gain(&p)?;
    Ok(RiccatiSolution {
        p,
        k,
        iterations,
        converged,
    })
}

/// Scalar `x' = a x + b u` with independent Gaussian `a`, `b` and cost `x^2 + u^2`.
///
/// `sigma_a` and `sigma_b` are standard deviations. Moments are attached, so
/// the exact backend applies.
pub fn random_lqr_scalar(
    a_mean: f64,
    b_mean: f64,
    sigma_a: f64,
    sigma_b: f64,
    horizon: usize,
) -> Result<ProblemSpec, ProblemError> {
    if !(sigma_a >= 0.0 && sigma_b >= 0.0) {
        return Err(ProblemError::Invalid(
            "standard deviations must be nonnegative".into(),
        ));
    }
    let g = quadratic_form_cost(&DMatrix::identity(1, 1), &DMatrix::identity(1, 1));
    let mean = ModeDraw::new(
        DMatrix::from_element(1, 1, a_mean),
        DMatrix::from_element(1, 1, b_mean),
        DVector::zeros(1),
        g,
    );
    let cov = DMatrix::from_diagonal(&DVector::from_vec(vec![
        sigma_a * sigma_a,
        sigma_b * sigma_b,
        0.0,
    ]));
    let sampler = GaussianSampler::new(vec![(mean, cov)])?;
    let moments = sampler.moments()?;
    Ok(ProblemSpec::new(1, 1, 1, horizon, Arc::new(sampler)).with_moments(moments))
}

/// `k_0 .. k_T` with `V_t(x) = k_t x^2` for [`random_lqr_scalar`], `k_T = 0`.
///
/// Minimizing `x^2 + u^2 + k E[(a x + b u)^2]` over `u` gives
/// `k' = 1 + k E[a^2] - (k a_mean b_mean)^2 / (1 + k E[b^2])`.
pub fn random_lqr_recursion(
    a_mean: f64,
    b_mean: f64,
    sigma_a: f64,
    sigma_b: f64,
    horizon: usize,
) -> Vec<f64> {
    let ea2 = a_mean * a_mean + sigma_a * sigma_a;
    let eb2 = b_mean * b_mean + sigma_b * sigma_b;
    let ab = a_mean * b_mean;
    let mut k = vec![0.0; horizon + 1];
    for t in (0..horizon).rev() {
        let kn = k[t + 1];
        k[t] = 1.0 + kn * ea2 - (kn * ab).powi(2) / (1.0 + kn * eb2);
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dp::{dp_finite, dp_infinite, Backend, McOptions};
    use nalgebra::dmatrix;

    #[test]
    fn zero_dynamics_settle_in_one_step() {
        let data = LqrData::new(
            DMatrix::zeros(2, 2),
            dmatrix![1.0; 0.5],
            dmatrix![2.0, 0.3; 0.3, 1.0],
            dmatrix![1.0],
        );
        let sol = riccati_fixed_point(&data, 100).unwrap();
        assert!(sol.converged);
        assert!((&sol.p - &data.q).norm() < 1e-14);
        assert!(sol.k.norm() < 1e-14);
    }

    #[test]
    fn scalar_golden_ratio() {
        let one = dmatrix![1.0];
        let data = LqrData::new(one.clone(), one.clone(), one.clone(), one);
        let sol = riccati_fixed_point(&data, 1000).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((sol.p[(0, 0)] - phi).abs() < 1e-10);
        // p = 1 + p - p^2 / (1 + p)
        let p = sol.p[(0, 0)];
        assert!((p - (1.0 + p - p * p / (1.0 + p))).abs() < 1e-10);
    }

    #[test]
    fn dp_matches_riccati_scalar() {
        let data = LqrData::new(dmatrix![1.1], dmatrix![1.0], dmatrix![1.0], dmatrix![1.0]);
        let spec = lqr(&data).unwrap();
        let sol = dp_infinite(&spec, &McOptions::default(), 50).unwrap();
        let oracle = riccati_fixed_point(&data, 10_000).unwrap();
        // V = 1/2 x^T P_dp x = x^T P x
        let p_dp = sol.value(0, 0).unwrap().p()[(0, 0)] / 2.0;
        assert!((p_dp - oracle.p[(0, 0)]).abs() <= 1e-6 * oracle.p[(0, 0)]);
        let k_dp = sol.policy(0, 0).unwrap().gain()[(0, 0)];
        assert!((k_dp - oracle.k[(0, 0)]).abs() <= 1e-6 * oracle.k[(0, 0)].abs());
    }

    #[test]
    fn non_pd_r_rejected() {
        let data = LqrData::new(dmatrix![1.0], dmatrix![1.0], dmatrix![1.0], dmatrix![0.0]);
        assert!(matches!(lqr(&data), Err(ProblemError::NotPd("R"))));
    }

    #[test]
    fn variance_free_recursion_is_riccati() {
        let k = random_lqr_recursion(1.1, 1.0, 0.0, 0.0, 200);
        let data = LqrData::new(dmatrix![1.1], dmatrix![1.0], dmatrix![1.0], dmatrix![1.0]);
        let oracle = riccati_fixed_point(&data, 10_000).unwrap();
        assert!((k[0] - oracle.p[(0, 0)]).abs() < 1e-9);
    }

    #[test]
    fn recursion_divergence_boundary() {
        let k = random_lqr_recursion(1.1, 1.0, 1.21, 0.0, 50);
        assert!(k[0] > 1e6);
        let k = random_lqr_recursion(1.1, 1.0, 0.0, 0.0, 50);
        let k2 = random_lqr_recursion(1.1, 1.0, 0.0, 0.0, 51);
        assert!((k[0] - k2[0]).abs() < 1e-9);
    }

    #[test]
    fn exact_backend_matches_recursion() {
        let spec = random_lqr_scalar(1.1, 1.0, 0.5, 0.8, 20).unwrap();
        let sol = dp_finite(&spec, &McOptions::default().with_backend(Backend::Exact)).unwrap();
        let k = random_lqr_recursion(1.1, 1.0, 0.5, 0.8, 20);
        for t in 0..=20 {
            let kt = sol.value(t, 0).unwrap().p()[(0, 0)] / 2.0;
            assert!((kt - k[t]).abs() <= 1e-12 * k[t].max(1.0), "t={t}: {kt} vs {}", k[t]);
        }
    }
}
