//! Builders for canonical problems, plus independent oracles used in tests.
//!
//! Quadratic costs follow the usual textbook scaling (`x^T Q x + u^T R u`)
//! and are converted to the `1/2 z^T G z` convention on the way in, so `G`
//! carries a factor of two.

mod config;
mod finance;
mod lqr;
mod switching;

pub use config::{ProblemConfig, RunConfig, SimulateDefaults, SolverConfig, PROBLEM_SCHEMAS};
pub use finance::{
    execution_random_horizon, optimal_execution, portfolio, retirement, ExecutionData,
    PortfolioData, Regime, RetirementData, Utility,
};
pub use lqr::{
    lqr, random_lqr_recursion, random_lqr_scalar, riccati_fixed_point, LqrData, RiccatiSolution,
};
pub use switching::{double_integrator, fault_tolerant, jump_lqr, multi_mission, JumpMode};

use crate::dp::{ModeDraw, Sampler};
use crate::linalg::{is_pd, is_psd, symmetrize};
use crate::moments::{lognormal_moments, ModeMoments, MomentPair, MomentsError};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("{0} must be positive definite")]
    NotPd(&'static str),
    #[error("{0} must be positive semidefinite")]
    NotPsd(&'static str),
    #[error("utility must be concave (positive curvature coefficient), got {0}")]
    NonConcaveUtility(f64),
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error(transparent)]
    Moments(#[from] MomentsError),
    #[error(transparent)]
    ExtQuad(#[from] crate::extquad::ExtQuadError),
}

pub(crate) fn shape_err(msg: impl Into<String>) -> ProblemError {
    ProblemError::Shape(msg.into())
}

pub(crate) fn require_square(name: &str, m: &DMatrix<f64>, n: usize) -> Result<(), ProblemError> {
    if m.shape() != (n, n) {
        return Err(shape_err(format!("{name} is {:?}, expected {n}x{n}", m.shape())));
    }
    Ok(())
}

pub(crate) fn require_psd(name: &'static str, m: &DMatrix<f64>) -> Result<(), ProblemError> {
    if !is_psd(m) {
        return Err(ProblemError::NotPsd(name));
    }
    Ok(())
}

pub(crate) fn require_pd(name: &'static str, m: &DMatrix<f64>) -> Result<(), ProblemError> {
    if !is_pd(m) {
        return Err(ProblemError::NotPd(name));
    }
    Ok(())
}

/// `G = 2 * blockdiag(Q, R, 0)` over `(x, u, 1)`.
pub(crate) fn quadratic_form_cost(q: &DMatrix<f64>, r: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, m) = (q.nrows(), r.nrows());
    let mut g = DMatrix::zeros(n + m + 1, n + m + 1);
    g.view_mut((0, 0), (n, n)).copy_from(&(symmetrize(q) * 2.0));
    g.view_mut((n, n), (m, m)).copy_from(&(symmetrize(r) * 2.0));
    g
}

/// `exp(y)` with `y ~ N(mu, sigma)`.
#[derive(Clone, Debug)]
pub struct Lognormal {
    mu: DVector<f64>,
    sigma: DMatrix<f64>,
    factor: DMatrix<f64>,
}

impl Lognormal {
    pub fn new(mu: DVector<f64>, sigma: DMatrix<f64>) -> Result<Self, ProblemError> {
        require_square("lognormal covariance", &sigma, mu.len())?;
        require_psd("lognormal covariance", &sigma)?;
        let sigma = symmetrize(&sigma);
        let factor = if sigma.nrows() == 0 {
            sigma.clone()
        } else {
            let eig = SymmetricEigen::new(sigma.clone());
            let d = eig.eigenvalues.map(|x| x.max(0.0).sqrt());
            &eig.eigenvectors * DMatrix::from_diagonal(&d)
        };
        Ok(Self { mu, sigma, factor })
    }

    /// Independent components with log-variances `var`.
    pub fn diagonal(mu: DVector<f64>, var: &DVector<f64>) -> Result<Self, ProblemError> {
        Self::new(mu, DMatrix::from_diagonal(var))
    }

    /// Inverts the lognormal moment map: `R` with mean `mean` and covariance `cov`.
    ///
    /// Fails when some `1 + cov_ij / (mean_i mean_j)` is not positive or the
    /// implied log-covariance is indefinite.
    pub fn from_moments(mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<Self, ProblemError> {
        let n = mean.len();
        require_square("return covariance", cov, n)?;
        if mean.iter().any(|&m| !(m > 0.0)) {
            return Err(ProblemError::Invalid("lognormal means must be positive".into()));
        }
        let mut sigma = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let ratio = 1.0 + cov[(i, j)] / (mean[i] * mean[j]);
                if !(ratio > 0.0) {
                    return Err(ProblemError::Invalid(format!(
                        "covariance entry ({i}, {j}) has no lognormal preimage"
                    )));
                }
                sigma[(i, j)] = ratio.ln();
            }
        }
        let mu = DVector::from_fn(n, |i, _| mean[i].ln() - 0.5 * sigma[(i, i)]);
        Self::new(mu, sigma)
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn is_degenerate(&self) -> bool {
        self.sigma.iter().all(|&x| x == 0.0)
    }

    pub fn moments(&self) -> MomentPair {
        lognormal_moments(&self.mu, &self.sigma).expect("covariance checked at construction")
    }

    pub fn draw(&self, rng: &mut ChaCha8Rng) -> DVector<f64> {
        let z = DVector::from_fn(self.factor.ncols(), |_, _| rng.sample::<f64, _>(StandardNormal));
        (&self.mu + &self.factor * z).map(f64::exp)
    }
}

/// Mode data whose `[A B c]` block is `M0 + sum_i R_i M_i` for a lognormal `R`.
#[derive(Clone, Debug)]
pub(crate) struct AffineInRandom {
    pub n: usize,
    pub m: usize,
    pub m0: DMatrix<f64>,
    pub terms: Vec<DMatrix<f64>>,
    pub dist: Option<Lognormal>,
    pub g: DMatrix<f64>,
}

impl AffineInRandom {
    pub fn fixed(n: usize, m: usize, m0: DMatrix<f64>, g: DMatrix<f64>) -> Self {
        Self {
            n,
            m,
            m0,
            terms: Vec::new(),
            dist: None,
            g,
        }
    }

    fn split(&self, top: &DMatrix<f64>) -> ModeDraw {
        let (n, m) = (self.n, self.m);
        ModeDraw::new(
            top.columns(0, n).into_owned(),
            top.columns(n, m).into_owned(),
            top.column(n + m).into_owned(),
            self.g.clone(),
        )
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> ModeDraw {
        let mut top = self.m0.clone();
        if let Some(dist) = &self.dist {
            let r = dist.draw(rng);
            for (ri, mi) in r.iter().zip(&self.terms) {
                top += mi * *ri;
            }
        }
        self.split(&top)
    }

    fn is_deterministic(&self) -> bool {
        self.dist.as_ref().is_none_or(Lognormal::is_degenerate)
    }

    fn moments(&self) -> Result<ModeMoments, MomentsError> {
        let Some(dist) = &self.dist else {
            return ModeMoments::from_mean_cov(
                &self.m0,
                &DMatrix::zeros(self.m0.len(), self.m0.len()),
                &self.g,
            );
        };
        let mp = dist.moments();
        let mut mean = self.m0.clone();
        for (mu, mi) in mp.mean.iter().zip(&self.terms) {
            mean += mi * *mu;
        }
        let d = self.m0.len();
        let vecs: Vec<DVector<f64>> = self
            .terms
            .iter()
            .map(|mi| DVector::from_column_slice(mi.as_slice()))
            .collect();
        let mut cov = DMatrix::zeros(d, d);
        for (i, vi) in vecs.iter().enumerate() {
            for (j, vj) in vecs.iter().enumerate() {
                let c = mp.covariance[(i, j)];
                if c != 0.0 {
                    cov += vi * vj.transpose() * c;
                }
            }
        }
        ModeMoments::from_mean_cov(&mean, &symmetrize(&cov), &self.g)
    }
}

/// Per-mode [`AffineInRandom`] data as a sampler.
#[derive(Clone, Debug)]
pub(crate) struct RegimeSampler {
    pub modes: Vec<AffineInRandom>,
}

impl RegimeSampler {
    pub fn moments(&self) -> Result<Vec<ModeMoments>, MomentsError> {
        self.modes.iter().map(AffineInRandom::moments).collect()
    }
}

impl Sampler for RegimeSampler {
    fn draw(&self, _t: usize, mode: usize, rng: &mut ChaCha8Rng) -> ModeDraw {
        self.modes[mode].draw(rng)
    }

    fn is_deterministic(&self) -> bool {
        self.modes.iter().all(AffineInRandom::is_deterministic)
    }
}

/// Checks `pi` is a `k x k` column-stochastic matrix.
pub(crate) fn check_pi(pi: &DMatrix<f64>, k: usize) -> Result<(), ProblemError> {
    require_square("Pi", pi, k)?;
    for j in 0..k {
        let col = pi.column(j);
        let sum: f64 = col.iter().sum();
        if col.iter().any(|&p| !(0.0..=1.0).contains(&p)) || (sum - 1.0).abs() > 1e-9 {
            return Err(ProblemError::Invalid(format!(
                "Pi column {j} is not a probability vector"
            )));
        }
    }
    Ok(())
}
