use super::{check_pi, require_psd, require_square, shape_err, AffineInRandom, Lognormal, ProblemError, RegimeSampler};
use crate::dp::{ProblemSpec, StageConstraint};
use crate::extquad::ExtendedQuadratic;
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

fn attach(
    n: usize,
    m: usize,
    horizon: usize,
    sampler: RegimeSampler,
) -> Result<ProblemSpec, ProblemError> {
    let k = sampler.modes.len();
    let moments = sampler.moments()?;
    Ok(ProblemSpec::new(n, m, k, horizon, Arc::new(sampler)).with_moments(moments))
}

/// Market regime: total returns `R = exp(y)`, `y ~ N(log_mean, log_cov)`, and
/// quadratic transaction coefficients `b`.
#[derive(Clone, Debug)]
pub struct Regime {
    pub returns: Lognormal,
    pub b: DVector<f64>,
}

#[derive(Clone, Debug)]
pub struct PortfolioData {
    pub regimes: Vec<Regime>,
    pub risk_aversion: f64,
    pub pi: DMatrix<f64>,
}

/// Holdings `h`, trades `u` with `1^T u = 0`, `h' = diag(R) (h + u)`.
///
/// Stage cost `-E[ret] + u^T diag(b) u + gamma Var[ret]`, where
/// `ret = r^T (h + u) - u^T diag(b) u` and `r = R - 1`.
pub fn portfolio(data: &PortfolioData, horizon: usize) -> Result<ProblemSpec, ProblemError> {
    let first = data
        .regimes
        .first()
        .ok_or_else(|| ProblemError::Invalid("no regimes".into()))?;
    let n = first.returns.dim();
    check_pi(&data.pi, data.regimes.len())?;
    if !(data.risk_aversion >= 0.0) {
        return Err(ProblemError::Invalid("risk aversion must be nonnegative".into()));
    }
    let mut modes = Vec::with_capacity(data.regimes.len());
    for regime in &data.regimes {
        if regime.returns.dim() != n || regime.b.len() != n {
            return Err(shape_err("regimes disagree on the number of assets"));
        }
        if regime.b.iter().any(|&b| b < 0.0) {
            return Err(ProblemError::Invalid("transaction coefficients must be nonnegative".into()));
        }
        let mp = regime.returns.moments();
        let mu = mp.mean.add_scalar(-1.0);
        let risk = &mp.covariance * (2.0 * data.risk_aversion);
        let mut g = DMatrix::zeros(2 * n + 1, 2 * n + 1);
        for (r0, c0) in [(0, 0), (0, n), (n, 0), (n, n)] {
            g.view_mut((r0, c0), (n, n)).copy_from(&risk);
        }
        // The trading cost enters once directly and once through -E[ret].
        for i in 0..n {
            g[(n + i, n + i)] += 4.0 * regime.b[i];
            g[(i, 2 * n)] = -mu[i];
            g[(2 * n, i)] = -mu[i];
            g[(n + i, 2 * n)] = -mu[i];
            g[(2 * n, n + i)] = -mu[i];
        }
        let terms = (0..n)
            .map(|i| {
                let mut t = DMatrix::zeros(n, 2 * n + 1);
                t[(i, i)] = 1.0;
                t[(i, n + i)] = 1.0;
                t
            })
            .collect();
        modes.push(AffineInRandom {
            n,
            m: n,
            m0: DMatrix::zeros(n, 2 * n + 1),
            terms,
            dist: Some(regime.returns.clone()),
            g,
        });
    }
    let budget = StageConstraint {
        f: DMatrix::zeros(1, n),
        h: DMatrix::from_element(1, n, 1.0),
        offset: DVector::zeros(1),
    };
    let k = modes.len();
    Ok(attach(n, n, horizon, RegimeSampler { modes })?
        .with_pi(data.pi.clone())
        .with_constraints(vec![budget; k]))
}

/// Liquidation of `n` assets over `horizon` stages.
///
/// State `(q, p)`, input `u` (shares sold). Per-stage cost is
/// `-u^T p + 1/2 u^T diag(gamma_tr) u + 1/2 q^T diag(gamma_ex) q`; prices move
/// as `p' = diag(R) (p - G_imp u)` with `log R ~ N(mu, diag(sigma2))`.
#[derive(Clone, Debug)]
pub struct ExecutionData {
    pub gamma_tr: DVector<f64>,
    pub g_imp: DMatrix<f64>,
    pub gamma_ex: DVector<f64>,
    pub mu: DVector<f64>,
    pub sigma2: DVector<f64>,
    pub horizon: usize,
    /// Require `q_T = 0`.
    pub terminal_liquidation: bool,
}

impl ExecutionData {
    /// Constant prices, no impact or exposure: only the transaction cost remains.
    pub fn frictionless(n: usize, gamma_tr: f64, horizon: usize) -> Self {
        Self {
            gamma_tr: DVector::from_element(n, gamma_tr),
            g_imp: DMatrix::zeros(n, n),
            gamma_ex: DVector::zeros(n),
            mu: DVector::zeros(n),
            sigma2: DVector::zeros(n),
            horizon,
            terminal_liquidation: true,
        }
    }

    pub fn n(&self) -> usize {
        self.gamma_tr.len()
    }

    fn validate(&self) -> Result<(), ProblemError> {
        let n = self.n();
        require_square("G_imp", &self.g_imp, n)?;
        if self.gamma_ex.len() != n || self.mu.len() != n || self.sigma2.len() != n {
            return Err(shape_err("execution parameters disagree on the number of assets"));
        }
        if self.gamma_tr.iter().any(|&g| !(g > 0.0)) {
            return Err(ProblemError::Invalid("gamma_tr must be positive".into()));
        }
        if self.gamma_ex.iter().chain(self.sigma2.iter()).any(|&g| !(g >= 0.0)) {
            return Err(ProblemError::Invalid("gamma_ex and sigma2 must be nonnegative".into()));
        }
        if self.horizon == 0 {
            return Err(ProblemError::Invalid("horizon must be at least 1".into()));
        }
        Ok(())
    }

    fn mode(&self) -> Result<AffineInRandom, ProblemError> {
        let n = self.n();
        let (nx, m) = (2 * n, n);
        let mut m0 = DMatrix::zeros(nx, nx + m + 1);
        m0.view_mut((0, 0), (n, n)).fill_with_identity();
        m0.view_mut((0, nx), (n, n)).copy_from(&-DMatrix::<f64>::identity(n, n));
        let terms = (0..n)
            .map(|i| {
                let mut t = DMatrix::zeros(nx, nx + m + 1);
                t[(n + i, n + i)] = 1.0;
                for j in 0..n {
                    t[(n + i, nx + j)] = -self.g_imp[(i, j)];
                }
                t
            })
            .collect();
        let mut g = DMatrix::zeros(nx + m + 1, nx + m + 1);
        for i in 0..n {
            g[(i, i)] = self.gamma_ex[i];
            g[(nx + i, nx + i)] = self.gamma_tr[i];
            g[(n + i, nx + i)] = -1.0;
            g[(nx + i, n + i)] = -1.0;
        }
        Ok(AffineInRandom {
            n: nx,
            m,
            m0,
            terms,
            dist: Some(Lognormal::diagonal(self.mu.clone(), &self.sigma2)?),
            g,
        })
    }

    fn liquidated(&self) -> Result<ExtendedQuadratic, ProblemError> {
        let n = self.n();
        let mut f = DMatrix::zeros(n, 2 * n);
        f.view_mut((0, 0), (n, n)).fill_with_identity();
        Ok(ExtendedQuadratic::indicator(f, DVector::zeros(n))?)
    }
}

pub fn optimal_execution(data: &ExecutionData) -> Result<ProblemSpec, ProblemError> {
    data.validate()?;
    let n = data.n();
    let spec = attach(2 * n, n, data.horizon, RegimeSampler { modes: vec![data.mode()?] })?;
    if data.terminal_liquidation {
        Ok(spec.with_terminal(vec![data.liquidated()?]))
    } else {
        Ok(spec)
    }
}

/// Adds an absorbing forced-liquidation mode entered with probability `p[t]`
/// at stage `t`; that mode carries the stage constraint `q = 0`.
pub fn execution_random_horizon(data: &ExecutionData, p: &[f64]) -> Result<ProblemSpec, ProblemError> {
    data.validate()?;
    if p.len() != data.horizon {
        return Err(shape_err(format!(
            "{} switching probabilities for horizon {}",
            p.len(),
            data.horizon
        )));
    }
    if p.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(ProblemError::Invalid("probabilities must lie in [0, 1]".into()));
    }
    let n = data.n();
    let mode = data.mode()?;
    let pis = p
        .iter()
        .map(|&pt| DMatrix::from_row_slice(2, 2, &[1.0 - pt, 0.0, pt, 1.0]))
        .collect();
    let mut f = DMatrix::zeros(n, 2 * n);
    f.view_mut((0, 0), (n, n)).fill_with_identity();
    let forced = StageConstraint {
        f,
        h: DMatrix::zeros(n, n),
        offset: DVector::zeros(n),
    };
    let mut spec = attach(2 * n, n, data.horizon, RegimeSampler { modes: vec![mode.clone(), mode] })?
        .with_pi_per_stage(pis)
        .with_constraints(vec![StageConstraint::none(2 * n, n), forced]);
    if data.terminal_liquidation {
        let term = data.liquidated()?;
        spec = spec.with_terminal(vec![term.clone(), term]);
    }
    Ok(spec)
}

/// `U(C) = -1/2 a C^2 + b C`; concave when `a > 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Utility {
    pub a: f64,
    pub b: f64,
}

impl Utility {
    pub fn new(a: f64, b: f64) -> Result<Self, ProblemError> {
        if !(a > 0.0) {
            return Err(ProblemError::NonConcaveUtility(a));
        }
        Ok(Self { a, b })
    }

    pub fn eval(&self, c: f64) -> f64 {
        -0.5 * self.a * c * c + self.b * c
    }
}

/// Wealth `W`, allocations `u` over `m` assets, consumption `C = W - 1^T u`.
///
/// Mode 0 is alive, mode 1 deceased (absorbing). At the horizon a living
/// investor consumes what is left; otherwise it is bequeathed.
#[derive(Clone, Debug)]
pub struct RetirementData {
    pub death_probs: Vec<f64>,
    pub returns: Lognormal,
    pub consumption: Utility,
    pub bequest: Utility,
    pub risk_aversion: f64,
}

pub fn retirement(data: &RetirementData) -> Result<ProblemSpec, ProblemError> {
    let horizon = data.death_probs.len();
    if horizon == 0 {
        return Err(ProblemError::Invalid("at least one year of death probabilities is required".into()));
    }
    if data.death_probs.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(ProblemError::Invalid("death probabilities must lie in [0, 1]".into()));
    }
    for u in [data.consumption, data.bequest] {
        Utility::new(u.a, u.b)?;
    }
    if !(data.risk_aversion >= 0.0) {
        return Err(ProblemError::Invalid("risk aversion must be nonnegative".into()));
    }
    let m = data.returns.dim();
    let d = m + 2;
    // e^T (W, u) = C
    let e = DVector::from_fn(m + 1, |i, _| if i == 0 { 1.0 } else { -1.0 });
    let utility_cost = |u: &Utility| {
        let mut g = DMatrix::zeros(d, d);
        g.view_mut((0, 0), (m + 1, m + 1)).copy_from(&(&e * e.transpose() * u.a));
        for i in 0..=m {
            g[(i, m + 1)] = -u.b * e[i];
            g[(m + 1, i)] = -u.b * e[i];
        }
        g
    };
    let mut alive = utility_cost(&data.consumption);
    let cov = data.returns.moments().covariance;
    require_psd("return covariance", &cov)?;
    alive
        .view_mut((1, 1), (m, m))
        .iter_mut()
        .zip(cov.iter())
        .for_each(|(g, c)| *g += 2.0 * data.risk_aversion * c);
    let terms = (0..m)
        .map(|i| {
            let mut t = DMatrix::zeros(1, d);
            t[(0, 1 + i)] = 1.0;
            t
        })
        .collect();
    let alive = AffineInRandom {
        n: 1,
        m,
        m0: DMatrix::zeros(1, d),
        terms,
        dist: Some(data.returns.clone()),
        g: alive,
    };
    let deceased = AffineInRandom::fixed(1, m, DMatrix::zeros(1, d), utility_cost(&data.bequest));
    let pis = data
        .death_probs
        .iter()
        .map(|&pt| DMatrix::from_row_slice(2, 2, &[1.0 - pt, 0.0, pt, 1.0]))
        .collect();
    let negated = |u: &Utility| {
        ExtendedQuadratic::quadratic(
            DMatrix::from_element(1, 1, u.a),
            DVector::from_element(1, -u.b),
            0.0,
        )
    };
    Ok(attach(1, m, horizon, RegimeSampler { modes: vec![alive, deceased] })?
        .with_pi_per_stage(pis)
        .with_constraints(vec![
            StageConstraint::none(1, m),
            StageConstraint::zero_inputs(1, m, &(0..m).collect::<Vec<_>>()),
        ])
        .with_terminal(vec![negated(&data.consumption)?, negated(&data.bequest)?]))
}
