//! Dynamic programming over extended quadratic value functions.
//!
//! The state is `(x_t, s_t)` with `x_t` continuous and `s_t` a Markov mode.
//! Dynamics are random affine maps `x_{t+1} = A x + B u + c` drawn per mode
//! and stage costs are extended quadratics in `(x, u)` whose quadratic part
//! `G` may also be random. The Bellman operator is evaluated either by
//! Monte Carlo averaging or exactly from moments, then partially minimized.

mod audit;
mod bellman;
mod sampling;
mod simulate;
mod solve;

pub use audit::{mc_error, CoefficientSpread, McErrorReport};
pub use bellman::{bellman_apply, stage_cost, BellmanOutput};
pub use sampling::{
    sample_rng, FixedSampler, FnSampler, GaussianSampler, ModeDraw, Sampler, StageSample,
};
pub use simulate::{simulate, Trajectory};
pub use solve::{dp_finite, dp_infinite, Solution, SolutionMeta};

use crate::extquad::{ExtendedQuadratic, MinStatus};
use crate::moments::ModeMoments;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

/// Any `|coefficient|` above this marks a value function as diverging.
pub const DIVERGENCE_BOUND: f64 = 1e12;

const STOCHASTIC_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum DpError {
    #[error("invalid problem: {0}")]
    InvalidSpec(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("exact expectation at t={t}, mode {mode}: value function has equality constraints")]
    ConstraintsPresent { t: usize, mode: usize },
    #[error("exact backend selected but the problem has no moments")]
    MissingMoments,
    #[error("no policy available at t={t}, mode {mode}")]
    MissingPolicy { t: usize, mode: usize },
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

/// Per-(t, s) outcome of a Bellman step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Nonconvex,
    Unbounded,
    Improper,
    Diverging,
    /// A reachable successor mode already failed, so nothing was computed.
    Blocked,
}

impl Status {
    pub fn is_ok(self) -> bool {
        self == Status::Ok
    }

    pub fn name(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Nonconvex => "nonconvex",
            Status::Unbounded => "unbounded",
            Status::Improper => "improper",
            Status::Diverging => "diverging",
            Status::Blocked => "blocked",
        }
    }
}

impl From<MinStatus> for Status {
    fn from(s: MinStatus) -> Self {
        match s {
            MinStatus::Ok => Status::Ok,
            MinStatus::NonconvexInU => Status::Nonconvex,
            MinStatus::UnboundedBelow => Status::Unbounded,
            MinStatus::Improper => Status::Improper,
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A value that is either fixed over time or given per stage.
#[derive(Clone, Debug)]
pub enum TimeVarying<T> {
    Constant(T),
    PerStage(Vec<T>),
}

impl<T> TimeVarying<T> {
    /// Entry for stage `t`; past the end of a per-stage list the last entry is reused.
    pub fn at(&self, t: usize) -> &T {
        match self {
            TimeVarying::Constant(x) => x,
            TimeVarying::PerStage(v) => &v[t.min(v.len() - 1)],
        }
    }

    fn stages(&self) -> Option<usize> {
        match self {
            TimeVarying::Constant(_) => None,
            TimeVarying::PerStage(v) => Some(v.len()),
        }
    }

    fn all(&self) -> Box<dyn Iterator<Item = &T> + '_> {
        match self {
            TimeVarying::Constant(x) => Box::new(std::iter::once(x)),
            TimeVarying::PerStage(v) => Box::new(v.iter()),
        }
    }
}

/// Deterministic stage constraint `F x + H u + h = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct StageConstraint {
    pub f: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub offset: DVector<f64>,
}

impl StageConstraint {
    pub fn none(n: usize, m: usize) -> Self {
        Self {
            f: DMatrix::zeros(0, n),
            h: DMatrix::zeros(0, m),
            offset: DVector::zeros(0),
        }
    }

    /// Pins the listed inputs to zero.
    pub fn zero_inputs(n: usize, m: usize, inputs: &[usize]) -> Self {
        let p = inputs.len();
        let mut h = DMatrix::zeros(p, m);
        for (row, &j) in inputs.iter().enumerate() {
            h[(row, j)] = 1.0;
        }
        Self {
            f: DMatrix::zeros(p, n),
            h,
            offset: DVector::zeros(p),
        }
    }

    pub fn rows(&self) -> usize {
        self.offset.len()
    }

    /// Rows stacked with `other`.
    pub fn stack(&self, other: &Self) -> Self {
        use crate::linalg::{vstack, vstack_vec};
        Self {
            f: vstack(&self.f, &other.f),
            h: vstack(&self.h, &other.h),
            offset: vstack_vec(&self.offset, &other.offset),
        }
    }

    /// `[F H]`, the constraint matrix over `(x, u)`.
    pub fn joint_matrix(&self) -> DMatrix<f64> {
        let (p, n) = self.f.shape();
        let m = self.h.ncols();
        let mut out = DMatrix::zeros(p, n + m);
        out.columns_mut(0, n).copy_from(&self.f);
        out.columns_mut(n, m).copy_from(&self.h);
        out
    }

    fn check(&self, n: usize, m: usize) -> Result<(), String> {
        let p = self.offset.len();
        if self.f.shape() != (p, n) || self.h.shape() != (p, m) {
            return Err(format!(
                "stage constraint F {:?}, H {:?}, h {} do not match n={n}, m={m}",
                self.f.shape(),
                self.h.shape(),
                p
            ));
        }
        Ok(())
    }
}

/// How the expectation in the Bellman operator is computed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    #[default]
    #[serde(alias = "monte-carlo", alias = "montecarlo")]
    Mc,
    #[serde(alias = "exact-moments")]
    Exact,
}

/// Solver knobs shared by the finite and infinite horizon drivers.
#[derive(Clone, Debug)]
pub struct McOptions {
    /// Samples per Bellman step and mode. Ignored for deterministic samplers.
    pub samples: usize,
    pub seed: u64,
    /// Worker threads; `None` means available parallelism.
    pub workers: Option<usize>,
    /// Samples per reduction chunk. Part of the reproducibility key.
    pub chunk_size: usize,
    pub backend: Backend,
}

impl Default for McOptions {
    fn default() -> Self {
        Self {
            samples: 1,
            seed: 0,
            workers: None,
            chunk_size: 64,
            backend: Backend::Mc,
        }
    }
}

impl McOptions {
    pub fn new(samples: usize, seed: u64) -> Self {
        Self {
            samples,
            seed,
            ..Self::default()
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = Some(workers);
        self
    }

    pub fn with_backend(mut self, backend: Backend) -> Self {
        self.backend = backend;
        self
    }

    pub(crate) fn pool(&self) -> Result<rayon::ThreadPool, DpError> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(w) = self.workers {
            b = b.num_threads(w.max(1));
        }
        b.build().map_err(|e| DpError::ThreadPool(e.to_string()))
    }
}

/// Everything that defines a stochastic control problem.
///
/// `pi[t][(i, j)]` is the probability of moving from mode `j` at `t` to mode
/// `i` at `t + 1`, so columns sum to one.
#[derive(Clone)]
pub struct ProblemSpec {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub horizon: usize,
    pub pi: TimeVarying<DMatrix<f64>>,
    pub constraints: TimeVarying<Vec<StageConstraint>>,
    pub terminal: Vec<ExtendedQuadratic>,
    pub gamma: f64,
    pub sampler: Arc<dyn Sampler>,
    pub moments: Option<TimeVarying<Vec<ModeMoments>>>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("n", &self.n)
            .field("m", &self.m)
            .field("k", &self.k)
            .field("horizon", &self.horizon)
            .field("gamma", &self.gamma)
            .field("has_moments", &self.moments.is_some())
            .finish_non_exhaustive()
    }
}

impl ProblemSpec {
    /// A spec with identity mode switching, no constraints, zero terminal cost and `gamma = 1`.
    pub fn new(n: usize, m: usize, k: usize, horizon: usize, sampler: Arc<dyn Sampler>) -> Self {
        Self {
            n,
            m,
            k,
            horizon,
            pi: TimeVarying::Constant(DMatrix::identity(k, k)),
            constraints: TimeVarying::Constant(vec![StageConstraint::none(n, m); k]),
            terminal: vec![ExtendedQuadratic::zero(n); k],
            gamma: 1.0,
            sampler,
            moments: None,
        }
    }

    pub fn with_pi(mut self, pi: DMatrix<f64>) -> Self {
        self.pi = TimeVarying::Constant(pi);
        self
    }

    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_pi_per_stage(mut self, pi: Vec<DMatrix<f64>>) -> Self {
        self.pi = TimeVarying::PerStage(pi);
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_terminal(mut self, terminal: Vec<ExtendedQuadratic>) -> Self {
        self.terminal = terminal;
        self
    }

    pub fn with_constraints(mut self, c: Vec<StageConstraint>) -> Self {
        self.constraints = TimeVarying::Constant(c);
        self
    }

    pub fn with_moments(mut self, moments: Vec<ModeMoments>) -> Self {
        self.moments = Some(TimeVarying::Constant(moments));
        self
    }

    pub fn constraint(&self, t: usize, s: usize) -> &StageConstraint {
        &self.constraints.at(t)[s]
    }

    /// Checks stochasticity, shapes and the discount factor.
    pub fn validate(&self) -> Result<(), DpError> {
        let bad = |m: String| Err(DpError::InvalidSpec(m));
        if self.k == 0 {
            return bad("at least one mode is required".into());
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad(format!("gamma must lie in (0, 1], got {}", self.gamma));
        }
        for (t, pi) in self.pi.all().enumerate() {
            if pi.shape() != (self.k, self.k) {
                return bad(format!("Pi[{t}] is {:?}, expected {}x{}", pi.shape(), self.k, self.k));
            }
            for j in 0..self.k {
                let col = pi.column(j);
                if col.iter().any(|&p| !(-STOCHASTIC_TOL..=1.0 + STOCHASTIC_TOL).contains(&p)) {
                    return bad(format!("Pi[{t}] column {j} has entries outside [0, 1]"));
                }
                let sum: f64 = col.iter().sum();
                if (sum - 1.0).abs() > STOCHASTIC_TOL {
                    return bad(format!("Pi[{t}] column {j} sums to {sum}"));
                }
            }
        }
        for list in self.constraints.all() {
            if list.len() != self.k {
                return bad(format!("{} stage constraints for {} modes", list.len(), self.k));
            }
            for c in list {
                c.check(self.n, self.m).map_err(DpError::InvalidSpec)?;
            }
        }
        if self.terminal.len() != self.k {
            return bad(format!("{} terminal costs for {} modes", self.terminal.len(), self.k));
        }
        if let Some(e) = self.terminal.iter().find(|e| e.dim() != self.n) {
            return bad(format!("terminal cost has dimension {}, expected {}", e.dim(), self.n));
        }
        if let Some(moments) = &self.moments {
            for list in moments.all() {
                if list.len() != self.k {
                    return bad(format!("{} moment sets for {} modes", list.len(), self.k));
                }
                for mm in list {
                    if mm.state_dim() != self.n || mm.joint_dim() != self.n + self.m {
                        return bad("moment dimensions do not match n and m".into());
                    }
                }
            }
        }
        Ok(())
    }

    /// Additionally checks per-stage lists against the horizon.
    pub fn validate_finite(&self) -> Result<(), DpError> {
        self.validate()?;
        if self.horizon == 0 {
            return Err(DpError::InvalidSpec("horizon must be at least 1".into()));
        }
        let lens = [
            self.pi.stages(),
            self.constraints.stages(),
            self.moments.as_ref().and_then(|m| m.stages()),
        ];
        for len in lens.into_iter().flatten() {
            if len < self.horizon {
                return Err(DpError::InvalidSpec(format!(
                    "per-stage data has {len} entries for horizon {}",
                    self.horizon
                )));
            }
        }
        Ok(())
    }
}

/// True when every coefficient is finite and within the divergence bound.
pub fn within_bound(v: &ExtendedQuadratic) -> bool {
    v.is_finite() && v.max_abs_coefficient() <= DIVERGENCE_BOUND
}
