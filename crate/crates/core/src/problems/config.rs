//! JSON run configurations: a problem, solver settings and simulation defaults.

use super::{
    double_integrator, execution_random_horizon, fault_tolerant, jump_lqr, lqr, multi_mission,
    optimal_execution, portfolio, random_lqr_scalar, retirement, ExecutionData, JumpMode,
    Lognormal, LqrData, PortfolioData, ProblemError, Regime, RetirementData, Utility,
};
use crate::dp::{dp_finite, dp_infinite, Backend, DpError, McOptions, ProblemSpec, Solution};
use crate::json::{list_to_vec, rows_to_mat_infer};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

type Rows = Vec<Vec<f64>>;

fn mat(name: &str, rows: &Rows) -> Result<DMatrix<f64>, ProblemError> {
    rows_to_mat_infer(rows).map_err(|e| ProblemError::Shape(format!("{name}: {e}")))
}

fn vecf(v: &[f64]) -> DVector<f64> {
    list_to_vec(v)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeConfig {
    pub a: Rows,
    pub b: Rows,
    #[serde(default)]
    pub c: Option<Vec<f64>>,
}

/// Asset returns, either as log-space parameters or as moments of the total return.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ReturnsConfig {
    Log { log_mean: Vec<f64>, log_cov: Rows },
    Moments { mean: Vec<f64>, cov: Rows },
}

impl ReturnsConfig {
    fn build(&self) -> Result<Lognormal, ProblemError> {
        match self {
            ReturnsConfig::Log { log_mean, log_cov } => {
                Lognormal::new(vecf(log_mean), mat("log_cov", log_cov)?)
            }
            ReturnsConfig::Moments { mean, cov } => {
                Lognormal::from_moments(&vecf(mean), &mat("cov", cov)?)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeConfig {
    pub returns: ReturnsConfig,
    pub b: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtilityConfig {
    pub a: f64,
    pub b: f64,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExecutionConfig {
    pub gamma_tr: Vec<f64>,
    #[serde(default)]
    pub g_imp: Option<Rows>,
    #[serde(default)]
    pub gamma_ex: Option<Vec<f64>>,
    #[serde(default)]
    pub mu: Option<Vec<f64>>,
    #[serde(default)]
    pub sigma2: Option<Vec<f64>>,
    #[serde(default = "yes")]
    pub terminal_liquidation: bool,
}

impl ExecutionConfig {
    fn build(&self, horizon: usize) -> Result<ExecutionData, ProblemError> {
        let n = self.gamma_tr.len();
        let or_zero = |v: &Option<Vec<f64>>| v.as_deref().map_or(DVector::zeros(n), vecf);
        Ok(ExecutionData {
            gamma_tr: vecf(&self.gamma_tr),
            g_imp: match &self.g_imp {
                Some(g) => mat("g_imp", g)?,
                None => DMatrix::zeros(n, n),
            },
            gamma_ex: or_zero(&self.gamma_ex),
            mu: or_zero(&self.mu),
            sigma2: or_zero(&self.sigma2),
            horizon,
            terminal_liquidation: self.terminal_liquidation,
        })
    }
}

/// A problem builder and its parameters, tagged by `kind`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    Lqr {
        a: Rows,
        b: Rows,
        q: Rows,
        r: Rows,
        #[serde(default)]
        w: Option<Rows>,
    },
    RandomLqr {
        a_mean: f64,
        b_mean: f64,
        sigma_a: f64,
        sigma_b: f64,
    },
    JumpLqr {
        modes: Vec<ModeConfig>,
        pi: Rows,
        q: Rows,
        r: Rows,
    },
    MultiMission {
        /// Defaults to the planar double integrator.
        #[serde(default)]
        a: Option<Rows>,
        #[serde(default)]
        b: Option<Rows>,
        targets: Vec<Vec<f64>>,
        lambda: f64,
        pi: Rows,
    },
    FaultTolerant {
        a: Rows,
        b: Rows,
        /// Failed actuators per mode, 1-based.
        configurations: Vec<Vec<usize>>,
        pi: Rows,
        q: Rows,
        r: Rows,
    },
    Portfolio {
        regimes: Vec<RegimeConfig>,
        risk_aversion: f64,
        pi: Rows,
    },
    OptimalExecution(ExecutionConfig),
    ExecutionRandomHorizon {
        #[serde(flatten)]
        data: ExecutionConfig,
        p: Vec<f64>,
    },
    Retirement {
        death_probs: Vec<f64>,
        returns: ReturnsConfig,
        consumption: UtilityConfig,
        bequest: UtilityConfig,
        risk_aversion: f64,
    },
}

impl ProblemConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            ProblemConfig::Lqr { .. } => "lqr",
            ProblemConfig::RandomLqr { .. } => "random_lqr",
            ProblemConfig::JumpLqr { .. } => "jump_lqr",
            ProblemConfig::MultiMission { .. } => "multi_mission",
            ProblemConfig::FaultTolerant { .. } => "fault_tolerant",
            ProblemConfig::Portfolio { .. } => "portfolio",
            ProblemConfig::OptimalExecution(_) => "optimal_execution",
            ProblemConfig::ExecutionRandomHorizon { .. } => "execution_random_horizon",
            ProblemConfig::Retirement { .. } => "retirement",
        }
    }

    /// Horizon implied by the problem data itself, if any.
    fn intrinsic_horizon(&self) -> Option<usize> {
        match self {
            ProblemConfig::ExecutionRandomHorizon { p, .. } => Some(p.len()),
            ProblemConfig::Retirement { death_probs, .. } => Some(death_probs.len()),
            _ => None,
        }
    }

    /// Builds the spec. `horizon` is used by builders that need one.
    pub fn build(&self, horizon: usize) -> Result<ProblemSpec, ProblemError> {
        let spec = match self {
            ProblemConfig::Lqr { a, b, q, r, w } => {
                let mut data = LqrData::new(mat("a", a)?, mat("b", b)?, mat("q", q)?, mat("r", r)?);
                if let Some(w) = w {
                    data = data.with_noise(mat("w", w)?);
                }
                lqr(&data)?
            }
            ProblemConfig::RandomLqr {
                a_mean,
                b_mean,
                sigma_a,
                sigma_b,
            } => random_lqr_scalar(*a_mean, *b_mean, *sigma_a, *sigma_b, horizon)?,
            ProblemConfig::JumpLqr { modes, pi, q, r } => {
                let modes = modes
                    .iter()
                    .map(|m| {
                        let a = mat("a", &m.a)?;
                        let c = m.c.as_deref().map_or(DVector::zeros(a.nrows()), vecf);
                        Ok(JumpMode::new(a, mat("b", &m.b)?, c))
                    })
                    .collect::<Result<Vec<_>, ProblemError>>()?;
                jump_lqr(&modes, mat("pi", pi)?, &mat("q", q)?, &mat("r", r)?)?
            }
            ProblemConfig::MultiMission {
                a,
                b,
                targets,
                lambda,
                pi,
            } => {
                let (a0, b0) = double_integrator();
                let a = a.as_ref().map_or(Ok(a0), |a| mat("a", a))?;
                let b = b.as_ref().map_or(Ok(b0), |b| mat("b", b))?;
                let targets: Vec<_> = targets.iter().map(|d| vecf(d)).collect();
                multi_mission(&a, &b, &targets, *lambda, mat("pi", pi)?)?
            }
            ProblemConfig::FaultTolerant {
                a,
                b,
                configurations,
                pi,
                q,
                r,
            } => {
                let mut zero_based = Vec::with_capacity(configurations.len());
                for c in configurations {
                    if c.contains(&0) {
                        return Err(ProblemError::Invalid("actuator indices are 1-based".into()));
                    }
                    zero_based.push(c.iter().map(|j| j - 1).collect());
                }
                fault_tolerant(
                    &mat("a", a)?,
                    &mat("b", b)?,
                    &zero_based,
                    mat("pi", pi)?,
                    &mat("q", q)?,
                    &mat("r", r)?,
                )?
            }
            ProblemConfig::Portfolio {
                regimes,
                risk_aversion,
                pi,
            } => {
                let regimes = regimes
                    .iter()
                    .map(|r| {
                        Ok(Regime {
                            returns: r.returns.build()?,
                            b: vecf(&r.b),
                        })
                    })
                    .collect::<Result<Vec<_>, ProblemError>>()?;
                let data = PortfolioData {
                    regimes,
                    risk_aversion: *risk_aversion,
                    pi: mat("pi", pi)?,
                };
                portfolio(&data, horizon)?
            }
            ProblemConfig::OptimalExecution(c) => optimal_execution(&c.build(horizon)?)?,
            ProblemConfig::ExecutionRandomHorizon { data, p } => {
                execution_random_horizon(&data.build(p.len())?, p)?
            }
            ProblemConfig::Retirement {
                death_probs,
                returns,
                consumption,
                bequest,
                risk_aversion,
            } => retirement(&RetirementData {
                death_probs: death_probs.clone(),
                returns: returns.build()?,
                consumption: Utility::new(consumption.a, consumption.b)?,
                bequest: Utility::new(bequest.a, bequest.b)?,
                risk_aversion: *risk_aversion,
            })?,
        };
        Ok(spec.with_horizon(self.intrinsic_horizon().unwrap_or(horizon)))
    }
}

fn one() -> usize {
    1
}

fn unit() -> f64 {
    1.0
}

fn default_chunk() -> usize {
    64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// Finite horizon `T`. Exactly one of `horizon` and `iterations` is set.
    #[serde(default)]
    pub horizon: Option<usize>,
    /// Bellman applications for the infinite-horizon solve.
    #[serde(default)]
    pub iterations: Option<usize>,
    #[serde(default = "one")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub backend: Backend,
    #[serde(default = "unit")]
    pub gamma: f64,
    #[serde(default = "default_chunk")]
    pub chunk_size: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            horizon: None,
            iterations: None,
            samples: 1,
            seed: 0,
            workers: None,
            backend: Backend::Mc,
            gamma: 1.0,
            chunk_size: 64,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateDefaults {
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub s0: Option<usize>,
    #[serde(default)]
    pub steps: Option<usize>,
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub simulate: Option<SimulateDefaults>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Checks solver settings that serde cannot express.
    pub fn validate(&self) -> Result<(), ProblemError> {
        let s = &self.solver;
        let bad = |m: &str| Err(ProblemError::Invalid(m.into()));
        match (s.horizon, s.iterations, self.problem.intrinsic_horizon()) {
            (Some(_), Some(_), _) => return bad("set only one of solver.horizon and solver.iterations"),
            (_, Some(_), Some(_)) => {
                return bad("this problem has a data-defined horizon; use solver.horizon or omit it")
            }
            (None, None, None) => return bad("set solver.horizon or solver.iterations"),
            (Some(h), None, Some(ih)) if h != ih => {
                return Err(ProblemError::Invalid(format!(
                    "solver.horizon is {h} but the problem data define {ih} stages"
                )))
            }
            (Some(0), _, _) | (_, Some(0), _) => return bad("horizon and iterations must be positive"),
            _ => {}
        }
        if s.samples == 0 {
            return bad("solver.samples must be at least 1");
        }
        if s.chunk_size == 0 {
            return bad("solver.chunk_size must be at least 1");
        }
        if !(s.gamma > 0.0 && s.gamma <= 1.0) {
            return bad("solver.gamma must lie in (0, 1]");
        }
        if s.iterations.is_none() && s.gamma != 1.0 {
            return bad("discounting applies to the infinite-horizon solve only");
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.solver.iterations.is_none()
    }

    pub fn build_spec(&self) -> Result<ProblemSpec, ProblemError> {
        self.validate()?;
        let horizon = self.solver.horizon.unwrap_or(1);
        Ok(self.problem.build(horizon)?.with_gamma(self.solver.gamma))
    }

    pub fn options(&self) -> McOptions {
        let s = &self.solver;
        McOptions {
            samples: s.samples,
            seed: s.seed,
            workers: s.workers,
            chunk_size: s.chunk_size,
            backend: s.backend,
        }
    }

    pub fn solve(&self, spec: &ProblemSpec, opts: &McOptions) -> Result<Solution, DpError> {
        match self.solver.iterations {
            Some(it) => dp_infinite(spec, opts, it),
            None => dp_finite(spec, opts),
        }
    }
}

/// Builder names with a minimal example configuration for each.
pub const PROBLEM_SCHEMAS: &[(&str, &str)] = &[
    (
        "lqr",
        r#"{"kind": "lqr", "a": [[1.1]], "b": [[1.0]], "q": [[1.0]], "r": [[1.0]], "w": null}"#,
    ),
    (
        "random_lqr",
        r#"{"kind": "random_lqr", "a_mean": 1.1, "b_mean": 1.0, "sigma_a": 0.5, "sigma_b": 0.0}"#,
    ),
    (
        "jump_lqr",
        r#"{"kind": "jump_lqr", "modes": [{"a": [[1.2]], "b": [[0.1]], "c": [0.0]}, {"a": [[0.8]], "b": [[-0.1]]}], "pi": [[0.8, 0.2], [0.2, 0.8]], "q": [[0.5]], "r": [[0.5]]}"#,
    ),
    (
        "multi_mission",
        r#"{"kind": "multi_mission", "a": null, "b": null, "targets": [[-1.0, 0.5], [1.0, 0.0]], "lambda": 0.1, "pi": [[0.97, 0.03], [0.03, 0.97]]}"#,
    ),
    (
        "fault_tolerant",
        r#"{"kind": "fault_tolerant", "a": [[1.0, 0.0], [0.0, 0.5]], "b": [[1.0, 1.0], [-1.0, 1.0]], "configurations": [[], [1], [2]], "pi": [[0.9, 0.1, 0.1], [0.05, 0.9, 0.0], [0.05, 0.0, 0.9]], "q": [[1.0, 0.0], [0.0, 1.0]], "r": [[1.0, 0.0], [0.0, 1.0]]}"#,
    ),
    (
        "portfolio",
        r#"{"kind": "portfolio", "regimes": [{"returns": {"mean": [1.001, 1.0002], "cov": [[1e-4, 0.0], [0.0, 1e-5]]}, "b": [1e-3, 1e-3]}], "risk_aversion": 0.1, "pi": [[1.0]]}"#,
    ),
    (
        "optimal_execution",
        r#"{"kind": "optimal_execution", "gamma_tr": [1.0], "g_imp": [[0.0]], "gamma_ex": [0.0], "mu": [0.0], "sigma2": [0.0], "terminal_liquidation": true}"#,
    ),
    (
        "execution_random_horizon",
        r#"{"kind": "execution_random_horizon", "gamma_tr": [1e-3], "g_imp": [[1e-4]], "gamma_ex": [1e-4], "mu": [0.0013], "sigma2": [0.000234], "p": [0.0, 0.0, 0.0001, 0.0001]}"#,
    ),
    (
        "retirement",
        r#"{"kind": "retirement", "death_probs": [0.01, 0.02, 0.04, 1.0], "returns": {"log_mean": [0.05, 0.0], "log_cov": [[0.02, 0.0], [0.0, 0.001]]}, "consumption": {"a": 0.2, "b": 20.0}, "bequest": {"a": 0.002, "b": 4.0}, "risk_aversion": 0.01}"#,
    ),
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_schema_example_parses_and_builds() {
        for (name, text) in PROBLEM_SCHEMAS {
            let problem: ProblemConfig =
                serde_json::from_str(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(problem.kind(), *name);
            let spec = problem.build(3).unwrap_or_else(|e| panic!("{name}: {e}"));
            spec.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn solver_settings_checked() {
        let text = r#"{"problem": {"kind": "random_lqr", "a_mean": 1.0, "b_mean": 1.0, "sigma_a": 0.0, "sigma_b": 0.0},
                       "solver": {"horizon": 5, "iterations": 5}}"#;
        let cfg = RunConfig::from_json(text).unwrap();
        assert!(cfg.validate().is_err());
        let text = r#"{"problem": {"kind": "random_lqr", "a_mean": 1.0, "b_mean": 1.0, "sigma_a": 0.0, "sigma_b": 0.0}}"#;
        assert!(RunConfig::from_json(text).unwrap().validate().is_err());
    }

    #[test]
    fn parse_error_reports_line() {
        let err = RunConfig::from_json("{\n  \"problem\": {\"kind\": \"nope\"}\n}").unwrap_err();
        assert_eq!(err.line(), 2);
    }

    #[test]
    fn retirement_horizon_from_data() {
        let text = format!(
            r#"{{"problem": {}, "solver": {{"samples": 4}}}}"#,
            PROBLEM_SCHEMAS.iter().find(|(n, _)| *n == "retirement").unwrap().1
        );
        let cfg = RunConfig::from_json(&text).unwrap();
        assert_eq!(cfg.build_spec().unwrap().horizon, 4);
    }
}
