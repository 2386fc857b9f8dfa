use super::bellman::bellman_step;
use super::{Backend, DpError, McOptions, ProblemSpec, Status};
use crate::extquad::{AffineMap, ExtendedQuadratic};
use crate::linalg::max_abs;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionMeta {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub gamma: f64,
    #[serde(rename = "N")]
    pub samples: usize,
    pub seed: u64,
    pub backend: Backend,
    pub chunk_size: usize,
    /// Set for infinite-horizon solves: the stored slice applies at every `t`.
    pub time_invariant: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    /// Max coefficient change between the last two iterates (infinite horizon).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence: Option<f64>,
}

/// Value functions, Q functions, policies and statuses for every `(t, s)`.
///
/// For a finite horizon `T`, `v` has `T + 1` rows (the last is the terminal
/// cost) and the others have `T`. A time-invariant solution has one row each.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub meta: SolutionMeta,
    #[serde(rename = "V")]
    pub v: Vec<Vec<Option<ExtendedQuadratic>>>,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<Option<ExtendedQuadratic>>>,
    pub policies: Vec<Vec<Option<AffineMap>>>,
    pub statuses: Vec<Vec<Status>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl Solution {
    fn row(&self, t: usize) -> usize {
        if self.meta.time_invariant {
            0
        } else {
            t
        }
    }

    pub fn policy(&self, t: usize, s: usize) -> Option<&AffineMap> {
        self.policies.get(self.row(t))?.get(s)?.as_ref()
    }

    pub fn value(&self, t: usize, s: usize) -> Option<&ExtendedQuadratic> {
        self.v.get(self.row(t))?.get(s)?.as_ref()
    }

    pub fn status(&self, t: usize, s: usize) -> Option<Status> {
        self.statuses.get(self.row(t))?.get(s).copied()
    }

    pub fn all_ok(&self) -> bool {
        self.statuses.iter().flatten().all(|s| s.is_ok())
    }

    /// First non-ok status in `(t, s)` order, preferring the most severe kind.
    pub fn worst_status(&self) -> Status {
        let order = [
            Status::Improper,
            Status::Nonconvex,
            Status::Unbounded,
            Status::Diverging,
            Status::Blocked,
        ];
        for kind in order {
            if self.statuses.iter().flatten().any(|&s| s == kind) {
                return kind;
            }
        }
        Status::Ok
    }
}

fn meta(spec: &ProblemSpec, opts: &McOptions, gamma: f64, time_invariant: bool) -> SolutionMeta {
    SolutionMeta {
        n: spec.n,
        m: spec.m,
        k: spec.k,
        horizon: spec.horizon,
        gamma,
        samples: opts.samples,
        seed: opts.seed,
        backend: opts.backend,
        chunk_size: opts.chunk_size,
        time_invariant,
        iterations: None,
        convergence: None,
    }
}

/// Backward recursion from the terminal costs over `spec.horizon` stages.
///
/// Modes whose minimization fails get `None` entries; earlier modes that can
/// transition into them are marked [`Status::Blocked`].
pub fn dp_finite(spec: &ProblemSpec, opts: &McOptions) -> Result<Solution, DpError> {
    spec.validate_finite()?;
    let pool = opts.pool()?;
    let t_max = spec.horizon;
    let mut v = vec![Vec::new(); t_max + 1];
    let mut q = vec![Vec::new(); t_max];
    let mut policies = vec![Vec::new(); t_max];
    let mut statuses = vec![Vec::new(); t_max];
    let mut warnings = Vec::new();

    v[t_max] = spec
        .terminal
        .iter()
        .map(|e| e.reduce())
        .collect::<Vec<_>>();
    if v[t_max].iter().any(Option::is_none) {
        warnings.push("a terminal cost has infeasible constraints".to_string());
    }

    for t in (0..t_max).rev() {
        let out = bellman_step(spec, &v[t + 1], t, t as u64, opts, 1.0, &pool)?;
        v[t] = out.v;
        q[t] = out.q;
        policies[t] = out.policies;
        statuses[t] = out.statuses;
        warnings.extend(out.warnings);
    }

    Ok(Solution {
        meta: meta(spec, opts, 1.0, false),
        v,
        q,
        policies,
        statuses,
        warnings,
    })
}

/// Applies the discounted Bellman operator `iterations` times from `V = 0`.
///
/// Stage data is taken at `t = 0`; sample streams are keyed by the
/// iteration index. Iteration stops early only on a pathology, including
/// divergence past [`super::DIVERGENCE_BOUND`].
pub fn dp_infinite(
    spec: &ProblemSpec,
    opts: &McOptions,
    iterations: usize,
) -> Result<Solution, DpError> {
    spec.validate()?;
    if iterations == 0 {
        return Err(DpError::InvalidSpec("iterations must be at least 1".into()));
    }
    let pool = opts.pool()?;
    let gamma = spec.gamma;
    let mut v: Vec<Option<ExtendedQuadratic>> = vec![Some(ExtendedQuadratic::zero(spec.n)); spec.k];
    let mut last = None;
    let mut warnings = Vec::new();
    let mut convergence = None;
    let mut done = 0;

    for it in 0..iterations {
        let out = bellman_step(spec, &v, 0, it as u64, opts, gamma, &pool)?;
        done = it + 1;
        let mut change: f64 = 0.0;
        for (new, old) in out.v.iter().zip(&v) {
            match (new, old) {
                (Some(a), Some(b)) => {
                    change = change.max(max_abs(&(a.coefficients() - b.coefficients())))
                }
                _ => change = f64::INFINITY,
            }
        }
        convergence = Some(change);
        for w in &out.warnings {
            if !warnings.contains(w) {
                warnings.push(w.clone());
            }
        }
        let stop = out.statuses.iter().any(|s| !s.is_ok());
        v = out.v.clone();
        last = Some(out);
        if stop {
            break;
        }
    }

    let out = last.expect("at least one iteration");
    let mut m = meta(spec, opts, gamma, true);
    m.iterations = Some(done);
    m.convergence = convergence;
    Ok(Solution {
        meta: m,
        v: vec![out.v],
        q: vec![out.q],
        policies: vec![out.policies],
        statuses: vec![out.statuses],
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dp::{FixedSampler, ModeDraw, Status};
    use nalgebra::{dmatrix, dvector, DMatrix};
    use std::sync::Arc;

    #[test]
    fn one_step_drive_to_zero() {
        // x' = x + u, zero stage cost, terminal 1/2 x^2.
        let d = ModeDraw::new(dmatrix![1.0], dmatrix![1.0], dvector![0.0], DMatrix::zeros(3, 3));
        let terminal = ExtendedQuadratic::quadratic(dmatrix![1.0], dvector![0.0], 0.0).unwrap();
        let spec = ProblemSpec::new(1, 1, 1, 1, Arc::new(FixedSampler::new(vec![d])))
            .with_terminal(vec![terminal]);
        let sol = dp_finite(&spec, &McOptions::default()).unwrap();
        assert!(sol.all_ok());
        let pol = sol.policy(0, 0).unwrap();
        assert!((pol.gain()[(0, 0)] + 1.0).abs() < 1e-12);
        assert!(sol.value(0, 0).unwrap().max_abs_coefficient() < 1e-12);
    }

    #[test]
    fn infinite_zero_cost_is_fixed_point() {
        let d = ModeDraw::new(dmatrix![3.0], dmatrix![1.0], dvector![1.0], DMatrix::zeros(3, 3));
        let spec = ProblemSpec::new(1, 1, 1, 1, Arc::new(FixedSampler::new(vec![d])))
            .with_gamma(0.9);
        let sol = dp_infinite(&spec, &McOptions::default(), 1).unwrap();
        assert_eq!(sol.statuses[0], vec![Status::Ok]);
        assert!(sol.value(0, 0).unwrap().equals(&ExtendedQuadratic::zero(1)));
        assert_eq!(sol.meta.convergence, Some(0.0));
    }

    #[test]
    fn solution_json_round_trip() {
        let d = ModeDraw::new(
            dmatrix![1.1],
            dmatrix![1.0],
            dvector![0.3],
            DMatrix::identity(3, 3),
        );
        let spec = ProblemSpec::new(1, 1, 1, 3, Arc::new(FixedSampler::new(vec![d])));
        let sol = dp_finite(&spec, &McOptions::default()).unwrap();
        let s = serde_json::to_string(&sol).unwrap();
        let back: Solution = serde_json::from_str(&s).unwrap();
        assert_eq!(back, sol);
        assert!(s.contains("\"K\":1"));
        assert!(s.contains("\"statuses\":[[\"ok\"]"));
    }
}
