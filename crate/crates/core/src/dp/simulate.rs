use super::bellman::stage_cost;
use super::sampling::{sim_rng, DOMAIN_SIM_DRAW, DOMAIN_SIM_SWITCH};
use super::{DpError, ProblemSpec, Solution};
use nalgebra::DVector;
use rand::Rng;

/// A closed-loop sample path.
#[derive(Clone, Debug)]
pub struct Trajectory {
    /// `x_0 .. x_steps`.
    pub states: Vec<DVector<f64>>,
    /// `s_0 .. s_steps`.
    pub modes: Vec<usize>,
    pub inputs: Vec<DVector<f64>>,
    pub stage_costs: Vec<f64>,
    /// Terminal cost, charged when a finite-horizon solution is run to its end.
    pub terminal_cost: Option<f64>,
    pub total_cost: f64,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.inputs.len()
    }

    /// Mean stage cost per step (terminal cost excluded).
    pub fn mean_stage_cost(&self) -> f64 {
        if self.stage_costs.is_empty() {
            return 0.0;
        }
        self.stage_costs.iter().sum::<f64>() / self.stage_costs.len() as f64
    }
}

/// Runs `solution`'s policies on fresh draws from `spec`.
///
/// Dynamics draws are keyed by `(seed, t, s_t)` and mode switches by
/// `(seed, t)`, so two policies simulated with the same seed see the same
/// mode sequence and the same per-mode disturbances.
pub fn simulate(
    spec: &ProblemSpec,
    solution: &Solution,
    x0: &DVector<f64>,
    s0: usize,
    steps: usize,
    seed: u64,
) -> Result<Trajectory, DpError> {
    let meta = &solution.meta;
    if meta.n != spec.n || meta.m != spec.m || meta.k != spec.k {
        return Err(DpError::Dimension(format!(
            "solution has (n, m, K) = ({}, {}, {}), problem has ({}, {}, {})",
            meta.n, meta.m, meta.k, spec.n, spec.m, spec.k
        )));
    }
    if x0.len() != spec.n {
        return Err(DpError::Dimension(format!(
            "x0 has length {}, expected {}",
            x0.len(),
            spec.n
        )));
    }
    if s0 >= spec.k {
        return Err(DpError::Dimension(format!("mode {s0} out of range for K={}", spec.k)));
    }
    if !meta.time_invariant && steps > meta.horizon {
        return Err(DpError::Dimension(format!(
            "{steps} steps requested from a horizon-{} solution",
            meta.horizon
        )));
    }

    let mut x = x0.clone();
    let mut s = s0;
    let mut traj = Trajectory {
        states: vec![x.clone()],
        modes: vec![s],
        inputs: Vec::with_capacity(steps),
        stage_costs: Vec::with_capacity(steps),
        terminal_cost: None,
        total_cost: 0.0,
    };
    for t in 0..steps {
        let policy = solution
            .policy(t, s)
            .ok_or(DpError::MissingPolicy { t, mode: s })?;
        if policy.in_dim() != spec.n || policy.out_dim() != spec.m {
            return Err(DpError::Dimension(format!(
                "policy at t={t}, mode {s} maps {} -> {}",
                policy.in_dim(),
                policy.out_dim()
            )));
        }
        let u = policy.apply(&x).map_err(|e| DpError::Dimension(e.to_string()))?;
        let draw = spec
            .sampler
            .draw(t, s, &mut sim_rng(DOMAIN_SIM_DRAW, seed, t as u64, s as u64));
        draw.check(spec.n, spec.m).map_err(DpError::Dimension)?;
        let cost_fn = stage_cost(&draw, spec.constraint(t, s))?;
        let mut z = DVector::zeros(spec.n + spec.m);
        z.rows_mut(0, spec.n).copy_from(&x);
        z.rows_mut(spec.n, spec.m).copy_from(&u);
        let cost = cost_fn.evaluate(&z).map_err(|e| DpError::Dimension(e.to_string()))?;

        x = &draw.a * &x + &draw.b * &u + &draw.c;
        let col = spec.pi.at(t).column(s).into_owned();
        let r: f64 = sim_rng(DOMAIN_SIM_SWITCH, seed, t as u64, 0).random();
        s = pick(&col, r);

        traj.inputs.push(u);
        traj.stage_costs.push(cost);
        traj.total_cost += cost;
        traj.states.push(x.clone());
        traj.modes.push(s);
    }
    if !meta.time_invariant && steps == meta.horizon {
        let term = spec.terminal[s]
            .evaluate(&x)
            .map_err(|e| DpError::Dimension(e.to_string()))?;
        traj.terminal_cost = Some(term);
        traj.total_cost += term;
    }
    Ok(traj)
}

/// Index drawn from the probability vector `p` with uniform variate `r`.
fn pick(p: &DVector<f64>, r: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in p.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        last = i;
        acc += w;
        if r < acc {
            return i;
        }
    }
    last
}
