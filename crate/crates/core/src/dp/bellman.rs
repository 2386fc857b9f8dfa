use super::sampling::{sample_rng, ModeDraw};
use super::{within_bound, Backend, DpError, McOptions, ProblemSpec, StageConstraint, Status};
use crate::extquad::{AffineMap, ExtendedQuadratic, Minimization};
use crate::linalg::{symmetrize, vstack, vstack_vec};
use crate::moments::{dynamics_block, MomentsError};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use rayon::ThreadPool;

/// Result of one Bellman step, indexed by mode.
#[derive(Clone, Debug)]
pub struct BellmanOutput {
    pub q: Vec<Option<ExtendedQuadratic>>,
    pub v: Vec<Option<ExtendedQuadratic>>,
    pub policies: Vec<Option<AffineMap>>,
    pub statuses: Vec<Status>,
    pub warnings: Vec<String>,
}

/// Stage cost over `(x, u)`: quadratic part `G`, constraints `[F H] z + h = 0`.
pub fn stage_cost(draw: &ModeDraw, c: &StageConstraint) -> Result<ExtendedQuadratic, DpError> {
    ExtendedQuadratic::from_coefficients(&draw.g, c.joint_matrix(), c.offset.clone())
        .map_err(|e| DpError::Dimension(e.to_string()))
}

/// One application of the Bellman operator at stage `t`.
///
/// `v_next[s]` is `None` for modes whose value function could not be
/// computed; modes that can reach them are reported as [`Status::Blocked`].
/// Sample streams are keyed by `t`.
pub fn bellman_apply(
    spec: &ProblemSpec,
    v_next: &[Option<ExtendedQuadratic>],
    t: usize,
    opts: &McOptions,
    gamma: f64,
) -> Result<BellmanOutput, DpError> {
    let pool = opts.pool()?;
    bellman_step(spec, v_next, t, t as u64, opts, gamma, &pool)
}

/// Running sum of sample terms: coefficients plus stacked constraint rows.
struct Partial {
    coef: DMatrix<f64>,
    f: DMatrix<f64>,
    g: DVector<f64>,
}

impl Partial {
    fn zero(nz: usize) -> Self {
        Self {
            coef: DMatrix::zeros(nz + 1, nz + 1),
            f: DMatrix::zeros(0, nz),
            g: DVector::zeros(0),
        }
    }

    fn absorb(&mut self, other: &Partial) {
        self.coef += &other.coef;
        if !other.g.is_empty() {
            self.f = vstack(&self.f, &other.f);
            self.g = vstack_vec(&self.g, &other.g);
        }
    }

    fn compact(&mut self) {
        if self.g.is_empty() {
            return;
        }
        if let Some(r) = ExtendedQuadratic::indicator(self.f.clone(), self.g.clone())
            .ok()
            .and_then(|e| e.reduce())
        {
            self.f = r.f().clone();
            self.g = r.g().clone();
        }
    }
}

pub(crate) fn bellman_step(
    spec: &ProblemSpec,
    v_next: &[Option<ExtendedQuadratic>],
    t: usize,
    key_t: u64,
    opts: &McOptions,
    gamma: f64,
    pool: &ThreadPool,
) -> Result<BellmanOutput, DpError> {
    if v_next.len() != spec.k {
        return Err(DpError::Dimension(format!(
            "{} next-stage value functions for {} modes",
            v_next.len(),
            spec.k
        )));
    }
    let (n, m) = (spec.n, spec.m);
    let pi = spec.pi.at(t);
    let mut out = BellmanOutput {
        q: Vec::with_capacity(spec.k),
        v: Vec::with_capacity(spec.k),
        policies: Vec::with_capacity(spec.k),
        statuses: Vec::with_capacity(spec.k),
        warnings: Vec::new(),
    };

    for s in 0..spec.k {
        // Impossible successors contribute nothing, not even constraints.
        let mut cont = Vec::new();
        let mut blocked = false;
        for (s2, v) in v_next.iter().enumerate() {
            let w = pi[(s2, s)];
            if w == 0.0 {
                continue;
            }
            match v {
                Some(v) => cont.push((w, v)),
                None => blocked = true,
            }
        }
        if blocked {
            out.q.push(None);
            out.v.push(None);
            out.policies.push(None);
            out.statuses.push(Status::Blocked);
            continue;
        }

        let q_raw = match opts.backend {
            Backend::Exact => {
                let moments = spec.moments.as_ref().ok_or(DpError::MissingMoments)?;
                moments.at(t)[s].expected_q(&cont, gamma).map_err(|e| match e {
                    MomentsError::ConstraintsPresent => DpError::ConstraintsPresent { t, mode: s },
                    other => DpError::Dimension(other.to_string()),
                })?
            }
            Backend::Mc => {
                let (q, warn) = mc_q(spec, &cont, t, key_t, s, opts, gamma, pool)?;
                if let Some(w) = warn {
                    out.warnings.push(w);
                }
                q
            }
        };
        let stage = spec.constraint(t, s);
        let q = if stage.rows() > 0 {
            let ind = ExtendedQuadratic::indicator(stage.joint_matrix(), stage.offset.clone())
                .map_err(|e| DpError::Dimension(e.to_string()))?;
            q_raw.add(&ind).map_err(|e| DpError::Dimension(e.to_string()))?
        } else {
            q_raw
        };

        let min = q.partial_min(n, m).map_err(|e| DpError::Dimension(e.to_string()))?;
        match min {
            Minimization::Attained { value, minimizer } => {
                if !value.is_finite() {
                    out.v.push(None);
                    out.policies.push(None);
                    out.statuses.push(Status::Diverging);
                } else {
                    let status = if within_bound(&value) {
                        Status::Ok
                    } else {
                        Status::Diverging
                    };
                    out.v.push(Some(value));
                    out.policies.push(Some(minimizer));
                    out.statuses.push(status);
                }
            }
            other => {
                out.v.push(None);
                out.policies.push(None);
                out.statuses.push(other.status().into());
            }
        }
        out.q.push(Some(q));
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn mc_q(
    spec: &ProblemSpec,
    cont: &[(f64, &ExtendedQuadratic)],
    t: usize,
    key_t: u64,
    s: usize,
    opts: &McOptions,
    gamma: f64,
    pool: &ThreadPool,
) -> Result<(ExtendedQuadratic, Option<String>), DpError> {
    let (n, m) = (spec.n, spec.m);
    let nz = n + m;
    let samples = if spec.sampler.is_deterministic() {
        1
    } else {
        opts.samples
    };
    if samples == 0 {
        return Err(DpError::InvalidSpec("sample count must be at least 1".into()));
    }
    let chunk = opts.chunk_size.max(1);

    // The expectation is linear in V, so the mode mixture is formed once.
    let mut mix = DMatrix::zeros(n + 1, n + 1);
    let mut cf = DMatrix::zeros(0, n);
    let mut cg = DVector::zeros(0);
    for (w, v) in cont {
        mix += v.coefficients() * (*w * gamma);
        if v.is_constrained() {
            cf = vstack(&cf, v.f());
            cg = vstack_vec(&cg, v.g());
        }
    }
    if !cg.is_empty() {
        if let Some(r) = ExtendedQuadratic::indicator(cf.clone(), cg.clone())
            .ok()
            .and_then(|e| e.reduce())
        {
            cf = r.f().clone();
            cg = r.g().clone();
        }
    }

    let term = |i: usize| -> Result<Partial, DpError> {
        let d = spec
            .sampler
            .draw(t, s, &mut sample_rng(opts.seed, key_t, s as u64, i as u64));
        d.check(n, m).map_err(DpError::Dimension)?;
        let top = dynamics_block(&d.a, &d.b, &d.c).map_err(|e| DpError::Dimension(e.to_string()))?;
        let mut lift = DMatrix::zeros(n + 1, nz + 1);
        lift.rows_mut(0, n).copy_from(&top);
        lift[(n, nz)] = 1.0;
        let coef = symmetrize(&d.g) + lift.transpose() * &mix * &lift;
        let (f, g) = if !cg.is_empty() {
            (&cf * top.columns(0, nz), &cf * &d.c + &cg)
        } else {
            (DMatrix::zeros(0, nz), DVector::zeros(0))
        };
        Ok(Partial { coef, f, g })
    };

    let n_chunks = samples.div_ceil(chunk);
    let chunks: Vec<Partial> = pool.install(|| {
        (0..n_chunks)
            .into_par_iter()
            .map(|c| {
                let mut acc = Partial::zero(nz);
                for i in c * chunk..((c + 1) * chunk).min(samples) {
                    acc.absorb(&term(i)?);
                }
                acc.compact();
                Ok(acc)
            })
            .collect::<Result<_, DpError>>()
    })?;

    let mut total = Partial::zero(nz);
    for c in &chunks {
        total.absorb(c);
    }
    total.compact();

    let mut warning = None;
    if !cg.is_empty() {
        let mut first = term(0)?;
        first.compact();
        if total.g.len() > first.g.len() {
            warning = Some(format!(
                "t={t}, mode {s}: samples induce different constraint sets ({} rows per sample, {} after stacking)",
                first.g.len(),
                total.g.len()
            ));
        }
    }

    let coef = total.coef * (1.0 / samples as f64);
    let q = ExtendedQuadratic::from_coefficients(&coef, total.f, total.g)
        .map_err(|e| DpError::Dimension(e.to_string()))?;
    Ok((q, warning))
}
