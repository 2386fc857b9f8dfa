use super::{check_pi, quadratic_form_cost, require_pd, require_psd, require_square, shape_err, ProblemError};
use crate::dp::{FixedSampler, ModeDraw, ProblemSpec};
use nalgebra::{dmatrix, DMatrix, DVector};
use std::sync::Arc;

/// Dynamics of one mode: `x' = A x + B u + c`.
#[derive(Clone, Debug)]
pub struct JumpMode {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DVector<f64>,
}

impl JumpMode {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DVector<f64>) -> Self {
        Self { a, b, c }
    }

    pub fn linear(a: DMatrix<f64>, b: DMatrix<f64>) -> Self {
        let n = a.nrows();
        Self::new(a, b, DVector::zeros(n))
    }
}

fn fixed_spec(n: usize, m: usize, draws: Vec<ModeDraw>, pi: DMatrix<f64>) -> Result<ProblemSpec, ProblemError> {
    let k = draws.len();
    check_pi(&pi, k)?;
    let sampler = FixedSampler::new(draws);
    let moments = sampler.moments(0)?;
    Ok(ProblemSpec::new(n, m, k, 1, Arc::new(sampler))
        .with_pi(pi)
        .with_moments(moments))
}

fn check_mode(mode: &JumpMode, n: usize, m: usize) -> Result<(), ProblemError> {
    require_square("A", &mode.a, n)?;
    if mode.b.shape() != (n, m) || mode.c.len() != n {
        return Err(shape_err(format!(
            "mode has B {:?} and c {} for n={n}, m={m}",
            mode.b.shape(),
            mode.c.len()
        )));
    }
    Ok(())
}

/// Switched linear dynamics with a shared cost `x^T Q x + u^T R u`.
pub fn jump_lqr(
    modes: &[JumpMode],
    pi: DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<ProblemSpec, ProblemError> {
    let first = modes.first().ok_or_else(|| ProblemError::Invalid("no modes".into()))?;
    let (n, m) = (first.a.nrows(), first.b.ncols());
    require_square("Q", q, n)?;
    require_square("R", r, m)?;
    require_psd("Q", q)?;
    require_pd("R", r)?;
    let g = quadratic_form_cost(q, r);
    let mut draws = Vec::with_capacity(modes.len());
    for mode in modes {
        check_mode(mode, n, m)?;
        draws.push(ModeDraw::new(mode.a.clone(), mode.b.clone(), mode.c.clone(), g.clone()));
    }
    fixed_spec(n, m, draws, pi)
}

/// Point mass in the plane: state `(p, v)`, input force, step `0.05`, drag `0.98`.
pub fn double_integrator() -> (DMatrix<f64>, DMatrix<f64>) {
    let a = dmatrix![
        1.0, 0.0, 0.05, 0.0;
        0.0, 1.0, 0.0, 0.05;
        0.0, 0.0, 0.98, 0.0;
        0.0, 0.0, 0.0, 0.98
    ];
    let b = dmatrix![
        0.0, 0.0;
        0.0, 0.0;
        0.05, 0.0;
        0.0, 0.05
    ];
    (a, b)
}

/// One mode per target: cost `1/2 ||p - d_s||^2 + lambda/2 ||u||^2`.
///
/// The position `p` is the leading `d_s.len()` coordinates of the state.
pub fn multi_mission(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    targets: &[DVector<f64>],
    lambda: f64,
    pi: DMatrix<f64>,
) -> Result<ProblemSpec, ProblemError> {
    if lambda <= 0.0 {
        return Err(ProblemError::Invalid(format!("lambda must be positive, got {lambda}")));
    }
    let (n, m) = (a.nrows(), b.ncols());
    check_mode(&JumpMode::linear(a.clone(), b.clone()), n, m)?;
    if targets.is_empty() {
        return Err(ProblemError::Invalid("at least one target is required".into()));
    }
    let mut draws = Vec::with_capacity(targets.len());
    for d in targets {
        let np = d.len();
        if np > n {
            return Err(shape_err(format!("target has {np} coordinates, state has {n}")));
        }
        let mut g = DMatrix::zeros(n + m + 1, n + m + 1);
        g.view_mut((0, 0), (np, np)).fill_with_identity();
        g.view_mut((n, n), (m, m)).copy_from(&(DMatrix::identity(m, m) * lambda));
        for i in 0..np {
            g[(i, n + m)] = -d[i];
            g[(n + m, i)] = -d[i];
        }
        g[(n + m, n + m)] = d.norm_squared();
        draws.push(ModeDraw::new(a.clone(), b.clone(), DVector::zeros(n), g));
    }
    fixed_spec(n, m, draws, pi)
}

/// One mode per actuator configuration; failed inputs (0-based) get zero columns in `B`.
pub fn fault_tolerant(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    configurations: &[Vec<usize>],
    pi: DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<ProblemSpec, ProblemError> {
    let m = b.ncols();
    let mut modes = Vec::with_capacity(configurations.len());
    for failed in configurations {
        let mut bi = b.clone();
        for &j in failed {
            if j >= m {
                return Err(ProblemError::Invalid(format!("actuator {j} out of range for m={m}")));
            }
            bi.column_mut(j).fill(0.0);
        }
        modes.push(JumpMode::linear(a.clone(), bi));
    }
    jump_lqr(&modes, pi, q, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dp::{dp_infinite, McOptions};
    use crate::problems::{lqr, riccati_fixed_point, LqrData};
    use nalgebra::dvector;

    #[test]
    fn single_mode_equals_lqr() {
        let (a, b) = double_integrator();
        let q = DMatrix::identity(4, 4);
        let r = DMatrix::identity(2, 2) * 0.3;
        let j = jump_lqr(&[JumpMode::linear(a.clone(), b.clone())], DMatrix::identity(1, 1), &q, &r)
            .unwrap();
        let l = lqr(&LqrData::new(a, b, q, r)).unwrap();
        let dj = j.sampler.draw(0, 0, &mut crate::dp::sample_rng(0, 0, 0, 0));
        let dl = l.sampler.draw(0, 0, &mut crate::dp::sample_rng(0, 0, 0, 0));
        assert_eq!(dj, dl);
        assert_eq!(j.pi.at(0), l.pi.at(0));
        assert_eq!((j.n, j.m, j.k), (l.n, l.m, l.k));
    }

    #[test]
    fn identity_switching_is_separate_lqrs() {
        let modes = [
            JumpMode::linear(dmatrix![1.2], dmatrix![0.1]),
            JumpMode::linear(dmatrix![0.8], dmatrix![-0.1]),
        ];
        let half = dmatrix![0.5];
        let spec = jump_lqr(&modes, DMatrix::identity(2, 2), &half, &half).unwrap();
        let sol = dp_infinite(&spec, &McOptions::default(), 2000).unwrap();
        for (s, mode) in modes.iter().enumerate() {
            let data = LqrData::new(mode.a.clone(), mode.b.clone(), half.clone(), half.clone());
            let oracle = riccati_fixed_point(&data, 100_000).unwrap();
            let k = sol.policy(0, s).unwrap().gain()[(0, 0)];
            assert!((k - oracle.k[(0, 0)]).abs() < 1e-6, "mode {s}: {k} vs {}", oracle.k[(0, 0)]);
        }
    }

    #[test]
    fn single_target_at_origin_is_regulator() {
        let (a, b) = double_integrator();
        let spec =
            multi_mission(&a, &b, &[dvector![0.0, 0.0]], 0.1, DMatrix::identity(1, 1)).unwrap();
        let sol = dp_infinite(&spec, &McOptions::default(), 500).unwrap();
        let pol = sol.policy(0, 0).unwrap();
        assert!(pol.offset().norm() < 1e-10);
        let tr = crate::dp::simulate(&spec, &sol, &dvector![1.0, -1.0, 0.0, 0.0], 0, 300, 0).unwrap();
        assert!(tr.states.last().unwrap().norm() < 1e-2);
    }

    #[test]
    fn no_failures_equals_plain_lqr() {
        let a = dmatrix![1.0, 0.2; 0.0, 0.9];
        let b = dmatrix![0.0, 1.0; 1.0, 0.5];
        let q = DMatrix::identity(2, 2);
        let ft = fault_tolerant(&a, &b, &[vec![]], DMatrix::identity(1, 1), &q, &q).unwrap();
        let sol = dp_infinite(&ft, &McOptions::default(), 300).unwrap();
        let oracle = riccati_fixed_point(&LqrData::new(a, b, q.clone(), q), 10_000).unwrap();
        let k = sol.policy(0, 0).unwrap().gain();
        assert!((k - &oracle.k).norm() < 1e-8);
    }
}
