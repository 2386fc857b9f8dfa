use super::TimeVarying;
use crate::moments::{dynamics_block, ModeMoments, MomentsError};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub(crate) const DOMAIN_BELLMAN: u64 = 0;
pub(crate) const DOMAIN_SIM_DRAW: u64 = 1;
pub(crate) const DOMAIN_SIM_SWITCH: u64 = 2;

/// One draw of a mode's random data.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeDraw {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DVector<f64>,
    /// Quadratic cost part over `(x, u, 1)`.
    pub g: DMatrix<f64>,
}

impl ModeDraw {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DVector<f64>, g: DMatrix<f64>) -> Self {
        Self { a, b, c, g }
    }

    pub(crate) fn check(&self, n: usize, m: usize) -> Result<(), String> {
        let nz = n + m + 1;
        if self.a.shape() != (n, n)
            || self.b.shape() != (n, m)
            || self.c.len() != n
            || self.g.shape() != (nz, nz)
        {
            return Err(format!(
                "draw has A {:?}, B {:?}, c {}, G {:?} for n={n}, m={m}",
                self.a.shape(),
                self.b.shape(),
                self.c.len(),
                self.g.shape()
            ));
        }
        Ok(())
    }
}

/// Draws for every mode at one stage, as consumed by [`super::bellman_apply`].
#[derive(Clone, Debug)]
pub struct StageSample {
    pub modes: Vec<ModeDraw>,
}

impl StageSample {
    pub fn draw(sampler: &dyn Sampler, seed: u64, t: usize, index: u64, k: usize) -> Self {
        let modes = (0..k)
            .map(|s| sampler.draw(t, s, &mut sample_rng(seed, t as u64, s as u64, index)))
            .collect();
        Self { modes }
    }
}

/// Source of random problem data.
///
/// Implementations must only use `rng` for randomness; the solver keys it by
/// (seed, stage, mode, sample index) so results do not depend on scheduling.
pub trait Sampler: Send + Sync {
    fn draw(&self, t: usize, mode: usize, rng: &mut ChaCha8Rng) -> ModeDraw;

    /// Deterministic samplers are evaluated with a single sample.
    fn is_deterministic(&self) -> bool {
        false
    }
}

fn keyed_rng(domain: u64, seed: u64, t: u64, mode: u64, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&t.to_le_bytes());
    key[16..24].copy_from_slice(&mode.to_le_bytes());
    key[24..32].copy_from_slice(&domain.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

/// Generator for sample `index` of mode `mode` at stage `t`.
pub fn sample_rng(seed: u64, t: u64, mode: u64, index: u64) -> ChaCha8Rng {
    keyed_rng(DOMAIN_BELLMAN, seed, t, mode, index)
}

pub(crate) fn sim_rng(domain: u64, seed: u64, t: u64, mode: u64) -> ChaCha8Rng {
    keyed_rng(domain, seed, t, mode, 0)
}

/// Same data every draw; per-stage lists are indexed by `t`.
#[derive(Clone, Debug)]
pub struct FixedSampler {
    draws: TimeVarying<Vec<ModeDraw>>,
}

impl FixedSampler {
    pub fn new(draws: Vec<ModeDraw>) -> Self {
        Self {
            draws: TimeVarying::Constant(draws),
        }
    }

    pub fn per_stage(draws: Vec<Vec<ModeDraw>>) -> Self {
        Self {
            draws: TimeVarying::PerStage(draws),
        }
    }

    pub fn draws(&self, t: usize) -> &[ModeDraw] {
        self.draws.at(t)
    }

    /// Moments of the (degenerate) distribution, one entry per mode.
    pub fn moments(&self, t: usize) -> Result<Vec<ModeMoments>, MomentsError> {
        self.draws(t)
            .iter()
            .map(|d| ModeMoments::deterministic(&d.a, &d.b, &d.c, &d.g))
            .collect()
    }
}

impl Sampler for FixedSampler {
    fn draw(&self, t: usize, mode: usize, _rng: &mut ChaCha8Rng) -> ModeDraw {
        self.draws.at(t)[mode].clone()
    }

    fn is_deterministic(&self) -> bool {
        true
    }
}

/// Wraps a closure as a sampler.
pub struct FnSampler<F> {
    f: F,
}

impl<F> FnSampler<F>
where
    F: Fn(usize, usize, &mut ChaCha8Rng) -> ModeDraw + Send + Sync,
{
    pub fn new(f: F) -> Self {
        Self { f }
    }
}

impl<F> Sampler for FnSampler<F>
where
    F: Fn(usize, usize, &mut ChaCha8Rng) -> ModeDraw + Send + Sync,
{
    fn draw(&self, t: usize, mode: usize, rng: &mut ChaCha8Rng) -> ModeDraw {
        (self.f)(t, mode, rng)
    }
}

/// Gaussian `[A B c]` per mode with a fixed cost matrix.
///
/// The covariance is over the column-major vectorization of `[A B c]`.
#[derive(Clone, Debug)]
pub struct GaussianSampler {
    modes: Vec<GaussianMode>,
}

#[derive(Clone, Debug)]
struct GaussianMode {
    mean: ModeDraw,
    cov: DMatrix<f64>,
    factor: DMatrix<f64>,
}

impl GaussianSampler {
    pub fn new(modes: Vec<(ModeDraw, DMatrix<f64>)>) -> Result<Self, MomentsError> {
        let modes = modes
            .into_iter()
            .map(|(mean, cov)| {
                let n = mean.a.nrows();
                let d = n * (n + mean.b.ncols() + 1);
                if cov.shape() != (d, d) {
                    return Err(MomentsError::DimensionMismatch(format!(
                        "covariance is {:?}, expected {d}x{d}",
                        cov.shape()
                    )));
                }
                if !crate::linalg::is_psd(&cov) {
                    return Err(MomentsError::NotPsd);
                }
                let factor = psd_sqrt(&cov);
                Ok(GaussianMode { mean, cov, factor })
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { modes })
    }

    pub fn moments(&self) -> Result<Vec<ModeMoments>, MomentsError> {
        self.modes
            .iter()
            .map(|m| {
                let top = dynamics_block(&m.mean.a, &m.mean.b, &m.mean.c)?;
                ModeMoments::from_mean_cov(&top, &m.cov, &m.mean.g)
            })
            .collect()
    }
}

/// Symmetric square root of a PSD matrix, clipping tiny negative eigenvalues.
fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.nrows() == 0 {
        return m.clone();
    }
    let eig = SymmetricEigen::new(crate::linalg::symmetrize(m));
    let d = eig.eigenvalues.map(|x| x.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose()
}

impl Sampler for GaussianSampler {
    fn draw(&self, _t: usize, mode: usize, rng: &mut ChaCha8Rng) -> ModeDraw {
        let gm = &self.modes[mode];
        let (n, m) = (gm.mean.a.nrows(), gm.mean.b.ncols());
        let z = DVector::from_fn(gm.factor.ncols(), |_, _| rng.sample::<f64, _>(StandardNormal));
        let noise = &gm.factor * z;
        // noise is vec([dA dB dc]) in column-major order.
        let col = |j: usize| noise.rows(j * n, n).into_owned();
        let mut draw = gm.mean.clone();
        for j in 0..n {
            let d = col(j);
            draw.a.column_mut(j).iter_mut().zip(d.iter()).for_each(|(a, x)| *a += x);
        }
        for j in 0..m {
            let d = col(n + j);
            draw.b.column_mut(j).iter_mut().zip(d.iter()).for_each(|(a, x)| *a += x);
        }
        draw.c += col(n + m);
        draw
    }

    fn is_deterministic(&self) -> bool {
        self.modes.iter().all(|m| m.cov.iter().all(|&x| x == 0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn keyed_streams_are_reproducible_and_distinct() {
        let a: f64 = sample_rng(1, 2, 0, 5).random();
        let b: f64 = sample_rng(1, 2, 0, 5).random();
        let c: f64 = sample_rng(1, 2, 0, 6).random();
        let d: f64 = sample_rng(1, 2, 1, 5).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn gaussian_sampler_moments() {
        let mean = ModeDraw::new(dmatrix![1.1], dmatrix![1.0], dvector![0.0], DMatrix::identity(3, 3));
        let cov = DMatrix::from_diagonal(&dvector![0.25, 0.0, 0.0]);
        let s = GaussianSampler::new(vec![(mean, cov)]).unwrap();
        assert!(!s.is_deterministic());
        let n = 50_000;
        let mut sum = 0.0;
        let mut sq = 0.0;
        for i in 0..n {
            let d = s.draw(0, 0, &mut sample_rng(3, 0, 0, i));
            assert_eq!(d.b[(0, 0)], 1.0);
            sum += d.a[(0, 0)];
            sq += d.a[(0, 0)] * d.a[(0, 0)];
        }
        let mean_a = sum / n as f64;
        let var_a = sq / n as f64 - mean_a * mean_a;
        assert!((mean_a - 1.1).abs() < 0.01);
        assert!((var_a - 0.25).abs() < 0.01);
    }
}
