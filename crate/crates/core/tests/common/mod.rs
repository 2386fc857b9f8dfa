//! Random extended quadratics and pointwise property checks shared by the
//! property tests and the acceptance suite. Each check takes a seed and
//! returns `Err` with a description on the first violation.
#![allow(dead_code)]

use eqdp::extquad::{AffineMap, ExtendedQuadratic, Minimization};
use eqdp::linalg::svd_split;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type Check = fn(u64) -> Result<(), String>;

/// All algebra checks, by name.
pub const ALGEBRA_CHECKS: &[(&str, Check)] = &[
    ("add pointwise", check_add),
    ("scale pointwise", check_scale),
    ("precompose pointwise", check_precompose),
    ("reduce pointwise", check_reduce),
    ("reduce idempotent", check_reduce_idempotent),
    ("equality invariance", check_equality_invariance),
    ("minimization oracle", check_minimization),
    ("convexity midpoint", check_convexity),
    ("nonnegativity", check_nonnegative),
    ("homogeneity closure", check_homogeneity),
];

pub struct Gen {
    rng: ChaCha8Rng,
}

impl Gen {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.random_range(lo..hi)
    }

    /// Uniform in `lo..=hi`.
    pub fn int(&mut self, lo: usize, hi: usize) -> usize {
        self.rng.random_range(lo..=hi)
    }

    pub fn coin(&mut self, p: f64) -> bool {
        self.rng.random_bool(p)
    }

    pub fn vector(&mut self, n: usize) -> DVector<f64> {
        DVector::from_fn(n, |_, _| self.normal())
    }

    pub fn matrix(&mut self, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| self.normal())
    }

    pub fn symmetric(&mut self, n: usize) -> DMatrix<f64> {
        let m = self.matrix(n, n);
        (&m + m.transpose()) * 0.5
    }

    /// `L L^T` with a random rank in `1..=n`.
    pub fn psd(&mut self, n: usize) -> DMatrix<f64> {
        let rank = self.int(1, n.max(1));
        let l = self.matrix(n, rank);
        &l * l.transpose()
    }

    /// `(F, g)` with up to `max_rows` rows, sometimes rank deficient,
    /// feasible unless `allow_infeasible` fires.
    pub fn constraints(
        &mut self,
        n: usize,
        max_rows: usize,
        allow_infeasible: bool,
    ) -> (DMatrix<f64>, DVector<f64>) {
        let p = self.int(0, max_rows);
        let mut f = self.matrix(p, n);
        if p >= 2 && self.coin(0.3) {
            let mix = self.normal();
            let row = f.row(0) * mix;
            f.set_row(p - 1, &row);
        }
        let g = if allow_infeasible && p > 0 && self.coin(0.1) {
            self.vector(p)
        } else {
            -(&f * self.vector(n))
        };
        (f, g)
    }

    /// Random quadratic part (indefinite, PSD or jointly nonnegative) with
    /// random constraints.
    pub fn extquad(&mut self, n: usize) -> ExtendedQuadratic {
        let (f, g) = self.constraints(n, (n + 1).min(4), true);
        match self.int(0, 2) {
            0 => {
                let m = self.symmetric(n + 1);
                ExtendedQuadratic::from_coefficients(&m, f, g).unwrap()
            }
            1 => {
                let p = self.psd(n);
                let q = self.vector(n);
                let r = self.normal();
                ExtendedQuadratic::new(p, q, r, f, g).unwrap()
            }
            _ => {
                let m = self.psd(n + 1);
                ExtendedQuadratic::from_coefficients(&m, f, g).unwrap()
            }
        }
    }

    pub fn dim(&mut self) -> usize {
        self.int(1, 6)
    }

    /// A point of `f`'s constraint set if there is one, otherwise a random point.
    pub fn feasible_point(&mut self, f: &ExtendedQuadratic) -> DVector<f64> {
        match f.free_param() {
            Some(rep) => {
                let z = self.vector(rep.l()) * 2.0;
                rep.point(&z)
            }
            None => self.vector(f.dim()) * 2.0,
        }
    }

    /// `count` points, the first half on `f`'s constraint set.
    pub fn points(&mut self, f: &ExtendedQuadratic, count: usize) -> Vec<DVector<f64>> {
        (0..count)
            .map(|i| {
                if i < count / 2 {
                    self.feasible_point(f)
                } else {
                    self.vector(f.dim()) * 2.0
                }
            })
            .collect()
    }

    /// Square matrix with condition number bounded away from singular.
    pub fn invertible(&mut self, n: usize) -> DMatrix<f64> {
        if n == 0 {
            return DMatrix::zeros(0, 0);
        }
        loop {
            let t = self.matrix(n, n);
            let s = t.singular_values();
            if s.min() > 0.1 * s.max() {
                return t;
            }
        }
    }
}

pub fn amax(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

pub fn eval(f: &ExtendedQuadratic, x: &DVector<f64>) -> f64 {
    f.evaluate(x).expect("dimensions match")
}

/// Infinite values must agree exactly, finite ones to `1e-8` relative to `scale`.
pub fn agree(expected: f64, actual: f64, scale: f64) -> bool {
    if expected.is_infinite() || actual.is_infinite() {
        return expected == actual;
    }
    (expected - actual).abs() <= 1e-8 * scale.abs().max(expected.abs()).max(1.0)
}

fn mismatch(what: &str, x: &DVector<f64>, expected: f64, actual: f64) -> String {
    format!("{what}: at {:?} expected {expected}, got {actual}", x.as_slice())
}

pub fn check_add(seed: u64) -> Result<(), String> {
    let mut gen = Gen::new(seed);
    let n = gen.dim();
    let f1 = gen.extquad(n);
    let f2 = gen.extquad(n);
    let h = f1.add(&f2).map_err(|e| e.to_string())?;
    for x in gen.points(&h, 50) {
        let (a, b) = (eval(&f1, &x), eval(&f2, &x));
        let expected = a + b;
        let actual = eval(&h, &x);
        if !agree(expected, actual, a.abs().max(b.abs())) {
            return Err(mismatch("add", &x, expected, actual));
        }
    }
    Ok(())
}

pub fn check_scale(seed: u64) -> Result<(), String> {
    let mut gen = Gen::new(seed);
    let n = gen.dim();
    let f = gen.extquad(n);
    let alpha = if gen.coin(0.1) { 0.0 } else { gen.uniform(-3.0, 3.0) };
    let h = f.scale(alpha);
    for x in gen.points(&f, 50) {
        let v = eval(&f, &x);
        let expected = if v.is_infinite() { v } else { alpha * v };
        let actual = eval(&h, &x);
        if !agree(expected, actual, v) {
            return Err(mismatch("scale", &x, expected, actual));
        }
    }
    Ok(())
}

pub fn check_precompose(seed: u64) -> Result<(), String> {
    let mut gen = Gen::new(seed);
    let n = gen.dim();
    let k = gen.dim();
    let f = gen.extquad(n);
    let mut a = gen.matrix(n, k);
    if k >= 2 && gen.coin(0.3) {
        let col = a.column(0).into_owned();
        a.set_column(k - 1, &col);
    }
    let b = if gen.coin(0.2) { DVector::zeros(n) } else { gen.vector(n) };
    let map = AffineMap::new(a, b).unwrap();
    let h = f.precompose(&map).map_err(|e| e.to_string())?;
    for y in gen.points(&h, 50) {
        let x = map.apply(&y).unwrap();
        let expected = eval(&f, &x);
        let actual = eval(&h, &y);
        if !agree(expected, actual, expected) {
            return Err(mismatch("precompose", &y, expected, actual));
        }
    }
    Ok(())
}

pub fn check_reduce(seed: u64) -> Result<(), String> {
    let mut gen = Gen::new(seed);
    let n = gen.dim();
    let f = gen.extquad(n);
    let Some(r) = f.reduce() else {
        if f.free_param().is_some() {
            return Err("reduce failed on a feasible function".into());
        }
        return Ok(());
    };
    let gram = r.f() * r.f().transpose();
    let p = gram.nrows();
    if (gram - DMatrix::identity(p, p)).amax() > 1e-10 {
        return Err("reduced constraint rows are not orthonormal".into());
    }
    for x in gen.points(&f, 50) {
        let expected = eval(&f, &x);
        let actual = eval(&r, &x);
        if !agree(expected, actual, expected) {
            return Err(mismatch("reduce", &x, expected, actual));
        }
    }
    Ok(())
}

pub fn check_reduce_idempotent(seed: u64) -> Result<(), String> {
    let mut gen = Gen::new(seed);
    let n = gen.dim();
    let f = gen.extquad(n);
    let Some(r1) = f.reduce() else {
        return Ok(());
    };
    let r2 = r1.reduce().ok_or("second reduce failed")?;
    if r1.f().shape() != r2.f().shape() {
        return Err("reduce changed the constraint count".into());
    }
    for i in 0..r1.f().nrows() {
        let same = (r1.f().row(i) - r2.f().row(i)).amax().max((r1.g()[i] - r2.g()[i]).abs());
        let flipped = (r1.f().row(i) + r2.f().row(i)).amax().max((r1.g()[i] + r2.g()[i]).abs());
        if same.min(flipped) > 1e-12 {
            return Err(format!("row {i} differs after a second reduce"));
        }
    }
    if !r1.equals(&r2) || !f.equals(&r1) {
        return Err("reduce does not preserve equality".into());
    }
    Ok(())
}

pub fn check_equality_invariance(seed: u64) -> Result<(), String> {
    let mut gen = Gen::new(seed);
    let n = gen.dim();
    let f = gen.extquad(n);
    let other = gen.extquad(n);
    let t = gen.invertible(f.num_constraints());
    let ft = ExtendedQuadratic::new(
        f.p().clone(),
        f.q().clone(),
        f.r(),
        &t * f.f(),
        &t * f.g(),
    )
    .unwrap();
    if !f.equals(&f) {
        return Err("equals is not reflexive".into());
    }
    if f.equals(&other) != other.equals(&f) {
        return Err("equals is not symmetric".into());
    }
    if !f.equals(&ft) || !ft.equals(&f) {
        return Err("equals changed under an invertible row transform".into());
    }
    if f.is_proper() {
        let ok = |a: &ExtendedQuadratic, b: &ExtendedQuadratic| {
            matches!(a.constraints_equal(b), Ok(true))
        };
        if !ok(&f, &f) || !ok(&f, &ft) || !ok(&ft, &f) {
            return Err("constraints_equal is not reflexive or T-invariant".into());
        }
        if other.is_proper() && f.constraints_equal(&other).ok() != other.constraints_equal(&f).ok() {
            return Err("constraints_equal is not symmetric".into());
        }
        let shifted = ExtendedQuadratic::new(
            f.p().clone(),
            f.q().clone(),
            f.r() + 1.0,
            f.f().clone(),
            f.g().clone(),
        )
        .unwrap();
        if f.equals(&shifted) {
            return Err("equals ignores a constant shift".into());
        }
    }
    Ok(())
}

/// `f(x, u)` convex in `u`, with feasible constraints.
fn convex_in_u(gen: &mut Gen, nx: usize, nu: usize) -> ExtendedQuadratic {
    let n = nx + nu;
    let l = gen.matrix(n + 1, n + 1);
    let mut m = &l * l.transpose();
    let s = gen.symmetric(nx + 1) * 3.0;
    for i in 0..=nx {
        for j in 0..=nx {
            let (a, b) = (if i == nx { n } else { i }, if j == nx { n } else { j });
            m[(a, b)] += s[(i, j)];
        }
    }
    let (f, g) = gen.constraints(n, 2, false);
    ExtendedQuadratic::from_coefficients(&m, f, g).unwrap()
}

fn joint(x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(x.len() + u.len(), x.iter().chain(u.iter()).cloned())
}

pub fn check_minimization(seed: u64) -> Result<(), String> {
    let mut gen = Gen::new(seed);
    let nx = gen.int(1, 4);
    let nu = gen.int(1, 3);
    let f = convex_in_u(&mut gen, nx, nu);
    let Minimization::Attained { value, minimizer } =
        f.partial_min(nx, nu).map_err(|e| e.to_string())?
    else {
        return Err("partial_min did not attain on a feasible convex instance".into());
    };
    let f_x = f.f().columns(0, nx).into_owned();
    let f_u = f.f().columns(nx, nu).into_owned();
    let null = svd_split(&f_u).v2;
    let steps = [-1.0, -0.5, -0.1, 0.0, 0.1, 0.5, 1.0];
    let d = null.ncols();
    for x in gen.points(&value, 20) {
        let gx = eval(&value, &x);
        if gx.is_infinite() {
            continue;
        }
        let u = minimizer.apply(&x).unwrap();
        let fu = eval(&f, &joint(&x, &u));
        let resid = amax(&(&f_x * &x + &f_u * &u + f.g()));
        if resid > 1e-8 * amax(f.g()).max(1.0) {
            return Err(format!("minimizer residual {resid} at {:?}", x.as_slice()));
        }
        if !agree(gx, fu, gx) {
            return Err(mismatch("f(x, u*(x)) vs g(x)", &x, gx, fu));
        }
        let mut idx = vec![0usize; d];
        loop {
            let z = DVector::from_iterator(d, idx.iter().map(|&i| steps[i]));
            let trial = &u + &null * z;
            let ft = eval(&f, &joint(&x, &trial));
            if ft < gx - 1e-6 * gx.abs().max(1.0) {
                return Err(mismatch("lattice beats g", &x, gx, ft));
            }
            let mut k = 0;
            while k < d {
                idx[k] += 1;
                if idx[k] < steps.len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == d {
                break;
            }
        }
    }
    Ok(())
}

pub fn check_convexity(seed: u64) -> Result<(), String> {
    let mut gen = Gen::new(seed);
    let n = gen.dim();
    let f = gen.extquad(n);
    if !f.is_proper() || !f.is_convex().unwrap() {
        return Ok(());
    }
    for _ in 0..100 {
        let x = gen.feasible_point(&f);
        let y = gen.feasible_point(&f);
        let mid = (&x + &y) * 0.5;
        let (fx, fy, fm) = (eval(&f, &x), eval(&f, &y), eval(&f, &mid));
        let bound = 0.5 * (fx + fy);
        if fm > bound + 1e-8 * fx.abs().max(fy.abs()).max(1.0) {
            return Err(mismatch("midpoint above chord", &mid, bound, fm));
        }
    }
    Ok(())
}

pub fn check_nonnegative(seed: u64) -> Result<(), String> {
    let mut gen = Gen::new(seed);
    let n = gen.dim();
    let f = gen.extquad(n);
    if !f.is_proper() || !f.is_nonnegative().unwrap() {
        return Ok(());
    }
    for _ in 0..50 {
        let x = gen.feasible_point(&f);
        let v = eval(&f, &x);
        if v < -1e-8 {
            return Err(mismatch("negative value", &x, 0.0, v));
        }
    }
    Ok(())
}

fn is_homogeneous(f: &ExtendedQuadratic) -> bool {
    amax(f.q()) <= 1e-10 && f.r().abs() <= 1e-10 && amax(f.g()) <= 1e-10
}

fn homogeneous(gen: &mut Gen, n: usize, convex: bool) -> ExtendedQuadratic {
    let p = if convex { gen.psd(n) + DMatrix::identity(n, n) } else { gen.symmetric(n) };
    let rows = gen.int(0, n.min(3));
    let f = gen.matrix(rows, n);
    ExtendedQuadratic::new(p, DVector::zeros(n), 0.0, f, DVector::zeros(rows)).unwrap()
}

pub fn check_homogeneity(seed: u64) -> Result<(), String> {
    let mut gen = Gen::new(seed);
    let n = gen.dim();
    let f1 = homogeneous(&mut gen, n, false);
    let f2 = homogeneous(&mut gen, n, false);
    let sum = f1.add(&f2).map_err(|e| e.to_string())?;
    if !is_homogeneous(&sum) {
        return Err("add lost homogeneity".into());
    }
    if !is_homogeneous(&f1.scale(gen.uniform(-2.0, 2.0))) {
        return Err("scale lost homogeneity".into());
    }
    let k = gen.dim();
    let a = gen.matrix(n, k);
    let pre = f1.precompose(&AffineMap::linear(a)).map_err(|e| e.to_string())?;
    if !is_homogeneous(&pre) {
        return Err("precompose with a linear map lost homogeneity".into());
    }
    let nx = gen.int(1, 4);
    let nu = gen.int(1, 3);
    let f = homogeneous(&mut gen, nx + nu, true);
    match f.partial_min(nx, nu).map_err(|e| e.to_string())? {
        Minimization::Attained { value, minimizer } => {
            if !is_homogeneous(&value) {
                return Err("partial_min value lost homogeneity".into());
            }
            if amax(minimizer.offset()) > 1e-10 {
                return Err("minimizer has a nonzero offset".into());
            }
        }
        other => return Err(format!("partial_min returned {:?}", other.status())),
    }
    Ok(())
}
