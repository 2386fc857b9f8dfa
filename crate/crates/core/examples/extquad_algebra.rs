//! Sums, compositions and partial minimization of extended quadratics.

use eqdp::extquad::{AffineMap, ExtendedQuadratic, Minimization};
use nalgebra::{dmatrix, dvector};

fn main() {
    // f(x, u) = 1/2 (x^2 + u^2) - x subject to x + u = 1
    let f = ExtendedQuadratic::new(
        dmatrix![1.0, 0.0; 0.0, 1.0],
        dvector![-1.0, 0.0],
        0.0,
        dmatrix![1.0, 1.0],
        dvector![-1.0],
    )
    .unwrap();
    println!("f(1, 0) = {}", f.evaluate(&dvector![1.0, 0.0]).unwrap());
    println!("f(0, 0) = {}", f.evaluate(&dvector![0.0, 0.0]).unwrap());

    match f.partial_min(1, 1).unwrap() {
        Minimization::Attained { value, minimizer } => {
            println!("min over u: 1/2 {:.3} x^2 + {:.3} x + {:.3}", value.p()[(0, 0)], value.q()[0], value.r());
            println!("constrained: {}", value.is_constrained());
            println!("u*(x) = {:.6} x + {:.6}", minimizer.gain()[(0, 0)], minimizer.offset()[0]);
        }
        other => println!("minimization failed: {:?}", other.status()),
    }

    let g = ExtendedQuadratic::quadratic(dmatrix![2.0, 0.0; 0.0, 0.0], dvector![0.0, 1.0], 3.0).unwrap();
    let sum = f.add(&g).unwrap();
    println!("(f + g)(1, 0) = {}", sum.evaluate(&dvector![1.0, 0.0]).unwrap());

    // f(A y + b) for a scalar y
    let map = AffineMap::new(dmatrix![1.0; -1.0], dvector![0.5, 0.5]).unwrap();
    let h = f.precompose(&map).unwrap();
    println!("f(y + 0.5, 0.5 - y) at y = 0.5: {}", h.evaluate(&dvector![0.5]).unwrap());
    println!("convex: {}, nonnegative: {}", h.is_convex().unwrap(), h.is_nonnegative().unwrap());
}
