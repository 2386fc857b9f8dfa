//! LQR with actuator failures modeled as modes.

use eqdp::dp::{dp_infinite, McOptions};
use eqdp::json::mat_to_rows;
use eqdp::problems::fault_tolerant;
use nalgebra::{dmatrix, DMatrix};

fn main() {
    // Sampled data of a continuous-time system, digits as published.
    #[allow(clippy::approx_constant)]
    let a = dmatrix![2.71828, 0.0; 0.0, 0.36788];
    let b = dmatrix![1.71828, 1.71828; -0.63212, 0.63212];
    let pi = dmatrix![
        0.943, 0.069, 0.026;
        0.03, 0.854, 0.04;
        0.027, 0.077, 0.934
    ];
    let eye = DMatrix::identity(2, 2);
    // nothing failed, input 0 failed, input 1 failed
    let spec = fault_tolerant(&a, &b, &[vec![], vec![0], vec![1]], pi, &eye, &eye).unwrap();
    let sol = dp_infinite(&spec, &McOptions::default(), 1000).unwrap();
    println!("converged to {:e}", sol.meta.convergence.unwrap());
    for s in 0..3 {
        println!("mode {s}: K = {:.4?}", mat_to_rows(sol.policy(0, s).unwrap().gain()));
    }
}
