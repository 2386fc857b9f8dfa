//! Two-mode scalar jump LQR: switching-aware vs mode-independent policies.

use eqdp::dp::{dp_infinite, simulate, McOptions};
use eqdp::problems::{jump_lqr, JumpMode};
use nalgebra::{dmatrix, dvector, DMatrix};

fn main() {
    let modes = [
        JumpMode::linear(dmatrix![1.2], dmatrix![0.1]),
        JumpMode::linear(dmatrix![0.8], dmatrix![-0.1]),
    ];
    let half = dmatrix![0.5];
    let pi = dmatrix![0.8, 0.2; 0.2, 0.8];
    let switching = jump_lqr(&modes, pi, &half, &half).unwrap();
    let independent = jump_lqr(&modes, DMatrix::identity(2, 2), &half, &half).unwrap();

    let opts = McOptions::default();
    for iterations in [20, 1000] {
        let sol = dp_infinite(&switching, &opts, iterations).unwrap();
        let g: Vec<f64> = (0..2).map(|s| sol.policy(0, s).unwrap().gain()[(0, 0)]).collect();
        println!("{iterations:>4} iterations: gains {:.4} {:.4}", g[0], g[1]);
    }

    let sw = dp_infinite(&switching, &opts, 1000).unwrap();
    let ind = dp_infinite(&independent, &opts, 1000).unwrap();
    // Both policies run on the switching system with matched seeds.
    let x0 = dvector![10.0];
    let (mut a, mut b) = (0.0, 0.0);
    for seed in 0..100 {
        a += simulate(&switching, &sw, &x0, 0, 100, seed).unwrap().mean_stage_cost();
        b += simulate(&switching, &ind, &x0, 0, 100, seed).unwrap().mean_stage_cost();
    }
    println!("mean stage cost: switching {:.3}, independent {:.3}", a / 100.0, b / 100.0);
}
