//! Point mass tracking one of three randomly switching targets.

use eqdp::dp::{dp_infinite, simulate, McOptions};
use eqdp::problems::{double_integrator, multi_mission};
use nalgebra::{dmatrix, dvector, DMatrix, DVector};

fn main() {
    let (a, b) = double_integrator();
    let targets = [dvector![-1.0, 0.5], dvector![-1.0, -0.25], dvector![1.0, 0.0]];
    let pi = dmatrix![
        0.97, 0.0075, 0.015;
        0.003, 0.97, 0.015;
        0.027, 0.0225, 0.97
    ];
    let switching = multi_mission(&a, &b, &targets, 0.1, pi).unwrap();
    let fixed = multi_mission(&a, &b, &targets, 0.1, DMatrix::identity(3, 3)).unwrap();
    let opts = McOptions::default();
    let sw = dp_infinite(&switching, &opts, 50).unwrap();
    let ind = dp_infinite(&fixed, &opts, 50).unwrap();

    let x0 = DVector::zeros(4);
    let (mut ca, mut cb) = (0.0, 0.0);
    for seed in 0..100 {
        ca += simulate(&switching, &sw, &x0, 0, 100, seed).unwrap().mean_stage_cost();
        cb += simulate(&switching, &ind, &x0, 0, 100, seed).unwrap().mean_stage_cost();
    }
    println!("average cost: switching {:.3}, non-switching {:.3}", ca / 100.0, cb / 100.0);

    let tr = simulate(&switching, &sw, &x0, 0, 100, 0).unwrap();
    for t in (0..=100).step_by(20) {
        let x = &tr.states[t];
        println!("t={t:>3} mode={} p=({:+.3}, {:+.3})", tr.modes[t], x[0], x[1]);
    }
}
