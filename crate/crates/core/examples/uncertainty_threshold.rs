//! Scalar LQR with random coefficients: value growth across the uncertainty threshold.

use eqdp::dp::{dp_finite, dp_infinite, Backend, McOptions};
use eqdp::problems::{random_lqr_recursion, random_lqr_scalar};

fn main() {
    let opts = McOptions::default().with_backend(Backend::Exact);
    for sigma_a in [0.0, 0.5, 0.81, 1.0, 1.21] {
        let spec = random_lqr_scalar(1.1, 1.0, sigma_a, 0.0, 50).unwrap();
        let sol = dp_finite(&spec, &opts).unwrap();
        let k0 = sol.value(0, 0).unwrap().p()[(0, 0)] / 2.0;
        let oracle = random_lqr_recursion(1.1, 1.0, sigma_a, 0.0, 50)[0];
        let long = dp_infinite(&spec, &opts, 200).unwrap();
        println!(
            "sigma_a={sigma_a:<5} k_0={k0:<12.6e} recursion={oracle:<12.6e} 200 iterations: {}",
            long.worst_status()
        );
    }
}
