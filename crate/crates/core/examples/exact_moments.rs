//! Exact expectations from second moments vs Monte Carlo sampling.

use eqdp::dp::{dp_finite, Backend, McOptions};
use eqdp::problems::{random_lqr_recursion, random_lqr_scalar};

fn main() {
    let spec = random_lqr_scalar(1.1, 1.0, 0.5, 0.3, 10).unwrap();
    let oracle = random_lqr_recursion(1.1, 1.0, 0.5, 0.3, 10)[0];
    let exact = dp_finite(&spec, &McOptions::default().with_backend(Backend::Exact)).unwrap();
    println!("recursion k_0 = {oracle:.10}");
    println!("exact     k_0 = {:.10}", exact.value(0, 0).unwrap().p()[(0, 0)] / 2.0);
    for n in [10, 100, 1000, 10_000] {
        let mc = dp_finite(&spec, &McOptions::new(n, 1)).unwrap();
        println!("N={n:<6}  k_0 = {:.10}", mc.value(0, 0).unwrap().p()[(0, 0)] / 2.0);
    }
}
