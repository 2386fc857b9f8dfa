//! Seed-to-seed spread of Monte Carlo value functions, and its decay with N.

use eqdp::dp::{mc_error, McOptions};
use eqdp::problems::random_lqr_scalar;

fn main() {
    let spec = random_lqr_scalar(1.1, 1.0, 0.5, 0.3, 5).unwrap();
    let seeds: Vec<u64> = (0..40).collect();
    let mut last = None;
    for n in [100, 200, 400, 800] {
        let report = mc_error(&spec, &McOptions::new(n, 0), &seeds).unwrap();
        let spread = report.entry(0, 0).unwrap().v_max_std.unwrap();
        let ratio = last.map_or(String::new(), |l: f64| format!("  ratio {:.3}", spread / l));
        println!("N={n:<4} std of V_0 coefficients {spread:.4e}{ratio}");
        last = Some(spread);
    }
    println!("expected ratio per doubling: {:.3}", 0.5f64.sqrt());
}
