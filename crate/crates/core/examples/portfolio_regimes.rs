//! Self-financing portfolio in a two-regime market.

use eqdp::dp::{dp_finite, simulate, McOptions};
use eqdp::linalg::pinv;
use eqdp::problems::{portfolio, Lognormal, PortfolioData, Regime};
use nalgebra::{dmatrix, dvector};

fn main() {
    let calm = Regime {
        returns: Lognormal::from_moments(
            &dvector![1.0008, 1.0004, 1.0001],
            &dmatrix![1e-4, 2e-5, 0.0; 2e-5, 4e-5, 0.0; 0.0, 0.0, 1e-6],
        )
        .unwrap(),
        b: dvector![1e-3, 1e-3, 1e-4],
    };
    let stressed = Regime {
        returns: Lognormal::from_moments(
            &dvector![0.999, 1.0001, 1.0002],
            &dmatrix![4e-4, 1e-4, 0.0; 1e-4, 1e-4, 0.0; 0.0, 0.0, 1e-6],
        )
        .unwrap(),
        b: dvector![4e-3, 2e-3, 1e-4],
    };
    let data = PortfolioData {
        regimes: vec![calm, stressed],
        risk_aversion: 0.1,
        pi: dmatrix![0.95, 0.1; 0.05, 0.9],
    };
    let spec = portfolio(&data, 30).unwrap();
    let sol = dp_finite(&spec, &McOptions::new(50, 11)).unwrap();
    println!("status: {}", sol.worst_status());

    for s in 0..2 {
        let pol = sol.policy(0, s).unwrap();
        // u = K (h - h*) with h* = -K^+ k
        let target = -pinv(pol.gain()) * pol.offset();
        println!("regime {s}: desired holdings {:.4?}", target.as_slice());
    }

    let tr = simulate(&spec, &sol, &dvector![0.3, 0.3, 0.4], 0, 30, 0).unwrap();
    let worst = tr.inputs.iter().map(|u| u.sum().abs()).fold(0.0, f64::max);
    println!("largest |1^T u| along the path: {worst:.2e}");
    println!("final value: {:.5}", tr.states.last().unwrap().sum());
}
