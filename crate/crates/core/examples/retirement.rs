//! Consumption and allocation until death, with a bequest motive.

use eqdp::dp::{dp_finite, simulate, McOptions};
use eqdp::problems::{retirement, Lognormal, RetirementData, Utility};
use nalgebra::{dmatrix, dvector};

fn main() {
    let returns = Lognormal::from_moments(
        &dvector![1.0854, 1.0005, 1.0169],
        &dmatrix![
            0.0316, 0.00077, 0.00003;
            0.00077, 0.00142, 0.00139;
            0.00003, 0.00139, 0.00673
        ],
    )
    .unwrap();
    // Gompertz-style mortality from age 60, certain death at 110.
    let mut death_probs: Vec<f64> = (0..50).map(|i| (0.008 * (0.09 * i as f64).exp()).min(1.0)).collect();
    death_probs[49] = 1.0;
    let data = RetirementData {
        death_probs,
        returns,
        consumption: Utility::new(0.2, 20.0).unwrap(),
        bequest: Utility::new(0.002, 4.0).unwrap(),
        risk_aversion: 0.01,
    };
    let spec = retirement(&data).unwrap();
    let sol = dp_finite(&spec, &McOptions::new(100, 3)).unwrap();
    println!("status: {}", sol.worst_status());

    // Show the longest-lived of a few sample paths.
    let tr = (0..20)
        .map(|seed| simulate(&spec, &sol, &dvector![3000.0], 0, 50, seed).unwrap())
        .max_by_key(|tr| tr.modes.iter().filter(|&&s| s == 0).count())
        .unwrap();
    for t in (0..50).step_by(5) {
        if tr.modes[t] != 0 {
            println!("age {}: deceased", 60 + t);
            break;
        }
        let pol = sol.policy(t, tr.modes[t]).unwrap();
        let w = tr.states[t][0];
        let c = w - tr.inputs[t].sum();
        // C = (1 - 1^T K) W - 1^T k
        let c_policy = (1.0 - pol.gain().sum()) * w - pol.offset().sum();
        println!(
            "age {}: wealth={w:.0} consumption={c:.2} (from policy {c_policy:.2})",
            60 + t
        );
    }
}
