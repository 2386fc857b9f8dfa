//! Liquidating a position: the frictionless case and a lognormal price model.

use eqdp::dp::{dp_finite, simulate, McOptions};
use eqdp::problems::{execution_random_horizon, optimal_execution, ExecutionData};
use nalgebra::{dmatrix, dvector};

fn main() {
    let data = ExecutionData::frictionless(1, 1.0, 7);
    let sol = dp_finite(&optimal_execution(&data).unwrap(), &McOptions::default()).unwrap();
    let gains: Vec<String> = (0..7)
        .map(|t| format!("{:.3}", sol.policy(t, 0).unwrap().gain()[(0, 0)]))
        .collect();
    println!("frictionless sell fractions: {}", gains.join(" "));
    println!("V_0 q^2 coefficient: {:.6}", sol.value(0, 0).unwrap().p()[(0, 0)]);

    let data = ExecutionData {
        gamma_tr: dvector![1e-3],
        g_imp: dmatrix![1e-4],
        gamma_ex: dvector![1e-4],
        mu: dvector![0.0013],
        sigma2: dvector![0.0153f64.powi(2)],
        horizon: 30,
        terminal_liquidation: true,
    };
    let spec = optimal_execution(&data).unwrap();
    let sol = dp_finite(&spec, &McOptions::new(100, 7)).unwrap();
    let x0 = dvector![2000.0, 222.0];
    let proceeds: Vec<f64> = (0..10)
        .map(|seed| -simulate(&spec, &sol, &x0, 0, 30, seed).unwrap().total_cost)
        .collect();
    println!("mean proceeds over 10 seeds: {:.0}", proceeds.iter().sum::<f64>() / 10.0);

    // A deadline that arrives with certainty at t = 10.
    let mut p = vec![0.0; 30];
    p[10] = 1.0;
    let spec = execution_random_horizon(&data, &p).unwrap();
    let sol = dp_finite(&spec, &McOptions::new(100, 7)).unwrap();
    let tr = simulate(&spec, &sol, &x0, 0, 30, 0).unwrap();
    println!("holdings at t=11: {:.3e}", tr.states[11][0]);
}
