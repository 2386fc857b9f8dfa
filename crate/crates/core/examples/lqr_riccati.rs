//! Infinite-horizon LQR by value iteration, checked against the Riccati fixed point.

use eqdp::dp::{dp_infinite, McOptions};
use eqdp::json::mat_to_rows;
use eqdp::problems::{lqr, riccati_fixed_point, LqrData};
use nalgebra::{dmatrix, DMatrix};

fn main() {
    let data = LqrData::new(
        dmatrix![1.1, 0.2; 0.0, 0.9],
        dmatrix![0.0; 1.0],
        DMatrix::identity(2, 2),
        dmatrix![1.0],
    );
    let spec = lqr(&data).unwrap();
    let sol = dp_infinite(&spec, &McOptions::default(), 50).unwrap();
    let oracle = riccati_fixed_point(&data, 100_000).unwrap();

    // V(x) = 1/2 x^T P_dp x, so P_dp / 2 is the Riccati matrix.
    let p = sol.value(0, 0).unwrap().p() / 2.0;
    let k = sol.policy(0, 0).unwrap().gain();
    println!("P (dp)      = {:.6?}", mat_to_rows(&p));
    println!("P (riccati) = {:.6?}", mat_to_rows(&oracle.p));
    println!("K (dp)      = {:.6?}", mat_to_rows(k));
    println!("K (riccati) = {:.6?}", mat_to_rows(&oracle.k));
    println!(
        "relative errors: P {:.2e}, K {:.2e}",
        (&p - &oracle.p).norm() / oracle.p.norm(),
        (k - &oracle.k).norm() / oracle.k.norm()
    );
}
