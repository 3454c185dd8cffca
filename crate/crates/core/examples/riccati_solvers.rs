//! Control and estimation Riccati equations, Lyapunov equations and PBH diagnostics.
//!
//! Run with `cargo run --example riccati_solvers`.

use distlqr::matops::{
    is_hurwitz, solve_care, solve_dual_are, solve_lyapunov, unobservable_eigenvalue,
};
use distlqr::{Error, Mat};

fn main() -> distlqr::Result<()> {
    // Double integrator.
    let a = Mat::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
    let b = Mat::from_row_slice(2, 1, &[0.0, 1.0]);
    let q = Mat::identity(2, 2);
    let r = Mat::identity(1, 1);

    let p = solve_care(&a, &b, &q, &r)?;
    let k = -(b.transpose() * &p);
    let residual = (a.transpose() * &p + &p * &a - &p * &b * b.transpose() * &p + &q).norm();
    println!("CARE: P =\n{p}K = −R⁻¹BᵀP = {k}residual = {residual:.2e}");
    let cl = &a + &b * &k;
    println!("closed loop Hurwitz: {:?}", is_hurwitz(&cl)?);

    // Estimation ARE with position measurement.
    let c = Mat::from_row_slice(1, 2, &[1.0, 0.0]);
    let est = solve_dual_are(&a, &b, &c, &Mat::from_element(1, 1, 10.0), &r)?;
    println!("dual ARE: S =\n{}L = SCᵀQ = {}", est.s, est.l);

    // Closed-loop Gramian.
    let w = solve_lyapunov(&cl, &Mat::identity(2, 2))?;
    println!("Lyapunov (A−BK)W + W(A−BK)ᵀ + I = 0: W =\n{w}");

    // Unobservable unstable mode: the solver refuses with a PBH diagnostic.
    let a_bad = Mat::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]);
    let c_bad = Mat::from_row_slice(1, 2, &[1.0, 0.0]);
    println!("PBH test: {:?}", unobservable_eigenvalue(&a_bad, &c_bad, true, 1e-9)?);
    match solve_dual_are(&a_bad, &Mat::identity(2, 2), &c_bad, &r, &Mat::identity(2, 2)) {
        Err(e @ Error::Pbh { .. }) => println!("dual ARE rejected: {e}"),
        other => println!("unexpected: {other:?}"),
    }
    Ok(())
}
