//! The in-crate log-det barrier solver on a small standalone LMI problem:
//! the smallest `γ` with `AᵀX + XA + I ⪯ 0`, `X ⪯ γI` (a Lyapunov bound).
//!
//! Run with `cargo run --example lmi_solver`.

use distlqr::dist_observer::lmi::{find_feasible, solve, BarrierOptions, LmiBlock, LmiProblem};
use distlqr::matops::solve_lyapunov;
use distlqr::{Mat, Vector};

fn sym2(x: &[f64]) -> Mat {
    Mat::from_row_slice(2, 2, &[x[0], x[1], x[1], x[2]])
}

fn main() -> distlqr::Result<()> {
    let a = Mat::from_row_slice(2, 2, &[-1.0, 2.0, 0.0, -3.0]);
    // Variables: X₁₁, X₁₂, X₂₂, γ. Objective: γ.
    let nvars = 4;
    let lyap = LmiBlock::from_affine("Lyapunov", nvars, 1e-9, |x| {
        let xm = sym2(x);
        a.transpose() * &xm + &xm * &a + Mat::identity(2, 2)
    });
    let bound = LmiBlock::from_affine("X ⪯ γI", nvars, 1e-9, |x| sym2(x) - Mat::identity(2, 2) * x[3]);
    let positive = LmiBlock::from_affine("X ≻ 0", nvars, 1e-9, |x| -sym2(x));
    let p = LmiProblem { nvars, c: Vector::from_vec(vec![0.0, 0.0, 0.0, 1.0]), blocks: vec![lyap, bound, positive] };

    let x0 = find_feasible(&p, &Vector::zeros(nvars), 1e4)?;
    let res = solve(&p, &x0, &BarrierOptions::default())?;
    println!("γ* = {:.8} after {} Newton steps (gap {:.1e})", res.objective, res.newton_steps, res.gap);

    // The optimum is the largest eigenvalue of the Lyapunov solution itself.
    let x_lyap = solve_lyapunov(&a.transpose(), &Mat::identity(2, 2))?;
    let lmax = x_lyap.symmetric_eigenvalues().max();
    println!("λ_max of the Lyapunov solution = {lmax:.8}");
    Ok(())
}
