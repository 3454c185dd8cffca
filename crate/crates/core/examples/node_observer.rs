//! Node-level minimum-energy observer and the coordinate changes that make
//! the node covariance block diagonal.
//!
//! Run with `cargo run --example node_observer`.

use distlqr::matops::solve_dual_are;
use distlqr::mee_node::design_node_observer;
use distlqr::{AgentModel, Mat, Tolerances};

fn main() -> distlqr::Result<()> {
    // Three states, two outputs that mix the states.
    let model = AgentModel::estimation(
        Mat::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, -1.0, -2.0, -1.5]),
        Mat::from_row_slice(3, 1, &[0.0, 0.0, 1.0]),
        Mat::from_row_slice(2, 3, &[1.0, 1.0, 0.0, 0.0, 1.0, 1.0]),
    )?;
    let q1 = Mat::identity(2, 2) * 5.0;
    let r = Mat::identity(1, 1);
    let node = design_node_observer(&model, &q1, &r, &Tolerances::default())?;

    println!("rotation T (Cx ↦ [0 C₂]) =\n{}", node.normalized.t);
    println!("C T⁻¹ =\n{}", &model.c * node.normalized.t.transpose());
    println!("T̂ =\n{}", node.t_hat);
    println!("Ŝ (block diagonal) =\n{}", node.hat.s);
    println!("L̂ = [0; L̂₂] =\n{}", node.hat.l);
    println!("node cost trace(S) = {:.6}, trace(Ŝ) = {:.6}", node.j_node_original, node.j_node);

    let direct = solve_dual_are(&model.a, &model.b_dist, &model.c, &q1, &r)?;
    println!(
        "gain in original coordinates vs direct solve: ‖ΔL‖ = {:.2e}",
        (&node.gain.l_original - &direct.l).norm()
    );
    println!("‖T̂T · (T̂T)⁻¹ − I‖ = {:.2e}", (node.to_hat() * node.from_hat() - Mat::identity(3, 3)).norm());
    Ok(())
}
