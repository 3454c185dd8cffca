//! Bottom-up distributed LQR obtained from the observer synthesis on the dual system.
//!
//! Run with `cargo run --release --example bottomup_lqr`.

use distlqr::dist_observer::SynthesisOptions;
use distlqr::dlqr::{bottomup_controller_via_duality, LqrWeights};
use distlqr::graphs::path_graph;
use distlqr::matops::solve_care;
use distlqr::{AgentModel, Mat, Tolerances};

fn main() -> distlqr::Result<()> {
    let a = Mat::from_row_slice(2, 2, &[0.0, 1.0, -2.0, 0.5]);
    let b = Mat::from_row_slice(2, 1, &[0.0, 1.0]);
    let model = AgentModel::controlled(a.clone(), b.clone())?;
    let g = path_graph(4)?;
    let q1 = Mat::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
    let r = Mat::identity(1, 1);

    let p = solve_care(&a, &b, &q1, &r)?;
    println!("local LQR gain −R⁻¹BᵀP = {}", -(b.transpose() * &p));
    for q2 in [0.0, 3.0, 10.0] {
        let w = LqrWeights::new(q1.clone(), Mat::identity(2, 2) * q2, r.clone())?;
        let c = bottomup_controller_via_duality(&model, &w, &g, &SynthesisOptions::grouped(), &Tolerances::default())?;
        println!(
            "Q₂ = {q2:>4}: K = {:.4?}, Φ = {:.4}, bound = {:.4}, closed-loop abscissa = {:.4}, dual certificate {}",
            c.k.as_slice(),
            c.phi[(0, 0)],
            c.bound,
            c.abscissa,
            if c.dual.certificate.passed { "passed" } else { "FAILED" }
        );
    }
    Ok(())
}
