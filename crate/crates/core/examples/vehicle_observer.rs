//! Distributed observer for five vehicles on a ring, for several relative-error weights.
//!
//! Run with `cargo run --release --example vehicle_observer`.

use std::time::Instant;

use distlqr::dist_observer::{synthesize_observer, SynthesisOptions};
use distlqr::graphs::cyclic_graph;
use distlqr::mee_node::MeeWeights;
use distlqr::{AgentModel, Mat, Tolerances};

fn main() -> distlqr::Result<()> {
    let model = AgentModel::estimation(
        Mat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -0.1]),
        Mat::from_row_slice(2, 1, &[0.0, 1.0]),
        Mat::from_row_slice(1, 2, &[1.0, 0.0]),
    )?;
    let g = cyclic_graph(5)?;
    let tol = Tolerances::default();

    for q2 in [0.0, 5.0, 25.0] {
        let start = Instant::now();
        let w = MeeWeights::scalar(10.0, q2, 1.0)?;
        let d = synthesize_observer(&model, &w, &g, &SynthesisOptions::grouped(), &tol)?;
        let c = &d.certificate;
        println!("Q2 = {q2}");
        println!("  L (original)     = [{:.4}; {:.4}]", d.l_original()[0], d.l_original()[1]);
        println!("  L̂ (hat)          = [{:.4}; {:.4}]", d.node.hat.l[0], d.node.hat.l[1]);
        println!("  Φ                = {:.6}   (analytic centre {:.3e})", d.phi[(0, 0)], d.phi_analytic_center[(0, 0)]);
        println!("  Σ tr S̃ᵢ ≤ J_ach ≤ Γ̂ : {:.6} ≤ {:.6} ≤ {:.6}", d.cost_lower, d.j_ach, d.gamma_hat);
        println!("  abscissa(A_e)    = {:.6}", c.abscissa);
        println!("  mode-union error = {:.2e}", c.mode_union_error);
        let worst = c.lmi_margins.iter().map(|m| m.max_eig - m.required).fold(f64::NEG_INFINITY, f64::max);
        println!("  worst LMI slack  = {worst:.3e} (must be ≤ 0)");
        println!("  certificate      = {}", if c.passed { "passed" } else { "FAILED" });
        println!("  time             = {:.2?}", start.elapsed());
    }
    Ok(())
}
