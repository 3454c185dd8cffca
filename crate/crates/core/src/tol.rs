use serde::{Deserialize, Serialize};

/// Numerical tolerances shared by solvers and certificates.
///
/// Every certificate in the crate reads its thresholds from here, so a run
/// is fully described by its inputs plus one `Tolerances` value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative Frobenius residual accepted for Riccati solutions.
    pub riccati_residual: f64,
    /// Relative Frobenius residual accepted for Lyapunov solutions.
    pub lyapunov_residual: f64,
    /// Relative singular-value threshold for rank decisions (PBH, C rank).
    pub rank: f64,
    /// A matrix is Hurwitz when its spectral abscissa is below `-hurwitz_margin`.
    pub hurwitz_margin: f64,
    /// Required LMI margin: `λ_max(F) <= -lmi_margin * max(1, ‖F‖₂)`.
    pub lmi_margin: f64,
    /// Slack allowed in the cost chain `Σ tr S̃ᵢ <= J_ach <= Γ̂`.
    pub cost_chain: f64,
    /// Relative duality-gap bound at which the barrier method stops.
    pub sdp_gap: f64,
    /// Laplacian eigenvalues below this magnitude are snapped to zero.
    pub zero_eigenvalue: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            riccati_residual: 1e-8,
            lyapunov_residual: 1e-10,
            rank: 1e-9,
            hurwitz_margin: 0.0,
            lmi_margin: 1e-7,
            cost_chain: 1e-6,
            sdp_gap: 1e-10,
            zero_eigenvalue: 1e-10,
        }
    }
}
