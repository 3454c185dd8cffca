//! Design report written by `synthesize` (`schema_version` 1).
//!
//! Matrices use the same nested-row layout as the config.

use serde::{Deserialize, Serialize};

use super::config::{mat_rows, Mode, SCHEMA_VERSION};
use crate::dist_observer::{LmiMargin, ObserverDesign, PhiSelection};
use crate::dlqr::{BottomUpController, TopDownResult, TruncatedGain};
use crate::Tolerances;

type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

impl ToolInfo {
    pub fn current() -> Self {
        Self { name: env!("CARGO_PKG_NAME").into(), version: env!("CARGO_PKG_VERSION").into() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub synthesis_ms: f64,
    pub verification_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeReport {
    pub lambda: f64,
    pub multiplicity: usize,
    #[serde(rename = "Q")]
    pub q: Rows,
    /// `trace(S̃ᵢ)` of the mode ARE optimum.
    pub are_trace: f64,
}

/// `Σ mult·trace(S̃ᵢ) <= J_ach <= Γ̂`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostChain {
    pub are_sum: f64,
    pub j_ach: f64,
    pub gamma_hat: f64,
    pub sdp_optimum: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObserverCertificate {
    pub passed: bool,
    pub abscissa: f64,
    pub hurwitz: bool,
    /// `[λᵢ, abscissa]` pairs.
    pub mode_abscissas: Vec<(f64, f64)>,
    pub mode_union_error: f64,
    pub mode_union_relative: f64,
    pub lmi_ok: bool,
    pub lmi_margins: Vec<LmiMargin>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObserverReport {
    #[serde(rename = "T")]
    pub t: Rows,
    #[serde(rename = "T_hat")]
    pub t_hat: Rows,
    /// Node gain in original coordinates.
    #[serde(rename = "L")]
    pub l: Rows,
    #[serde(rename = "L_hat")]
    pub l_hat: Rows,
    #[serde(rename = "S")]
    pub s: Rows,
    #[serde(rename = "S_hat")]
    pub s_hat: Rows,
    pub node_cost: f64,
    pub laplacian_eigenvalues: Vec<f64>,
    pub phi_selection: PhiSelection,
    #[serde(rename = "Phi")]
    pub phi: Rows,
    #[serde(rename = "Phi_analytic_center")]
    pub phi_analytic_center: Rows,
    pub modes: Vec<ModeReport>,
    pub costs: CostChain,
    #[serde(rename = "A_e")]
    pub a_e: Rows,
    #[serde(rename = "G_y")]
    pub g_y: Rows,
    pub certificate: ObserverCertificate,
}

impl ObserverReport {
    pub fn from_design(d: &ObserverDesign) -> Self {
        let c = &d.certificate;
        Self {
            t: mat_rows(&d.node.normalized.t),
            t_hat: mat_rows(&d.node.t_hat),
            l: mat_rows(d.l_original()),
            l_hat: mat_rows(&d.node.hat.l),
            s: mat_rows(&d.node.gain.s_original),
            s_hat: mat_rows(&d.node.hat.s),
            node_cost: d.node.j_node_original,
            laplacian_eigenvalues: d.lambdas.clone(),
            phi_selection: d.phi_selection,
            phi: mat_rows(&d.phi),
            phi_analytic_center: mat_rows(&d.phi_analytic_center),
            modes: d
                .modes
                .iter()
                .zip(&d.mode_are_traces)
                .map(|(m, &t)| ModeReport { lambda: m.lambda, multiplicity: m.multiplicity, q: mat_rows(&m.q), are_trace: t })
                .collect(),
            costs: CostChain {
                are_sum: d.cost_lower,
                j_ach: d.j_ach,
                gamma_hat: d.gamma_hat,
                sdp_optimum: d.sdp_optimum,
                holds: c.chain_ok,
            },
            a_e: mat_rows(&d.a_e),
            g_y: mat_rows(&d.g_y),
            certificate: ObserverCertificate {
                passed: c.passed,
                abscissa: c.abscissa,
                hurwitz: c.hurwitz,
                mode_abscissas: c.mode_abscissas.clone(),
                mode_union_error: c.mode_union_error,
                mode_union_relative: c.mode_union_relative,
                lmi_ok: c.lmi_ok,
                lmi_margins: c.lmi_margins.clone(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationReport {
    #[serde(rename = "M")]
    pub m: Rows,
    #[serde(rename = "K_hat")]
    pub k_hat: Rows,
    pub condition_ok: bool,
    pub nonzero_eigenvalues: Vec<f64>,
    pub n_l: usize,
    pub abscissa: f64,
    pub hurwitz: bool,
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopDownReport {
    #[serde(rename = "P")]
    pub p: Rows,
    #[serde(rename = "P2")]
    pub p2: Rows,
    #[serde(rename = "P_tilde")]
    pub p_tilde: Rows,
    #[serde(rename = "K")]
    pub k: Rows,
    #[serde(rename = "K1")]
    pub k1: Rows,
    #[serde(rename = "K2")]
    pub k2: Rows,
    #[serde(rename = "K_tilde")]
    pub k_tilde: Rows,
    pub are_residual: f64,
    pub truncation: TruncationReport,
}

impl TopDownReport {
    pub fn new(tr: &TopDownResult, m: &crate::Mat, tg: &TruncatedGain) -> Self {
        Self {
            p: mat_rows(&tr.p),
            p2: mat_rows(&tr.p2),
            p_tilde: mat_rows(&tr.p_tilde),
            k: mat_rows(&tr.local_gain()),
            k1: mat_rows(&tr.k1),
            k2: mat_rows(&tr.k2),
            k_tilde: mat_rows(&tr.k_tilde),
            are_residual: tr.residual,
            truncation: TruncationReport {
                m: mat_rows(m),
                k_hat: mat_rows(&tg.k_hat),
                condition_ok: tg.condition_ok,
                nonzero_eigenvalues: tg.nonzero_eigs.clone(),
                n_l: tg.n_l,
                abscissa: tg.abscissa,
                hurwitz: tg.hurwitz,
                diagnostic: tg.diagnostic.clone(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BottomUpReport {
    #[serde(rename = "K")]
    pub k: Rows,
    #[serde(rename = "Phi")]
    pub phi: Rows,
    #[serde(rename = "K_hat")]
    pub k_hat: Rows,
    /// Cost bound of the dual observer synthesis.
    pub bound: f64,
    pub abscissa: f64,
    /// The dual observer design the controller was read from.
    pub dual: ObserverReport,
}

impl BottomUpReport {
    pub fn new(c: &BottomUpController) -> Self {
        Self {
            k: mat_rows(&c.k),
            phi: mat_rows(&c.phi),
            k_hat: mat_rows(&c.k_hat),
            bound: c.bound,
            abscissa: c.abscissa,
            dual: ObserverReport::from_design(&c.dual),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignReport {
    pub schema_version: u32,
    pub tool: ToolInfo,
    pub mode: Mode,
    pub n_agents: usize,
    pub tolerances: Tolerances,
    pub verified: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observer: Option<ObserverReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lqr_topdown: Option<TopDownReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lqr_bottomup: Option<BottomUpReport>,
    pub timings: Timings,
}

impl DesignReport {
    pub fn new(mode: Mode, n_agents: usize, tolerances: Tolerances) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            tool: ToolInfo::current(),
            mode,
            n_agents,
            tolerances,
            verified: false,
            observer: None,
            lqr_topdown: None,
            lqr_bottomup: None,
            timings: Timings::default(),
        }
    }
}
