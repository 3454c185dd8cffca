//! Distributed LQR for `N` identical agents `ẋᵢ = Axᵢ + Buᵢ`.
//!
//! The network cost penalises absolute states through `Q₁` and pairwise
//! differences through `Q₂`. Under these structured weights the centralized
//! Riccati solution splits into two `n×n` blocks, which is what makes both
//! the top-down truncation and the bottom-up gain `I⊗K + ℒ⊗ΦK` possible.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::dist_observer::{synthesize_observer, ObserverDesign, SynthesisOptions};
use crate::graphs::{max_degree_bound, GraphTopology};
use crate::matops::{
    check_pd, check_psd, check_square, is_hurwitz, is_symmetric, kron, solve_care_with, spd_inverse, sym_eigen,
    sym_sqrt, try_inverse, AgentModel,
};
use crate::mee_node::MeeWeights;
use crate::{Error, Mat, Result, Tolerances};

/// Absolute-state weight `Q₁`, relative-state weight `Q₂`, input weight `R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LqrWeights {
    pub q1: Mat,
    pub q2: Mat,
    pub r: Mat,
}

impl LqrWeights {
    pub fn new(q1: Mat, q2: Mat, r: Mat) -> Result<Self> {
        let w = Self { q1, q2, r };
        w.validate(None)?;
        Ok(w)
    }

    pub fn validate(&self, model: Option<&AgentModel>) -> Result<()> {
        let n = self.q1.nrows();
        check_square(&self.q1, n, "Q1")?;
        check_square(&self.q2, n, "Q2")?;
        if let Some(model) = model {
            check_square(&self.q1, model.n(), "Q1")?;
            check_square(&self.r, model.control_input()?.ncols(), "R")?;
        }
        check_psd(&self.q1, "Q1")?;
        check_psd(&self.q2, "Q2")?;
        check_pd(&self.r, "R")?;
        Ok(())
    }
}

/// `Q̃ = I_N⊗(Q₁+NQ₂) − J_N⊗Q₂` and `R̃ = I_N⊗R`.
///
/// Diagonal blocks are `Q₁+(N−1)Q₂`, off-diagonal blocks `−Q₂`.
pub fn structured_weights(w: &LqrWeights, n_agents: usize) -> (Mat, Mat) {
    let eye = Mat::identity(n_agents, n_agents);
    let ones = Mat::from_element(n_agents, n_agents, 1.0);
    let q = kron(&eye, &(&w.q1 + &w.q2 * n_agents as f64)) - kron(&ones, &w.q2);
    (q, kron(&eye, &w.r))
}

/// Centralized network LQR solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentralizedLqr {
    pub p: Mat,
    pub k: Mat,
}

/// Solves the network ARE for `(I⊗A, I⊗B, Q̃, R̃)`; `K̃ = −R̃⁻¹B̃ᵀP̃`.
pub fn centralized_lqr(model: &AgentModel, n_agents: usize, q_tilde: &Mat, r_tilde: &Mat) -> Result<CentralizedLqr> {
    centralized_lqr_with(model, n_agents, q_tilde, r_tilde, &Tolerances::default())
}

pub fn centralized_lqr_with(
    model: &AgentModel,
    n_agents: usize,
    q_tilde: &Mat,
    r_tilde: &Mat,
    tol: &Tolerances,
) -> Result<CentralizedLqr> {
    let b = model.control_input()?;
    let eye = Mat::identity(n_agents, n_agents);
    let a_net = kron(&eye, &model.a);
    let b_net = kron(&eye, b);
    let p = solve_care_with(&a_net, &b_net, q_tilde, r_tilde, tol)?;
    let k = -spd_inverse(r_tilde, "R̃")? * b_net.transpose() * &p;
    Ok(CentralizedLqr { p, k })
}

/// Block construction of the centralized solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopDownResult {
    pub n_agents: usize,
    /// Node ARE solution for `(A, B, Q₁, R)`.
    pub p: Mat,
    /// Off-diagonal block `P̃₂` of the network solution.
    pub p2: Mat,
    /// Full network solution `P̃ = I⊗(P − NP̃₂) + J⊗P̃₂`.
    pub p_tilde: Mat,
    pub k1: Mat,
    pub k2: Mat,
    pub k_tilde: Mat,
    /// Frobenius residual of the network ARE at `P̃`.
    pub residual: f64,
    a: Mat,
    b: Mat,
    r_inv_bt: Mat,
}

impl TopDownResult {
    /// Local decentralized gain `K = −R⁻¹BᵀP`.
    pub fn local_gain(&self) -> Mat {
        -&self.r_inv_bt * &self.p
    }
}

/// Builds `P̃` from two `n×n` Riccati equations.
///
/// `P` solves the node ARE with weight `Q₁`. With `X = BR⁻¹Bᵀ`,
/// `U = −NP̃₂` is the stabilising solution of the ARE in `(A − XP, B, NQ₂, R)`,
/// so `P + U` is the solution on the disagreement subspace.
pub fn topdown_blocks(model: &AgentModel, w: &LqrWeights, n_agents: usize) -> Result<TopDownResult> {
    topdown_blocks_with(model, w, n_agents, &Tolerances::default())
}

pub fn topdown_blocks_with(model: &AgentModel, w: &LqrWeights, n_agents: usize, tol: &Tolerances) -> Result<TopDownResult> {
    if n_agents == 0 {
        return Err(Error::InvalidArgument("a network needs at least one agent".into()));
    }
    w.validate(Some(model))?;
    let b = model.control_input()?.clone();
    let nf = n_agents as f64;
    let r_inv_bt = spd_inverse(&w.r, "R")? * b.transpose();

    let p = solve_care_with(&model.a, &b, &w.q1, &w.r, tol)?;
    let a_cl = &model.a - &b * &r_inv_bt * &p;
    let u = solve_care_with(&a_cl, &b, &(&w.q2 * nf), &w.r, tol)?;
    let p2 = -&u / nf;

    let eye = Mat::identity(n_agents, n_agents);
    let ones = Mat::from_element(n_agents, n_agents, 1.0);
    let p_tilde = kron(&eye, &(&p + &u)) + kron(&ones, &p2);
    let k1 = -&r_inv_bt * (&p + &u + &p2);
    let k2 = -&r_inv_bt * &p2;
    let k_tilde = kron(&eye, &(&k1 - &k2)) + kron(&ones, &k2);

    let (q_tilde, r_tilde) = structured_weights(w, n_agents);
    let a_net = kron(&eye, &model.a);
    let b_net = kron(&eye, &b);
    let res = (a_net.transpose() * &p_tilde + &p_tilde * &a_net
        - &p_tilde * &b_net * spd_inverse(&r_tilde, "R̃")? * b_net.transpose() * &p_tilde
        + q_tilde)
        .norm();
    if res > 1e-6 * p_tilde.norm().max(1.0) {
        return Err(Error::Inconsistent(format!(
            "assembled network Riccati solution has residual {res:.3e} (‖P̃‖ = {:.3e})",
            p_tilde.norm()
        )));
    }

    Ok(TopDownResult { n_agents, p, p2, p_tilde, k1, k2, k_tilde, residual: res, a: model.a.clone(), b, r_inv_bt })
}

/// Truncated top-down gain together with its certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncatedGain {
    pub k_hat: Mat,
    /// Every nonzero eigenvalue of `M` exceeds `N_L/2`.
    pub condition_ok: bool,
    pub nonzero_eigs: Vec<f64>,
    /// `N_L = d_max + 1`.
    pub n_l: usize,
    pub abscissa: f64,
    pub hurwitz: bool,
    pub diagnostic: Option<String>,
}

/// `K̂ = −I⊗R⁻¹BᵀP + M⊗R⁻¹BᵀP̃₂`, a sparse gain following the pattern of `M`.
///
/// The eigenvalue condition on `M` is sufficient for stability, not
/// necessary: a stable truncation with `condition_ok = false` is returned
/// as is, and an unstable one despite the condition carries a diagnostic.
pub fn topdown_truncate(tr: &TopDownResult, m: &Mat, g: &GraphTopology) -> Result<TruncatedGain> {
    topdown_truncate_with(tr, m, g, &Tolerances::default())
}

pub fn topdown_truncate_with(tr: &TopDownResult, m: &Mat, g: &GraphTopology, tol: &Tolerances) -> Result<TruncatedGain> {
    let n_agents = tr.n_agents;
    check_square(m, n_agents, "M")?;
    if g.n() != n_agents {
        return Err(Error::Dimension(format!("graph has {} vertices, design has {n_agents} agents", g.n())));
    }
    if !is_symmetric(m, 1e-12) {
        return Err(Error::AsymmetricWeight("M"));
    }
    let (eigs, _) = sym_eigen(m);
    let zero = tol.zero_eigenvalue * m.norm().max(1.0);
    let nonzero_eigs: Vec<f64> = eigs.into_iter().filter(|l| l.abs() > zero).collect();
    let n_l = max_degree_bound(g);
    let condition_ok = nonzero_eigs.iter().all(|&l| l > n_l as f64 / 2.0);

    let eye = Mat::identity(n_agents, n_agents);
    let k_hat = -kron(&eye, &(&tr.r_inv_bt * &tr.p)) + kron(m, &(&tr.r_inv_bt * &tr.p2));
    let closed = network_closed_loop(&tr.a, &tr.b, &k_hat, n_agents)?;
    let stab = is_hurwitz(&closed)?;

    let diagnostic = match (condition_ok, stab.hurwitz) {
        (true, false) => {
            let msg = format!("eigenvalue condition holds but closed loop is unstable (abscissa {:.3e})", stab.abscissa);
            warn!("{msg}");
            Some(msg)
        }
        (false, true) => Some(format!(
            "eigenvalue condition fails (N_L/2 = {}) yet closed loop is stable (abscissa {:.3e})",
            n_l as f64 / 2.0,
            stab.abscissa
        )),
        (false, false) => Some(format!("eigenvalue condition fails and closed loop is unstable (abscissa {:.3e})", stab.abscissa)),
        (true, true) => None,
    };
    Ok(TruncatedGain { k_hat, condition_ok, nonzero_eigs, n_l, abscissa: stab.abscissa, hurwitz: stab.hurwitz, diagnostic })
}

/// `K̂ = I_N⊗K + ℒ⊗ΦK`.
pub fn bottomup_gain(k: &Mat, phi: &Mat, g: &GraphTopology) -> Result<Mat> {
    check_square(phi, k.nrows(), "Φ")?;
    let eye = Mat::identity(g.n(), g.n());
    Ok(kron(&eye, k) + kron(g.laplacian(), &(phi * k)))
}

/// `I_N⊗A + (I_N⊗B)K̂`.
pub fn network_closed_loop(a: &Mat, b: &Mat, k_hat: &Mat, n_agents: usize) -> Result<Mat> {
    let (n, m1) = (a.nrows(), b.ncols());
    if k_hat.nrows() != n_agents * m1 || k_hat.ncols() != n_agents * n {
        return Err(Error::Dimension(format!(
            "network gain must be {}×{}, got {}×{}",
            n_agents * m1,
            n_agents * n,
            k_hat.nrows(),
            k_hat.ncols()
        )));
    }
    let eye = Mat::identity(n_agents, n_agents);
    Ok(kron(&eye, a) + kron(&eye, b) * k_hat)
}

/// Bottom-up controller obtained from the observer synthesis on the dual system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BottomUpController {
    /// Local gain `K = −R⁻¹BᵀP`.
    pub k: Mat,
    /// Coupling gain, `K̂ = I⊗K + ℒ⊗ΦK`.
    pub phi: Mat,
    pub k_hat: Mat,
    /// `Γ̂` of the dual synthesis.
    pub bound: f64,
    pub abscissa: f64,
    pub dual: ObserverDesign,
}

/// Dual estimation data for `(A, B)` with weights `(Q₁, Q₂, R)`:
/// `(Aᵀ, B̄ = Q₁^{1/2}, C = Bᵀ)` with output weights `R⁻¹`, `B⁺Q₂B⁺ᵀ` and
/// disturbance weight `I`, where `B⁺ = (BᵀB)⁻¹Bᵀ`.
///
/// The dual node ARE is the control ARE, so the dual gain is `PBR⁻¹ = −Kᵀ`.
pub fn dual_estimation_problem(model: &AgentModel, w: &LqrWeights) -> Result<(AgentModel, MeeWeights)> {
    w.validate(Some(model))?;
    let b = model.control_input()?;
    let n = model.n();
    let dual = AgentModel::estimation(model.a.transpose(), sym_sqrt(&w.q1), b.transpose())?;
    let b_pinv = try_inverse(&(b.transpose() * b), "BᵀB")? * b.transpose();
    let weights = MeeWeights::new(spd_inverse(&w.r, "R")?, &b_pinv * &w.q2 * b_pinv.transpose(), Mat::identity(n, n))?;
    Ok((dual, weights))
}

/// `K = −L_dualᵀ`, `Φ = Φ_dualᵀ`: the controller closed loop is the transpose
/// of the dual observer error matrix.
pub fn bottomup_controller_via_duality(
    model: &AgentModel,
    w: &LqrWeights,
    g: &GraphTopology,
    opts: &SynthesisOptions,
    tol: &Tolerances,
) -> Result<BottomUpController> {
    let (dual_model, dual_weights) = dual_estimation_problem(model, w)?;
    let dual = synthesize_observer(&dual_model, &dual_weights, g, opts, tol)?;
    let k = -dual.l_original().transpose();
    let phi = dual.phi.transpose();
    let k_hat = bottomup_gain(&k, &phi, g)?;
    let closed = network_closed_loop(&model.a, model.control_input()?, &k_hat, g.n())?;
    let stab = is_hurwitz(&closed)?;
    if !stab.hurwitz {
        return Err(Error::NotHurwitz { what: "bottom-up network closed loop".into(), abscissa: stab.abscissa });
    }
    Ok(BottomUpController { k, phi, k_hat, bound: dual.gamma_hat, abscissa: stab.abscissa, dual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{complete_graph, cyclic_graph};

    fn s(v: f64) -> Mat {
        Mat::from_element(1, 1, v)
    }

    fn integrator() -> AgentModel {
        AgentModel::controlled(s(0.0), s(1.0)).unwrap()
    }

    #[test]
    fn structured_weight_examples() {
        let w = LqrWeights::new(s(1.0), s(1.0), s(1.0)).unwrap();
        let (q, r) = structured_weights(&w, 3);
        assert_eq!(q, Mat::from_row_slice(3, 3, &[3.0, -1.0, -1.0, -1.0, 3.0, -1.0, -1.0, -1.0, 3.0]));
        assert_eq!(r, Mat::identity(3, 3));
        let (q, r) = structured_weights(&w, 1);
        assert_eq!((q, r), (s(1.0), s(1.0)));
        let w0 = LqrWeights::new(s(2.0), s(0.0), s(1.0)).unwrap();
        assert_eq!(structured_weights(&w0, 4).0, Mat::identity(4, 4) * 2.0);
    }

    #[test]
    fn scalar_centralized_closed_form() {
        let w = LqrWeights::new(s(1.0), s(1.0), s(1.0)).unwrap();
        let (q, r) = structured_weights(&w, 3);
        let sol = centralized_lqr(&integrator(), 3, &q, &r).unwrap();
        let expected = Mat::identity(3, 3) * 2.0 - Mat::from_element(3, 3, 1.0 / 3.0);
        assert!((&sol.p - &expected).norm() < 1e-10);
        assert!((&sol.k + &expected).norm() < 1e-10);
    }

    #[test]
    fn scalar_topdown_closed_form() {
        let w = LqrWeights::new(s(1.0), s(1.0), s(1.0)).unwrap();
        let tr = topdown_blocks(&integrator(), &w, 3).unwrap();
        assert!((tr.p[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((tr.p2[(0, 0)] + 1.0 / 3.0).abs() < 1e-12);
        assert!((tr.p_tilde[(0, 0)] - 5.0 / 3.0).abs() < 1e-12);
        assert!((tr.k1[(0, 0)] + 5.0 / 3.0).abs() < 1e-12);
        assert!((tr.k2[(0, 0)] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn zero_relative_weight_decouples() {
        let model = AgentModel::controlled(Mat::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]), Mat::from_row_slice(2, 1, &[0.0, 1.0]))
            .unwrap();
        let w = LqrWeights::new(Mat::identity(2, 2), Mat::zeros(2, 2), s(1.0)).unwrap();
        let tr = topdown_blocks(&model, &w, 4).unwrap();
        assert!(tr.p2.norm() < 1e-12);
        let g = cyclic_graph(4).unwrap();
        let t = topdown_truncate(&tr, g.laplacian(), &g).unwrap();
        let expected = kron(&Mat::identity(4, 4), &tr.local_gain());
        assert!((t.k_hat - expected).norm() < 1e-12);
    }

    #[test]
    fn truncation_condition() {
        let model = AgentModel::controlled(Mat::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]), Mat::from_row_slice(2, 1, &[0.0, 1.0]))
            .unwrap();
        let w = LqrWeights::new(Mat::identity(2, 2), Mat::identity(2, 2), s(1.0)).unwrap();

        let g = cyclic_graph(5).unwrap();
        let tr = topdown_blocks(&model, &w, 5).unwrap();
        let t = topdown_truncate(&tr, g.laplacian(), &g).unwrap();
        assert!(!t.condition_ok);
        assert_eq!(t.n_l, 3);
        assert!(t.diagnostic.is_some());

        let t = topdown_truncate(&tr, &Mat::zeros(5, 5), &g).unwrap();
        assert!(t.condition_ok && t.hurwitz);

        let k5 = complete_graph(5).unwrap();
        let t = topdown_truncate(&tr, k5.laplacian(), &k5).unwrap();
        assert!(t.condition_ok && t.hurwitz);
        // on the complete graph the truncation reproduces the centralized gain
        assert!((&t.k_hat - &tr.k_tilde).norm() < 1e-10 * tr.k_tilde.norm());
    }

    #[test]
    fn truncation_rejects_bad_m() {
        let w = LqrWeights::new(s(1.0), s(1.0), s(1.0)).unwrap();
        let tr = topdown_blocks(&integrator(), &w, 3).unwrap();
        let g = cyclic_graph(3).unwrap();
        assert!(topdown_truncate(&tr, &Mat::zeros(2, 2), &g).is_err());
        let mut m = Mat::zeros(3, 3);
        m[(0, 1)] = 1.0;
        assert!(matches!(topdown_truncate(&tr, &m, &g), Err(Error::AsymmetricWeight("M"))));
    }

    #[test]
    fn bottomup_reductions() {
        let k = Mat::from_row_slice(1, 2, &[-1.0, -2.0]);
        let g = cyclic_graph(4).unwrap();
        assert_eq!(bottomup_gain(&k, &s(0.0), &g).unwrap(), kron(&Mat::identity(4, 4), &k));
        let single = crate::graphs::build_graph(1, &[]).unwrap();
        assert_eq!(bottomup_gain(&k, &s(0.7), &single).unwrap(), k);
        assert!(bottomup_gain(&k, &Mat::zeros(2, 2), &g).is_err());
    }

    #[test]
    fn duality_controller() {
        let model = AgentModel::controlled(Mat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -0.1]), Mat::from_row_slice(2, 1, &[0.0, 1.0]))
            .unwrap();
        let w = LqrWeights::new(Mat::identity(2, 2) * 10.0, Mat::identity(2, 2), s(1.0)).unwrap();
        let g = cyclic_graph(5).unwrap();
        let tol = Tolerances::default();
        let c = bottomup_controller_via_duality(&model, &w, &g, &SynthesisOptions::grouped(), &tol).unwrap();
        assert!(c.abscissa < 0.0);
        // the local gain is the LQR gain of the node problem
        let p = solve_care_with(&model.a, model.control_input().unwrap(), &w.q1, &w.r, &tol).unwrap();
        let k = -model.control_input().unwrap().transpose() * p;
        assert!((&c.k - k).norm() < 1e-8);
        // closed loop is the transpose of the dual observer error matrix
        let closed = network_closed_loop(&model.a, model.control_input().unwrap(), &c.k_hat, 5).unwrap();
        let dual_err = {
            let (dm, _) = dual_estimation_problem(&model, &w).unwrap();
            let l = c.dual.l_original();
            kron(&Mat::identity(5, 5), &(&dm.a - l * &dm.c)) - kron(g.laplacian(), &(l * &c.dual.phi * &dm.c))
        };
        assert!((closed.transpose() - dual_err).norm() < 1e-10);
    }

    #[test]
    fn duality_without_relative_weight() {
        let model = AgentModel::controlled(Mat::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]), Mat::from_row_slice(2, 1, &[0.0, 1.0]))
            .unwrap();
        let w = LqrWeights::new(Mat::identity(2, 2), Mat::zeros(2, 2), s(1.0)).unwrap();
        let g = cyclic_graph(4).unwrap();
        let c = bottomup_controller_via_duality(&model, &w, &g, &SynthesisOptions::grouped(), &Tolerances::default()).unwrap();
        assert!(c.phi.norm() < 1e-6);
    }
}
