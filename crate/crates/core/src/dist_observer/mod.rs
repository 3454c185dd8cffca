//! Distributed minimum-energy observer synthesis.
//!
//! Each agent runs the node observer in hat coordinates and adds a
//! correction `L̂Φ` driven by the sum of relative output errors with its
//! neighbours. The network error matrix
//!
//! ```text
//! A_e = I_N⊗(Â − L̂Ĉ) − ℒ⊗L̂ΦĈ
//! ```
//!
//! is similar (through the Laplacian eigenvectors) to a block diagonal of
//! mode matrices `Â − L̂Ĉ − λᵢL̂ΦĈ`, one per eigenvalue `λᵢ` of `ℒ`. The
//! coupling gain `Φ` comes from an SDP whose objective `Γ̂` upper-bounds the
//! sum of per-mode minimum-energy costs.
//!
//! `Γ̂` alone can be flat in `Φ` (the shared `W₂` block is pinned by the
//! `λ = 0` mode), so by default `Φ` is chosen to minimise the achieved cost
//! among the points whose SDP bound stays at the optimum.

pub mod lmi;
pub mod sdp;

use log::{debug, info};
use serde::{Deserialize, Serialize};

use crate::graphs::GraphTopology;
use crate::matops::{
    eigenvalues, is_hurwitz, kron, max_sym_eigenvalue, norm2, solve_dual_are_with, solve_lyapunov_with, try_inverse,
    AgentModel,
};
use crate::mee_node::{design_node_observer, HatModel, MeeWeights, NodeObserver};
use crate::{Error, Mat, Result, Tolerances, Vector};

pub use sdp::{build_sdp, build_sdp_fixed_phi, solve_sdp, ObserverSdp, SdpSolution};

/// One decoupled estimation problem with output weight `Qᵢ = Q₁ + λᵢQ₂`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeProblem {
    /// Position of (the first copy of) `λᵢ` in the ascending Laplacian spectrum.
    pub index: usize,
    pub lambda: f64,
    pub q: Mat,
    /// Number of Laplacian eigenvalues represented by this problem.
    pub multiplicity: usize,
}

/// `A_e = I⊗(Â−L̂Ĉ) − ℒ⊗L̂ΦĈ` and the output injection `G_y = I⊗L̂ + ℒ⊗L̂Φ`.
pub fn assemble_observer(hat: &HatModel, phi: &Mat, g: &GraphTopology) -> Result<(Mat, Mat)> {
    let m = hat.m();
    if phi.nrows() != m || phi.ncols() != m {
        return Err(Error::Dimension(format!("Φ must be {m}×{m}, got {}×{}", phi.nrows(), phi.ncols())));
    }
    let eye = Mat::identity(g.n(), g.n());
    let lphi = &hat.l * phi;
    let a_e = kron(&eye, &hat.closed_loop()) - kron(g.laplacian(), &(&lphi * &hat.c));
    let g_y = kron(&eye, &hat.l) + kron(g.laplacian(), &lphi);
    Ok((a_e, g_y))
}

/// One mode per Laplacian eigenvalue, in ascending order.
pub fn decouple_modes(q1: &Mat, q2: &Mat, g: &GraphTopology) -> Result<Vec<ModeProblem>> {
    g.eigvals()
        .iter()
        .enumerate()
        .map(|(index, &lambda)| {
            let q = q1 + q2 * lambda;
            if crate::matops::min_sym_eigenvalue(&q) <= 0.0 {
                return Err(Error::IndefiniteWeight("Qᵢ = Q₁ + λᵢQ₂"));
            }
            Ok(ModeProblem { index, lambda, q, multiplicity: 1 })
        })
        .collect()
}

/// Merges modes whose eigenvalues agree to `tol·max(1, λ_max)`, adding multiplicities.
pub fn group_modes(modes: &[ModeProblem], tol: f64) -> Vec<ModeProblem> {
    let scale = modes.iter().map(|m| m.lambda.abs()).fold(1.0, f64::max);
    let mut out: Vec<ModeProblem> = Vec::new();
    for md in modes {
        match out.iter_mut().find(|o| (o.lambda - md.lambda).abs() <= tol * scale) {
            Some(o) => o.multiplicity += md.multiplicity,
            None => out.push(md.clone()),
        }
    }
    out
}

/// Stabilising solution `S̃ᵢ` of the hat-coordinate dual ARE with weight `Qᵢ`.
pub fn per_mode_optimum(mp: &ModeProblem, hat: &HatModel, r: &Mat, tol: &Tolerances) -> Result<Mat> {
    Ok(solve_dual_are_with(&hat.a, &hat.b_dist, &hat.c, &mp.q, r, tol)?.s)
}

/// `Φ = L̂₂⁻¹W₂⁻¹Ŷ₂`.
pub fn recover_phi(sol: &SdpSolution, l2: &Mat) -> Result<Mat> {
    Ok(try_inverse(l2, "L̂₂")? * try_inverse(&sol.w2, "W₂")? * &sol.y2)
}

/// Per-mode Lyapunov solutions at a fixed `Φ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AchievedCost {
    /// `J_ach = Σ multiplicity · trace(Sᵢ)`.
    pub total: f64,
    pub per_mode: Vec<f64>,
    pub solutions: Vec<Mat>,
}

struct ModeData {
    f: Mat,
    g: Mat,
    q_inv: Mat,
}

fn mode_data(hat: &HatModel, phi: &Mat, md: &ModeProblem) -> Result<ModeData> {
    let lphi = &hat.l * phi;
    let f = hat.closed_loop() - &lphi * &hat.c * md.lambda;
    let g = &hat.l + lphi * md.lambda;
    Ok(ModeData { f, g, q_inv: try_inverse(&md.q, "Qᵢ")? })
}

/// `J_ach` from `(Â_c − λᵢL̂ΦĈ)Sᵢ + Sᵢ(·)ᵀ + B̂̄R⁻¹B̂̄ᵀ + (L̂+λᵢL̂Φ)Qᵢ⁻¹(L̂+λᵢL̂Φ)ᵀ = 0`.
pub fn achieved_cost(hat: &HatModel, phi: &Mat, modes: &[ModeProblem], r: &Mat, tol: &Tolerances) -> Result<AchievedCost> {
    let bb = disturbance_gramian(hat, r)?;
    let mut total = 0.0;
    let mut per_mode = Vec::with_capacity(modes.len());
    let mut solutions = Vec::with_capacity(modes.len());
    for md in modes {
        let d = mode_data(hat, phi, md)?;
        let stab = is_hurwitz(&d.f)?;
        if !stab.hurwitz {
            return Err(Error::NotHurwitz { what: format!("mode {} (λ = {:.6})", md.index, md.lambda), abscissa: stab.abscissa });
        }
        let w = &bb + &d.g * &d.q_inv * d.g.transpose();
        let s = solve_lyapunov_with(&d.f, &w, tol)?;
        let tr = s.trace();
        total += md.multiplicity as f64 * tr;
        per_mode.push(tr);
        solutions.push(s);
    }
    Ok(AchievedCost { total, per_mode, solutions })
}

fn disturbance_gramian(hat: &HatModel, r: &Mat) -> Result<Mat> {
    if hat.q() == 0 {
        return Ok(Mat::zeros(hat.n(), hat.n()));
    }
    Ok(&hat.b_dist * try_inverse(r, "R")? * hat.b_dist.transpose())
}

/// Gradient of `J_ach` with respect to `Φ`, by the adjoint Lyapunov equations
/// `FᵢᵀPᵢ + PᵢFᵢ + I = 0`:
/// `∂J/∂Φ = Σ mult·λᵢ·2L̂ᵀPᵢ(GᵢQᵢ⁻¹ − SᵢĈᵀ)`.
pub fn achieved_cost_gradient(
    hat: &HatModel,
    phi: &Mat,
    modes: &[ModeProblem],
    r: &Mat,
    tol: &Tolerances,
) -> Result<(AchievedCost, Mat)> {
    let cost = achieved_cost(hat, phi, modes, r, tol)?;
    let n = hat.n();
    let mut grad = Mat::zeros(phi.nrows(), phi.ncols());
    for (md, s) in modes.iter().zip(&cost.solutions) {
        if md.lambda == 0.0 {
            continue;
        }
        let d = mode_data(hat, phi, md)?;
        let p = solve_lyapunov_with(&d.f.transpose(), &Mat::identity(n, n), tol)?;
        let inner = &d.g * &d.q_inv - s * hat.c.transpose();
        grad += hat.l.transpose() * &p * inner * (2.0 * md.lambda * md.multiplicity as f64);
    }
    Ok((cost, grad))
}

/// Quasi-Newton (BFGS) minimisation of `J_ach` over `Φ` from `phi0`.
pub fn minimize_achieved_cost(hat: &HatModel, modes: &[ModeProblem], r: &Mat, phi0: &Mat, tol: &Tolerances) -> Result<Mat> {
    let (rows, cols) = (phi0.nrows(), phi0.ncols());
    let dim = rows * cols;
    let eval = |x: &Vector| -> Option<(f64, Vector)> {
        let phi = Mat::from_column_slice(rows, cols, x.as_slice());
        let (c, g) = achieved_cost_gradient(hat, &phi, modes, r, tol).ok()?;
        Some((c.total, Vector::from_column_slice(g.as_slice())))
    };
    let mut x = Vector::from_column_slice(phi0.as_slice());
    let (mut f, mut g) = eval(&x).ok_or_else(|| Error::Numerical("achieved cost undefined at the SDP point".into()))?;
    let mut h = Mat::identity(dim, dim);
    let mut scaled = false;
    for _ in 0..200 {
        if g.norm() <= 1e-12 * f.abs().max(1.0) {
            break;
        }
        let mut d = -(&h * &g);
        if g.dot(&d) >= 0.0 {
            h = Mat::identity(dim, dim);
            d = -g.clone();
        }
        let slope = g.dot(&d);
        let mut alpha = 1.0;
        let mut next = None;
        for _ in 0..60 {
            let trial = &x + &d * alpha;
            if let Some((f1, g1)) = eval(&trial) {
                if f1 <= f + 1e-4 * alpha * slope {
                    next = Some((trial, f1, g1));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((x1, f1, g1)) = next else { break };
        let s = &x1 - &x;
        let y = &g1 - &g;
        let sy = s.dot(&y);
        if sy > 1e-300 {
            if !scaled {
                h *= sy / y.dot(&y);
                scaled = true;
            }
            let rho = 1.0 / sy;
            let eye = Mat::identity(dim, dim);
            let left = &eye - &s * y.transpose() * rho;
            let right = &eye - &y * s.transpose() * rho;
            h = &left * &h * &right + &s * s.transpose() * rho;
        }
        let step = s.norm();
        x = x1;
        f = f1;
        g = g1;
        if step <= 1e-15 * x.norm().max(1.0) {
            break;
        }
    }
    Ok(Mat::from_column_slice(rows, cols, x.as_slice()))
}

/// How the coupling gain is picked from the optimal face of the SDP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhiSelection {
    /// Minimise `J_ach` subject to the SDP bound staying at its optimum.
    #[default]
    MinAchievedCost,
    /// Use the barrier solution of the SDP as is.
    AnalyticCenter,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisOptions {
    pub phi_selection: PhiSelection,
    /// Solve one SDP mode per distinct eigenvalue.
    pub group_modes: bool,
}

impl SynthesisOptions {
    pub fn grouped() -> Self {
        Self { group_modes: true, ..Self::default() }
    }
}

/// LMI block value at the returned point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmiMargin {
    pub label: String,
    pub max_eig: f64,
    /// The block must satisfy `max_eig <= required`.
    pub required: f64,
}

/// Independent checks of a synthesized design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub abscissa: f64,
    pub hurwitz: bool,
    /// `(λᵢ, abscissa of Â − L̂Ĉ − λᵢL̂ΦĈ)` per Laplacian eigenvalue.
    pub mode_abscissas: Vec<(f64, f64)>,
    /// Largest distance between `eig(A_e)` and the union of mode spectra.
    pub mode_union_error: f64,
    /// `mode_union_error / ‖A_e‖₂`.
    pub mode_union_relative: f64,
    pub lmi_margins: Vec<LmiMargin>,
    pub lmi_ok: bool,
    /// `Σ trace(S̃ᵢ)`, `J_ach`, `Γ̂`.
    pub cost_lower: f64,
    pub j_ach: f64,
    pub gamma_hat: f64,
    pub chain_ok: bool,
    pub passed: bool,
}

/// Complete distributed observer design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObserverDesign {
    pub model: AgentModel,
    pub weights: MeeWeights,
    pub node: NodeObserver,
    pub n_agents: usize,
    pub laplacian: Mat,
    pub lambdas: Vec<f64>,
    pub phi: Mat,
    /// `Φ` read directly from the barrier solution of the SDP.
    pub phi_analytic_center: Mat,
    pub phi_selection: PhiSelection,
    /// Modes as used in the SDP (possibly grouped).
    pub modes: Vec<ModeProblem>,
    pub mode_are_traces: Vec<f64>,
    /// `Σ mult · trace(S̃ᵢ)` of the per-mode ARE optima.
    pub cost_lower: f64,
    pub j_ach: f64,
    /// SDP bound at the returned point.
    pub gamma_hat: f64,
    /// Optimal SDP value over all `Φ`.
    pub sdp_optimum: f64,
    pub sdp: SdpSolution,
    pub a_e: Mat,
    pub g_y: Mat,
    pub certificate: Certificate,
}

impl ObserverDesign {
    /// Node gain in original coordinates.
    pub fn l_original(&self) -> &Mat {
        &self.node.gain.l_original
    }
}

/// Greedy nearest matching between two eigenvalue multisets; returns the worst distance.
pub fn spectrum_distance(a: &[num_complex::Complex64], b: &[num_complex::Complex64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for x in a {
        let (j, d) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, y)| (j, (x - y).norm()))
            .fold((usize::MAX, f64::INFINITY), |acc, v| if v.1 < acc.1 { v } else { acc });
        used[j] = true;
        worst = worst.max(d);
    }
    worst
}

/// Recomputes `A_e`, the per-mode spectra, the LMI blocks and the cost chain
/// from the stored design, independently of the solver.
pub fn verify_design(d: &ObserverDesign, g: &GraphTopology, tol: &Tolerances) -> Certificate {
    let hat = &d.node.hat;
    let r = &d.weights.r;
    let fail = |abscissa: f64| Certificate {
        abscissa,
        hurwitz: false,
        mode_abscissas: Vec::new(),
        mode_union_error: f64::INFINITY,
        mode_union_relative: f64::INFINITY,
        lmi_margins: Vec::new(),
        lmi_ok: false,
        cost_lower: d.cost_lower,
        j_ach: f64::NAN,
        gamma_hat: d.gamma_hat,
        chain_ok: false,
        passed: false,
    };
    let Ok((a_e, _)) = assemble_observer(hat, &d.phi, g) else { return fail(f64::NAN) };
    let Ok(stab) = is_hurwitz(&a_e) else { return fail(f64::NAN) };

    let mut union = Vec::with_capacity(a_e.nrows());
    let mut mode_abscissas = Vec::with_capacity(g.n());
    let lphic = &hat.l * &d.phi * &hat.c;
    for &lam in g.eigvals().iter() {
        let fm = hat.closed_loop() - &lphic * lam;
        let Ok(ev) = eigenvalues(&fm) else { return fail(stab.abscissa) };
        mode_abscissas.push((lam, ev.iter().map(|c| c.re).fold(f64::NEG_INFINITY, f64::max)));
        union.extend(ev);
    }
    let Ok(ev_net) = eigenvalues(&a_e) else { return fail(stab.abscissa) };
    let mode_union_error = spectrum_distance(&ev_net, &union);
    let mode_union_relative = mode_union_error / norm2(&a_e).max(f64::MIN_POSITIVE);

    let b_scaled = match sdp::scaled_disturbance(hat, r) {
        Ok(b) => b,
        Err(_) => return fail(stab.abscissa),
    };
    let y = d.sdp.y();
    let mut lmi_margins = Vec::new();
    for (i, md) in d.modes.iter().enumerate() {
        let w = d.sdp.w(i);
        let z = d.sdp.z(i);
        for (label, f) in [
            (format!("LMI1[λ={:.6}]", md.lambda), sdp::lmi1_matrix(hat, &b_scaled, md, &w, &y)),
            (format!("LMI2[λ={:.6}]", md.lambda), sdp::lmi2_matrix(&w, &z)),
            (format!("W>0[λ={:.6}]", md.lambda), -w.clone()),
        ] {
            lmi_margins.push(LmiMargin { label, max_eig: max_sym_eigenvalue(&f), required: -tol.lmi_margin * norm2(&f).max(1.0) });
        }
    }
    let lmi_ok = lmi_margins.iter().all(|m| m.max_eig <= m.required);

    let j_ach = achieved_cost(hat, &d.phi, &d.modes, r, tol).map(|c| c.total).unwrap_or(f64::NAN);
    let slack = tol.cost_chain * d.gamma_hat.abs().max(1.0);
    let chain_ok = d.cost_lower <= j_ach + slack && j_ach <= d.gamma_hat + slack;
    let passed = stab.hurwitz && stab.abscissa < -tol.hurwitz_margin && lmi_ok && chain_ok;

    Certificate {
        abscissa: stab.abscissa,
        hurwitz: stab.hurwitz,
        mode_abscissas,
        mode_union_error,
        mode_union_relative,
        lmi_margins,
        lmi_ok,
        cost_lower: d.cost_lower,
        j_ach,
        gamma_hat: d.gamma_hat,
        chain_ok,
        passed,
    }
}

/// How far the strictness margins push the SDP optimum up: the optimum is
/// re-solved with margins ten times smaller and the difference extrapolated
/// linearly to zero margin. On badly conditioned nodes (`Ŝ` with widely spread
/// eigenvalues) this is far above the solver gap, and differences in `Γ̂`
/// below it say nothing about the exact problem.
fn margin_sensitivity(modes: &[ModeProblem], hat: &HatModel, r: &Mat, base: &SdpSolution, tol: &Tolerances) -> f64 {
    let fine_tol = Tolerances { lmi_margin: tol.lmi_margin / 10.0, ..*tol };
    let fine = build_sdp(modes, hat, r, &fine_tol).and_then(|p| solve_sdp(&p, &fine_tol));
    match fine {
        Ok(f) => ((base.objective - f.objective) * 10.0 / 9.0).max(0.0),
        Err(e) => {
            debug!("margin sensitivity solve failed: {e}");
            0.0
        }
    }
}

/// Picks `Φ` on the optimal face of the SDP; returns `(Φ, solution at Φ)`.
///
/// The face is `{Φ : Γ̂(Φ) <= Γ̂* + cost_chain·max(1, Γ̂*) + margin sensitivity}`.
fn select_phi(
    hat: &HatModel,
    modes: &[ModeProblem],
    r: &Mat,
    base: &SdpSolution,
    phi_center: &Mat,
    tol: &Tolerances,
) -> Result<(Mat, SdpSolution)> {
    let slack = margin_sensitivity(modes, hat, r, base, tol);
    let level = base.objective + tol.cost_chain * base.objective.abs().max(1.0) + slack;
    debug!("optimal face level {level:.10} (margin sensitivity {slack:.3e})");
    let target = minimize_achieved_cost(hat, modes, r, phi_center, tol)?;
    let at = |phi: &Mat| -> Option<SdpSolution> {
        let fixed = build_sdp_fixed_phi(modes, hat, r, phi, tol).ok()?;
        solve_sdp(&fixed, tol).ok().filter(|s| s.objective <= level)
    };
    if let Some(sol) = at(&target) {
        return Ok((target, sol));
    }
    // walk back towards the analytic centre until the bound is met again
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut best: Option<(Mat, SdpSolution)> = None;
    for _ in 0..30 {
        let t = 0.5 * (lo + hi);
        let phi = phi_center + (&target - phi_center) * t;
        match at(&phi) {
            Some(sol) => {
                lo = t;
                best = Some((phi, sol));
            }
            None => hi = t,
        }
    }
    Ok(best.unwrap_or_else(|| (phi_center.clone(), base.clone())))
}

/// Node design, mode decoupling, SDP, `Φ` selection and verification.
pub fn synthesize_observer(
    model: &AgentModel,
    weights: &MeeWeights,
    g: &GraphTopology,
    opts: &SynthesisOptions,
    tol: &Tolerances,
) -> Result<ObserverDesign> {
    weights.validate(Some(model))?;
    let node = design_node_observer(model, &weights.q1, &weights.r, tol)?;
    let hat = &node.hat;
    let all_modes = decouple_modes(&weights.q1, &weights.q2, g)?;
    let modes = if opts.group_modes { group_modes(&all_modes, 1e-9) } else { all_modes };

    let mut mode_are_traces = Vec::with_capacity(modes.len());
    for md in &modes {
        mode_are_traces.push(per_mode_optimum(md, hat, &weights.r, tol)?.trace());
    }
    let cost_lower = modes.iter().zip(&mode_are_traces).map(|(md, t)| md.multiplicity as f64 * t).sum();

    let sdp = build_sdp(&modes, hat, &weights.r, tol)?;
    let base = solve_sdp(&sdp, tol)?;
    let m = model.m();
    let phi_center = if sdp.layout.y2.is_some() { recover_phi(&base, &hat.l2)? } else { Mat::zeros(m, m) };
    debug!("SDP optimum {:.10}, analytic-centre Φ = {phi_center}", base.objective);

    let (phi, sol) = match opts.phi_selection {
        PhiSelection::AnalyticCenter => (phi_center.clone(), base.clone()),
        PhiSelection::MinAchievedCost if sdp.layout.y2.is_some() => {
            select_phi(hat, &modes, &weights.r, &base, &phi_center, tol)?
        }
        PhiSelection::MinAchievedCost => (phi_center.clone(), base.clone()),
    };
    let j_ach = achieved_cost(hat, &phi, &modes, &weights.r, tol)?.total;
    let (a_e, g_y) = assemble_observer(hat, &phi, g)?;

    let mut design = ObserverDesign {
        model: model.clone(),
        weights: weights.clone(),
        n_agents: g.n(),
        laplacian: g.laplacian().clone(),
        lambdas: g.eigvals().iter().copied().collect(),
        phi,
        phi_analytic_center: phi_center,
        phi_selection: opts.phi_selection,
        modes,
        mode_are_traces,
        cost_lower,
        j_ach,
        gamma_hat: sol.objective,
        sdp_optimum: base.objective,
        sdp: sol,
        a_e,
        g_y,
        certificate: Certificate {
            abscissa: f64::NAN,
            hurwitz: false,
            mode_abscissas: Vec::new(),
            mode_union_error: f64::NAN,
            mode_union_relative: f64::NAN,
            lmi_margins: Vec::new(),
            lmi_ok: false,
            cost_lower,
            j_ach,
            gamma_hat: f64::NAN,
            chain_ok: false,
            passed: false,
        },
        node,
    };
    design.certificate = verify_design(&design, g, tol);
    info!(
        "observer design: Φ = {}, Γ̂ = {:.8}, J_ach = {:.8}, Σ ARE = {:.8}, abscissa = {:.6}",
        design.phi, design.gamma_hat, design.j_ach, design.cost_lower, design.certificate.abscissa
    );
    Ok(design)
}
