//! Trace-minimisation SDP over the decoupled mode problems.
//!
//! Decision variables, all in hat coordinates with `k = n − m`:
//!
//! * `Wᵢ₁`, `Zᵢ₁` (`k×k`, symmetric) for each mode;
//! * `W₂`, `Z₂` (`m×m`, symmetric) shared by all modes;
//! * `Ŷ₂` (`m×m`), entering through `Ŷ = [0; Ŷ₂]`.
//!
//! With `Wᵢ = diag(Wᵢ₁, W₂)`, `Zᵢ = diag(Zᵢ₁, Z₂)` and `Â_c = Â − L̂Ĉ`, each
//! mode contributes
//!
//! ```text
//! LMI₁ = [[Ψ, WB̂̄R^{-1/2}, WL̂ + λŶ], [*, −I_q, 0], [*, 0, −Qᵢ]] ≺ 0
//! Ψ    = WÂ_c − λŶĈ + Â_cᵀW − λĈᵀŶᵀ
//! LMI₂ = [[−Z, I], [I, −W]] ≺ 0,     W ≻ 0
//! ```
//!
//! and the objective is `Σ multiplicity · trace(Zᵢ)`.

use serde::{Deserialize, Serialize};

use super::lmi::{self, BarrierOptions, LmiBlock, LmiProblem};
use super::ModeProblem;
use crate::matops::{max_sym_eigenvalue, norm2, spd_inverse, sym_inv_sqrt, try_inverse};
use crate::mee_node::HatModel;
use crate::{Error, Mat, Result, Tolerances, Vector};

/// Growth applied to the block margins when a solution fails the independent check.
const MARGIN_RETRY_FACTOR: f64 = 8.0;
const MARGIN_RETRIES: usize = 3;
/// Inflation of the node solution used for the starting point.
const START_INFLATION: f64 = 0.05;

fn sym_len(d: usize) -> usize {
    d * (d + 1) / 2
}

fn unpack_sym(x: &[f64], d: usize) -> Mat {
    let mut m = Mat::zeros(d, d);
    let mut idx = 0;
    for j in 0..d {
        for i in 0..=j {
            m[(i, j)] = x[idx];
            m[(j, i)] = x[idx];
            idx += 1;
        }
    }
    m
}

fn pack_sym(m: &Mat, out: &mut [f64]) {
    let mut idx = 0;
    for j in 0..m.ncols() {
        for i in 0..=j {
            out[idx] = m[(i, j)];
            idx += 1;
        }
    }
}

fn block_diag(a: &Mat, b: &Mat) -> Mat {
    let (p, q) = (a.nrows(), b.nrows());
    let mut m = Mat::zeros(p + q, p + q);
    m.view_mut((0, 0), (p, p)).copy_from(a);
    m.view_mut((p, p), (q, q)).copy_from(b);
    m
}

/// Offsets of the decision variables inside the flat vector `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableLayout {
    pub k: usize,
    pub m: usize,
    pub w1: Vec<usize>,
    pub z1: Vec<usize>,
    pub w2: usize,
    pub z2: usize,
    /// Absent when no mode couples (all `λ = 0`) or when `Φ` is fixed.
    pub y2: Option<usize>,
    pub nvars: usize,
}

impl VariableLayout {
    fn new(k: usize, m: usize, n_modes: usize, with_y: bool) -> Self {
        let (sk, sm) = (sym_len(k), sym_len(m));
        let mut off = 0;
        let mut w1 = Vec::with_capacity(n_modes);
        let mut z1 = Vec::with_capacity(n_modes);
        for _ in 0..n_modes {
            w1.push(off);
            off += sk;
            z1.push(off);
            off += sk;
        }
        let w2 = off;
        off += sm;
        let z2 = off;
        off += sm;
        let y2 = with_y.then(|| {
            let o = off;
            off += m * m;
            o
        });
        Self { k, m, w1, z1, w2, z2, y2, nvars: off }
    }
}

/// Decision variables as matrices.
#[derive(Debug, Clone, PartialEq)]
struct Unpacked {
    w1: Vec<Mat>,
    z1: Vec<Mat>,
    w2: Mat,
    z2: Mat,
    y2: Mat,
}

/// The assembled SDP together with the data needed to interpret its variables.
#[derive(Debug, Clone)]
pub struct ObserverSdp {
    pub layout: VariableLayout,
    pub problem: LmiProblem,
    pub modes: Vec<ModeProblem>,
    /// Coupling gain held fixed (`Ŷ₂ = W₂L̂₂Φ`), if any.
    pub fixed_phi: Option<Mat>,
    hat: HatModel,
    b_scaled: Mat,
    start: Vector,
    margin_scale: Vec<f64>,
}

/// Point returned by [`solve_sdp`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpSolution {
    pub lambdas: Vec<f64>,
    pub multiplicities: Vec<usize>,
    pub w1: Vec<Mat>,
    pub z1: Vec<Mat>,
    pub w2: Mat,
    pub z2: Mat,
    pub y2: Mat,
    /// `Γ̂ = Σ multiplicity · trace(Zᵢ)`.
    pub objective: f64,
    pub gap: f64,
    pub newton_steps: usize,
    /// Largest eigenvalue over all constraint blocks at the solution.
    pub max_lmi_eig: f64,
    pub fixed_phi: Option<Mat>,
}

impl SdpSolution {
    /// `Wᵢ = diag(Wᵢ₁, W₂)` for mode group `i`.
    pub fn w(&self, i: usize) -> Mat {
        block_diag(&self.w1[i], &self.w2)
    }

    /// `Zᵢ = diag(Zᵢ₁, Z₂)`.
    pub fn z(&self, i: usize) -> Mat {
        block_diag(&self.z1[i], &self.z2)
    }

    /// `Ŷ = [0; Ŷ₂]`.
    pub fn y(&self) -> Mat {
        let (m, k) = (self.w2.nrows(), self.w1.first().map_or(0, Mat::nrows));
        let mut y = Mat::zeros(k + m, m);
        y.rows_mut(k, m).copy_from(&self.y2);
        y
    }
}

/// `LMI₁` of one mode for given `W`, `Ŷ`.
pub fn lmi1_matrix(hat: &HatModel, b_scaled: &Mat, mode: &ModeProblem, w: &Mat, y: &Mat) -> Mat {
    let (n, q, m) = (hat.n(), b_scaled.ncols(), hat.m());
    let ac = hat.closed_loop();
    let lam = mode.lambda;
    let wac = w * &ac;
    let yc = y * &hat.c * lam;
    let psi = &wac + wac.transpose() - &yc - yc.transpose();
    let wb = w * b_scaled;
    let wl = w * &hat.l + y * lam;
    let mut f = Mat::zeros(n + q + m, n + q + m);
    f.view_mut((0, 0), (n, n)).copy_from(&psi);
    f.view_mut((0, n), (n, q)).copy_from(&wb);
    f.view_mut((n, 0), (q, n)).copy_from(&wb.transpose());
    f.view_mut((0, n + q), (n, m)).copy_from(&wl);
    f.view_mut((n + q, 0), (m, n)).copy_from(&wl.transpose());
    f.view_mut((n, n), (q, q)).fill_with_identity();
    f.view_mut((n, n), (q, q)).neg_mut();
    f.view_mut((n + q, n + q), (m, m)).copy_from(&(-&mode.q));
    f
}

/// `LMI₂ = [[−Z, I], [I, −W]]`.
pub fn lmi2_matrix(w: &Mat, z: &Mat) -> Mat {
    let n = w.nrows();
    let mut f = Mat::zeros(2 * n, 2 * n);
    f.view_mut((0, 0), (n, n)).copy_from(&(-z));
    f.view_mut((n, n), (n, n)).copy_from(&(-w));
    f.view_mut((0, n), (n, n)).fill_with_identity();
    f.view_mut((n, 0), (n, n)).fill_with_identity();
    f
}

/// Schur-complement form of `LMI₁`: `Ψ + WB̂̄R⁻¹B̂̄ᵀW + (WL̂ + λŶ)Qᵢ⁻¹(WL̂ + λŶ)ᵀ`.
pub fn expanded_inequality(hat: &HatModel, b_scaled: &Mat, mode: &ModeProblem, w: &Mat, y: &Mat) -> Result<Mat> {
    let ac = hat.closed_loop();
    let lam = mode.lambda;
    let wac = w * &ac;
    let yc = y * &hat.c * lam;
    let psi = &wac + wac.transpose() - &yc - yc.transpose();
    let wb = w * b_scaled;
    let wl = w * &hat.l + y * lam;
    Ok(psi + &wb * wb.transpose() + &wl * try_inverse(&mode.q, "Qᵢ")? * wl.transpose())
}

/// `B̂̄R^{-1/2}`.
pub fn scaled_disturbance(hat: &HatModel, r: &Mat) -> Result<Mat> {
    if hat.q() == 0 {
        return Ok(Mat::zeros(hat.n(), 0));
    }
    Ok(&hat.b_dist * sym_inv_sqrt(r, "R")?)
}

/// Assembles the SDP for a list of (possibly grouped) modes.
pub fn build_sdp(modes: &[ModeProblem], hat: &HatModel, r: &Mat, tol: &Tolerances) -> Result<ObserverSdp> {
    assemble(modes, hat, r, tol, None)
}

/// Same SDP with `Φ` held fixed, so that `Ŷ₂ = W₂L̂₂Φ` is no longer a free variable.
pub fn build_sdp_fixed_phi(modes: &[ModeProblem], hat: &HatModel, r: &Mat, phi: &Mat, tol: &Tolerances) -> Result<ObserverSdp> {
    assemble(modes, hat, r, tol, Some(phi.clone()))
}

fn assemble(modes: &[ModeProblem], hat: &HatModel, r: &Mat, tol: &Tolerances, fixed_phi: Option<Mat>) -> Result<ObserverSdp> {
    let (n, m) = (hat.n(), hat.m());
    let k = n - m;
    if modes.is_empty() {
        return Err(Error::InvalidArgument("no mode problems".into()));
    }
    if hat.l.rows(0, k).iter().any(|v| *v != 0.0) || hat.c.columns(0, k).iter().any(|v| *v != 0.0) {
        return Err(Error::Inconsistent("hat model does not have the L̂ = [0; L̂₂], Ĉ = [0 C₂] pattern".into()));
    }
    if let Some(phi) = &fixed_phi {
        if phi.nrows() != m || phi.ncols() != m {
            return Err(Error::Dimension(format!("Φ must be {m}×{m}")));
        }
    }
    let coupled = modes.iter().any(|md| md.lambda > 0.0);
    let layout = VariableLayout::new(k, m, modes.len(), coupled && fixed_phi.is_none());
    let b_scaled = scaled_disturbance(hat, r)?;

    let mut c = Vector::zeros(layout.nvars);
    let total: usize = modes.iter().map(|md| md.multiplicity).sum();
    for (g, md) in modes.iter().enumerate() {
        add_trace_cost(&mut c, layout.z1[g], k, md.multiplicity as f64);
    }
    add_trace_cost(&mut c, layout.z2, m, total as f64);

    let mut sdp = ObserverSdp {
        layout,
        problem: LmiProblem { nvars: 0, c, blocks: Vec::new() },
        modes: modes.to_vec(),
        fixed_phi,
        hat: hat.clone(),
        b_scaled,
        start: Vector::zeros(0),
        margin_scale: Vec::new(),
    };
    sdp.problem.nvars = sdp.layout.nvars;
    sdp.start = sdp.heuristic_start()?;

    let nv = sdp.layout.nvars;
    let mut blocks = Vec::with_capacity(3 * modes.len());
    for (g, md) in modes.iter().enumerate() {
        let lam = md.lambda;
        blocks.push(LmiBlock::from_affine(format!("LMI1[λ={lam:.6}]"), nv, 0.0, |x| {
            let u = sdp.unpack(x);
            lmi1_matrix(&sdp.hat, &sdp.b_scaled, md, &block_diag(&u.w1[g], &u.w2), &sdp.y_of(&u))
        }));
        blocks.push(LmiBlock::from_affine(format!("LMI2[λ={lam:.6}]"), nv, 0.0, |x| {
            let u = sdp.unpack(x);
            lmi2_matrix(&block_diag(&u.w1[g], &u.w2), &block_diag(&u.z1[g], &u.z2))
        }));
        blocks.push(LmiBlock::from_affine(format!("W>0[λ={lam:.6}]"), nv, 0.0, |x| {
            let u = sdp.unpack(x);
            -block_diag(&u.w1[g], &u.w2)
        }));
    }
    sdp.margin_scale = blocks.iter().map(|b| tol.lmi_margin * norm2(&b.eval(sdp.start.as_slice())).max(1.0)).collect();
    for (b, s) in blocks.iter_mut().zip(&sdp.margin_scale) {
        b.margin = 2.0 * s;
    }
    sdp.problem.blocks = blocks;
    Ok(sdp)
}

fn add_trace_cost(c: &mut Vector, offset: usize, d: usize, weight: f64) {
    let mut idx = offset;
    for j in 0..d {
        for i in 0..=j {
            if i == j {
                c[idx] = weight;
            }
            idx += 1;
        }
    }
}

impl ObserverSdp {
    fn unpack(&self, x: &[f64]) -> Unpacked {
        let l = &self.layout;
        let (k, m) = (l.k, l.m);
        let sk = sym_len(k);
        let w2 = unpack_sym(&x[l.w2..], m);
        let y2 = match (&self.fixed_phi, l.y2) {
            (Some(phi), _) => &w2 * &self.hat.l2 * phi,
            (None, Some(o)) => Mat::from_column_slice(m, m, &x[o..o + m * m]),
            (None, None) => Mat::zeros(m, m),
        };
        Unpacked {
            w1: l.w1.iter().map(|&o| unpack_sym(&x[o..o + sk], k)).collect(),
            z1: l.z1.iter().map(|&o| unpack_sym(&x[o..o + sk], k)).collect(),
            z2: unpack_sym(&x[l.z2..], m),
            w2,
            y2,
        }
    }

    fn y_of(&self, u: &Unpacked) -> Mat {
        let (k, m) = (self.layout.k, self.layout.m);
        let mut y = Mat::zeros(k + m, m);
        y.rows_mut(k, m).copy_from(&u.y2);
        y
    }

    /// `Wᵢ = ((1+δ)Ŝ)⁻¹`, `Zᵢ = (1+δ)²Ŝ`, `Ŷ₂ = 0`: strictly feasible at `Φ = 0`
    /// whenever `[B̂̄ L̂]` has full row rank, because `Qᵢ ⪰ Q₁`.
    fn heuristic_start(&self) -> Result<Vector> {
        let l = &self.layout;
        let (k, m) = (l.k, l.m);
        let s = &self.hat.s;
        let infl = 1.0 + START_INFLATION;
        let s11 = s.view((0, 0), (k, k)).clone_owned();
        let s22 = s.view((k, k), (m, m)).clone_owned();
        let w1 = if k > 0 { spd_inverse(&(&s11 * infl), "Ŝ₁₁")? } else { Mat::zeros(0, 0) };
        let w2 = spd_inverse(&(&s22 * infl), "Ŝ₂₂")?;
        let mut x = Vector::zeros(l.nvars);
        for g in 0..self.modes.len() {
            pack_sym(&w1, &mut x.as_mut_slice()[l.w1[g]..]);
            pack_sym(&(&s11 * (infl * infl)), &mut x.as_mut_slice()[l.z1[g]..]);
        }
        pack_sym(&w2, &mut x.as_mut_slice()[l.w2..]);
        pack_sym(&(&s22 * (infl * infl)), &mut x.as_mut_slice()[l.z2..]);
        Ok(x)
    }

    fn solution(&self, x: &Vector, res: &lmi::BarrierResult) -> SdpSolution {
        let u = self.unpack(x.as_slice());
        let max_lmi_eig = self
            .problem
            .blocks
            .iter()
            .map(|b| max_sym_eigenvalue(&b.eval(x.as_slice())))
            .fold(f64::NEG_INFINITY, f64::max);
        SdpSolution {
            lambdas: self.modes.iter().map(|md| md.lambda).collect(),
            multiplicities: self.modes.iter().map(|md| md.multiplicity).collect(),
            w1: u.w1,
            z1: u.z1,
            w2: u.w2,
            z2: u.z2,
            y2: u.y2,
            objective: res.objective,
            gap: res.gap,
            newton_steps: res.newton_steps,
            max_lmi_eig,
            fixed_phi: self.fixed_phi.clone(),
        }
    }

    /// Every block at `x` is below `−lmi_margin·max(1, ‖F‖₂)`.
    fn meets_margins(&self, x: &[f64], tol: &Tolerances) -> bool {
        self.problem.blocks.iter().all(|b| {
            let f = b.eval(x);
            max_sym_eigenvalue(&f) <= -tol.lmi_margin * norm2(&f).max(1.0)
        })
    }
}

/// Solves the SDP with a barrier method; phase I is used when the
/// heuristic starting point is not strictly feasible.
pub fn solve_sdp(sdp: &ObserverSdp, tol: &Tolerances) -> Result<SdpSolution> {
    let opts = BarrierOptions { gap: tol.sdp_gap, ..BarrierOptions::default() };
    let mut problem = sdp.problem.clone();
    let mut factor = 2.0;
    let mut last_err = None;
    for _ in 0..=MARGIN_RETRIES {
        for (b, s) in problem.blocks.iter_mut().zip(&sdp.margin_scale) {
            b.margin = factor * s;
        }
        let radius = 1e6 * sdp.start.norm().max(1.0);
        let x0 = lmi::find_feasible(&problem, &sdp.start, radius)?;
        match lmi::solve(&problem, &x0, &opts) {
            Ok(res) if sdp.meets_margins(res.x.as_slice(), tol) => return Ok(sdp.solution(&res.x, &res)),
            Ok(_) => {}
            Err(e @ Error::SdpNotConverged { .. }) => last_err = Some(e),
            Err(e) => return Err(e),
        }
        factor *= MARGIN_RETRY_FACTOR;
    }
    Err(last_err.unwrap_or_else(|| Error::Numerical("SDP solution does not meet the LMI margin after retries".into())))
}
