//! Single-agent minimum-energy estimation.
//!
//! Three coordinate systems appear here:
//!
//! * original: the agent model as supplied;
//! * rotated: `x_r = T x`, where `T` comes from the SVD of `C` and brings the
//!   output matrix to the pattern `[0 C₂]`;
//! * hat: `x̂ = T̂ x_r`, where `T̂` block-diagonalises the node ARE solution
//!   and makes the node gain `[0; L̂₂]`.
//!
//! The distributed synthesis is posed in hat coordinates, so costs are
//! reported there unless a field says otherwise.

use serde::{Deserialize, Serialize};

use crate::matops::{
    check_pd, check_psd, check_square, condition_number, is_hurwitz, solve_dual_are_with, sym_eigen, symmetrize,
    try_inverse, AgentModel,
};
use crate::{Error, Mat, Result, Tolerances};

const S22_COND_LIMIT: f64 = 1e12;

/// Weights of the minimum-energy criterion: absolute output error `Q₁`
/// (`m×m`, positive definite), relative output error `Q₂` (`m×m`, positive
/// semidefinite) and disturbance energy `R` (`q×q`, positive definite).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeeWeights {
    pub q1: Mat,
    pub q2: Mat,
    pub r: Mat,
}

impl MeeWeights {
    pub fn new(q1: Mat, q2: Mat, r: Mat) -> Result<Self> {
        let w = Self { q1, q2, r };
        w.validate(None)?;
        Ok(w)
    }

    /// Scalar weights for single-output, single-disturbance agents.
    pub fn scalar(q1: f64, q2: f64, r: f64) -> Result<Self> {
        Self::new(Mat::from_element(1, 1, q1), Mat::from_element(1, 1, q2), Mat::from_element(1, 1, r))
    }

    /// Checks definiteness and, when a model is given, the dimensions.
    pub fn validate(&self, model: Option<&AgentModel>) -> Result<()> {
        if let Some(model) = model {
            check_square(&self.q1, model.m(), "Q1")?;
            check_square(&self.q2, model.m(), "Q2")?;
            check_square(&self.r, model.q(), "R")?;
        }
        check_pd(&self.q1, "Q1")?;
        check_psd(&self.q2, "Q2")?;
        check_pd(&self.r, "R")?;
        Ok(())
    }
}

/// Agent model in rotated coordinates, with `C T⁻¹ = [0 C₂]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedModel {
    /// Orthogonal rotation `x_r = T x`.
    pub t: Mat,
    pub a: Mat,
    pub b_dist: Mat,
    pub c: Mat,
    pub c2: Mat,
    pub c2_condition: f64,
    pub original: AgentModel,
}

/// Rotates coordinates so that the output matrix takes the form `[0 C₂]`.
///
/// With `C = U[Σ 0]Vᵀ` and `V = [V₁ V₂]` (`V₁` spanning the row space of
/// `C`), the rotation is `T = [V₂ᵀ; V₁ᵀ]` and `C₂ = UΣ`. Column signs of `V₁`
/// are fixed so that `C₂` has a nonnegative diagonal; columns of `V₂` have
/// their largest-magnitude entry positive.
pub fn output_normalize(model: &AgentModel) -> Result<NormalizedModel> {
    let n = model.n();
    let m = model.m();
    let c = &model.c;
    let svd = c.clone().svd(true, true);
    let (mut u, sv, v_t) = (svd.u.unwrap(), svd.singular_values, svd.v_t.unwrap());
    let smax = sv.max();
    if sv.min() <= Tolerances::default().rank * smax {
        return Err(Error::Singular("C (rank-deficient output matrix)".into()));
    }
    let mut v1 = v_t.transpose();
    for k in 0..m {
        if u[(k, k)] < 0.0 {
            u.column_mut(k).neg_mut();
            v1.column_mut(k).neg_mut();
        }
    }

    let mut t = Mat::zeros(n, n);
    if n > m {
        let proj = Mat::identity(n, n) - &v1 * v1.transpose();
        let (_, vecs) = sym_eigen(&proj);
        for (row, col) in (m..n).enumerate() {
            let mut v = vecs.column(col).clone_owned();
            let imax = v.iamax();
            if v[imax] < 0.0 {
                v.neg_mut();
            }
            t.row_mut(row).copy_from(&v.transpose());
        }
    }
    for k in 0..m {
        t.row_mut(n - m + k).copy_from(&v1.column(k).transpose());
    }

    let c2 = &u * Mat::from_diagonal(&sv);
    let mut c_rot = c * t.transpose();
    let lead = c_rot.columns(0, n - m).norm();
    if lead > 1e-12 * smax.max(1.0) {
        return Err(Error::Inconsistent(format!("rotated C leading block has norm {lead:.3e}")));
    }
    c_rot.columns_mut(0, n - m).fill(0.0);
    c_rot.columns_mut(n - m, m).copy_from(&c2);

    Ok(NormalizedModel {
        a: &t * &model.a * t.transpose(),
        b_dist: &t * &model.b_dist,
        c: c_rot,
        c2_condition: condition_number(&c2),
        c2,
        t,
        original: model.clone(),
    })
}

/// Node-level optimal MEE gain in rotated coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeGain {
    pub s: Mat,
    pub l: Mat,
    /// Same solution and gain in original coordinates.
    pub s_original: Mat,
    pub l_original: Mat,
    /// Optimal node cost `trace(S)` (identical in original and rotated coordinates).
    pub j_node: f64,
}

/// Solves `AS + SAᵀ + B̄R⁻¹B̄ᵀ − SCᵀQ₁CS = 0` and forms `L = SCᵀQ₁`.
pub fn node_mee_gain(nm: &NormalizedModel, q1: &Mat, r: &Mat) -> Result<NodeGain> {
    node_mee_gain_with(nm, q1, r, &Tolerances::default())
}

pub fn node_mee_gain_with(nm: &NormalizedModel, q1: &Mat, r: &Mat, tol: &Tolerances) -> Result<NodeGain> {
    let sol = solve_dual_are_with(&nm.a, &nm.b_dist, &nm.c, q1, r, tol)?;
    let tt = nm.t.transpose();
    Ok(NodeGain {
        s_original: symmetrize(&(&tt * &sol.s * &nm.t)),
        l_original: &tt * &sol.l,
        j_node: sol.s.trace(),
        s: sol.s,
        l: sol.l,
    })
}

/// Node data in hat coordinates: `Ĉ = [0 C₂]`, `L̂ = [0; L̂₂]`, `Ŝ` block diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HatModel {
    pub a: Mat,
    pub b_dist: Mat,
    pub c: Mat,
    pub l: Mat,
    pub l2: Mat,
    pub s: Mat,
}

impl HatModel {
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.c.nrows()
    }

    pub fn q(&self) -> usize {
        self.b_dist.ncols()
    }

    /// `Â − L̂Ĉ`.
    pub fn closed_loop(&self) -> Mat {
        &self.a - &self.l * &self.c
    }
}

/// Complete node-level observer design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeObserver {
    pub normalized: NormalizedModel,
    pub gain: NodeGain,
    /// `T̂ = [[I, −S₁₂S₂₂⁻¹], [0, I]]`.
    pub t_hat: Mat,
    pub hat: HatModel,
    /// `trace(Ŝ)`, the node cost in hat coordinates.
    pub j_node: f64,
    /// `trace(S)` in original coordinates.
    pub j_node_original: f64,
}

impl NodeObserver {
    /// Composite map `x̂ = T̂ T x` from original to hat coordinates.
    pub fn to_hat(&self) -> Mat {
        &self.t_hat * &self.normalized.t
    }

    /// Inverse map from hat back to original coordinates.
    pub fn from_hat(&self) -> Mat {
        let n = self.t_hat.nrows();
        let k = n - self.hat.m();
        let mut t_hat_inv = self.t_hat.clone();
        t_hat_inv.view_mut((0, k), (k, n - k)).neg_mut();
        self.normalized.t.transpose() * t_hat_inv
    }
}

/// Block-diagonalising change of coordinates `T̂` applied to the rotated model.
pub fn decouple_transform(nm: &NormalizedModel, gain: &NodeGain, q1: &Mat, r: &Mat) -> Result<NodeObserver> {
    decouple_transform_with(nm, gain, q1, r, &Tolerances::default())
}

pub fn decouple_transform_with(
    nm: &NormalizedModel,
    gain: &NodeGain,
    q1: &Mat,
    r: &Mat,
    tol: &Tolerances,
) -> Result<NodeObserver> {
    let n = nm.a.nrows();
    let m = nm.c.nrows();
    let k = n - m;
    let s = &gain.s;
    let s22 = s.view((k, k), (m, m)).clone_owned();
    let (t_hat, t_hat_inv) = t_hat_pair(s, m)?;

    let a_hat = &t_hat * &nm.a * &t_hat_inv;
    let b_hat = &t_hat * &nm.b_dist;

    let mut s_hat = symmetrize(&(&t_hat * s * t_hat.transpose()));
    let off = s_hat.view((0, k), (k, m)).norm();
    if off > 1e-8 * s_hat.norm().max(1.0) {
        return Err(Error::Inconsistent(format!("Ŝ off-diagonal block has norm {off:.3e}")));
    }
    s_hat.view_mut((0, k), (k, m)).fill(0.0);
    s_hat.view_mut((k, 0), (m, k)).fill(0.0);

    let mut l_hat = &t_hat * &gain.l;
    let top = l_hat.rows(0, k).norm();
    if top > 1e-8 * l_hat.norm().max(1.0) {
        return Err(Error::Inconsistent(format!("L̂ upper block has norm {top:.3e}")));
    }
    l_hat.rows_mut(0, k).fill(0.0);
    let l2 = l_hat.rows(k, m).clone_owned();
    let l2_expected = &s22 * nm.c2.transpose() * q1;
    if (&l2 - &l2_expected).norm() > 1e-8 * l2.norm().max(1.0) {
        return Err(Error::Inconsistent("L̂₂ differs from S₂₂C₂ᵀQ₁".into()));
    }
    if condition_number(&l2) > S22_COND_LIMIT {
        return Err(Error::Singular("L̂₂".into()));
    }

    // Ĉ = C T̂⁻¹ keeps the [0 C₂] pattern exactly.
    let c_hat = nm.c.clone();
    let hat = HatModel { a: a_hat, b_dist: b_hat, c: c_hat, l: l_hat, l2, s: s_hat };

    let stab = is_hurwitz(&hat.closed_loop())?;
    if !stab.hurwitz {
        return Err(Error::NotHurwitz { what: "Â − L̂Ĉ".into(), abscissa: stab.abscissa });
    }
    let res = hat_are_residual(&hat, q1, r)?;
    if res > tol.riccati_residual * hat.s.norm().max(1.0) {
        return Err(Error::Residual { what: "hat dual ARE", residual: res, tol: tol.riccati_residual });
    }

    Ok(NodeObserver {
        j_node: hat.s.trace(),
        j_node_original: gain.s_original.trace(),
        normalized: nm.clone(),
        gain: gain.clone(),
        t_hat,
        hat,
    })
}

/// `T̂` and its inverse for a symmetric `S` whose trailing `m×m` block is invertible.
fn t_hat_pair(s: &Mat, m: usize) -> Result<(Mat, Mat)> {
    let n = s.nrows();
    let k = n - m;
    let s12 = s.view((0, k), (k, m)).clone_owned();
    let s22 = s.view((k, k), (m, m)).clone_owned();
    if condition_number(&s22) > S22_COND_LIMIT {
        return Err(Error::Singular("S22 block of the node ARE solution".into()));
    }
    let gain_block = &s12 * try_inverse(&s22, "S22")?;
    let mut t_hat = Mat::identity(n, n);
    t_hat.view_mut((0, k), (k, m)).copy_from(&(-&gain_block));
    let mut t_hat_inv = Mat::identity(n, n);
    t_hat_inv.view_mut((0, k), (k, m)).copy_from(&gain_block);
    Ok((t_hat, t_hat_inv))
}

/// Frobenius residual of `ÂŜ + ŜÂᵀ + B̂̄R⁻¹B̂̄ᵀ − ŜĈᵀQ₁ĈŜ`.
pub fn hat_are_residual(hat: &HatModel, q1: &Mat, r: &Mat) -> Result<f64> {
    let r_inv = try_inverse(r, "R")?;
    let res = &hat.a * &hat.s + &hat.s * hat.a.transpose() + &hat.b_dist * r_inv * hat.b_dist.transpose()
        - &hat.s * hat.c.transpose() * q1 * &hat.c * &hat.s;
    Ok(res.norm())
}

/// Runs rotation, node gain and decoupling transform in sequence.
pub fn design_node_observer(model: &AgentModel, q1: &Mat, r: &Mat, tol: &Tolerances) -> Result<NodeObserver> {
    check_pd(q1, "Q1")?;
    let nm = output_normalize(model)?;
    let gain = node_mee_gain_with(&nm, q1, r, tol)?;
    decouple_transform_with(&nm, &gain, q1, r, tol)
}
