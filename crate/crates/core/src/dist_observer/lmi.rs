//! Small dense LMI solver: primal log-det barrier with damped Newton steps.
//!
//! Solves
//!
//! ```text
//! minimise cᵀx   subject to   F_j(x) = F_j0 + Σ_k x_k F_jk ≺ −δ_j I,   j = 1..J
//! ```
//!
//! where every `δ_j >= 0` is a per-block margin, so a returned point is
//! strictly feasible by at least that margin. Problems here have tens of
//! variables and blocks of size < 20, so the Hessian is formed densely.
//! Phase I (minimising a common shift `s` with `F_j(x) ≺ (s − δ_j)I`)
//! supplies a starting point when the caller has none.

use log::debug;
use nalgebra::Cholesky;

use crate::matops::{max_sym_eigenvalue, symmetrize};
use crate::{Error, Mat, Result, Vector};

/// One affine symmetric block `F(x) = F0 + Σ x_k F_k`, required `≺ −margin·I`.
#[derive(Debug, Clone, PartialEq)]
pub struct LmiBlock {
    pub label: String,
    pub f0: Mat,
    /// Nonzero coefficient matrices `(k, F_k)`.
    pub coeffs: Vec<(usize, Mat)>,
    pub margin: f64,
}

impl LmiBlock {
    /// Builds a block from an affine map by probing it at zero and at each unit vector.
    pub fn from_affine(label: impl Into<String>, nvars: usize, margin: f64, f: impl Fn(&[f64]) -> Mat) -> Self {
        let mut x = vec![0.0; nvars];
        let f0 = symmetrize(&f(&x));
        let mut coeffs = Vec::new();
        for k in 0..nvars {
            x[k] = 1.0;
            let fk = symmetrize(&f(&x)) - &f0;
            x[k] = 0.0;
            if fk.iter().any(|v| *v != 0.0) {
                coeffs.push((k, fk));
            }
        }
        Self { label: label.into(), f0, coeffs, margin }
    }

    pub fn dim(&self) -> usize {
        self.f0.nrows()
    }

    pub fn eval(&self, x: &[f64]) -> Mat {
        let mut f = self.f0.clone();
        for (k, fk) in &self.coeffs {
            f += fk * x[*k];
        }
        f
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmiProblem {
    pub nvars: usize,
    pub c: Vector,
    pub blocks: Vec<LmiBlock>,
}

impl LmiProblem {
    pub fn objective(&self, x: &[f64]) -> f64 {
        self.c.iter().zip(x).map(|(c, x)| c * x).sum()
    }

    /// Largest of `λ_max(F_j(x)) + δ_j` together with the offending block.
    pub fn max_violation(&self, x: &[f64]) -> (f64, usize) {
        self.blocks
            .iter()
            .enumerate()
            .filter(|(_, b)| b.dim() > 0)
            .map(|(j, b)| (max_sym_eigenvalue(&b.eval(x)) + b.margin, j))
            .fold((f64::NEG_INFINITY, 0), |acc, v| if v.0 > acc.0 { v } else { acc })
    }

    fn barrier_dim(&self) -> usize {
        self.blocks.iter().map(LmiBlock::dim).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierOptions {
    /// Target relative duality gap `Σ dim / t <= gap · max(1, |cᵀx|)`.
    pub gap: f64,
    /// Barrier parameter growth per outer iteration.
    pub mu: f64,
    pub max_outer: usize,
    pub max_newton: usize,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        Self { gap: 1e-10, mu: 8.0, max_outer: 200, max_newton: 80 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierResult {
    pub x: Vector,
    pub objective: f64,
    pub gap: f64,
    pub newton_steps: usize,
    /// Last Newton decrement of the final centering step.
    pub decrement: f64,
}

/// Cholesky of `−F(x) − δI`, or `None` when `x` is outside the block's interior.
fn interior_factor(block: &LmiBlock, x: &[f64]) -> Option<Cholesky<f64, nalgebra::Dyn>> {
    let mut m = -block.eval(x);
    for i in 0..m.nrows() {
        m[(i, i)] -= block.margin;
    }
    Cholesky::new(m)
}

/// `t·cᵀx − Σ log det(−F_j − δ_j I)`, or `None` outside the interior.
fn barrier_value(p: &LmiProblem, t: f64, x: &[f64]) -> Option<f64> {
    let mut val = t * p.objective(x);
    for b in p.blocks.iter().filter(|b| b.dim() > 0) {
        let ch = interior_factor(b, x)?;
        val -= 2.0 * ch.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    }
    val.is_finite().then_some(val)
}

/// Gradient and Hessian of the barrier function at an interior point.
fn derivatives(p: &LmiProblem, t: f64, x: &[f64]) -> Result<(Vector, Mat)> {
    let mut g = &p.c * t;
    let mut h = Mat::zeros(p.nvars, p.nvars);
    for b in p.blocks.iter().filter(|b| b.dim() > 0) {
        let ch = interior_factor(b, x).ok_or_else(|| Error::Numerical(format!("left the interior of {}", b.label)))?;
        let s = ch.inverse();
        let sf: Vec<(usize, Mat)> = b.coeffs.iter().map(|(k, fk)| (*k, &s * fk)).collect();
        for (a, (k, ak)) in sf.iter().enumerate() {
            g[*k] += ak.trace();
            for (l, al) in &sf[..=a] {
                // tr(A_k A_l) = Σ_ij (A_k)_ij (A_l)_ji
                let v = ak.component_mul(&al.transpose()).sum();
                h[(*k, *l)] += v;
                if k != l {
                    h[(*l, *k)] += v;
                }
            }
        }
    }
    Ok((g, h))
}

fn newton_direction(g: &Vector, h: &Mat) -> Result<Vector> {
    if let Some(ch) = Cholesky::new(h.clone()) {
        return Ok(-ch.solve(g));
    }
    h.clone()
        .lu()
        .solve(&(-g))
        .ok_or_else(|| Error::Numerical("singular barrier Hessian (a variable is unconstrained)".into()))
}

/// Minimises the barrier function for fixed `t`; returns the Newton step count and final decrement.
fn center(p: &LmiProblem, t: f64, x: &mut Vector, max_newton: usize) -> Result<(usize, f64)> {
    let mut last_dec = f64::INFINITY;
    for it in 0..max_newton {
        let (g, h) = derivatives(p, t, x.as_slice())?;
        let dx = newton_direction(&g, &h)?;
        let dec2 = -g.dot(&dx);
        last_dec = dec2.max(0.0).sqrt();
        if dec2 <= 1e-12 {
            return Ok((it, last_dec));
        }
        let f0 = barrier_value(p, t, x.as_slice()).ok_or_else(|| Error::Numerical("barrier undefined".into()))?;
        // damped step keeps the iterate interior for self-concordant barriers
        let mut alpha = if last_dec > 0.25 { 1.0 / (1.0 + last_dec) } else { 1.0 };
        let mut accepted = false;
        for _ in 0..60 {
            let trial = &*x + &dx * alpha;
            if let Some(f1) = barrier_value(p, t, trial.as_slice()) {
                if f1 <= f0 - 0.25 * alpha * dec2 {
                    *x = trial;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            // no progress possible in floating point
            return Ok((it, last_dec));
        }
    }
    Ok((max_newton, last_dec))
}

/// Path-following barrier method from a strictly feasible `x0`.
pub fn solve(p: &LmiProblem, x0: &Vector, opts: &BarrierOptions) -> Result<BarrierResult> {
    let (viol, j) = p.max_violation(x0.as_slice());
    if viol >= 0.0 {
        return Err(Error::Infeasible { constraint: format!("starting point violates {}", p.blocks[j].label), max_eig: viol });
    }
    let dim = p.barrier_dim() as f64;
    let mut x = x0.clone();
    let mut t = dim / p.objective(x.as_slice()).abs().max(1.0);
    let mut steps = 0;
    let mut decrement = 0.0;
    for _ in 0..opts.max_outer {
        let (n, dec) = center(p, t, &mut x, opts.max_newton)?;
        steps += n;
        decrement = dec;
        let obj = p.objective(x.as_slice());
        let gap = dim / t;
        if gap <= opts.gap * obj.abs().max(1.0) {
            debug!("barrier converged: objective {obj:.12e}, gap {gap:.2e}, {steps} Newton steps");
            return Ok(BarrierResult { objective: obj, x, gap, newton_steps: steps, decrement });
        }
        t *= opts.mu;
    }
    Err(Error::SdpNotConverged { iterations: steps, gap: dim / t, decrement })
}

/// Phase I: a point where every block is strictly below its margin.
///
/// Minimises `s` subject to `F_j(x) − sI ≺ −δ_j I`, `s > −1` and
/// `‖x‖ < radius`, stopping as soon as `s < 0`.
pub fn find_feasible(p: &LmiProblem, x0: &Vector, radius: f64) -> Result<Vector> {
    let (viol, _) = p.max_violation(x0.as_slice());
    if viol < 0.0 {
        return Ok(x0.clone());
    }
    let nv = p.nvars + 1;
    let mut blocks: Vec<LmiBlock> = p
        .blocks
        .iter()
        .filter(|b| b.dim() > 0)
        .map(|b| {
            let mut coeffs = b.coeffs.clone();
            coeffs.push((p.nvars, -Mat::identity(b.dim(), b.dim())));
            LmiBlock { label: b.label.clone(), f0: b.f0.clone(), coeffs, margin: b.margin }
        })
        .collect();
    blocks.push(LmiBlock {
        label: "phase-I lower bound".into(),
        f0: Mat::from_element(1, 1, -1.0),
        coeffs: vec![(p.nvars, Mat::from_element(1, 1, -1.0))],
        margin: 0.0,
    });
    // ‖x‖ < radius as −[[r, xᵀ], [x, rI]] ≺ 0
    let ball = LmiBlock::from_affine("phase-I ball", nv, 0.0, |y| {
        let mut m = Mat::identity(p.nvars + 1, p.nvars + 1) * (-radius);
        for k in 0..p.nvars {
            m[(0, k + 1)] = -y[k];
            m[(k + 1, 0)] = -y[k];
        }
        m
    });
    blocks.push(ball);
    let mut c = Vector::zeros(nv);
    c[p.nvars] = 1.0;
    let aux = LmiProblem { nvars: nv, c, blocks };

    let mut x = Vector::zeros(nv);
    x.rows_mut(0, p.nvars).copy_from(x0);
    x[p.nvars] = viol.max(0.0) + 1.0;
    if x0.norm() >= radius {
        return Err(Error::InvalidArgument("phase-I start lies outside the search ball".into()));
    }

    let dim = aux.barrier_dim() as f64;
    let mut t = 1.0;
    for _ in 0..200 {
        center(&aux, t, &mut x, 80)?;
        let s = x[p.nvars];
        let cand = x.rows(0, p.nvars).clone_owned();
        if s < 0.0 && p.max_violation(cand.as_slice()).0 < 0.0 {
            return Ok(cand);
        }
        if dim / t < 1e-12 {
            break;
        }
        t *= 8.0;
    }
    let cand = x.rows(0, p.nvars).clone_owned();
    let (viol, j) = p.max_violation(cand.as_slice());
    Err(Error::Infeasible { constraint: p.blocks[j].label.clone(), max_eig: viol })
}
