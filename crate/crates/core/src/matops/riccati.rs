//! Continuous-time algebraic Riccati equations.
//!
//! Both the control ARE and the estimation (dual) ARE are reduced to the
//! common form
//!
//! ```text
//! FᵀX + XF − XGX + H = 0,    G = Gᵀ >= 0,  H = Hᵀ >= 0
//! ```
//!
//! whose stabilising solution makes `F − GX` Hurwitz. The solution is read
//! off the stable invariant subspace of the Hamiltonian `[[F, −G], [−H, −Fᵀ]]`
//! (ordered real Schur form). Newton–Kleinman iterations polish the result
//! when the subspace basis is badly conditioned or the residual certificate
//! is not met.

use log::debug;
use serde::{Deserialize, Serialize};

use super::schur::{real_schur, Ordering};
use super::{
    check_pd, check_psd, check_square, condition_number, is_hurwitz, solve_lyapunov_with, spd_inverse,
    symmetrize, uncontrollable_eigenvalue, unobservable_eigenvalue,
};
use crate::{Error, Mat, Result, Tolerances};

/// Conditioning of the subspace basis above which Newton–Kleinman takes over.
const SUBSPACE_COND_LIMIT: f64 = 1e8;
const NEWTON_MAX_ITERS: usize = 60;

/// Stabilising solution of `AᵀP + PA − PBR⁻¹BᵀP + Q = 0`.
pub fn solve_care(a: &Mat, b: &Mat, q: &Mat, r: &Mat) -> Result<Mat> {
    solve_care_with(a, b, q, r, &Tolerances::default())
}

pub fn solve_care_with(a: &Mat, b: &Mat, q: &Mat, r: &Mat, tol: &Tolerances) -> Result<Mat> {
    let n = a.nrows();
    check_square(a, n, "A")?;
    if b.nrows() != n {
        return Err(Error::Dimension(format!("B must have {n} rows, got {}", b.nrows())));
    }
    check_square(q, n, "Q")?;
    check_square(r, b.ncols(), "R")?;
    check_psd(q, "Q")?;
    check_pd(r, "R")?;

    if let Some(lam) = uncontrollable_eigenvalue(a, b, true, tol.rank)? {
        return Err(Error::Pbh { what: "(A, B) stabilizability", re: lam.re, im: lam.im });
    }
    if let Some(lam) = unobservable_eigenvalue(a, q, true, tol.rank)? {
        return Err(Error::Pbh { what: "(A, Q^1/2) detectability", re: lam.re, im: lam.im });
    }

    let g = symmetrize(&(b * spd_inverse(r, "R")? * b.transpose()));
    stabilizing_solution(a, &g, q, tol, "CARE")
}

/// Solution of the estimation ARE `AS + SAᵀ + B̄R⁻¹B̄ᵀ − SCᵀQCS = 0` with its
/// gain `L = SCᵀQ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualAre {
    pub s: Mat,
    pub l: Mat,
}

pub fn solve_dual_are(a: &Mat, b_dist: &Mat, c: &Mat, q: &Mat, r: &Mat) -> Result<DualAre> {
    solve_dual_are_with(a, b_dist, c, q, r, &Tolerances::default())
}

pub fn solve_dual_are_with(a: &Mat, b_dist: &Mat, c: &Mat, q: &Mat, r: &Mat, tol: &Tolerances) -> Result<DualAre> {
    let n = a.nrows();
    check_square(a, n, "A")?;
    if b_dist.nrows() != n {
        return Err(Error::Dimension(format!("B̄ must have {n} rows, got {}", b_dist.nrows())));
    }
    if c.ncols() != n {
        return Err(Error::Dimension(format!("C must have {n} columns, got {}", c.ncols())));
    }
    check_square(q, c.nrows(), "Q")?;
    check_square(r, b_dist.ncols(), "R")?;
    check_pd(q, "Q")?;
    check_pd(r, "R")?;

    if let Some(lam) = unobservable_eigenvalue(a, c, false, tol.rank)? {
        return Err(Error::Pbh { what: "(A, C) observability", re: lam.re, im: lam.im });
    }
    if let Some(lam) = uncontrollable_eigenvalue(a, b_dist, false, tol.rank)? {
        return Err(Error::Pbh { what: "(A, B̄) controllability", re: lam.re, im: lam.im });
    }

    let g = symmetrize(&(c.transpose() * q * c));
    let h = if b_dist.ncols() == 0 {
        Mat::zeros(n, n)
    } else {
        symmetrize(&(b_dist * spd_inverse(r, "R")? * b_dist.transpose()))
    };
    let s = stabilizing_solution(&a.transpose(), &g, &h, tol, "dual ARE")?;
    let l = &s * c.transpose() * q;
    Ok(DualAre { s, l })
}

fn residual(f: &Mat, g: &Mat, h: &Mat, x: &Mat) -> Mat {
    f.transpose() * x + x * f - x * g * x + h
}

fn residual_ok(f: &Mat, g: &Mat, h: &Mat, x: &Mat, tol: f64) -> (bool, f64) {
    let res = residual(f, g, h, x).norm();
    (res <= tol * x.norm().max(1.0), res)
}

fn stabilizing_solution(f: &Mat, g: &Mat, h: &Mat, tol: &Tolerances, what: &'static str) -> Result<Mat> {
    let n = f.nrows();
    if n == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    let mut ham = Mat::zeros(2 * n, 2 * n);
    ham.view_mut((0, 0), (n, n)).copy_from(f);
    ham.view_mut((0, n), (n, n)).copy_from(&(-g));
    ham.view_mut((n, 0), (n, n)).copy_from(&(-h));
    ham.view_mut((n, n), (n, n)).copy_from(&(-f.transpose()));

    let schur = real_schur(&ham, Ordering::StableFirst, true)?;
    if schur.sdim != n {
        return Err(Error::Numerical(format!(
            "{what}: Hamiltonian has {} stable eigenvalues, expected {n} (eigenvalues on the imaginary axis)",
            schur.sdim
        )));
    }
    let u1 = schur.z.view((0, 0), (n, n)).clone_owned();
    let u2 = schur.z.view((n, 0), (n, n)).clone_owned();
    let cond = condition_number(&u1);
    let u1_t = u1.transpose();
    // X = U2 U1⁻¹, computed as the solution of U1ᵀ Xᵀ = U2ᵀ.
    let mut x = match u1_t.lu().solve(&u2.transpose()) {
        Some(xt) if xt.iter().all(|v| v.is_finite()) => symmetrize(&xt.transpose()),
        _ => return Err(Error::Singular(format!("{what}: stable subspace basis U1"))),
    };

    let (ok, res) = residual_ok(f, g, h, &x, tol.riccati_residual);
    if cond > SUBSPACE_COND_LIMIT || !ok {
        debug!("{what}: subspace cond {cond:.2e}, residual {res:.2e}; refining with Newton-Kleinman");
        x = newton_kleinman(f, g, h, &x, tol)?;
    }

    let closed = f - g * &x;
    let stab = is_hurwitz(&closed)?;
    if !stab.hurwitz {
        return Err(Error::NotHurwitz { what: format!("{what} closed loop"), abscissa: stab.abscissa });
    }
    let (ok, res) = residual_ok(f, g, h, &x, tol.riccati_residual);
    if !ok {
        return Err(Error::Residual { what, residual: res, tol: tol.riccati_residual * x.norm().max(1.0) });
    }
    Ok(x)
}

/// Newton–Kleinman iteration for `FᵀX + XF − XGX + H = 0` starting from a
/// stabilising guess `x0` (`F − G·x0` Hurwitz).
pub fn newton_kleinman(f: &Mat, g: &Mat, h: &Mat, x0: &Mat, tol: &Tolerances) -> Result<Mat> {
    let mut x = symmetrize(x0);
    let mut best = (residual(f, g, h, &x).norm(), x.clone());
    for _ in 0..NEWTON_MAX_ITERS {
        let closed = f - g * &x;
        let stab = is_hurwitz(&closed)?;
        if !stab.hurwitz {
            return Err(Error::NotHurwitz { what: "Newton-Kleinman iterate".into(), abscissa: stab.abscissa });
        }
        // closedᵀ X + X closed + H + X G X = 0
        let w = h + &x * g * &x;
        let next = solve_lyapunov_with(&closed.transpose(), &symmetrize(&w), &Tolerances { lyapunov_residual: f64::INFINITY, ..*tol })?;
        let step = (&next - &x).norm();
        x = next;
        let res = residual(f, g, h, &x).norm();
        if res < best.0 {
            best = (res, x.clone());
        }
        if step <= 1e-15 * x.norm().max(1.0) || res <= 1e-3 * tol.riccati_residual * x.norm().max(1.0) {
            break;
        }
    }
    Ok(best.1)
}
