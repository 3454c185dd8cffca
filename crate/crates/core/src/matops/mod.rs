//! Core matrix computations: Kronecker products, Riccati and Lyapunov
//! solvers, PBH tests and stability checks.

mod lyapunov;
mod riccati;
pub(crate) mod schur;

use nalgebra::{Complex, DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Mat, Result, Tolerances};

pub use lyapunov::{solve_lyapunov, solve_lyapunov_with};
pub use riccati::{newton_kleinman, solve_care, solve_care_with, solve_dual_are, solve_dual_are_with, DualAre};

/// Matrices of one agent: `ẋ = Ax + Bu + B̄d`, `y = Cx + n`.
///
/// `B` is absent for pure estimation problems. `C` must have full row rank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentModel {
    pub a: Mat,
    pub b: Option<Mat>,
    pub b_dist: Mat,
    pub c: Mat,
}

impl AgentModel {
    pub fn new(a: Mat, b: Option<Mat>, b_dist: Mat, c: Mat) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(Error::Dimension(format!("A must be square and non-empty, got {}x{}", a.nrows(), a.ncols())));
        }
        if let Some(b) = &b {
            if b.nrows() != n || b.ncols() == 0 {
                return Err(Error::Dimension(format!("B must be {n}xm1, got {}x{}", b.nrows(), b.ncols())));
            }
        }
        if b_dist.nrows() != n {
            return Err(Error::Dimension(format!("B̄ must have {n} rows, got {}", b_dist.nrows())));
        }
        if c.ncols() != n || c.nrows() == 0 {
            return Err(Error::Dimension(format!("C must be mx{n}, got {}x{}", c.nrows(), c.ncols())));
        }
        if c.nrows() > n {
            return Err(Error::Dimension(format!("C has {} outputs for {n} states", c.nrows())));
        }
        if rank(&c, Tolerances::default().rank) < c.nrows() {
            return Err(Error::Singular("C (rank-deficient output matrix)".into()));
        }
        for m in [&a, &b_dist, &c].into_iter().chain(b.as_ref()) {
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument("agent matrices contain non-finite entries".into()));
            }
        }
        Ok(Self { a, b, b_dist, c })
    }

    /// Estimation-only agent (no control input).
    pub fn estimation(a: Mat, b_dist: Mat, c: Mat) -> Result<Self> {
        Self::new(a, None, b_dist, c)
    }

    /// Control-only agent with full-state measurement (`C = I`, no disturbance input).
    pub fn controlled(a: Mat, b: Mat) -> Result<Self> {
        let n = a.nrows();
        Self::new(a, Some(b), Mat::zeros(n, 0), Mat::identity(n, n))
    }

    /// Number of states.
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// Number of measured outputs.
    pub fn m(&self) -> usize {
        self.c.nrows()
    }

    /// Number of disturbance inputs.
    pub fn q(&self) -> usize {
        self.b_dist.ncols()
    }

    pub fn control_input(&self) -> Result<&Mat> {
        self.b
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("agent model has no control input matrix B".into()))
    }
}

/// Kronecker product `A ⊗ B`.
pub fn kron(a: &Mat, b: &Mat) -> Mat {
    a.kronecker(b)
}

pub fn symmetrize(x: &Mat) -> Mat {
    (x + x.transpose()) * 0.5
}

/// `‖X − Xᵀ‖_F <= tol · max(1, ‖X‖_F)`.
pub fn is_symmetric(x: &Mat, tol: f64) -> bool {
    x.is_square() && (x - x.transpose()).norm() <= tol * x.norm().max(1.0)
}

/// Largest singular value.
pub fn norm2(x: &Mat) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.singular_values().max()
}

/// Numerical rank with threshold `tol · σ_max`.
pub fn rank(x: &Mat, tol: f64) -> usize {
    if x.is_empty() {
        return 0;
    }
    let sv = x.singular_values();
    let thr = tol * sv.max();
    sv.iter().filter(|&&s| s > thr).count()
}

/// Ascending eigenvalues and matching eigenvectors of a symmetric matrix.
pub fn sym_eigen(x: &Mat) -> (Vec<f64>, Mat) {
    let eig = SymmetricEigen::new(symmetrize(x));
    let n = x.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = Mat::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_sym_eigenvalue(x: &Mat) -> f64 {
    if x.is_empty() {
        return f64::INFINITY;
    }
    sym_eigen(x).0[0]
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_sym_eigenvalue(x: &Mat) -> f64 {
    if x.is_empty() {
        return f64::NEG_INFINITY;
    }
    *sym_eigen(x).0.last().unwrap()
}

/// Symmetric square root of a positive semidefinite matrix.
pub fn sym_sqrt(x: &Mat) -> Mat {
    let (vals, vecs) = sym_eigen(x);
    let d = Mat::from_diagonal(&nalgebra::DVector::from_iterator(vals.len(), vals.iter().map(|v| v.max(0.0).sqrt())));
    symmetrize(&(&vecs * d * vecs.transpose()))
}

/// Inverse of a symmetric positive definite matrix; `name` labels the error.
pub fn spd_inverse(x: &Mat, name: &'static str) -> Result<Mat> {
    let chol = x.clone().cholesky().ok_or(Error::IndefiniteWeight(name))?;
    Ok(symmetrize(&chol.inverse()))
}

/// `X^{-1/2}` for symmetric positive definite `X`.
pub fn sym_inv_sqrt(x: &Mat, name: &'static str) -> Result<Mat> {
    let (vals, vecs) = sym_eigen(x);
    if vals.first().is_some_and(|&v| v <= 0.0) {
        return Err(Error::IndefiniteWeight(name));
    }
    let d = Mat::from_diagonal(&nalgebra::DVector::from_iterator(vals.len(), vals.iter().map(|v| 1.0 / v.sqrt())));
    Ok(symmetrize(&(&vecs * d * vecs.transpose())))
}

pub fn try_inverse(x: &Mat, what: &str) -> Result<Mat> {
    x.clone().try_inverse().ok_or_else(|| Error::Singular(what.to_string()))
}

/// 2-norm condition number.
pub fn condition_number(x: &Mat) -> f64 {
    if x.is_empty() {
        return 1.0;
    }
    let sv = x.singular_values();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        sv.max() / min
    }
}

/// Eigenvalues of a general real square matrix.
pub fn eigenvalues(f: &Mat) -> Result<Vec<Complex64>> {
    Ok(schur::real_schur(f, schur::Ordering::None, false)?.eigenvalues)
}

/// Outcome of a Hurwitz test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stability {
    pub hurwitz: bool,
    /// Largest real part over the spectrum.
    pub abscissa: f64,
}

/// Hurwitz test with strict zero margin.
pub fn is_hurwitz(f: &Mat) -> Result<Stability> {
    is_hurwitz_with(f, Tolerances::default().hurwitz_margin)
}

pub fn is_hurwitz_with(f: &Mat, margin: f64) -> Result<Stability> {
    let abscissa = spectral_abscissa(f)?;
    Ok(Stability { hurwitz: abscissa < -margin, abscissa })
}

pub fn spectral_abscissa(f: &Mat) -> Result<f64> {
    if !f.is_square() {
        return Err(Error::Dimension(format!("spectral abscissa of a {}x{} matrix", f.nrows(), f.ncols())));
    }
    Ok(eigenvalues(f)?.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max))
}

/// PBH test: first eigenvalue `λ` of `A` (restricted to `Re λ >= 0` when
/// `unstable_only`) at which `[A − λI, B]` loses rank.
pub fn uncontrollable_eigenvalue(a: &Mat, b: &Mat, unstable_only: bool, rank_tol: f64) -> Result<Option<Complex64>> {
    let n = a.nrows();
    if b.nrows() != n {
        return Err(Error::Dimension(format!("PBH: B has {} rows, A is {n}x{n}", b.nrows())));
    }
    let scale = norm2(a).max(norm2(b)).max(1.0);
    for lam in eigenvalues(a)? {
        if unstable_only && lam.re < 0.0 {
            continue;
        }
        let m = DMatrix::<Complex<f64>>::from_fn(n, n + b.ncols(), |i, j| {
            if j < n {
                let mut v = Complex::new(a[(i, j)], 0.0);
                if i == j {
                    v -= lam;
                }
                v
            } else {
                Complex::new(b[(i, j - n)], 0.0)
            }
        });
        let sv = m.singular_values();
        let smallest = if sv.len() < n { 0.0 } else { sv.iter().cloned().fold(f64::INFINITY, f64::min) };
        if smallest <= rank_tol * scale.max(lam.norm()) {
            return Ok(Some(lam));
        }
    }
    Ok(None)
}

/// Dual PBH test on `(A, C)`.
pub fn unobservable_eigenvalue(a: &Mat, c: &Mat, unstable_only: bool, rank_tol: f64) -> Result<Option<Complex64>> {
    uncontrollable_eigenvalue(&a.transpose(), &c.transpose(), unstable_only, rank_tol)
}

pub(crate) fn check_square(x: &Mat, n: usize, name: &str) -> Result<()> {
    if x.nrows() != n || x.ncols() != n {
        return Err(Error::Dimension(format!("{name} must be {n}x{n}, got {}x{}", x.nrows(), x.ncols())));
    }
    Ok(())
}

/// Symmetric positive semidefinite check with relative tolerance.
pub(crate) fn check_psd(x: &Mat, name: &'static str) -> Result<()> {
    if !is_symmetric(x, 1e-12) {
        return Err(Error::AsymmetricWeight(name));
    }
    if min_sym_eigenvalue(x) < -1e-12 * norm2(x).max(1.0) {
        return Err(Error::IndefiniteWeight(name));
    }
    Ok(())
}

pub(crate) fn check_pd(x: &Mat, name: &'static str) -> Result<()> {
    if !is_symmetric(x, 1e-12) {
        return Err(Error::AsymmetricWeight(name));
    }
    if x.is_empty() {
        return Ok(());
    }
    if x.clone().cholesky().is_none() || min_sym_eigenvalue(x) <= 0.0 {
        return Err(Error::IndefiniteWeight(name));
    }
    Ok(())
}
