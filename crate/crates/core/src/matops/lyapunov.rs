//! Continuous Lyapunov equation `FS + SFᵀ + W = 0` by Bartels–Stewart.

use super::schur::{real_schur, Ordering};
use super::{check_square, is_hurwitz, symmetrize};
use crate::{Error, Mat, Result, Tolerances};

/// Unique symmetric solution of `FS + SFᵀ + W = 0` for Hurwitz `F`.
pub fn solve_lyapunov(f: &Mat, w: &Mat) -> Result<Mat> {
    solve_lyapunov_with(f, w, &Tolerances::default())
}

pub fn solve_lyapunov_with(f: &Mat, w: &Mat, tol: &Tolerances) -> Result<Mat> {
    let n = f.nrows();
    check_square(f, n, "F")?;
    check_square(w, n, "W")?;
    if n == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    let stab = is_hurwitz(f)?;
    if !stab.hurwitz {
        return Err(Error::NotHurwitz { what: "Lyapunov matrix F".into(), abscissa: stab.abscissa });
    }
    let w = symmetrize(w);
    let schur = real_schur(f, Ordering::None, true)?;
    let (t, z) = (&schur.t, &schur.z);

    let mut s = z * solve_quasi_triangular(t, &(z.transpose() * &w * z))? * z.transpose();
    s = symmetrize(&s);

    // One step of iterative refinement on the residual.
    let res = f * &s + &s * f.transpose() + &w;
    let scale = s.norm().max(1.0);
    if res.norm() > 0.1 * tol.lyapunov_residual * scale {
        let corr = z * solve_quasi_triangular(t, &(z.transpose() * symmetrize(&res) * z))? * z.transpose();
        s = symmetrize(&(s + corr));
    }
    let res = (f * &s + &s * f.transpose() + &w).norm();
    if res > tol.lyapunov_residual * s.norm().max(1.0) {
        return Err(Error::Residual { what: "Lyapunov", residual: res, tol: tol.lyapunov_residual * s.norm().max(1.0) });
    }
    Ok(s)
}

/// Solves `TX + XTᵀ + W = 0` with `T` in real Schur form, sweeping column
/// blocks of `X` from the last to the first.
fn solve_quasi_triangular(t: &Mat, w: &Mat) -> Result<Mat> {
    let n = t.nrows();
    let mut x = Mat::zeros(n, n);
    let mut j_end = n;
    while j_end > 0 {
        let size = if j_end >= 2 && t[(j_end - 1, j_end - 2)] != 0.0 { 2 } else { 1 };
        let j = j_end - size;

        // rhs = −W_J − Σ_{K>J} X_K T[J,K]ᵀ
        let mut rhs = -w.columns(j, size).clone_owned();
        if j_end < n {
            let tail = j_end..n;
            let x_tail = x.columns(j_end, tail.len());
            let t_jk = t.view((j, j_end), (size, tail.len()));
            rhs -= x_tail * t_jk.transpose();
        }

        if size == 1 {
            let mut sys = t.clone();
            let d = t[(j, j)];
            for i in 0..n {
                sys[(i, i)] += d;
            }
            let col = sys
                .lu()
                .solve(&rhs)
                .ok_or_else(|| Error::Singular("Lyapunov operator (eigenvalues sum to zero)".into()))?;
            x.set_column(j, &col.column(0));
        } else {
            // (I₂ ⊗ T + T_JJ ⊗ I_n) vec(X_J) = vec(rhs)
            let tjj = t.view((j, j), (2, 2)).clone_owned();
            let mut sys = Mat::zeros(2 * n, 2 * n);
            for b in 0..2 {
                sys.view_mut((b * n, b * n), (n, n)).copy_from(t);
            }
            for bi in 0..2 {
                for bj in 0..2 {
                    let v = tjj[(bi, bj)];
                    for i in 0..n {
                        sys[(bi * n + i, bj * n + i)] += v;
                    }
                }
            }
            let vec_rhs = Mat::from_iterator(2 * n, 1, rhs.iter().cloned());
            let sol = sys
                .lu()
                .solve(&vec_rhs)
                .ok_or_else(|| Error::Singular("Lyapunov operator (eigenvalues sum to zero)".into()))?;
            for b in 0..2 {
                for i in 0..n {
                    x[(i, j + b)] = sol[(b * n + i, 0)];
                }
            }
        }
        j_end = j;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_case() {
        let s = solve_lyapunov(&Mat::from_element(1, 1, -1.0), &Mat::from_element(1, 1, 2.0)).unwrap();
        assert!((s[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn negative_identity() {
        let s = solve_lyapunov(&(-Mat::identity(2, 2)), &Mat::identity(2, 2)).unwrap();
        assert!((s - Mat::identity(2, 2) * 0.5).norm() < 1e-15);
    }

    #[test]
    fn complex_pair_block() {
        let f = Mat::from_row_slice(3, 3, &[-0.5, 2.0, 0.3, -2.0, -0.5, 1.0, 0.0, 0.0, -1.0]);
        let w = Mat::from_row_slice(3, 3, &[2.0, 0.5, 0.0, 0.5, 1.0, 0.2, 0.0, 0.2, 3.0]);
        let s = solve_lyapunov(&f, &w).unwrap();
        let res = &f * &s + &s * f.transpose() + &w;
        assert!(res.norm() < 1e-12);
    }

    #[test]
    fn unstable_f_rejected() {
        let err = solve_lyapunov(&Mat::identity(2, 2), &Mat::identity(2, 2)).unwrap_err();
        assert!(matches!(err, Error::NotHurwitz { .. }));
    }
}
