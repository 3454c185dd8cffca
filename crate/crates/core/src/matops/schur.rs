//! Real Schur decomposition through LAPACK `dgees`.

use std::os::raw::{c_char, c_int};

use num_complex::Complex64;

use crate::{Error, Mat, Result};

/// Which eigenvalues `dgees` moves to the leading block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Ordering {
    None,
    /// Eigenvalues with negative real part first.
    StableFirst,
}

/// `M = Z T Zᵀ` with `T` quasi-upper-triangular and `Z` orthogonal.
pub(crate) struct RealSchur {
    pub t: Mat,
    pub z: Mat,
    /// Number of eigenvalues selected by the ordering (0 for `Ordering::None`).
    pub sdim: usize,
    pub eigenvalues: Vec<Complex64>,
}

unsafe extern "C" fn select_stable(wr: *const f64, _wi: *const f64) -> c_int {
    c_int::from(*wr < 0.0)
}

pub(crate) fn real_schur(m: &Mat, ordering: Ordering, want_vectors: bool) -> Result<RealSchur> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::Dimension(format!("Schur of a {}x{} matrix", n, m.ncols())));
    }
    if n == 0 {
        return Ok(RealSchur { t: Mat::zeros(0, 0), z: Mat::zeros(0, 0), sdim: 0, eigenvalues: vec![] });
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("Schur input contains non-finite entries".into()));
    }

    // nalgebra storage is column-major, as LAPACK expects.
    let mut t = m.clone();
    let mut z = Mat::zeros(n, n);
    let n_i = n as c_int;
    let mut sdim: c_int = 0;
    let mut wr = vec![0.0; n];
    let mut wi = vec![0.0; n];
    let mut bwork = vec![0 as c_int; n];
    let mut info: c_int = 0;
    let jobvs = if want_vectors { b'V' } else { b'N' } as c_char;
    let (sort, select): (c_char, lapack_sys::LAPACK_D_SELECT2) = match ordering {
        Ordering::None => (b'N' as c_char, None),
        Ordering::StableFirst => (b'S' as c_char, Some(select_stable)),
    };

    let mut lwork: c_int = -1;
    let mut work_query = [0.0f64];
    // SAFETY: buffers are sized per the dgees contract (n×n arrays, length-n
    // vectors); the first call is a workspace query.
    unsafe {
        lapack_sys::dgees_(
            &jobvs, &sort, select, &n_i, t.as_mut_ptr(), &n_i, &mut sdim, wr.as_mut_ptr(),
            wi.as_mut_ptr(), z.as_mut_ptr(), &n_i, work_query.as_mut_ptr(), &lwork,
            bwork.as_mut_ptr(), &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Numerical(format!("dgees workspace query failed (info={info})")));
    }
    lwork = (work_query[0] as c_int).max(3 * n_i);
    let mut work = vec![0.0; lwork as usize];
    // SAFETY: as above, with a workspace of the queried size.
    unsafe {
        lapack_sys::dgees_(
            &jobvs, &sort, select, &n_i, t.as_mut_ptr(), &n_i, &mut sdim, wr.as_mut_ptr(),
            wi.as_mut_ptr(), z.as_mut_ptr(), &n_i, work.as_mut_ptr(), &lwork,
            bwork.as_mut_ptr(), &mut info,
        );
    }
    match info {
        0 => {}
        i if i > 0 && i <= n_i => {
            return Err(Error::Numerical(format!("QR algorithm failed to converge (info={i})")))
        }
        i if i == n_i + 1 => {
            return Err(Error::Numerical("eigenvalues too close to reorder the Schur form".into()))
        }
        i if i == n_i + 2 => {
            return Err(Error::Numerical(
                "reordered Schur form changed the stable/unstable split (eigenvalues near the imaginary axis)".into(),
            ))
        }
        i => return Err(Error::Numerical(format!("dgees failed (info={i})"))),
    }

    let eigenvalues = wr.iter().zip(&wi).map(|(&re, &im)| Complex64::new(re, im)).collect();
    Ok(RealSchur { t, z, sdim: sdim as usize, eigenvalues })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stable_eigenvalues_lead() {
        let m = Mat::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 0.0, -1.0, 3.0, 0.0, 0.0, -4.0]);
        let s = real_schur(&m, Ordering::StableFirst, true).unwrap();
        assert_eq!(s.sdim, 2);
        assert!(s.t[(0, 0)] < 0.0 && s.t[(1, 1)] < 0.0 && s.t[(2, 2)] > 0.0);
        let back = &s.z * &s.t * s.z.transpose();
        assert!((back - m).norm() < 1e-12);
    }

    #[test]
    fn complex_pair_reported() {
        let m = Mat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let s = real_schur(&m, Ordering::None, false).unwrap();
        let mut im: Vec<f64> = s.eigenvalues.iter().map(|e| e.im).collect();
        im.sort_by(f64::total_cmp);
        assert!((im[0] + 1.0).abs() < 1e-14 && (im[1] - 1.0).abs() < 1e-14);
    }
}
