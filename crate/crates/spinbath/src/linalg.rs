//! Thin safe wrappers over the LAPACK routines this crate needs: symmetric
//! eigensolves (divide and conquer, `dsyevd`) and least squares (`dgels`).
//!
//! Matrices are stored column-major as LAPACK expects; for the symmetric
//! inputs used here row-major storage is identical.

use crate::error::{Error, Result};

/// Eigenvalues of a real symmetric n×n matrix, ascending. Destroys `a`.
pub fn sym_eigenvalues(a: &mut [f64], n: usize) -> Result<Vec<f64>> {
    dsyevd(a, n, b'N')
}

/// Eigen-decomposition of a real symmetric n×n matrix. Returns ascending
/// eigenvalues; on return the columns of `a` hold the matching orthonormal
/// eigenvectors.
pub fn sym_eigen(a: &mut [f64], n: usize) -> Result<Vec<f64>> {
    dsyevd(a, n, b'V')
}

fn dsyevd(a: &mut [f64], n: usize, jobz: u8) -> Result<Vec<f64>> {
    assert_eq!(a.len(), n * n, "matrix buffer size mismatch");
    if n == 0 {
        return Ok(Vec::new());
    }
    let nn = i32::try_from(n).map_err(|_| Error::ResourceCap(format!("matrix dim {n}")))?;
    let (jobz, uplo) = (jobz as i8, b'L' as i8);
    let mut w = vec![0.0f64; n];
    let mut info = 0i32;

    // Workspace query, then the real call.
    let (mut wkopt, mut iwkopt) = (0.0f64, 0i32);
    unsafe {
        lapack_sys::dsyevd_(
            &jobz, &uplo, &nn, a.as_mut_ptr(), &nn, w.as_mut_ptr(),
            &mut wkopt, &-1, &mut iwkopt, &-1, &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Numerical(format!("dsyevd workspace query failed (info={info})")));
    }
    let lwork = wkopt as i32;
    let liwork = iwkopt;
    let mut work = vec![0.0f64; lwork as usize];
    let mut iwork = vec![0i32; liwork as usize];
    unsafe {
        lapack_sys::dsyevd_(
            &jobz, &uplo, &nn, a.as_mut_ptr(), &nn, w.as_mut_ptr(),
            work.as_mut_ptr(), &lwork, iwork.as_mut_ptr(), &liwork, &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Numerical(format!("dsyevd failed to converge (info={info})")));
    }
    Ok(w)
}

/// Least-squares solution of the overdetermined system `a·x = b` for a
/// column-major m×n matrix with m ≥ n. Destroys both inputs; returns x.
pub fn least_squares(a: &mut [f64], m: usize, n: usize, b: &mut [f64]) -> Result<Vec<f64>> {
    assert_eq!(a.len(), m * n, "matrix buffer size mismatch");
    assert!(b.len() >= m, "rhs shorter than row count");
    assert!(m >= n, "system must be overdetermined");
    let (mm, nn) = (m as i32, n as i32);
    let trans = b'N' as i8;
    let nrhs = 1i32;
    let mut info = 0i32;

    let mut wkopt = 0.0f64;
    unsafe {
        lapack_sys::dgels_(
            &trans, &mm, &nn, &nrhs, a.as_mut_ptr(), &mm, b.as_mut_ptr(), &mm,
            &mut wkopt, &-1, &mut info, 1,
        );
    }
    if info != 0 {
        return Err(Error::Numerical(format!("dgels workspace query failed (info={info})")));
    }
    let lwork = wkopt as i32;
    let mut work = vec![0.0f64; lwork as usize];
    unsafe {
        lapack_sys::dgels_(
            &trans, &mm, &nn, &nrhs, a.as_mut_ptr(), &mm, b.as_mut_ptr(), &mm,
            work.as_mut_ptr(), &lwork, &mut info, 1,
        );
    }
    if info != 0 {
        return Err(Error::Numerical(format!("dgels failed (info={info})")));
    }
    Ok(b[..n].to_vec())
}

/// Ordinary least-squares line `y ≈ intercept + slope·x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Numerical(format!("linear fit needs ≥ 2 paired points, got {}", x.len())));
    }
    let m = x.len();
    let mut a = vec![0.0f64; m * 2];
    a[..m].fill(1.0);
    a[m..].copy_from_slice(x);
    let mut b = y.to_vec();
    let c = least_squares(&mut a, m, 2, &mut b)?;
    Ok((c[0], c[1]))
}
