use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Hermitian Toeplitz matrix with first column `u`:
/// `T[j, k] = u[j - k]` for `j >= k`, `conj(u[k - j])` otherwise.
pub fn toeplitz_from_first_column(u: &[Complex64]) -> Result<DMatrix<Complex64>> {
    let n = u.len();
    if n == 0 {
        return Err(Error::InvalidArgument("toeplitz generator is empty".into()));
    }
    if u[0].im.abs() > 1e-10 {
        return Err(Error::InvalidArgument(format!(
            "toeplitz leading entry must be real, got {}",
            u[0]
        )));
    }
    Ok(toeplitz_unchecked(u))
}

pub(crate) fn toeplitz_unchecked(u: &[Complex64]) -> DMatrix<Complex64> {
    let n = u.len();
    DMatrix::from_fn(n, n, |j, k| {
        if j > k {
            u[j - k]
        } else if j < k {
            u[k - j].conj()
        } else {
            Complex64::new(u[0].re, 0.0)
        }
    })
}

/// Sums of the subdiagonals: `out[j] = Σ_k M[k + j, k]`.
pub fn diag_sum(m: &DMatrix<Complex64>) -> Vec<Complex64> {
    assert!(m.is_square(), "diag_sum expects a square matrix");
    let n = m.nrows();
    (0..n)
        .map(|j| (0..n - j).map(|k| m[(k + j, k)]).sum())
        .collect()
}

/// Sums of the leading `n × n` block's subdiagonals for a larger matrix.
pub(crate) fn diag_sum_leading(m: &DMatrix<Complex64>, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|j| (0..n - j).map(|k| m[(k + j, k)]).sum())
        .collect()
}

/// Replaces `m` by `(m + m*) / 2`.
pub(crate) fn hermitize(m: &mut DMatrix<Complex64>) {
    let n = m.nrows();
    for j in 0..n {
        m[(j, j)].im = 0.0;
        for k in j + 1..n {
            let avg = (m[(j, k)] + m[(k, j)].conj()) * 0.5;
            m[(j, k)] = avg;
            m[(k, j)] = avg.conj();
        }
    }
}

/// Frobenius-nearest positive-semidefinite matrix: Hermitian part,
/// eigendecomposition, negative eigenvalues clipped to zero.
pub fn psd_project(m: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let mut out = m.clone();
    psd_project_in_place(&mut out)?;
    Ok(out)
}

/// In-place [`psd_project`]; returns the smallest eigenvalue before clipping.
pub(crate) fn psd_project_in_place(m: &mut DMatrix<Complex64>) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::InvalidArgument("psd_project expects a square matrix".into()));
    }
    if m.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
        return Err(Error::Eigen("non-finite matrix entry".into()));
    }
    hermitize(m);
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::Eigen("symmetric eigensolver did not converge".into()))?;
    let lambda_min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if lambda_min >= 0.0 {
        return Ok(lambda_min);
    }
    let (neg, pos): (Vec<usize>, Vec<usize>) =
        (0..eig.eigenvalues.len()).partition(|&i| eig.eigenvalues[i] < 0.0);
    let n = m.nrows();
    // Rebuild from whichever side of the spectrum is smaller.
    let (indices, subtract) = if neg.len() <= pos.len() {
        (neg, true)
    } else {
        (pos, false)
    };
    let mut scaled = DMatrix::<Complex64>::zeros(n, indices.len());
    let mut basis = DMatrix::<Complex64>::zeros(n, indices.len());
    for (c, &i) in indices.iter().enumerate() {
        let v = eig.eigenvectors.column(i);
        let lam = eig.eigenvalues[i];
        basis.set_column(c, &v);
        scaled.set_column(c, &(v * Complex64::new(lam, 0.0)));
    }
    let part = &scaled * basis.adjoint();
    if subtract {
        *m -= part;
    } else {
        *m = part;
    }
    hermitize(m);
    Ok(lambda_min)
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(m: &DMatrix<Complex64>) -> Result<f64> {
    if m.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
        return Err(Error::Eigen("non-finite matrix entry".into()));
    }
    let mut h = m.clone();
    hermitize(&mut h);
    Ok(h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min))
}
