//! Small dense linear-algebra helpers shared by the concrete models.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

const EIGEN_EPS: f64 = 1e-15;
const EIGEN_MAX_ITER: usize = 10_000;

/// Largest entrywise modulus of `m - m^dagger`.
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn symmetric_defect(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Eigenvalues (ascending) and unitary eigenvectors of a Hermitian matrix.
pub fn hermitian_eigen(m: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let eig = m
        .clone()
        .try_symmetric_eigen(EIGEN_EPS, EIGEN_MAX_ITER)
        .ok_or_else(|| Error::Numerical(format!("{0}x{0} Hermitian eigensolve did not converge", m.nrows())))?;
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite eigenvalue".into()));
    }
    Ok((eig.eigenvalues.iter().copied().collect(), eig.eigenvectors))
}

/// Spectral norm of a Hermitian matrix, i.e. its largest eigenvalue magnitude.
pub fn hermitian_spectral_norm(m: &CMatrix) -> Result<f64> {
    let (vals, _) = hermitian_eigen(m)?;
    Ok(vals.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())))
}

pub fn hermitian_min_eigenvalue(m: &CMatrix) -> Result<f64> {
    let (vals, _) = hermitian_eigen(m)?;
    Ok(vals.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Largest singular value of a general real matrix.
pub fn spectral_norm(m: &DMatrix<f64>) -> Result<f64> {
    let svd = m
        .clone()
        .try_svd(false, false, EIGEN_EPS, EIGEN_MAX_ITER)
        .ok_or_else(|| Error::Numerical("singular value decomposition did not converge".into()))?;
    Ok(svd.singular_values.iter().fold(0.0_f64, |acc, v| acc.max(*v)))
}

pub fn to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|v| Complex64::new(v, 0.0))
}

pub(crate) fn check_square(m_rows: usize, m_cols: usize, n: usize, field: &str) -> Result<()> {
    if m_rows != n || m_cols != n {
        return Err(Error::invalid(
            field,
            format!("expected a {n}x{n} matrix, got {m_rows}x{m_cols}"),
        ));
    }
    Ok(())
}

pub(crate) fn check_finite_c(m: &CMatrix, field: &str) -> Result<()> {
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::invalid(field, "contains non-finite entries"));
    }
    Ok(())
}

pub(crate) fn check_finite_r(m: &DMatrix<f64>, field: &str) -> Result<()> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(field, "contains non-finite entries"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn defect_of_hermitian_is_zero() {
        let m = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.5, -0.25), c(0.5, 0.25), c(-2.0, 0.0)]);
        assert_eq!(hermitian_defect(&m), 0.0);
        let mut bad = m.clone();
        bad[(0, 1)] = c(0.5, 0.25);
        assert!((hermitian_defect(&bad) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn spectral_norms() {
        let px = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        assert!((hermitian_spectral_norm(&px).unwrap() - 1.0).abs() < 1e-14);
        let r = DMatrix::from_row_slice(2, 2, &[0.0, 3.0, 0.0, 0.0]);
        assert!((spectral_norm(&r).unwrap() - 3.0).abs() < 1e-14);
    }
}
