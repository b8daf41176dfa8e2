use faer::Mat;
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub(crate) fn to_faer(a: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

/// Eigenvalues and unit (column) eigenvectors of a general real matrix.
pub(crate) fn eigen(a: &DMatrix<f64>) -> Result<(Vec<Complex64>, Vec<Vec<Complex64>>)> {
    let n = a.nrows();
    let evd = to_faer(a).eigen().map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let values: Vec<Complex64> = evd.S().column_vector().iter().copied().collect();
    let u = evd.U();
    let vectors = (0..n)
        .map(|k| {
            let col: Vec<Complex64> = (0..n).map(|i| u[(i, k)]).collect();
            let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm > 0.0 {
                col.iter().map(|z| z / norm).collect()
            } else {
                col
            }
        })
        .collect();
    Ok((values, vectors))
}

pub(crate) fn eigenvalues(a: &Mat<f64>) -> Result<Vec<Complex64>> {
    a.eigenvalues().map_err(|e| Error::Eigen(format!("{e:?}")))
}

pub(crate) fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().svd(false, false).singular_values.max()
}

/// 2-norm condition number of a complex matrix given by columns; infinite when singular.
pub(crate) fn condition_number(columns: &[Vec<Complex64>]) -> f64 {
    let n = columns.len();
    let v = Mat::<Complex64>::from_fn(n, n, |i, j| columns[j][i]);
    match v.singular_values() {
        Ok(s) if !s.is_empty() => {
            let (max, min) = (s[0], s[s.len() - 1]);
            if min <= f64::EPSILON * max * n as f64 {
                f64::INFINITY
            } else {
                max / min
            }
        }
        _ => f64::INFINITY,
    }
}

/// Scale used to decide whether an eigenvalue is real.
pub(crate) fn spectral_scale(values: &[Complex64]) -> f64 {
    values.iter().map(|z| z.norm()).fold(1.0, f64::max)
}

pub(crate) fn is_real(z: Complex64, scale: f64) -> bool {
    z.im.abs() <= crate::tol::REAL * scale
}

/// Dimension of the null space of `a - lambda I` by singular values.
pub(crate) fn geometric_multiplicity(a: &DMatrix<f64>, lambda: f64) -> usize {
    let n = a.nrows();
    let shifted = a - DMatrix::identity(n, n) * lambda;
    let s = shifted.svd(false, false).singular_values;
    let cutoff = 1e-6 * a.norm().max(1.0);
    s.iter().filter(|v| **v <= cutoff).count()
}
