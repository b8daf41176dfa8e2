//! Dense Kronecker-product operators on a uniform 1D grid.
//!
//! These assemble the linearized solution map on all grid modes at once,
//! without splitting into Laplacian eigenmodes, and serve as an independent
//! check of the mode-by-mode index computation.

use faer::linalg::solvers::Solve;
use faer::Mat;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{BoundaryCondition, Model};
use crate::spectral::laplacian_1d;

/// `B (x) L` with species-major ordering: row `i * n + p`.
fn kron(b: &DMatrix<f64>, l: &Mat<f64>) -> Mat<f64> {
    let (m, n) = (b.nrows(), l.nrows());
    Mat::from_fn(m * n, m * n, |r, c| b[(r / n, c / n)] * l[(r % n, c % n)])
}

fn interval_laplacian(model: &Model, n: usize) -> Result<Mat<f64>> {
    let lengths = model.domain().lengths();
    if lengths.len() != 1 {
        return Err(Error::InvalidInput("the grid oracle supports intervals only".into()));
    }
    Ok(laplacian_1d(n, lengths[0] / n as f64, BoundaryCondition::Neumann))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParityOracle {
    pub shift: f64,
    pub grid_n: usize,
    /// Real eigenvalues above 1, counted with algebraic multiplicity.
    pub count: usize,
    pub parity: i32,
    /// Smallest `|mu - 1|` over the spectrum.
    pub closest_to_one: f64,
}

/// Counts real `mu > 1` of `(A (x) L_h + k I)^{-1} (J (x) I + k I)` at `u*`.
pub fn discrete_index_parity(model: &Model, u_star: &[f64], grid_n: usize, shift: f64) -> Result<ParityOracle> {
    let l = interval_laplacian(model, grid_n)?;
    let a = model.diffusion_matrix(u_star);
    let j = model.reaction_jacobian(u_star);
    let size = model.m() * grid_n;
    let mut lhs = kron(&a, &l);
    let mut rhs = kron(&j, &Mat::<f64>::identity(grid_n, grid_n));
    for d in 0..size {
        lhs[(d, d)] += shift;
        rhs[(d, d)] += shift;
    }
    let t = lhs.partial_piv_lu().solve(&rhs);
    let mu = linalg::eigenvalues(&t)?;
    let scale = linalg::spectral_scale(&mu);
    let count = mu.iter().filter(|z| linalg::is_real(**z, scale) && z.re > 1.0).count();
    let closest_to_one = mu.iter().map(|z| (z - 1.0).norm()).fold(f64::INFINITY, f64::min);
    Ok(ParityOracle {
        shift,
        grid_n,
        count,
        parity: if count % 2 == 0 { 1 } else { -1 },
        closest_to_one,
    })
}

/// All `mu` with `(J (x) I - A (x) L_h) c = (mu - 1) (d_A (x) L_h) c`, found as
/// `mu = 1 + 1/nu` from the eigenvalues `nu` of `(J (x) I - A (x) L_h)^{-1} (d_A (x) L_h)`.
/// The kernel of `L_h` gives `nu = 0` and is dropped.
pub fn discrete_mode_multipliers(model: &Model, u_star: &[f64], grid_n: usize) -> Result<Vec<Complex64>> {
    let l = interval_laplacian(model, grid_n)?;
    let a = model.diffusion_matrix(u_star);
    let j = model.reaction_jacobian(u_star);
    let d_a = DMatrix::from_diagonal(&a.diagonal());
    let lhs = kron(&j, &Mat::<f64>::identity(grid_n, grid_n)) - kron(&a, &l);
    let rhs = kron(&d_a, &l);
    let t = lhs.partial_piv_lu().solve(&rhs);
    let nu = linalg::eigenvalues(&t)?;
    let scale = linalg::spectral_scale(&nu);
    Ok(nu
        .into_iter()
        .filter(|z| z.norm() > 1e-10 * scale)
        .map(|z| 1.0 + 1.0 / z)
        .collect())
}

/// Eigenvalues of the uniform-grid Neumann Laplacian, `4/h^2 sin^2(k pi / 2n)`.
pub fn discrete_neumann_eigenvalue(length: f64, grid_n: usize, k: usize) -> f64 {
    let h = length / grid_n as f64;
    let s = (k as f64 * std::f64::consts::PI / (2.0 * grid_n as f64)).sin();
    4.0 / (h * h) * s * s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, DomainConfig, DomainKind, ModelConfig};
    use std::f64::consts::PI;

    fn diagonal_model() -> Model {
        // A = I, J = diag(2, -1) at u* = (1, 1)
        build_model(&ModelConfig {
            m: 2,
            d: vec![1.0, 1.0],
            alpha: vec![vec![0.0; 2]; 2],
            r: vec![-2.0, 1.0],
            c: vec![vec![-2.0, 0.0], vec![0.0, 1.0]],
            domain: DomainConfig {
                kind: DomainKind::Interval,
                lengths: vec![PI],
            },
            bc: BoundaryCondition::Neumann,
        })
        .unwrap()
    }

    #[test]
    fn kron_layout() {
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let l = Mat::<f64>::from_fn(2, 2, |i, j| (i * 2 + j) as f64);
        let k = kron(&b, &l);
        assert_eq!(k[(0, 3)], 2.0 * 1.0);
        assert_eq!(k[(3, 1)], 3.0 * 3.0);
    }

    #[test]
    fn diagonal_parity_counts_constant_and_first_mode() {
        // mu > 1 for the constant mode of species 1 (J = 2) and for mode 1 (2 > 1):
        // mu = (2 + k) / (lambda + k) > 1 iff lambda < 2
        let model = diagonal_model();
        let o = discrete_index_parity(&model, &[1.0, 1.0], 32, 4.0).unwrap();
        assert_eq!(o.count, 2);
        assert_eq!(o.parity, 1);
    }

    #[test]
    fn multipliers_include_mode_values() {
        let model = diagonal_model();
        let mu = discrete_mode_multipliers(&model, &[1.0, 1.0], 64).unwrap();
        // species 1 on mode k: mu = 2 / lambda_k, species 2: mu = -1 / lambda_k
        let l1 = discrete_neumann_eigenvalue(PI, 64, 1);
        for target in [2.0 / l1, -1.0 / l1] {
            assert!(mu.iter().any(|z| (z - target).norm() < 1e-8 * target.abs()), "{target}");
        }
        assert_eq!(mu.len(), 2 * 63);
    }
}
