//! Neumann Laplacian spectra on intervals and rectangles.

use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BoundaryCondition, Domain};
use crate::tol;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEntry {
    pub lambda_hat: f64,
    pub multiplicity: usize,
    /// Lattice tuples `k` with `lambda_hat = sum (k_a pi / L_a)^2`.
    pub mode_indices: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeSpectrum {
    pub entries: Vec<SpectrumEntry>,
    pub lengths: Vec<f64>,
    /// Smallest relative gap between consecutive distinct eigenvalues.
    pub min_relative_gap: Option<f64>,
}

fn lattice_value(lengths: &[f64], k: &[usize]) -> f64 {
    lengths
        .iter()
        .zip(k)
        .map(|(l, &k)| {
            let w = k as f64 * std::f64::consts::PI / l;
            w * w
        })
        .sum()
}

/// All lattice values `<= bound`, grouped into distinct eigenvalues.
fn lattice_up_to(lengths: &[f64], bound: f64) -> Vec<SpectrumEntry> {
    let kmax: Vec<usize> = lengths
        .iter()
        .map(|l| (bound.max(0.0).sqrt() * l / std::f64::consts::PI).floor() as usize)
        .collect();
    let mut points: Vec<(f64, Vec<usize>)> = Vec::new();
    match lengths.len() {
        1 => {
            for k in 0..=kmax[0] {
                points.push((lattice_value(lengths, &[k]), vec![k]));
            }
        }
        _ => {
            for k1 in 0..=kmax[0] {
                for k2 in 0..=kmax[1] {
                    let v = lattice_value(lengths, &[k1, k2]);
                    if v <= bound * (1.0 + tol::COLLIDE) {
                        points.push((v, vec![k1, k2]));
                    }
                }
            }
        }
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));

    let mut entries: Vec<SpectrumEntry> = Vec::new();
    for (v, k) in points {
        match entries.last_mut() {
            Some(last) if (v - last.lambda_hat).abs() <= tol::COLLIDE * v.abs().max(last.lambda_hat.abs()) => {
                last.multiplicity += 1;
                last.mode_indices.push(k);
            }
            _ => entries.push(SpectrumEntry {
                lambda_hat: v,
                multiplicity: 1,
                mode_indices: vec![k],
            }),
        }
    }
    entries
}

fn min_gap(entries: &[SpectrumEntry]) -> Option<f64> {
    entries
        .windows(2)
        .map(|w| (w[1].lambda_hat - w[0].lambda_hat) / w[1].lambda_hat)
        .reduce(f64::min)
}

fn spectrum(domain: &Domain, entries: Vec<SpectrumEntry>) -> ModeSpectrum {
    ModeSpectrum {
        min_relative_gap: min_gap(&entries),
        entries,
        lengths: domain.lengths(),
    }
}

/// The first `count` distinct Neumann eigenvalues with their multiplicities.
pub fn neumann_eigenvalues(domain: &Domain, count: usize) -> ModeSpectrum {
    let lengths = domain.lengths();
    let count = count.max(1);
    let lmax = lengths.iter().cloned().fold(0.0, f64::max);
    let mut bound = {
        let w = (count as f64) * std::f64::consts::PI / lmax;
        w * w
    };
    loop {
        let entries = lattice_up_to(&lengths, bound);
        if entries.len() >= count {
            return spectrum(domain, entries.into_iter().take(count).collect());
        }
        bound *= 2.0;
    }
}

/// Every distinct Neumann eigenvalue `<= bound`.
pub fn neumann_eigenvalues_up_to(domain: &Domain, bound: f64) -> ModeSpectrum {
    spectrum(domain, lattice_up_to(&domain.lengths(), bound))
}

/// Number of lattice points with value `<= bound` (upper estimate, no grouping).
pub fn lattice_count_estimate(domain: &Domain, bound: f64) -> f64 {
    domain
        .lengths()
        .iter()
        .map(|l| bound.max(0.0).sqrt() * l / std::f64::consts::PI + 1.0)
        .product()
}

/// `psi_k(x) = prod_a cos(k_a pi x_a / L_a)`.
pub fn eigenfunction(lengths: &[f64], k: &[usize], x: &[f64]) -> f64 {
    lengths
        .iter()
        .zip(k)
        .zip(x)
        .map(|((l, &k), x)| (k as f64 * std::f64::consts::PI * x / l).cos())
        .product()
}

/// Cell-centered three-point Laplacian on `n` cells of width `h`.
pub(crate) fn laplacian_1d(n: usize, h: f64, bc: BoundaryCondition) -> Mat<f64> {
    let inv = 1.0 / (h * h);
    let mut a = Mat::<f64>::zeros(n, n);
    for i in 0..n {
        let mut diag = 0.0;
        if i > 0 {
            a[(i, i - 1)] = -inv;
            diag += inv;
        }
        if i + 1 < n {
            a[(i, i + 1)] = -inv;
            diag += inv;
        }
        if bc == BoundaryCondition::Dirichlet && (i == 0 || i + 1 == n) {
            // wall value 0 at half a cell from the node
            diag += 2.0 * inv * if n == 1 { 2.0 } else { 1.0 };
        }
        a[(i, i)] = diag;
    }
    a
}

fn symmetric_eigenvalues(a: &Mat<f64>) -> Result<Vec<f64>> {
    a.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))
}

/// Eigenvalues of the discrete `-Laplacian` with `grid_n` cells per axis, ascending.
///
/// On rectangles the spectrum is the Kronecker sum of the two axis spectra.
pub fn discrete_laplacian_spectrum(domain: &Domain, grid_n: usize, bc: BoundaryCondition) -> Result<Vec<f64>> {
    if grid_n < 3 {
        return Err(Error::InvalidInput(format!("grid_n must be at least 3, got {grid_n}")));
    }
    let axes: Vec<Vec<f64>> = domain
        .lengths()
        .iter()
        .map(|l| symmetric_eigenvalues(&laplacian_1d(grid_n, l / grid_n as f64, bc)))
        .collect::<Result<_>>()?;
    let mut values: Vec<f64> = match axes.as_slice() {
        [x] => x.clone(),
        [x, y] => x.iter().flat_map(|a| y.iter().map(move |b| a + b)).collect(),
        _ => unreachable!("domains have dimension 1 or 2"),
    };
    values.sort_by(f64::total_cmp);
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn interval_spectrum() {
        let s = neumann_eigenvalues(&Domain::interval(PI).unwrap(), 4);
        let got: Vec<(f64, usize)> = s.entries.iter().map(|e| (e.lambda_hat, e.multiplicity)).collect();
        assert_eq!(got.len(), 4);
        for (g, e) in got.iter().zip([(0.0, 1), (1.0, 1), (4.0, 1), (9.0, 1)]) {
            assert!((g.0 - e.0).abs() < 1e-12 && g.1 == e.1);
        }
    }

    #[test]
    fn square_has_double_first_mode() {
        let s = neumann_eigenvalues(&Domain::rectangle(PI, PI).unwrap(), 3);
        assert_eq!(s.entries[0].multiplicity, 1);
        assert!((s.entries[1].lambda_hat - 1.0).abs() < 1e-12);
        assert_eq!(s.entries[1].multiplicity, 2);
        assert_eq!(s.entries[1].mode_indices, vec![vec![0, 1], vec![1, 0]]);
        assert!((s.entries[2].lambda_hat - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rectangle_values_separate() {
        let s = neumann_eigenvalues(&Domain::rectangle(PI, PI / 2.0).unwrap(), 12);
        for e in &s.entries {
            for k in &e.mode_indices {
                let expected = (k[0] * k[0] + 4 * k[1] * k[1]) as f64;
                assert!((e.lambda_hat - expected).abs() < 1e-10);
            }
        }
        // 4 = 2^2 + 0 = 0 + 4*1^2
        let four = s.entries.iter().find(|e| (e.lambda_hat - 4.0).abs() < 1e-10).unwrap();
        assert_eq!(four.multiplicity, 2);
        assert!(s.entries.windows(2).all(|w| w[0].lambda_hat < w[1].lambda_hat));
    }

    #[test]
    fn scaling_law() {
        let base = neumann_eigenvalues(&Domain::interval(2.0).unwrap(), 6);
        let scaled = neumann_eigenvalues(&Domain::interval(6.0).unwrap(), 6);
        for (a, b) in base.entries.iter().zip(&scaled.entries) {
            assert!((a.lambda_hat / 9.0 - b.lambda_hat).abs() <= 1e-12 * a.lambda_hat.max(1.0));
        }
    }

    #[test]
    fn up_to_matches_count() {
        let d = Domain::rectangle(PI, 2.0).unwrap();
        let a = neumann_eigenvalues(&d, 20);
        let b = neumann_eigenvalues_up_to(&d, a.entries[19].lambda_hat);
        assert_eq!(a.entries, b.entries);
    }

    #[test]
    fn discrete_neumann_close_to_analytic() {
        let v = discrete_laplacian_spectrum(&Domain::interval(PI).unwrap(), 256, BoundaryCondition::Neumann).unwrap();
        assert!(v[0].abs() < 1e-10);
        for k in 1..5 {
            let exact = (k * k) as f64;
            let h = PI / 256.0;
            assert!((v[k] - exact).abs() < exact * exact * h * h);
        }
    }

    #[test]
    fn discrete_dirichlet_near_squares() {
        let v = discrete_laplacian_spectrum(&Domain::interval(PI).unwrap(), 200, BoundaryCondition::Dirichlet).unwrap();
        for k in 1..5 {
            assert!((v[k - 1] - (k * k) as f64).abs() < 1e-2 * (k * k) as f64);
        }
    }

    #[test]
    fn three_cells() {
        let v = discrete_laplacian_spectrum(&Domain::interval(1.0).unwrap(), 3, BoundaryCondition::Neumann).unwrap();
        assert_eq!(v.len(), 3);
        assert!(v[0].abs() < 1e-12);
        assert!(discrete_laplacian_spectrum(&Domain::interval(1.0).unwrap(), 2, BoundaryCondition::Neumann).is_err());
    }

    #[test]
    fn cosine_eigenfunction() {
        assert!((eigenfunction(&[PI], &[2], &[PI / 4.0])).abs() < 1e-15);
        assert_eq!(eigenfunction(&[PI, PI], &[0, 0], &[0.3, 0.7]), 1.0);
    }
}
