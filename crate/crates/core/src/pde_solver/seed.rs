use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::field::DiscreteField;
use super::grid::Grid;
use crate::error::{Error, Result};
use crate::index_theory::ModeDecision;
use crate::linalg;
use crate::model::{BoundaryCondition, Model};
use crate::spectral::eigenfunction;

#[derive(Clone, Debug, PartialEq)]
pub struct Seed {
    pub field: DiscreteField,
    /// Unit vector `c` multiplying the mode shape.
    pub direction: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Real eigenvector of `d_A^{-1} A_i` for its most negative real eigenvalue.
fn unstable_direction(d_a: &[f64], ai: &DMatrix<f64>) -> Result<(Vec<f64>, bool)> {
    let b = DMatrix::from_fn(ai.nrows(), ai.ncols(), |i, k| ai[(i, k)] / d_a[i]);
    let (values, vectors) = linalg::eigen(&b)?;
    let scale = linalg::spectral_scale(&values);
    let real_negative = (0..values.len())
        .filter(|&k| linalg::is_real(values[k], scale) && values[k].re < 0.0)
        .min_by(|&a, &b| values[a].re.total_cmp(&values[b].re));
    let (k, unstable) = match real_negative {
        Some(k) => (k, true),
        None => {
            let k = (0..values.len())
                .min_by(|&a, &b| values[a].re.total_cmp(&values[b].re))
                .expect("nonempty spectrum");
            (k, false)
        }
    };
    let mut c: Vec<f64> = vectors[k].iter().map(|z| z.re).collect();
    if c.iter().all(|v| *v == 0.0) {
        c = vectors[k].iter().map(|z| z.im).collect();
    }
    let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    let lead = c.iter().copied().fold(0.0f64, |a, v| if v.abs() > a.abs() { v } else { a });
    let s = if lead < 0.0 { -1.0 } else { 1.0 } / norm;
    Ok((c.iter().map(|v| v * s).collect(), unstable))
}

/// `u* + amplitude c psi` for the first lattice tuple of the mode.
pub fn seed_from_mode(model: &Model, grid: &Grid, u_star: &[f64], mode: &ModeDecision, amplitude: f64) -> Result<Seed> {
    let m = model.m();
    if u_star.len() != m || mode.a_i.len() != m {
        return Err(Error::Shape("u_star and mode must match the model".into()));
    }
    let mut warnings = Vec::new();
    if model.bc() != BoundaryCondition::Neumann {
        warnings.push("mode shapes are Neumann eigenfunctions; boundary condition is not Neumann".into());
    }
    let d_a: Vec<f64> = model.diffusion_matrix(u_star).diagonal().iter().copied().collect();
    let (c, unstable) = unstable_direction(&d_a, &mode.a_i_matrix())?;
    if !unstable {
        warnings.push(format!("mode not unstable (lambda_hat = {:.6})", mode.lambda_hat));
    }
    let lengths = grid.domain().lengths();
    let k = mode.mode_indices.first().cloned().unwrap_or_else(|| vec![0; lengths.len()]);
    let mut clipped = false;
    let field = DiscreteField::from_fn(grid.clone(), m, |x| {
        let psi = eigenfunction(&lengths, &k, x);
        (0..m)
            .map(|i| {
                let v = u_star[i] + amplitude * c[i] * psi;
                let floor = 1e-3 * u_star[i];
                if u_star[i] > 0.0 && v < floor {
                    clipped = true;
                    floor
                } else {
                    v
                }
            })
            .collect()
    })?;
    if clipped {
        warnings.push("seed clipped to stay positive".into());
    }
    Ok(Seed {
        field,
        direction: c,
        warnings,
    })
}

/// Smooth positive field: `center_i (1 + sum_k a_k psi_k / k)` with `a_k` from a ChaCha8 stream.
pub fn random_smooth_seed(grid: &Grid, center: &[f64], spread: f64, seed: u64) -> Result<DiscreteField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lengths = grid.domain().lengths();
    let dim = lengths.len();
    let modes = 4;
    let coeffs: Vec<Vec<(Vec<usize>, f64)>> = (0..center.len())
        .map(|_| {
            (1..=modes)
                .map(|k| {
                    let tuple: Vec<usize> = (0..dim).map(|_| rng.random_range(0..=k)).collect();
                    (tuple, rng.random_range(-1.0..1.0) / k as f64)
                })
                .collect()
        })
        .collect();
    let base: Vec<f64> = center.iter().map(|c| c * (1.0 + rng.random_range(-0.5..0.5) * spread)).collect();
    DiscreteField::from_fn(grid.clone(), center.len(), |x| {
        (0..center.len())
            .map(|i| {
                let wave: f64 = coeffs[i].iter().map(|(k, a)| a * eigenfunction(&lengths, k, x)).sum();
                (base[i] * (1.0 + spread * wave)).max(1e-3 * center[i].abs())
            })
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index_theory::constant_state_index;
    use crate::model::{build_model, DomainConfig, DomainKind, ModelConfig};
    use std::f64::consts::PI;

    fn turing() -> Model {
        build_model(&ModelConfig {
            m: 2,
            d: vec![0.05, 1.0],
            alpha: vec![vec![0.0; 2]; 2],
            r: vec![1.0, 1.0],
            c: vec![vec![-1.0, 2.0], vec![-3.0, 4.0]],
            domain: DomainConfig {
                kind: DomainKind::Interval,
                lengths: vec![PI],
            },
            bc: BoundaryCondition::Neumann,
        })
        .unwrap()
    }

    #[test]
    fn mode_two_seed_shape() {
        let model = turing();
        let report = constant_state_index(&model, &[1.0, 1.0]).unwrap();
        let mode = report.mode_decisions.iter().find(|d| d.lambda_hat == 4.0).unwrap();
        let grid = Grid::new(*model.domain(), 32).unwrap();
        let seed = seed_from_mode(&model, &grid, &[1.0, 1.0], mode, 0.1).unwrap();
        assert!(seed.warnings.is_empty(), "{:?}", seed.warnings);
        let c = &seed.direction;
        assert!(((c[0] * c[0] + c[1] * c[1]).sqrt() - 1.0).abs() < 1e-12);
        for node in 0..32 {
            let x = grid.coords(node)[0];
            for i in 0..2 {
                let expected = 1.0 + 0.1 * c[i] * (2.0 * x).cos();
                assert!((seed.field.node(node)[i] - expected).abs() < 1e-14);
            }
        }
        // c is an eigenvector of d_A^{-1} A_i
        let b = DMatrix::from_row_slice(2, 2, &[mode.a_i[0][0] / 0.05, mode.a_i[0][1] / 0.05, mode.a_i[1][0], mode.a_i[1][1]]);
        let bc = &b * nalgebra::DVector::from_column_slice(c);
        let ratio = bc[0] / c[0];
        assert!((bc[1] - ratio * c[1]).abs() < 1e-10 && ratio < 0.0);
    }

    #[test]
    fn zero_amplitude_and_stable_mode() {
        let model = turing();
        let report = constant_state_index(&model, &[1.0, 1.0]).unwrap();
        let grid = Grid::new(*model.domain(), 16).unwrap();
        let flat = seed_from_mode(&model, &grid, &[1.0, 1.0], &report.mode_decisions[1], 0.0).unwrap();
        assert_eq!(flat.field, DiscreteField::constant(grid.clone(), &[1.0, 1.0]));
        let stable = report.mode_decisions.iter().find(|d| d.n_neg == 0).unwrap();
        let s = seed_from_mode(&model, &grid, &[1.0, 1.0], stable, 0.1).unwrap();
        assert!(s.warnings.iter().any(|w| w.contains("mode not unstable")));
    }

    #[test]
    fn random_seed_is_deterministic_and_positive() {
        let grid = Grid::new(crate::model::Domain::interval(PI).unwrap(), 32).unwrap();
        let a = random_smooth_seed(&grid, &[1.0, 2.0], 0.8, 7).unwrap();
        let b = random_smooth_seed(&grid, &[1.0, 2.0], 0.8, 7).unwrap();
        let c = random_smooth_seed(&grid, &[1.0, 2.0], 0.8, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.min() > 0.0);
    }
}
