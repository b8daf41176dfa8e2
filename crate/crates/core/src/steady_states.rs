//! Constant steady states: every support subset `S` gives the linear system
//! `g_i(u) = 0, i in S` with `u_j = 0` off `S`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Model;
use crate::tol;

pub const MAX_SPECIES: usize = 12;
const TOL_DEDUP: f64 = 1e-9;
const REFINE_MAX_ITER: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateClass {
    Trivial,
    Semitrivial,
    Nontrivial,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantState {
    pub u_star: Vec<f64>,
    pub support: Vec<bool>,
    pub classification: StateClass,
    /// max_i |u_i g_i(u)|
    pub residual: f64,
}

impl ConstantState {
    pub fn support_mask(&self) -> u64 {
        mask_of(&self.support)
    }

    pub fn support_indices(&self) -> Vec<usize> {
        (0..self.support.len()).filter(|&i| self.support[i]).collect()
    }

    pub fn restricted_state(&self) -> Vec<f64> {
        self.support_indices().iter().map(|&i| self.u_star[i]).collect()
    }
}

/// A support subset whose restricted interaction matrix is singular.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegenerateSubset {
    pub support: Vec<bool>,
    /// sigma_min / sigma_max of the restricted interaction matrix.
    pub conditioning: f64,
    pub note: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantStates {
    pub states: Vec<ConstantState>,
    pub degenerate_subsets: Vec<DegenerateSubset>,
}

fn mask_of(support: &[bool]) -> u64 {
    support
        .iter()
        .enumerate()
        .filter(|(_, s)| **s)
        .map(|(i, _)| 1u64 << i)
        .sum()
}

fn support_from_mask(mask: u64, m: usize) -> Vec<bool> {
    (0..m).map(|i| mask & (1 << i) != 0).collect()
}

fn classify(support: &[bool]) -> StateClass {
    if support.iter().all(|s| !s) {
        StateClass::Trivial
    } else if support.iter().all(|s| *s) {
        StateClass::Nontrivial
    } else {
        StateClass::Semitrivial
    }
}

pub(crate) fn reaction_residual(model: &Model, u: &[f64]) -> f64 {
    model.reaction(u).iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

enum SubsetOutcome {
    State(ConstantState),
    Rejected,
    Degenerate(DegenerateSubset),
}

fn solve_subset(model: &Model, mask: u64) -> SubsetOutcome {
    let m = model.m();
    let support = support_from_mask(mask, m);
    let idx: Vec<usize> = (0..m).filter(|&i| support[i]).collect();
    if idx.is_empty() {
        return SubsetOutcome::State(ConstantState {
            u_star: vec![0.0; m],
            support,
            classification: StateClass::Trivial,
            residual: 0.0,
        });
    }
    let k = idx.len();
    let c = DMatrix::from_fn(k, k, |a, b| model.c()[(idx[a], idx[b])]);
    let r = DVector::from_fn(k, |a, _| model.r()[idx[a]]);

    let sv = c.clone().svd(false, false).singular_values;
    let conditioning = if sv.max() > 0.0 { sv.min() / sv.max() } else { 0.0 };
    if conditioning <= 1e-12 {
        return SubsetOutcome::Degenerate(DegenerateSubset {
            support,
            conditioning,
            note: "restricted interaction matrix is singular; constant states on this face are not isolated or absent"
                .into(),
        });
    }
    let Some(sol) = c.clone().lu().solve(&r) else {
        return SubsetOutcome::Degenerate(DegenerateSubset {
            support,
            conditioning,
            note: "LU solve failed".into(),
        });
    };
    let scale = sol.amax().max(1.0);
    if sol.iter().any(|v| *v <= tol::SIGN * scale) {
        // nonpositive entries belong to a smaller support or leave the orthant
        return SubsetOutcome::Rejected;
    }
    let mut u = vec![0.0; m];
    for (a, &i) in idx.iter().enumerate() {
        u[i] = sol[a];
    }
    let residual = reaction_residual(model, &u);
    let state = if residual > tol::ROOT {
        match refine_root(model, &support, &u) {
            Ok(s) => s,
            Err(_) => ConstantState {
                classification: classify(&support),
                u_star: u,
                support,
                residual,
            },
        }
    } else {
        ConstantState {
            classification: classify(&support),
            u_star: u,
            support,
            residual,
        }
    };
    SubsetOutcome::State(state)
}

/// Exhaustive enumeration over the 2^m support subsets, sorted by support mask
/// (bit i set when component i is in the support).
pub fn find_constant_states(model: &Model) -> Result<ConstantStates> {
    let m = model.m();
    if m > MAX_SPECIES {
        return Err(Error::TooManySpecies { m, max: MAX_SPECIES });
    }
    let outcomes: Vec<SubsetOutcome> = (0..1u64 << m)
        .into_par_iter()
        .map(|mask| solve_subset(model, mask))
        .collect();

    let mut states: Vec<ConstantState> = Vec::new();
    let mut degenerate_subsets = Vec::new();
    for outcome in outcomes {
        match outcome {
            SubsetOutcome::State(s) => {
                let duplicate = states.iter().any(|t| {
                    t.u_star
                        .iter()
                        .zip(&s.u_star)
                        .all(|(a, b)| (a - b).abs() <= TOL_DEDUP * (1.0 + a.abs()))
                });
                if !duplicate {
                    states.push(s);
                }
            }
            SubsetOutcome::Degenerate(d) => degenerate_subsets.push(d),
            SubsetOutcome::Rejected => {}
        }
    }
    Ok(ConstantStates {
        states,
        degenerate_subsets,
    })
}

/// Damped Newton on `g|_S = 0` starting from `u0`.
pub fn refine_root(model: &Model, support: &[bool], u0: &[f64]) -> Result<ConstantState> {
    let m = model.m();
    if support.len() != m || u0.len() != m {
        return Err(Error::Shape(format!("support and u0 must have length {m}")));
    }
    if let Some(i) = (0..m).find(|&i| !support[i] && u0[i] != 0.0) {
        return Err(Error::InvalidInput(format!("u0[{i}] = {} lies outside the support", u0[i])));
    }
    let idx: Vec<usize> = (0..m).filter(|&i| support[i]).collect();
    let k = idx.len();
    let mut u = u0.to_vec();
    let g_restricted = |u: &[f64]| -> DVector<f64> {
        let g = model.growth(u);
        DVector::from_fn(k, |a, _| g[idx[a]])
    };
    // g is affine, so its Jacobian on the face is -c|_S
    let jac = DMatrix::from_fn(k, k, |a, b| -model.c()[(idx[a], idx[b])]);
    let lu = jac.clone().lu();

    let mut iterations = 0;
    loop {
        let residual = reaction_residual(model, &u);
        if residual <= tol::ROOT {
            return Ok(ConstantState {
                classification: classify(support),
                u_star: u,
                support: support.to_vec(),
                residual,
            });
        }
        if iterations == REFINE_MAX_ITER {
            return Err(Error::NoConvergence { iterations, residual });
        }
        iterations += 1;
        let g = g_restricted(&u);
        let Some(step) = lu.solve(&(-&g)) else {
            return Err(Error::NoConvergence { iterations, residual });
        };
        if step.iter().any(|v| !v.is_finite()) || !lu.determinant().is_normal() {
            return Err(Error::NoConvergence { iterations, residual });
        }
        let g_norm = g.norm();
        let mut t = 1.0;
        loop {
            let mut trial = u.clone();
            for (a, &i) in idx.iter().enumerate() {
                trial[i] += t * step[a];
            }
            if g_restricted(&trial).norm() < g_norm || t < 1e-6 {
                u = trial;
                break;
            }
            t *= 0.5;
        }
        if let Some(&i) = idx.iter().find(|&&i| u[i] < -tol::SIGN) {
            return Err(Error::LeftOrthant { component: i, value: u[i] });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, BoundaryCondition, DomainConfig, DomainKind, ModelConfig};

    fn lv(r: [f64; 2], c: [[f64; 2]; 2]) -> Model {
        build_model(&ModelConfig {
            m: 2,
            d: vec![1.0, 1.0],
            alpha: vec![vec![0.0; 2]; 2],
            r: r.to_vec(),
            c: c.iter().map(|row| row.to_vec()).collect(),
            domain: DomainConfig {
                kind: DomainKind::Interval,
                lengths: vec![std::f64::consts::PI],
            },
            bc: BoundaryCondition::Neumann,
        })
        .unwrap()
    }

    #[test]
    fn weak_competition_states() {
        let found = find_constant_states(&lv([1.0, 1.0], [[1.0, 0.5], [0.3, 1.0]])).unwrap();
        let expected = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [10.0 / 17.0, 14.0 / 17.0]];
        assert_eq!(found.states.len(), 4);
        for (s, e) in found.states.iter().zip(expected) {
            assert!((s.u_star[0] - e[0]).abs() < 1e-14 && (s.u_star[1] - e[1]).abs() < 1e-14);
            assert!(s.residual <= tol::ROOT);
        }
        assert_eq!(found.states[0].classification, StateClass::Trivial);
        assert_eq!(found.states[1].classification, StateClass::Semitrivial);
        assert_eq!(found.states[3].classification, StateClass::Nontrivial);
        assert!(found.degenerate_subsets.is_empty());
    }

    #[test]
    fn decoupled_logistic_states() {
        let found = find_constant_states(&lv([1.0, 1.0], [[1.0, 0.0], [0.0, 1.0]])).unwrap();
        let got: Vec<Vec<f64>> = found.states.iter().map(|s| s.u_star.clone()).collect();
        assert_eq!(got, vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]);
    }

    #[test]
    fn singular_coexistence_subset_is_flagged() {
        let found = find_constant_states(&lv([1.0, 1.0], [[1.0, 1.0], [1.0, 1.0]])).unwrap();
        assert_eq!(found.degenerate_subsets.len(), 1);
        assert_eq!(found.degenerate_subsets[0].support, vec![true, true]);
        assert_eq!(found.states.len(), 3);
    }

    #[test]
    fn negative_coexistence_is_rejected() {
        // strong competition with r2 too small gives u2 < 0 at the interior root
        let found = find_constant_states(&lv([1.0, 0.1], [[1.0, 0.5], [2.0, 1.0]])).unwrap();
        assert!(found.states.iter().all(|s| s.u_star.iter().all(|v| *v >= 0.0)));
        assert!(found.states.iter().all(|s| s.classification != StateClass::Nontrivial));
    }

    #[test]
    fn refine_converges_to_coexistence() {
        let model = lv([1.0, 1.0], [[1.0, 0.5], [0.3, 1.0]]);
        let s = refine_root(&model, &[true, true], &[0.6, 0.8]).unwrap();
        assert!((s.u_star[0] - 10.0 / 17.0).abs() < 1e-12);
        assert!((s.u_star[1] - 14.0 / 17.0).abs() < 1e-12);
    }

    #[test]
    fn refine_leaves_root_unchanged() {
        let model = lv([1.0, 1.0], [[1.0, 0.5], [0.3, 1.0]]);
        let s = refine_root(&model, &[true, false], &[1.0, 0.0]).unwrap();
        assert_eq!(s.u_star, vec![1.0, 0.0]);
        assert_eq!(s.classification, StateClass::Semitrivial);
    }

    #[test]
    fn refine_fails_on_singular_jacobian() {
        let model = lv([1.0, 1.0], [[1.0, 1.0], [1.0, 1.0]]);
        let err = refine_root(&model, &[true, true], &[0.2, 0.2]).unwrap_err();
        assert!(matches!(err, Error::NoConvergence { .. }));
    }

    #[test]
    fn refine_rejects_off_support_mass() {
        let model = lv([1.0, 1.0], [[1.0, 0.5], [0.3, 1.0]]);
        assert!(matches!(
            refine_root(&model, &[true, false], &[1.0, 0.5]),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn too_many_species() {
        let m = 13;
        let model = build_model(&ModelConfig {
            m,
            d: vec![1.0; m],
            alpha: vec![vec![0.0; m]; m],
            r: vec![1.0; m],
            c: (0..m).map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect(),
            domain: DomainConfig {
                kind: DomainKind::Interval,
                lengths: vec![1.0],
            },
            bc: BoundaryCondition::Neumann,
        })
        .unwrap();
        assert!(matches!(find_constant_states(&model), Err(Error::TooManySpecies { .. })));
    }
}
