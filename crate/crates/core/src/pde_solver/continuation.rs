//! Homotopy in `sigma` for the scaled family `-Div(A(W)DW) = sigma f(W)`.
//!
//! With `W = sigma u` this is the family `-Div(A(sigma u)Du) = f(sigma u)`
//! multiplied through by `sigma`; both coincide with the original system at
//! `sigma = 1`. At `sigma = 0` every constant solves the scaled form, so the
//! path starts from the mean of the seed.

use serde::{Deserialize, Serialize};

use super::discretize::{discretize, Family};
use super::field::DiscreteField;
use super::grid::Grid;
use super::newton::{classify, finish, solve_at, NewtonOptions, Run, SolveResult};
use crate::error::{Error, Result};
use crate::model::Model;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuationOptions {
    pub newton: NewtonOptions,
    /// Smallest sigma step tried before giving up.
    pub min_step: f64,
    /// Restart from the seed's profile where the Jacobian sign flips on a constant branch.
    pub branch_switch: bool,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        ContinuationOptions {
            newton: NewtonOptions::default(),
            min_step: 1e-4,
            branch_switch: true,
        }
    }
}

/// `[0, 1/steps, ..., 1]`.
pub fn uniform_schedule(steps: usize) -> Vec<f64> {
    let steps = steps.max(1);
    (0..=steps).map(|k| k as f64 / steps as f64).collect()
}

fn validate_schedule(schedule: &[f64]) -> Result<()> {
    let ok = !schedule.is_empty()
        && schedule[0] >= 0.0
        && schedule[0] < 1.0
        && *schedule.last().unwrap() == 1.0
        && schedule.windows(2).all(|w| w[0] < w[1]);
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidInput(
            "sigma schedule must start in [0, 1), increase strictly and end at 1".into(),
        ))
    }
}

fn is_flat(grid: &Grid, m: usize, u: &[f64]) -> bool {
    DiscreteField::new(grid.clone(), m, u.to_vec())
        .map(|f| classify(&f).0.is_constant())
        .unwrap_or(false)
}

pub fn continuation_solve(
    model: &Model,
    grid: &Grid,
    seed: &DiscreteField,
    schedule: &[f64],
    opts: &ContinuationOptions,
) -> Result<SolveResult> {
    validate_schedule(schedule)?;
    if seed.m() != model.m() || seed.grid() != grid {
        return Err(Error::Shape("seed does not match the model and grid".into()));
    }
    let m = model.m();
    let base = discretize(model, grid)?.with_family(opts.newton.family);
    let mean = seed.mean();
    let deviation: Vec<f64> = seed
        .values()
        .iter()
        .enumerate()
        .map(|(k, v)| v - mean[k % m])
        .collect();

    let mut w: Vec<f64> = DiscreteField::constant(grid.clone(), &mean).into_values();
    let mut path = Vec::new();
    let mut sigma = 0.0;
    let mut targets: Vec<f64> = schedule.to_vec();
    let mut last_run: Option<Run> = None;
    let mut prev_sign: Option<f64> = None;
    let mut iterations = 0;
    let mut switches = Vec::new();

    if opts.newton.family == Family::Plain && targets[0] == 0.0 {
        // constants solve the plain family exactly at sigma = 0
        path.push(0.0);
        targets.remove(0);
    } else if targets[0] > 0.0 {
        path.push(0.0);
    }

    for target in targets {
        loop {
            let mut next = target;
            let run = loop {
                let disc = base.clone().with_sigma(next);
                match solve_at(&disc, w.clone(), &opts.newton) {
                    Ok(run) => break run,
                    Err(_) => {
                        let half = 0.5 * (next - sigma);
                        if half < opts.min_step {
                            return Err(Error::StepUnderflow { sigma, path });
                        }
                        next = sigma + half;
                    }
                }
            };
            iterations += run.iterations;
            sigma = next;
            path.push(sigma);
            let mut run = run;

            let flipped = matches!((prev_sign, run.det_sign), (Some(a), Some(b)) if a != b);
            let at_end = sigma == 1.0;
            if opts.branch_switch && (flipped || at_end) && is_flat(grid, m, &run.u) {
                let start: Vec<f64> = run.u.iter().zip(&deviation).map(|(a, d)| a + sigma * d).collect();
                let disc = base.clone().with_sigma(sigma);
                if let Ok(alt) = solve_at(&disc, start, &opts.newton) {
                    if !is_flat(grid, m, &alt.u) {
                        iterations += alt.iterations;
                        switches.push(sigma);
                        run = alt;
                    }
                }
            }
            prev_sign = run.det_sign.or(prev_sign);
            w = run.u.clone();
            last_run = Some(run);
            if sigma >= target {
                break;
            }
        }
    }

    let run = match last_run {
        Some(run) => run,
        None => return Err(Error::InvalidInput("empty sigma schedule".into())),
    };
    finish(grid, m, run, path, iterations, switches)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, BoundaryCondition, DomainConfig, DomainKind, ModelConfig};
    use crate::pde_solver::newton::newton_solve;
    use std::f64::consts::PI;

    fn logistic(d: f64) -> Model {
        build_model(&ModelConfig {
            m: 1,
            d: vec![d],
            alpha: vec![vec![0.0]],
            r: vec![1.0],
            c: vec![vec![1.0]],
            domain: DomainConfig {
                kind: DomainKind::Interval,
                lengths: vec![PI],
            },
            bc: BoundaryCondition::Neumann,
        })
        .unwrap()
    }

    #[test]
    fn endpoint_matches_direct_newton() {
        let model = logistic(1.0);
        let grid = Grid::new(*model.domain(), 48).unwrap();
        let seed = DiscreteField::from_fn(grid.clone(), 1, |x| vec![0.7 + 0.2 * x[0].cos()]).unwrap();
        let path = continuation_solve(&model, &grid, &seed, &uniform_schedule(8), &ContinuationOptions::default()).unwrap();
        let direct = newton_solve(&model, &grid, &seed, &NewtonOptions::default()).unwrap();
        assert_eq!(path.sigma_path.first(), Some(&0.0));
        assert_eq!(path.sigma_path.last(), Some(&1.0));
        for (a, b) in path.field.values().iter().zip(direct.field.values()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn bad_schedule_rejected() {
        let model = logistic(1.0);
        let grid = Grid::new(*model.domain(), 16).unwrap();
        let seed = DiscreteField::constant(grid.clone(), &[0.5]);
        for s in [vec![0.0, 0.5], vec![0.5, 0.2, 1.0], vec![]] {
            assert!(continuation_solve(&model, &grid, &seed, &s, &ContinuationOptions::default()).is_err());
        }
    }

    #[test]
    fn failing_steps_bisect_then_underflow() {
        // one Newton iteration per sigma: the single jump to sigma = 1 fails and is bisected
        let model = logistic(1.0);
        let grid = Grid::new(*model.domain(), 16).unwrap();
        let seed = DiscreteField::constant(grid.clone(), &[0.3]);
        let opts = ContinuationOptions {
            newton: NewtonOptions {
                max_iter: 3,
                ..Default::default()
            },
            ..Default::default()
        };
        match continuation_solve(&model, &grid, &seed, &[0.0, 1.0], &opts) {
            Ok(res) => {
                assert!(res.sigma_path.len() > 2, "{:?}", res.sigma_path);
                assert!(res.sigma_path.windows(2).all(|w| w[0] < w[1]));
            }
            Err(Error::StepUnderflow { path, .. }) => assert!(!path.is_empty()),
            Err(e) => panic!("unexpected error {e}"),
        }
        let starved = ContinuationOptions {
            newton: NewtonOptions {
                max_iter: 0,
                ..Default::default()
            },
            ..Default::default()
        };
        assert!(matches!(
            continuation_solve(&model, &grid, &seed, &[0.0, 1.0], &starved),
            Err(Error::StepUnderflow { .. })
        ));
    }
}
