use serde::{Deserialize, Serialize};

use super::discretize::{discretize, Discretization, Family};
use super::field::DiscreteField;
use super::grid::Grid;
use crate::diagnostics;
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::Model;
use crate::tol;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverMode {
    #[default]
    Newton,
    /// Frozen-coefficient iteration `(L_{A(u_n)} + k) u_{n+1} = f(u_n) + k u_n`.
    Picard,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    /// Converged when `||R||_inf <= tol * max(1, ||sigma f||_inf + ||sigma s||_inf)`.
    pub tol: f64,
    pub max_iter: usize,
    /// Sufficient-decrease constant of the backtracking line search.
    pub armijo: f64,
    pub min_step: f64,
    pub mode: SolverMode,
    pub family: Family,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: tol::NEWTON,
            max_iter: 100,
            armijo: 1e-4,
            min_step: 1e-10,
            mode: SolverMode::Newton,
            family: Family::Plain,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolutionClass {
    Trivial,
    SemitrivialConstant,
    NontrivialConstant,
    Nonconstant,
}

impl SolutionClass {
    pub fn is_constant(self) -> bool {
        self != SolutionClass::Nonconstant
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveResult {
    #[serde(skip)]
    pub field: DiscreteField,
    pub converged: bool,
    pub residual_norm: f64,
    pub residual_scale: f64,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub sigma_path: Vec<f64>,
    pub classification: SolutionClass,
    pub grad_l2: f64,
    pub zero_components: Vec<usize>,
    pub branch_switches: Vec<f64>,
    /// Sign of the Jacobian determinant at the solution; absent when singular.
    pub jacobian_sign: Option<f64>,
    pub warnings: Vec<String>,
}

/// Outcome of one converged nonlinear solve at fixed `sigma`.
#[derive(Clone, Debug)]
pub(crate) struct Run {
    pub u: Vec<f64>,
    pub residual_norm: f64,
    pub scale: f64,
    pub iterations: usize,
    pub history: Vec<f64>,
    pub det_sign: Option<f64>,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

fn two_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn det_sign(disc: &Discretization, u: &[f64]) -> Option<f64> {
    disc.jacobian(u).factor().ok().map(|lu| lu.det_sign())
}

pub(crate) fn solve_at(disc: &Discretization, u0: Vec<f64>, opts: &NewtonOptions) -> Result<Run> {
    match opts.mode {
        SolverMode::Newton => newton_core(disc, u0, opts),
        SolverMode::Picard => picard_core(disc, u0, opts),
    }
}

fn newton_core(disc: &Discretization, u0: Vec<f64>, opts: &NewtonOptions) -> Result<Run> {
    let mut u = u0;
    let mut r = disc.residual(&u);
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { iteration: 0 });
    }
    let mut history = vec![inf_norm(&r)];
    for iteration in 0..=opts.max_iter {
        let scale = disc.forcing_scale(&u).max(1.0);
        let rn = inf_norm(&r);
        if rn <= opts.tol * scale {
            return Ok(Run {
                det_sign: det_sign(disc, &u),
                u,
                residual_norm: rn,
                scale,
                iterations: iteration,
                history,
            });
        }
        if iteration == opts.max_iter {
            return Err(Error::MaxIterations {
                iterations: iteration,
                residual: rn,
            });
        }
        let lu = disc.jacobian(&u).factor().map_err(|col| Error::LineSearchStagnated {
            iteration,
            residual: rn,
            reason: format!("singular Jacobian (pivot {col})"),
        })?;
        let mut delta: Vec<f64> = r.iter().map(|v| -v).collect();
        lu.solve_in_place(&mut delta);

        let r0 = two_norm(&r);
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a + t * d).collect();
            let rt = disc.residual(&trial);
            if rt.iter().all(|v| v.is_finite()) && two_norm(&rt) <= (1.0 - opts.armijo * t) * r0 {
                u = trial;
                r = rt;
                break;
            }
            t *= 0.5;
            if t < opts.min_step {
                return Err(Error::LineSearchStagnated {
                    iteration,
                    residual: rn,
                    reason: "no sufficient decrease along the Newton direction".into(),
                });
            }
        }
        history.push(inf_norm(&r));
    }
    unreachable!("loop returns at max_iter")
}

fn picard_core(disc: &Discretization, u0: Vec<f64>, opts: &NewtonOptions) -> Result<Run> {
    let model = disc.model();
    let m = model.m();
    let nodes = u0.len() / m;
    let jmax = (0..nodes)
        .map(|n| linalg::spectral_norm(&model.reaction_jacobian(&u0[n * m..(n + 1) * m])))
        .fold(0.0, f64::max);
    let shift = 1.0 + disc.sigma().abs() * jmax;
    let mut u = u0;
    let mut history = Vec::new();
    for iteration in 0..=opts.max_iter {
        let r = disc.residual(&u);
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { iteration });
        }
        let rn = inf_norm(&r);
        history.push(rn);
        let scale = disc.forcing_scale(&u).max(1.0);
        if rn <= opts.tol * scale {
            return Ok(Run {
                det_sign: det_sign(disc, &u),
                u,
                residual_norm: rn,
                scale,
                iterations: iteration,
                history,
            });
        }
        if iteration == opts.max_iter {
            return Err(Error::MaxIterations {
                iterations: iteration,
                residual: rn,
            });
        }
        let lu = disc.frozen_operator(&u, shift).factor().map_err(|col| Error::LineSearchStagnated {
            iteration,
            residual: rn,
            reason: format!("singular frozen operator (pivot {col})"),
        })?;
        let mut next = disc.frozen_rhs(&u, shift);
        lu.solve_in_place(&mut next);
        u = next;
    }
    unreachable!("loop returns at max_iter")
}

/// Trivial / constant / nonconstant classification with zero components.
pub fn classify(field: &DiscreteField) -> (SolutionClass, Vec<usize>, f64) {
    let grad_l2 = diagnostics::norms(field).grad_l2;
    let mean = field.mean();
    let zero: Vec<usize> = (0..field.m())
        .filter(|&i| field.component(i).fold(0.0f64, |a, v| a.max(v.abs())) < tol::ZERO)
        .collect();
    let flat = (0..field.m()).all(|i| {
        field
            .component(i)
            .all(|v| (v - mean[i]).abs() < tol::CONST * (1.0 + mean[i].abs()))
    });
    let class = if !(flat || grad_l2 <= tol::CONST) {
        SolutionClass::Nonconstant
    } else if zero.len() == field.m() {
        SolutionClass::Trivial
    } else if !zero.is_empty() {
        SolutionClass::SemitrivialConstant
    } else {
        SolutionClass::NontrivialConstant
    };
    (class, zero, grad_l2)
}

pub(crate) fn finish(
    grid: &Grid,
    m: usize,
    run: Run,
    sigma_path: Vec<f64>,
    iterations: usize,
    branch_switches: Vec<f64>,
) -> Result<SolveResult> {
    let field = DiscreteField::new(grid.clone(), m, run.u)?;
    let (classification, zero_components, grad_l2) = classify(&field);
    let mut warnings = Vec::new();
    let min = field.min();
    if min < -tol::ZERO {
        warnings.push(format!("positivity violated: minimum component value {min:.3e}"));
    }
    Ok(SolveResult {
        field,
        converged: true,
        residual_norm: run.residual_norm,
        residual_scale: run.scale,
        iterations,
        residual_history: run.history,
        sigma_path,
        classification,
        grad_l2,
        zero_components,
        branch_switches,
        jacobian_sign: run.det_sign,
        warnings,
    })
}

fn check_seed(model: &Model, grid: &Grid, seed: &DiscreteField) -> Result<()> {
    if seed.m() != model.m() || seed.grid() != grid {
        return Err(Error::Shape("seed does not match the model and grid".into()));
    }
    Ok(())
}

/// Damped Newton (or Picard) on the original system from `seed`.
pub fn newton_solve(model: &Model, grid: &Grid, seed: &DiscreteField, opts: &NewtonOptions) -> Result<SolveResult> {
    check_seed(model, grid, seed)?;
    let disc = discretize(model, grid)?.with_family(opts.family);
    let run = solve_at(&disc, seed.values().to_vec(), opts)?;
    let iterations = run.iterations;
    finish(grid, model.m(), run, vec![1.0], iterations, Vec::new())
}

/// Newton on the system with an extra source `s` on the right-hand side.
pub fn newton_solve_with_source(
    model: &Model,
    grid: &Grid,
    seed: &DiscreteField,
    source: &[f64],
    opts: &NewtonOptions,
) -> Result<SolveResult> {
    check_seed(model, grid, seed)?;
    let disc = discretize(model, grid)?.with_family(opts.family).with_source(source)?;
    let run = solve_at(&disc, seed.values().to_vec(), opts)?;
    let iterations = run.iterations;
    finish(grid, model.m(), run, vec![1.0], iterations, Vec::new())
}

/// Spectral norm of `J(u)` maximized over the nodes of `field`.
pub fn max_reaction_jacobian_norm(model: &Model, field: &DiscreteField) -> f64 {
    (0..field.grid().node_count())
        .map(|n| linalg::spectral_norm(&model.reaction_jacobian(field.node(n))))
        .fold(0.0, f64::max)
}
