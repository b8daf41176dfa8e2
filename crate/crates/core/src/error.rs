use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("d_i must be positive (d[{index}] = {value})")]
    NonPositiveDiffusion { index: usize, value: f64 },

    #[error("alpha must be nonnegative (alpha[{row}][{col}] = {value})")]
    NegativeCrossDiffusion { row: usize, col: usize, value: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("subset enumeration supports at most {max} species, got {m}")]
    TooManySpecies { m: usize, max: usize },

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("iterate left the positive orthant (component {component} = {value:.3e})")]
    LeftOrthant { component: usize, value: f64 },

    #[error("lambda_hat must be positive, got {0}")]
    ZeroMode(f64),

    #[error("cutoff uncertifiable: {0}")]
    CutoffUncertifiable(String),

    #[error("index analysis requires Neumann boundary conditions")]
    RequiresNeumann,

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("grid too coarse: {cells} cells on an axis (minimum {min})")]
    GridTooCoarse { cells: usize, min: usize },

    #[error("Newton exceeded {iterations} iterations (residual {residual:.3e})")]
    MaxIterations { iterations: usize, residual: f64 },

    #[error("line search stagnates at iteration {iteration} (residual {residual:.3e}): {reason}")]
    LineSearchStagnated {
        iteration: usize,
        residual: f64,
        reason: String,
    },

    #[error("non-finite residual at iteration {iteration}")]
    NonFinite { iteration: usize },

    #[error("continuation step underflow at sigma = {sigma} (accepted path: {path:?})")]
    StepUnderflow { sigma: f64, path: Vec<f64> },

    #[error("unresolvable ball: radius {radius} < 2h = {min}")]
    UnresolvableBall { radius: f64, min: f64 },
}
