//! Finite-volume solver for `-Div(A(u)Du) = f(u)` with Newton and homotopy continuation.

pub mod banded;
pub mod continuation;
pub mod discretize;
pub mod field;
pub mod grid;
pub mod newton;
pub mod seed;

pub use continuation::{continuation_solve, uniform_schedule, ContinuationOptions};
pub use discretize::{discretize, Discretization, Family};
pub use field::DiscreteField;
pub use grid::{Grid, GridInfo, MIN_CELLS};
pub use newton::{classify, newton_solve, newton_solve_with_source, NewtonOptions, SolutionClass, SolveResult, SolverMode};
pub use seed::{random_smooth_seed, seed_from_mode, Seed};
