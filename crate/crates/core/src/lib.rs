//! Analysis of strongly coupled cross-diffusion elliptic systems of SKT type.
//!
//! The pipeline enumerates constant steady states, computes local fixed-point
//! indices mode by mode, turns the index bookkeeping into an existence verdict
//! for nonconstant positive solutions, and then looks for those solutions with
//! a finite-volume Newton solver driven by homotopy continuation.

pub mod acceptance;
pub mod diagnostics;
pub mod error;
pub mod index_theory;
mod linalg;
pub mod model;
pub mod oracle;
pub mod pde_solver;
pub mod report;
pub mod spectral;
pub mod steady_states;

pub use error::{Error, Result};
pub use model::{build_model, BoundaryCondition, Domain, Model, ModelConfig};

/// Default tolerances shared across modules.
pub mod tol {
    /// Relative threshold below which a determinant or eigenvalue counts as zero.
    pub const DEGENERATE: f64 = 1e-8;
    pub const SIGN: f64 = 1e-10;
    pub const ROOT: f64 = 1e-12;
    /// Relative tolerance for merging Laplacian eigenvalues.
    pub const COLLIDE: f64 = 1e-9;
    pub const ZERO: f64 = 1e-8;
    pub const CONST: f64 = 1e-6;
    pub const NEWTON: f64 = 1e-10;
    /// An eigenvalue is treated as real when |Im| is below this times the spectral scale.
    pub const REAL: f64 = 1e-7;
}
