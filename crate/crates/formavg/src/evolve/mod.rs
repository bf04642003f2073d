//! Cauchy problem solvers and the norm/operator machinery built on top of
//! their trajectories.
//!
//! Solutions are sampled on a *forced* grid: every cell of the output grid
//! carries its endpoints plus the 4-point and 8-point Gauss–Legendre nodes,
//! and the integrators step exactly onto each of these times. Every stored
//! sample is therefore a genuine solver state with full local accuracy, and
//! time derivatives are read from the ODE right-hand side at the sample
//! times, never by finite differencing.

mod norms;
mod represent;
mod solver;
mod volterra;

pub use norms::{mr_error, norm_report, write_csv, NormReport};
pub use represent::{decompose, Decomposition};
pub use solver::{
    solve_family, solve_ode, solve_reference, FrozenOde, InterpOde, LinearOde, Method, SampleGrid,
    SolveMeta, SolveOptions, Trajectory,
};
pub use volterra::{
    commutator_l2_norm, commutator_l2_norm_checked, commutator_sup_norm,
    commutator_sup_norm_checked, RefinedNorm,
};

use crate::discretize::DiscretizeError;
use crate::linalg::LinalgError;
use crate::spaces::SpaceError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("step size underflow at t = {t:.9e} (h = {h:.3e})")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("stiffness budget exceeded at t = {t:.6} after {steps} steps; retry with the implicit trapezoidal method")]
    StiffnessBudgetExceeded { t: f64, steps: usize },
    #[error("tolerance {0} outside the supported range [1e-13, 1e-6]")]
    ToleranceOutOfRange(f64),
    #[error("trajectory grids do not match: {0}")]
    GridMismatch(String),
    #[error("quadrature cross-check failed: {0}")]
    QuadratureNotConverged(String),
    #[error("power iteration stalled after {iters} iterations")]
    PowerIterationStalled { iters: usize },
    #[error("grid doubling changed the estimate by {rel:.2}% ({coarse:.6e} vs {fine:.6e})")]
    GridNotConverged { coarse: f64, fine: f64, rel: f64 },
    #[error(transparent)]
    Discretize(#[from] DiscretizeError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}
