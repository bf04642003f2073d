//! Form-averaged time discretization of non-autonomous evolution equations
//! u̇(t) + 𝒜(t)u(t) = f(t) on spectral Galerkin truncations of a Gelfand
//! triple V ↪ H ↪ V′, together with numerical certification of the operator
//! estimates and error brackets that drive the scheme's convergence theory.
//!
//! The crate is organized along the pipeline:
//!
//! * [`spaces`] — weighted norms and exact operator norms on the scale chain
//!   V ↪ V_γ ↪ H ↪ V′_γ ↪ V′;
//! * [`forms`] — time-dependent sesquilinear forms with declared constants
//!   (M, α), moduli of continuity, and samplers that certify them;
//! * [`discretize`] — uniform subdivisions, interval-averaged operators, the
//!   piecewise-linear interpolated family and its derived modulus, plus the
//!   perturbation and error brackets;
//! * [`evolve`] — adaptive ODE solvers with forced sample grids, maximal
//!   regularity norms, the semigroup/Duhamel/commutator decomposition of the
//!   discretized solution, and Volterra operator norm estimators;
//! * [`estimates`] — resolvent/semigroup decay suites, square-root checks and
//!   discretized solution-operator gaps;
//! * [`study`] — convergence studies across mesh sequences and two-subdivision
//!   comparisons, the machinery behind the CLI.

pub mod discretize;
pub mod estimates;
pub mod evolve;
pub mod forms;
pub mod linalg;
pub mod quad;
pub mod spaces;
pub mod study;

pub use linalg::C64;
pub use spaces::{GelfandTriple, Scale};
