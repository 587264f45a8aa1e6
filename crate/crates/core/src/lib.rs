//! Numerical potential theory at desk scale.
//!
//! The crate evaluates potentials `K ⋆ μ` of finite signed Radon measures
//! under kernels with Calderón–Zygmund-type growth bounds, and verifies the
//! structural facts about them that can be probed numerically: surface-flux
//! cancellation and principal values, variational capacity of discretized
//! sets by linear programming, weak-type inequalities, capacity-sense
//! differentiability indices, pointwise Lipschitz domination by maximal
//! operators, and the level-set structure of Newtonian potentials.
//!
//! Measures are represented as weighted atoms plus a cell-averaged grid
//! density. Suprema over radii and truncation scales are taken over finite
//! recorded lists, so maximal quantities are lower bounds and limits carry
//! an explicit converged/undefined verdict.

pub mod capacity;
pub mod differentiability;
pub mod error;
pub mod geom;
pub mod kernels;
pub mod levelset;
pub mod lipschitz;
pub mod lp;
pub mod measures;
pub mod operators;
pub mod quad;
pub mod suite;

pub use error::Error;
pub use kernels::Kernel;
pub use measures::RadonMeasure;
pub use operators::{EpsilonSchedule, FieldSample};

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
