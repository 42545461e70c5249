//! Smooth renorming at desk scale.
//!
//! Given a symmetric polytope `W` (the unit ball of a target norm) and a smooth
//! base norm, this crate builds a convex function `G` whose unit level set is
//! the unit ball of a smooth norm uniformly close to the target, and ships the
//! numerical certificates that go with each stage of the construction:
//!
//! * [`convex`]: biorthogonal systems, polytopes, gauges, support functions,
//!   polars and Hausdorff distances.
//! * [`smooth`]: smooth base norms, the quadratic perturbation that makes
//!   quotient norms smooth, and finite-difference checks.
//! * [`projection`]: Newton closest-point map onto coordinate subspaces and the
//!   quotient norms built from it.
//! * [`nets`]: finite nets in the polar body and their slab decomposition.
//! * [`smoothing`]: the plane norm, bump schedule, facet functionals, the sum
//!   `G` and its gauge.
//! * [`cli`]: configuration, report emission and verification suites behind the
//!   `renorm` binary.

pub mod cli;
pub mod convex;
pub mod error;
pub mod lp;
pub mod nets;
pub mod profile;
pub mod projection;
pub mod sampling;
pub mod smooth;
pub mod smoothing;

pub use error::{RenormError, Result};

/// Column vector used for points and functionals (functionals act by dot product).
pub type Vector = nalgebra::DVector<f64>;
/// Dense matrix used for Hessians and change-of-basis data.
pub type Matrix = nalgebra::DMatrix<f64>;
