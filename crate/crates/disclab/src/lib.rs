//! Numerical laboratory for growth of analytic functions in the unit disc.
//!
//! Radii close to the boundary are carried as log-gaps `g = log(1/(1-r))`
//! and large magnitudes as [`LogValue`]s, so the constructions stay usable
//! long after `1 - r` underflows.

pub mod logderiv;
pub mod numerics;
pub mod ode;
pub mod profile;
pub mod riesz;
pub mod scaffold;
pub mod wiman;

pub use numerics::{find_root, integrate, lse_sum, LogGap, LogValue, Singularity};
