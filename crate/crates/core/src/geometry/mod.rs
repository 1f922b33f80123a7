//! Set representations: interval boxes, star sets, zonotopes, halfspaces.
//!
//! All values are immutable after construction and every operation returns a
//! new set.

mod boxset;
mod halfspace;
pub mod sampling;
mod star;
mod zonotope;

pub use boxset::IntervalBox;
pub use halfspace::HalfspaceSpec;
pub use star::StarSet;
pub use zonotope::Zonotope;

/// Membership tolerance on LP constraint residuals.
pub const TAU_MEM: f64 = 1e-8;

/// Default exact-star branch cap.
pub const DEFAULT_BRANCH_CAP: usize = 10_000;
