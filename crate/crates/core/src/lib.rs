//! Sound reachability analysis for general neural ODEs (GNODEs).
//!
//! A GNODE is an ordered mix of fully-connected layers and neural ODE blocks
//! `ż = g(z)`. This crate propagates star sets through the discrete layers,
//! integrates linear ODE blocks with the star-based direct method and
//! nonlinear blocks with fixed-step conservative linearization on zonotopes,
//! and checks safety and robustness properties on the results.
//!
//! The crate is `no_std` (it needs `alloc`). Enabling the `std` feature
//! records per-layer wall time in [`gnode::ReachResult`].
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod activation;
pub mod error;
pub mod geometry;
pub mod gnode;
pub mod interval;
pub mod layers;
pub mod linalg;
pub mod linprog;
pub mod math;
pub mod nncs;
pub mod node;
pub mod ode;
pub mod verify;

pub use activation::{Activation, LayerActivation};
pub use error::{Error, Result};
pub use geometry::{HalfspaceSpec, IntervalBox, StarSet, Zonotope};
pub use gnode::{GnodeModel, Layer, ReachResult};
pub use layers::{FcLayer, ReachMode};
pub use linalg::Matrix;
pub use node::{Flowpipe, NodeDynamics, NodeLayer, OutputMode, TimeConfig};
