//! Joint service placement, task offloading, UAV trajectory and server CPU
//! allocation for a network with one UAV, one base station and a set of UEs.
//!
//! The objective is total UE energy over the horizon. [`orchestrator`] runs
//! the alternating scheme: exact placement by branch and bound, closed-form
//! CPU allocation, then successive convex approximation on the trajectory.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod alloc;
pub mod error;
pub mod harness;
pub mod model;
pub mod orchestrator;
pub mod phys;
pub mod placement;
pub mod scenario;
#[doc(hidden)]
pub mod testutil;
pub mod trajectory;

pub use error::{Error, Result};
