//! Stable placement plane detection for rigid objects.
//!
//! The crate covers quasi-static settling on convex support polytopes,
//! offline annotation of stable resting planes, point-cloud baselines,
//! a plane-selection planner, partial-view synthesis and a benchmark.

pub mod annotate;
pub mod baselines;
pub mod bench;
pub mod error;
pub mod geom;
pub mod io;
pub mod planner;
pub mod seed;
pub mod settle;
pub mod shapes;
pub mod viewsynth;

pub use error::{Error, Result};
