//! Camera relocalization with backtracking regression forests.
//!
//! A forest maps image pixels to 3D world coordinates. Trees are trained
//! with a sample-balanced split objective near the root and a
//! spatial-variance objective below it; at test time each tree is searched
//! with a priority queue over unexplored siblings, keeping the leaf whose
//! stored mean descriptor is closest to the query. The resulting 2D/3D–3D
//! correspondences feed a preemptive RANSAC pose solver.

pub mod benchmark;
pub mod dataset;
pub mod error;
pub mod features;
pub mod forest;
pub mod geometry;
pub mod pipeline;
pub mod ransac;
pub mod synth;

pub use error::{Error, Result};
