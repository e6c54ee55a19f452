//! Camera model, absolute pose solvers and pose error metrics.

mod camera;
mod correspondence;
mod kabsch;
mod p3p;
mod pose;
mod refine;

pub use camera::Intrinsics;
pub use correspondence::{Correspondence, Observation};
pub use kabsch::kabsch;
pub use p3p::{p3p_candidates, p3p_solve};
pub use pose::{pose_error, CameraPose};
pub use refine::{apply_increment, reprojection_cost, reprojection_jacobian, refine_pose_2d3d, Refinement};
