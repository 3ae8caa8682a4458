//! Rigid-body math and the wide-FoV camera model.
//!
//! Everything here is pure and allocation-free; the rest of the crate builds
//! on these kernels.

mod camera;
mod pose;

pub use camera::{project, project_jacobian, unproject, CameraIntrinsics};
pub use pose::{se3_exp, se3_log, Pose, Twist};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("Newton iteration for unprojection did not converge")]
    NoConvergence,
    #[error("point does not project into the valid image domain")]
    InvalidPoint,
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
}
