//! Coarse-to-fine hybrid mapping: odometry-based coarse map assembly,
//! point-to-plane ICP stitching of stationary fine scans, colorization from
//! calibrated camera views, and a greedy viewpoint-proposal stub.

mod colorize;
mod fuse;
mod icp;
mod viewpoints;

pub use colorize::{colorize, View};
pub use fuse::{assemble_coarse_map, stitch_fine};
pub use icp::{icp_point_to_plane, IcpParams, StitchReport};
pub use viewpoints::propose_viewpoints;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error("no correspondences within the search radius (initial pose too far off)")]
    NoCorrespondences,
    #[error("degenerate normal geometry: condition number {0:.3e} exceeds 1e12")]
    DegenerateNormals(f64),
    #[error("{scans} scans but {poses} poses")]
    CountMismatch { scans: usize, poses: usize },
    #[error("no candidate viewpoint is in free space")]
    NoFreeCandidates,
    #[error("invalid input: {0}")]
    InvalidInput(String),
}
