//! Edge extraction on both sides of the co-calibration: image edges with an
//! exact Euclidean distance transform, and 3D LiDAR edge points from a
//! spherical reflectivity raster.

mod canny;
mod dt;
mod spherical;

pub use canny::{detect_image_edges, EdgeMap};
pub use dt::{distance_transform, DistanceField};
pub use spherical::{build_spherical_image, extract_lidar_edges, SphericalImage};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EdgeError {
    #[error("edge map contains no edge pixels")]
    NoEdges,
    #[error("operation requires a non-empty cloud")]
    EmptyCloud,
}
