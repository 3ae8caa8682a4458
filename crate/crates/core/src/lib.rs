//! Targetless co-calibration of a wide-FoV camera and a non-repetitive
//! scanning LiDAR, plus the surrounding coarse-to-fine mapping pipeline.
//!
//! The crate is organized around the pipeline stages:
//!
//! - [`geom`] — SE(3) poses and the fisheye camera model with analytic
//!   derivatives.
//! - [`cloud`] — point-cloud containers, KD-tree queries, voxel filtering,
//!   normal estimation.
//! - [`formats`] — PLY / PGM / PPM / pose-list / JSON I/O.
//! - [`simulate`] — synthetic box-room scenes, a non-repetitive scan sampler,
//!   and a fisheye renderer providing ground truth.
//! - [`edges`] — image edge detection with an exact distance transform, and
//!   LiDAR reflectivity edges from a spherical raster.
//! - [`calib`] — staged Levenberg-Marquardt co-calibration of intrinsics and
//!   extrinsics against the edge distance field.
//! - [`mi`] — mutual-information extrinsic calibration baseline.
//! - [`mapping`] — point-to-plane ICP stitching, coarse map assembly,
//!   colorization, viewpoint proposal.

pub mod calib;
pub mod cloud;
pub mod edges;
pub mod formats;
pub mod geom;
pub mod mapping;
pub mod mi;
pub mod simulate;

pub use cloud::ReflectivityCloud;
pub use geom::{CameraIntrinsics, Pose, Twist};
