//! Synthetic ground-truth generator: patterned box rooms, a non-repetitive
//! LiDAR scan sampler, and a fisheye renderer. Image intensity equals surface
//! albedo (Lambertian), so reflectivity edges and image edges coincide by
//! construction; per-face brightness gains break that correspondence for
//! non-Lambertian experiments.

mod lidar;
mod pattern;
mod render;
mod scene;

pub use lidar::simulate_lidar;
pub use pattern::{sample_scan_directions, ScanPattern};
pub use render::{render_camera, render_camera_color};
pub use scene::{Hit, PatternKind, Scene, SceneBox, WallPattern};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("invalid scan pattern: {0}")]
    InvalidPattern(String),
}
