//! JSON configuration and result documents.
//!
//! Unknown keys are rejected with an error naming the key; all numbers are
//! read at full double precision. Field order in emitted documents follows
//! struct declaration order, so re-serialization is byte-stable.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::FormatError;
use crate::geom::{CameraIntrinsics, Pose};

/// Scene description consumed by the simulator (`scene.json`).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneConfig {
    /// Axis-aligned room extents, meters.
    pub room_min: [f64; 3],
    pub room_max: [f64; 3],
    /// Wall pattern: "checker" or "stripe".
    pub pattern: String,
    /// Pattern cell size, meters.
    pub cell: f64,
    pub albedo_low: f64,
    pub albedo_high: f64,
    /// Interior occluder boxes with uniform albedo.
    pub boxes: Vec<BoxConfig>,
    /// Per-face image brightness gains (x-, x+, y-, y+, z-, z+); 1.0 is
    /// Lambertian. Gains affect rendered images only, not LiDAR reflectivity.
    pub face_gains: [f64; 6],
    /// Range noise sigma, meters.
    pub sigma_range: f64,
    /// Reflectivity noise sigma.
    pub sigma_reflectivity: f64,
    pub intrinsics: CameraIntrinsics,
    /// Camera-from-LiDAR extrinsic T_CL.
    pub extrinsic: Pose,
    /// LiDAR pose in the world frame.
    pub lidar_pose: Pose,
    pub scan: ScanConfig,
    /// Renderer sub-pixel rays per axis.
    pub supersample: u32,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            room_min: [-3.0, -2.0, -1.5],
            room_max: [3.0, 2.0, 1.5],
            pattern: "checker".into(),
            cell: 0.25,
            albedo_low: 0.1,
            albedo_high: 0.9,
            boxes: Vec::new(),
            face_gains: [1.0; 6],
            sigma_range: 0.005,
            sigma_reflectivity: 0.0,
            intrinsics: default_intrinsics(),
            extrinsic: default_extrinsic(),
            lidar_pose: Pose::identity(),
            scan: ScanConfig::default(),
            supersample: 2,
            seed: 0,
        }
    }
}

fn default_intrinsics() -> CameraIntrinsics {
    CameraIntrinsics::new(
        330.0,
        330.0,
        512.0,
        384.0,
        [-0.02, 0.004, 0.0, 0.0],
        1024,
        768,
        1.8,
    )
    .expect("default intrinsics are valid")
}

fn default_extrinsic() -> Pose {
    use nalgebra::{UnitQuaternion, Vector3};
    // a few degrees of mounting misalignment plus a baseline offset
    let rot = UnitQuaternion::from_euler_angles(0.02, -0.015, 0.03);
    Pose::new(rot, Vector3::new(0.05, -0.03, 0.08))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub albedo: f64,
}

/// Non-repetitive scan pattern parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanConfig {
    /// Nodding frequency, Hz.
    pub f1: f64,
    /// Spinning frequency, Hz. f1/f2 must stay clear of low-order rationals.
    pub f2: f64,
    pub cone_half_angle: f64,
    /// Points per second.
    pub rate: f64,
    /// Seconds.
    pub duration: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            f1: 7.03,
            f2: 23.0,
            cone_half_angle: 1.2,
            rate: 200_000.0,
            duration: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CannyConfig {
    pub sigma: f64,
    /// Thresholds as fractions of the maximum gradient magnitude.
    pub t_low: f64,
    pub t_high: f64,
}

impl Default for CannyConfig {
    fn default() -> Self {
        Self {
            sigma: 1.4,
            t_low: 0.04,
            t_high: 0.10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LidarEdgeConfig {
    pub n_az: usize,
    pub n_el: usize,
    /// Reflectivity Sobel magnitude threshold.
    pub g_min: f64,
    /// Maximum relative 3x3 range spread for a geometrically continuous cell.
    pub depth_rel_max: f64,
    /// Minimum hits per cell.
    pub min_count: usize,
}

impl Default for LidarEdgeConfig {
    fn default() -> Self {
        Self {
            n_az: 1000,
            n_el: 500,
            g_min: 0.4,
            depth_rel_max: 0.1,
            min_count: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FreeParam {
    Rot,
    Trans,
    Focal,
    Principal,
    Distortion,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageConfig {
    pub pyramid_level: usize,
    pub free_params: Vec<FreeParam>,
    pub max_iters: usize,
    /// Huber delta in pixels at this stage's level.
    pub huber_delta: f64,
}

/// Initial calibration state and pipeline knobs (`calib_init.json`).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibInitConfig {
    pub intrinsics: CameraIntrinsics,
    pub extrinsic: Pose,
    /// Override for the default four-stage schedule.
    #[serde(default)]
    pub stages: Option<Vec<StageConfig>>,
    #[serde(default = "default_pyramid_levels")]
    pub pyramid_levels: usize,
    #[serde(default)]
    pub canny: CannyConfig,
    #[serde(default)]
    pub lidar_edges: LidarEdgeConfig,
}

fn default_pyramid_levels() -> usize {
    3
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageReportDoc {
    pub pyramid_level: usize,
    pub free_params: Vec<FreeParam>,
    /// Cost after each accepted step, starting with the initial cost.
    pub cost_history: Vec<f64>,
    pub iterations: usize,
    pub accepted_steps: usize,
    pub termination: String,
}

/// Final calibration document (`calib_result.json`).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibResultDoc {
    pub intrinsics: CameraIntrinsics,
    pub extrinsic: Pose,
    pub stages: Vec<StageReportDoc>,
    pub inlier_count: usize,
    pub termination: String,
    pub wall_time_s: f64,
}

/// Ground-truth parameters emitted by the simulator (`gt.json`).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthDoc {
    pub intrinsics: CameraIntrinsics,
    pub extrinsic: Pose,
    pub lidar_pose: Pose,
}

pub fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T, FormatError> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| FormatError::Schema(e.to_string()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FormatError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| FormatError::Schema(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
