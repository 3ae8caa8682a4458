//! Bit-exact file I/O: PLY clouds, PGM/PPM images, pose lists, and the JSON
//! configuration and result documents consumed and emitted by the CLI.

mod config;
mod image;
mod ply;
mod pnm;
mod poses;

pub use config::{
    read_config, write_json, BoxConfig, CalibInitConfig, CalibResultDoc, CannyConfig, FreeParam,
    GroundTruthDoc, LidarEdgeConfig, ScanConfig, SceneConfig, StageConfig, StageReportDoc,
};
pub use image::{GrayImage, RgbImage};
pub use ply::{read_ply, write_ply};
pub use pnm::{read_pgm, read_ppm, write_pgm, write_pgm_16, write_ppm};
pub use poses::{read_poses, write_poses, PoseRecord};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("unsupported maxval {0} (expected 255 or 65535)")]
    UnsupportedMaxval(u64),
    #[error("timestamps not strictly increasing at line {line}")]
    NonMonotonicTimestamps { line: usize },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl FormatError {
    pub(crate) fn parse(location: impl std::fmt::Display, message: impl Into<String>) -> Self {
        FormatError::Parse {
            location: location.to_string(),
            message: message.into(),
        }
    }
}
