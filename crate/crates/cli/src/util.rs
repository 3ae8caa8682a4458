//! Shared CLI plumbing: error-to-exit-code mapping and atomic file output.

use std::path::{Path, PathBuf};

/// CLI failure classes, mapped to exit codes in `main`.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, missing or malformed files — exit 1.
    Validation(String),
    /// An algorithm reported failure on valid inputs — exit 2.
    Algorithm(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Algorithm(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Algorithm(m) => m,
        }
    }
}

/// Wrap an algorithm error, leading with the error's variant name.
pub fn algo<E: std::fmt::Debug + std::fmt::Display>(e: E) -> CliError {
    let dbg = format!("{e:?}");
    let name: String = dbg
        .chars()
        .take_while(|c| c.is_alphanumeric() || *c == '_')
        .collect();
    CliError::Algorithm(format!("{name}: {e}"))
}

/// Wrap a file/parse error, naming the offending path.
pub fn invalid(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("{}: {e}", path.display()))
}

/// Fail early with a message naming the file if it does not exist.
pub fn require_file(path: &Path) -> Result<(), CliError> {
    if !path.is_file() {
        return Err(CliError::Validation(format!(
            "{}: file not found",
            path.display()
        )));
    }
    Ok(())
}

/// Write through a temp file in the same directory, then rename, so an
/// interrupted run never leaves a partial artifact at the final path.
pub fn write_atomic<E: std::fmt::Display>(
    path: &Path,
    write: impl FnOnce(&Path) -> Result<(), E>,
) -> Result<(), CliError> {
    let tmp = tmp_path(path);
    write(&tmp).map_err(|e| invalid(path, e))?;
    std::fs::rename(&tmp, path).map_err(|e| invalid(path, e))
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(".tmp");
    path.with_file_name(name)
}

/// Parse "x,y,z" into a vector; used for ROI flags.
pub fn parse_vec3(s: &str) -> Result<nalgebra::Vector3<f64>, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected x,y,z but got '{s}'"));
    }
    let mut v = [0.0f64; 3];
    for (dst, part) in v.iter_mut().zip(&parts) {
        *dst = part
            .trim()
            .parse()
            .map_err(|_| format!("'{part}' is not a number"))?;
    }
    Ok(nalgebra::Vector3::new(v[0], v[1], v[2]))
}
