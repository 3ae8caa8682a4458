//! Pose list files: one record per line, `t tx ty tz qx qy qz qw`,
//! `#` comments allowed, timestamps strictly increasing.

use std::io::Write;
use std::path::Path;

use nalgebra::Vector3;

use super::FormatError;
use crate::geom::Pose;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseRecord {
    pub timestamp: f64,
    pub pose: Pose,
}

pub fn read_poses(path: &Path) -> Result<Vec<PoseRecord>, FormatError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| FormatError::parse("file", e.to_string()))?;
    let mut out: Vec<PoseRecord> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<f64> = line
            .split_whitespace()
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| FormatError::parse(format!("line {line_no}"), e.to_string()))?;
        if fields.len() != 8 {
            return Err(FormatError::parse(
                format!("line {line_no}"),
                format!("expected 8 fields, found {}", fields.len()),
            ));
        }
        if !fields.iter().all(|v| v.is_finite()) {
            return Err(FormatError::parse(format!("line {line_no}"), "non-finite field"));
        }
        let [t, tx, ty, tz, qx, qy, qz, qw] = fields[..] else {
            unreachable!()
        };
        if (qx * qx + qy * qy + qz * qz + qw * qw).sqrt() < 1e-12 {
            return Err(FormatError::parse(format!("line {line_no}"), "zero quaternion"));
        }
        if let Some(prev) = out.last() {
            if t <= prev.timestamp {
                return Err(FormatError::NonMonotonicTimestamps { line: line_no });
            }
        }
        out.push(PoseRecord {
            timestamp: t,
            pose: Pose::from_wxyz_t(qw, qx, qy, qz, Vector3::new(tx, ty, tz)),
        });
    }
    Ok(out)
}

pub fn write_poses(path: &Path, records: &[PoseRecord]) -> Result<(), FormatError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "# t tx ty tz qx qy qz qw")?;
    for r in records {
        let t = r.pose.translation();
        let rot = r.pose.rotation();
        let q = rot.quaternion();
        writeln!(
            f,
            "{} {} {} {} {} {} {} {}",
            r.timestamp, t.x, t.y, t.z, q.i, q.j, q.k, q.w
        )?;
    }
    f.flush()?;
    Ok(())
}
