use super::icp::{icp_point_to_plane, IcpParams, StitchReport};
use super::MapError;
use crate::cloud::{build_kdtree, voxel_downsample, ReflectivityCloud};
use crate::formats::PoseRecord;
use crate::geom::Pose;

/// Transform every scan by its odometry pose, concatenate, and voxelize.
pub fn assemble_coarse_map(
    scans: &[ReflectivityCloud],
    poses: &[PoseRecord],
    voxel: f64,
) -> Result<ReflectivityCloud, MapError> {
    if scans.len() != poses.len() {
        return Err(MapError::CountMismatch {
            scans: scans.len(),
            poses: poses.len(),
        });
    }
    let mut merged = ReflectivityCloud::new();
    for (scan, rec) in scans.iter().zip(poses) {
        merged.extend(&scan.transformed(&rec.pose));
    }
    Ok(voxel_downsample(&merged, voxel))
}

/// Register each fine scan into the coarse map, then fuse with a fine-wins
/// rule: coarse points survive only where no fine point lies within
/// `fusion_voxel`; fine points are kept at their native density.
///
/// Per-scan ICP failures are reported in the per-scan result list and the
/// failing scan is excluded from the merge; the pipeline continues.
pub fn stitch_fine(
    coarse: &ReflectivityCloud,
    fine_scans: &[ReflectivityCloud],
    init_poses: &[Pose],
    icp: &IcpParams,
    fusion_voxel: f64,
) -> Result<(ReflectivityCloud, Vec<Result<StitchReport, MapError>>), MapError> {
    if fine_scans.len() != init_poses.len() {
        return Err(MapError::CountMismatch {
            scans: fine_scans.len(),
            poses: init_poses.len(),
        });
    }

    let mut reports = Vec::with_capacity(fine_scans.len());
    let mut fine_merged = ReflectivityCloud::new();
    for (scan, init) in fine_scans.iter().zip(init_poses) {
        match icp_point_to_plane(scan, coarse, init, icp) {
            Ok((pose, report)) => {
                fine_merged.extend(&scan.transformed(&pose));
                reports.push(Ok(report));
            }
            Err(e) => reports.push(Err(e)),
        }
    }

    if fine_merged.points.is_empty() {
        return Ok((coarse.clone(), reports));
    }

    let fine_tree = build_kdtree(&fine_merged)
        .map_err(|e| MapError::InvalidInput(e.to_string()))?;
    let mut merged = ReflectivityCloud::new();
    let mut colors = coarse.colors.as_ref().map(|_| Vec::new());
    for (i, p) in coarse.points.iter().enumerate() {
        let (_, dist) = fine_tree.nearest(p);
        if dist > fusion_voxel {
            merged.push(*p, coarse.reflectivity[i], coarse.timestamps[i]);
            if let (Some(dst), Some(src)) = (colors.as_mut(), coarse.colors.as_ref()) {
                dst.push(src[i]);
            }
        }
    }
    merged.colors = colors;
    merged.extend(&fine_merged);
    Ok((merged, reports))
}
