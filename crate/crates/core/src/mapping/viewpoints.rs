use std::collections::BTreeSet;

use nalgebra::{Matrix3, UnitQuaternion, Vector3};

use super::MapError;
use crate::cloud::ReflectivityCloud;
use crate::geom::Pose;

/// Greedy coverage-based viewpoint proposal (a deliberately simple stand-in
/// for a full next-best-view planner).
///
/// Candidates are placed on a horizontal ring and grid around the region of
/// interest at `clearance` from its surface, kept only when no map point
/// lies within `clearance`. ROI surface voxels (map voxels of size `voxel`
/// inside the ROI that contain points) are ray-cast against the map's
/// occupancy; candidates are ranked by marginal surface coverage and the
/// best `k` returned, each oriented with its optical axis toward the ROI
/// centroid.
pub fn propose_viewpoints(
    map: &ReflectivityCloud,
    roi_min: &Vector3<f64>,
    roi_max: &Vector3<f64>,
    k: usize,
    clearance: f64,
    voxel: f64,
) -> Result<Vec<Pose>, MapError> {
    if k == 0 {
        return Err(MapError::InvalidInput("k must be at least 1".into()));
    }
    if clearance <= 0.0 || voxel <= 0.0 {
        return Err(MapError::InvalidInput(
            "clearance and voxel must be positive".into(),
        ));
    }
    let centroid = (roi_min + roi_max) * 0.5;
    let half = (roi_max - roi_min) * 0.5;

    // occupancy grid of the whole map
    let key = |p: &Vector3<f64>| -> (i64, i64, i64) {
        (
            (p.x / voxel).floor() as i64,
            (p.y / voxel).floor() as i64,
            (p.z / voxel).floor() as i64,
        )
    };
    let occupied: BTreeSet<(i64, i64, i64)> = map.points.iter().map(&key).collect();

    // surface cells to cover: occupied voxels inside the ROI
    let targets: Vec<Vector3<f64>> = occupied
        .iter()
        .map(|&(ix, iy, iz)| {
            Vector3::new(
                (ix as f64 + 0.5) * voxel,
                (iy as f64 + 0.5) * voxel,
                (iz as f64 + 0.5) * voxel,
            )
        })
        .filter(|c| {
            (roi_min.x..=roi_max.x).contains(&c.x)
                && (roi_min.y..=roi_max.y).contains(&c.y)
                && (roi_min.z..=roi_max.z).contains(&c.z)
        })
        .collect();

    // candidate ring around the ROI plus a horizontal grid overlay
    let ring_radius = half.xy().norm() + clearance;
    let mut candidates: Vec<Vector3<f64>> = Vec::new();
    for i in 0..16 {
        let a = 2.0 * std::f64::consts::PI * i as f64 / 16.0;
        candidates.push(centroid + Vector3::new(ring_radius * a.cos(), ring_radius * a.sin(), 0.0));
    }
    let grid_half = ring_radius + clearance;
    for gy in -2..=2i32 {
        for gx in -2..=2i32 {
            if gx == 0 && gy == 0 {
                continue; // inside the ROI itself
            }
            candidates.push(
                centroid
                    + Vector3::new(
                        gx as f64 * grid_half / 2.0,
                        gy as f64 * grid_half / 2.0,
                        0.0,
                    ),
            );
        }
    }

    // free-space filter: no map point within the clearance radius
    let tree = if map.points.is_empty() {
        None
    } else {
        Some(crate::cloud::build_kdtree(map).map_err(|e| MapError::InvalidInput(e.to_string()))?)
    };
    let free: Vec<Vector3<f64>> = candidates
        .into_iter()
        .filter(|c| match &tree {
            None => true,
            Some(t) => t.nearest(c).1 >= clearance,
        })
        .collect();
    if free.is_empty() {
        return Err(MapError::NoFreeCandidates);
    }

    // visibility: the segment from the candidate to a target cell must not
    // pass through any other occupied voxel
    let visible = |from: &Vector3<f64>, cell: &Vector3<f64>| -> bool {
        let target_key = key(cell);
        let dist = (cell - from).norm();
        let dir = (cell - from) / dist;
        let step = voxel * 0.5;
        let mut t = step;
        while t < dist - step {
            let probe = from + dir * t;
            let pk = key(&probe);
            if pk != target_key && occupied.contains(&pk) {
                return false;
            }
            t += step;
        }
        true
    };
    let coverage: Vec<Vec<usize>> = free
        .iter()
        .map(|c| {
            targets
                .iter()
                .enumerate()
                .filter(|(_, cell)| visible(c, cell))
                .map(|(i, _)| i)
                .collect()
        })
        .collect();

    // greedy max-marginal-coverage selection; stable tie-break by index
    let mut chosen: Vec<usize> = Vec::new();
    let mut covered: BTreeSet<usize> = BTreeSet::new();
    for _ in 0..k.min(free.len()) {
        let mut best: Option<(usize, usize)> = None; // (gain, candidate)
        for (ci, cov) in coverage.iter().enumerate() {
            if chosen.contains(&ci) {
                continue;
            }
            let gain = cov.iter().filter(|i| !covered.contains(i)).count();
            let better = match best {
                None => true,
                Some((bg, _)) => gain > bg,
            };
            if better {
                best = Some((gain, ci));
            }
        }
        let Some((_, ci)) = best else { break };
        covered.extend(coverage[ci].iter().copied());
        chosen.push(ci);
    }

    Ok(chosen
        .into_iter()
        .map(|ci| {
            let pos = free[ci];
            Pose::new(look_at(&pos, &centroid), pos)
        })
        .collect())
}

/// Rotation whose +z axis points from `eye` to `target`, with +y kept as
/// close to world -z (image "down") as the geometry allows.
fn look_at(eye: &Vector3<f64>, target: &Vector3<f64>) -> UnitQuaternion<f64> {
    let f = (target - eye).normalize();
    let world_up = Vector3::new(0.0, 0.0, 1.0);
    let mut x = world_up.cross(&f);
    if x.norm() < 1e-9 {
        x = Vector3::new(1.0, 0.0, 0.0);
    } else {
        x.normalize_mut();
    }
    let y = f.cross(&x);
    let m = Matrix3::from_columns(&[x, y, f]);
    UnitQuaternion::from_matrix(&m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wall(x: f64, y0: f64, y1: f64, z0: f64, z1: f64, step: f64) -> ReflectivityCloud {
        let mut c = ReflectivityCloud::new();
        let mut y = y0;
        while y <= y1 {
            let mut z = z0;
            while z <= z1 {
                c.push(Vector3::new(x, y, z), 0.5, 0.0);
                z += step;
            }
            y += step;
        }
        c
    }

    #[test]
    fn empty_map_yields_ring_viewpoint() {
        let map = ReflectivityCloud::new();
        let poses = propose_viewpoints(
            &map,
            &Vector3::new(-1.0, -1.0, -1.0),
            &Vector3::new(1.0, 1.0, 1.0),
            1,
            0.5,
            0.1,
        )
        .unwrap();
        assert_eq!(poses.len(), 1);
        let pos = poses[0].translation();
        let ring_radius = 2.0f64.sqrt() + 0.5;
        assert!((pos.xy().norm() - ring_radius).abs() < 1e-9);
        // optical axis points at the centroid (the origin)
        let axis = poses[0].rotate(&Vector3::new(0.0, 0.0, 1.0));
        let to_centroid = (-pos).normalize();
        assert!((axis - to_centroid).norm() < 1e-9);
    }

    #[test]
    fn enclosed_roi_has_no_free_candidates() {
        // dense shell of points all around the candidate ring
        let mut map = ReflectivityCloud::new();
        for i in 0..128 {
            let a = 2.0 * std::f64::consts::PI * i as f64 / 128.0;
            for r in (2..=14).map(|j| j as f64 * 0.5) {
                for z in [-0.5, 0.0, 0.5] {
                    map.push(Vector3::new(r * a.cos(), r * a.sin(), z), 0.5, 0.0);
                }
            }
        }
        let err = propose_viewpoints(
            &map,
            &Vector3::new(-0.5, -0.5, -0.5),
            &Vector3::new(0.5, 0.5, 0.5),
            1,
            2.0,
            0.1,
        )
        .unwrap_err();
        assert_eq!(err, MapError::NoFreeCandidates);
    }

    #[test]
    fn two_viewpoints_beat_any_single_one_on_a_two_sided_wall() {
        // an opaque wall through the ROI: each side sees only its own face
        // two occupied voxel layers (x in [0, 0.1) and [0.1, 0.2)), so each
        // side of the wall can only see its own face's cells
        let mut map = wall(0.05, -0.9, 0.9, -0.4, 0.4, 0.05);
        map.extend(&wall(0.15, -0.9, 0.9, -0.4, 0.4, 0.05));
        let roi_min = Vector3::new(-1.0, -1.0, -0.5);
        let roi_max = Vector3::new(1.0, 1.0, 0.5);
        let voxel = 0.1;
        let clearance = 0.5;

        let count_coverage = |poses: &[Pose]| -> usize {
            // recompute coverage with the same discretization used internally
            let key = |p: &Vector3<f64>| {
                (
                    (p.x / voxel).floor() as i64,
                    (p.y / voxel).floor() as i64,
                    (p.z / voxel).floor() as i64,
                )
            };
            let occupied: BTreeSet<_> = map.points.iter().map(&key).collect();
            let targets: Vec<Vector3<f64>> = occupied
                .iter()
                .map(|&(ix, iy, iz)| {
                    Vector3::new(
                        (ix as f64 + 0.5) * voxel,
                        (iy as f64 + 0.5) * voxel,
                        (iz as f64 + 0.5) * voxel,
                    )
                })
                .filter(|c| {
                    (roi_min.x..=roi_max.x).contains(&c.x)
                        && (roi_min.y..=roi_max.y).contains(&c.y)
                        && (roi_min.z..=roi_max.z).contains(&c.z)
                })
                .collect();
            let visible = |from: &Vector3<f64>, cell: &Vector3<f64>| -> bool {
                let target_key = key(cell);
                let dist = (cell - from).norm();
                let dir = (cell - from) / dist;
                let mut t = voxel * 0.5;
                while t < dist - voxel * 0.5 {
                    let pk = key(&(from + dir * t));
                    if pk != target_key && occupied.contains(&pk) {
                        return false;
                    }
                    t += voxel * 0.5;
                }
                true
            };
            let mut covered = BTreeSet::new();
            for pose in poses {
                let pos = pose.translation();
                for (i, cell) in targets.iter().enumerate() {
                    if visible(&pos, cell) {
                        covered.insert(i);
                    }
                }
            }
            covered.len()
        };

        let two = propose_viewpoints(&map, &roi_min, &roi_max, 2, clearance, voxel).unwrap();
        assert_eq!(two.len(), 2);
        let pair_coverage = count_coverage(&two);
        let best_single = two
            .iter()
            .map(|p| count_coverage(std::slice::from_ref(p)))
            .max()
            .unwrap();
        assert!(
            pair_coverage > best_single,
            "pair {pair_coverage} vs best single {best_single}"
        );
    }
}
