use nalgebra::{Matrix3, Matrix6, RowVector6, Vector3, Vector6};

use super::MapError;
use crate::cloud::{build_kdtree, estimate_normals, ReflectivityCloud};
use crate::geom::{se3_exp, Pose, Twist};

/// Point-to-plane ICP controls. The correspondence radius decays
/// geometrically: d_k = max_corr_dist * gamma^k.
#[derive(Debug, Clone)]
pub struct IcpParams {
    pub max_iterations: usize,
    pub max_corr_dist: f64,
    pub gamma: f64,
    /// Convergence: per-step rotation and translation below this.
    pub convergence: f64,
    pub normal_k: usize,
}

impl Default for IcpParams {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            max_corr_dist: 1.0,
            gamma: 0.9,
            convergence: 1e-5,
            normal_k: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StitchReport {
    pub pose: Pose,
    /// RMS point-to-plane residual at the start of each iteration.
    pub rms_history: Vec<f64>,
    /// Fraction of source points with a correspondence in the last iteration.
    pub inlier_fraction: f64,
    pub converged: bool,
}

/// Register `source` onto `target` by iterated point-to-plane minimization,
/// updating the pose right-multiplicatively.
pub fn icp_point_to_plane(
    source: &ReflectivityCloud,
    target: &ReflectivityCloud,
    init: &Pose,
    params: &IcpParams,
) -> Result<(Pose, StitchReport), MapError> {
    if source.points.is_empty() {
        return Err(MapError::InvalidInput("empty source cloud".into()));
    }
    if target.points.len() < params.normal_k {
        return Err(MapError::InvalidInput(format!(
            "target has {} points but normal estimation needs {}",
            target.points.len(),
            params.normal_k
        )));
    }
    if params.max_corr_dist <= 0.0 || params.gamma <= 0.0 || params.gamma > 1.0 {
        return Err(MapError::InvalidInput(
            "max_corr_dist must be positive and gamma in (0, 1]".into(),
        ));
    }
    let tree = build_kdtree(target)
        .map_err(|e| MapError::InvalidInput(e.to_string()))?;
    let normals = estimate_normals(target, params.normal_k, &init.translation())
        .map_err(|e| MapError::InvalidInput(e.to_string()))?;

    let mut pose = *init;
    let mut rms_history = Vec::new();
    let mut inlier_fraction = 0.0;
    let mut converged = false;

    for k in 0..params.max_iterations {
        let d_k = params.max_corr_dist * params.gamma.powi(k as i32);
        let r_mat: Matrix3<f64> = pose.rotation_matrix();

        let mut h = Matrix6::<f64>::zeros();
        let mut g = Vector6::<f64>::zeros();
        let mut sq_sum = 0.0;
        let mut count = 0usize;
        for s in &source.points {
            let t = pose.apply(s);
            let (idx, dist) = tree.nearest(&t);
            if dist > d_k {
                continue;
            }
            let q = target.points[idx];
            let n = normals[idx];
            let r = n.dot(&(t - q));
            // d/dxi of n . (T exp(xi) s): [-n^T R [s]x | n^T R]
            let skew = Matrix3::new(
                0.0, -s.z, s.y, //
                s.z, 0.0, -s.x, //
                -s.y, s.x, 0.0,
            );
            let jw = -(n.transpose() * r_mat * skew);
            let jv = n.transpose() * r_mat;
            let j = RowVector6::new(jw[0], jw[1], jw[2], jv[0], jv[1], jv[2]);
            h += j.transpose() * j;
            g += j.transpose() * r;
            sq_sum += r * r;
            count += 1;
        }

        if count == 0 {
            if rms_history.is_empty() {
                return Err(MapError::NoCorrespondences);
            }
            break;
        }
        rms_history.push((sq_sum / count as f64).sqrt());
        inlier_fraction = count as f64 / source.points.len() as f64;

        let svd = h.svd(false, false);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        if cond > 1e12 {
            return Err(MapError::DegenerateNormals(cond));
        }

        let step = match h.cholesky() {
            Some(chol) => chol.solve(&(-g)),
            None => return Err(MapError::DegenerateNormals(cond)),
        };
        let omega = Vector3::new(step[0], step[1], step[2]);
        let v = Vector3::new(step[3], step[4], step[5]);
        pose = pose.compose(&se3_exp(&Twist::new(omega, v)));
        if omega.norm() < params.convergence && v.norm() < params.convergence {
            converged = true;
            break;
        }
    }

    let report = StitchReport {
        pose,
        rms_history,
        inlier_fraction,
        converged,
    };
    Ok((pose, report))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    /// Grid-sampled points on all six faces of a box, with jitter so normal
    /// estimation sees generic neighborhoods.
    pub(crate) fn room_scan(seed: u64, step: f64) -> ReflectivityCloud {
        let mut rng = StdRng::seed_from_u64(seed);
        let min = Vector3::new(-3.0, -2.0, -1.5);
        let max = Vector3::new(3.0, 2.0, 1.5);
        let mut cloud = ReflectivityCloud::new();
        let mut t = 0.0;
        for axis in 0..3 {
            let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
            for &side in &[min[axis], max[axis]] {
                let mut a = min[u];
                while a <= max[u] {
                    let mut b = min[v];
                    while b <= max[v] {
                        let mut p = Vector3::zeros();
                        p[axis] = side;
                        p[u] = a + rng.gen_range(-0.2..0.2) * step;
                        p[v] = b + rng.gen_range(-0.2..0.2) * step;
                        cloud.push(p, 0.5, t);
                        t += 1e-6;
                        b += step;
                    }
                    a += step;
                }
            }
        }
        cloud
    }

    #[test]
    fn identity_on_identical_clouds() {
        let cloud = room_scan(1, 0.2);
        let params = IcpParams::default();
        let (pose, report) =
            icp_point_to_plane(&cloud, &cloud, &Pose::identity(), &params).unwrap();
        assert!(pose.rotation_angle() < 1e-10);
        assert!(pose.translation().norm() < 1e-10);
        assert!(report.rms_history.len() <= 2, "{:?}", report.rms_history);
        assert!(report.converged);
    }

    #[test]
    fn recovers_small_rigid_offset() {
        let target = room_scan(2, 0.1);
        let gt = se3_exp(&Twist::new(
            Vector3::new(0.0, 0.0, 2.0f64.to_radians()),
            Vector3::new(0.05, 0.0, 0.0),
        ));
        // source points expressed in a frame displaced by gt^-1: mapping them
        // back requires exactly gt
        let source = target.transformed(&gt.inverse());
        let params = IcpParams {
            max_iterations: 30,
            ..IcpParams::default()
        };
        let (pose, report) =
            icp_point_to_plane(&source, &target, &Pose::identity(), &params).unwrap();
        let err = pose.compose(&gt.inverse());
        assert!(
            err.rotation_angle().to_degrees() < 0.05,
            "rot err {} deg",
            err.rotation_angle().to_degrees()
        );
        assert!(
            (pose.translation() - gt.translation()).norm() < 1e-3,
            "trans err {} m",
            (pose.translation() - gt.translation()).norm()
        );
        assert!(report.rms_history.len() <= 30);
        for w in report.rms_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "rms increased: {:?}", report.rms_history);
        }
    }

    #[test]
    fn far_displacement_has_no_correspondences() {
        let target = room_scan(3, 0.25);
        let shift = se3_exp(&Twist::new(
            Vector3::zeros(),
            Vector3::new(10.0, 0.0, 0.0),
        ));
        let source = target.transformed(&shift);
        let result = icp_point_to_plane(&source, &target, &Pose::identity(), &IcpParams::default());
        assert_eq!(result.unwrap_err(), MapError::NoCorrespondences);
    }
}
