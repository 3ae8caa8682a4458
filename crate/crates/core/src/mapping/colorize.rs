use nalgebra::Vector3;

use crate::cloud::ReflectivityCloud;
use crate::formats::RgbImage;
use crate::geom::{project, CameraIntrinsics, Pose};

/// One captured view: the image plus the map-frame pose of the LiDAR rig at
/// capture time (a point in rig coordinates is `pose` * p; the camera then
/// sees extr * p).
pub struct View<'a> {
    pub image: &'a RgbImage,
    pub pose: Pose,
}

/// Assign colors to map points from a set of calibrated views.
///
/// Per view, a z-buffer is rendered from the cloud itself at the image
/// resolution (each point splatted over 3x3 pixels); a point receives color
/// from a view only when its camera depth is within `3 * tol` of the
/// buffered depth. Among the views that pass, the one seeing the point
/// closest to its optical axis (smallest incidence angle) wins. The returned
/// mask flags points that got a color.
pub fn colorize(
    cloud: &ReflectivityCloud,
    views: &[View<'_>],
    intr: &CameraIntrinsics,
    extr: &Pose,
    tol: f64,
) -> (ReflectivityCloud, Vec<bool>) {
    let n = cloud.points.len();
    let mut colors = vec![[0.0f64; 3]; n];
    let mut colored = vec![false; n];
    let mut best_incidence = vec![f64::INFINITY; n];

    for view in views {
        let w = view.image.width;
        let h = view.image.height;
        let cam = |p: &Vector3<f64>| extr.apply(&view.pose.inverse().apply(p));

        // depth buffer from the cloud, min depth per pixel with 3x3 splat
        let mut zbuf = vec![f64::INFINITY; w * h];
        let mut projected: Vec<Option<(f64, f64, f64, f64)>> = Vec::with_capacity(n);
        for p in &cloud.points {
            let p_cam = cam(p);
            let (px, valid) = project(intr, &p_cam);
            if !valid {
                projected.push(None);
                continue;
            }
            let depth = p_cam.norm();
            let theta = (p_cam.x * p_cam.x + p_cam.y * p_cam.y)
                .sqrt()
                .atan2(p_cam.z);
            projected.push(Some((px.x, px.y, depth, theta)));
            let xi = px.x.round() as isize;
            let yi = px.y.round() as isize;
            for dy in -1..=1isize {
                for dx in -1..=1isize {
                    let (x, y) = (xi + dx, yi + dy);
                    if x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h {
                        let idx = y as usize * w + x as usize;
                        zbuf[idx] = zbuf[idx].min(depth);
                    }
                }
            }
        }

        for (i, proj) in projected.iter().enumerate() {
            let Some((ux, uy, depth, theta)) = *proj else {
                continue;
            };
            let xi = ux.round() as isize;
            let yi = uy.round() as isize;
            if xi < 0 || yi < 0 || xi as usize >= w || yi as usize >= h {
                continue;
            }
            let buffered = zbuf[yi as usize * w + xi as usize];
            if depth > buffered + 3.0 * tol {
                continue; // occluded in this view
            }
            if theta < best_incidence[i] {
                best_incidence[i] = theta;
                colors[i] = view.image.sample_bilinear(ux, uy);
                colored[i] = true;
            }
        }
    }

    let mut out = cloud.clone();
    out.colors = Some(colors);
    (out, colored)
}
