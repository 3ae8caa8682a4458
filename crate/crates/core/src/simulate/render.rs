use nalgebra::Vector2;
use rayon::prelude::*;

use super::Scene;
use crate::formats::{GrayImage, RgbImage};
use crate::geom::{unproject, CameraIntrinsics, Pose};

/// Render the scene through the fisheye model. Per pixel, `supersample^2`
/// stratified sub-pixel rays are unprojected and cast; the pixel value is the
/// mean surface albedo times the per-face gain. Pixels outside the image
/// circle (unprojection fails) render black.
pub fn render_camera(
    scene: &Scene,
    intr: &CameraIntrinsics,
    cam_pose: &Pose,
    supersample: u32,
) -> GrayImage {
    let s = supersample.max(1) as usize;
    let w = intr.width as usize;
    let h = intr.height as usize;
    let origin = cam_pose.translation();

    let rows: Vec<Vec<f64>> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut row = Vec::with_capacity(w);
            for x in 0..w {
                let mut sum = 0.0;
                for sy in 0..s {
                    for sx in 0..s {
                        // pixel centers sit at integer coordinates
                        let px = x as f64 - 0.5 + (sx as f64 + 0.5) / s as f64;
                        let py = y as f64 - 0.5 + (sy as f64 + 0.5) / s as f64;
                        if let Ok(dir) = unproject(intr, &Vector2::new(px, py)) {
                            let world_dir = cam_pose.rotate(&dir);
                            if let Some(hit) = scene.raycast(&origin, &world_dir) {
                                sum += (hit.albedo * hit.gain).clamp(0.0, 1.0);
                            }
                        }
                    }
                }
                row.push(sum / (s * s) as f64);
            }
            row
        })
        .collect();

    GrayImage::from_data(w, h, rows.into_iter().flatten().collect())
}

/// Color variant of [`render_camera`]; the synthetic world is achromatic so
/// all channels carry the rendered intensity.
pub fn render_camera_color(
    scene: &Scene,
    intr: &CameraIntrinsics,
    cam_pose: &Pose,
    supersample: u32,
) -> RgbImage {
    let gray = render_camera(scene, intr, cam_pose, supersample);
    let mut img = RgbImage::new(gray.width, gray.height);
    for (dst, &v) in img.data.iter_mut().zip(&gray.data) {
        *dst = [v, v, v];
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::project;
    use crate::simulate::{PatternKind, Scene, WallPattern};
    use nalgebra::Vector3;

    fn intr() -> CameraIntrinsics {
        CameraIntrinsics::new(150.0, 150.0, 160.0, 120.0, [0.0; 4], 320, 240, 1.6).unwrap()
    }

    fn uniform_scene(albedo: f64) -> Scene {
        Scene {
            room_min: Vector3::new(-3.0, -2.0, -1.5),
            room_max: Vector3::new(3.0, 2.0, 1.5),
            pattern: WallPattern {
                kind: PatternKind::Checker,
                cell: 0.25,
                albedo_low: albedo,
                albedo_high: albedo,
            },
            boxes: Vec::new(),
            face_gains: [1.0; 6],
        }
    }

    #[test]
    fn uniform_room_renders_constant() {
        let scene = uniform_scene(0.6);
        let img = render_camera(&scene, &intr(), &Pose::identity(), 1);
        let cx = 160;
        let cy = 120;
        // check the in-circle region around the principal point
        for y in cy - 40..cy + 40 {
            for x in cx - 40..cx + 40 {
                let v = img.get(x, y);
                assert!((v - 0.6).abs() < 1e-9, "pixel ({x},{y}) = {v}");
            }
        }
    }

    #[test]
    fn principal_pixel_sees_axis_surface() {
        let mut scene = uniform_scene(0.3);
        scene.pattern.albedo_low = 0.1;
        scene.pattern.albedo_high = 0.9;
        let intr = intr();
        let img = render_camera(&scene, &intr, &Pose::identity(), 1);
        let axis_hit = scene
            .raycast(&Vector3::zeros(), &Vector3::new(0.0, 0.0, 1.0))
            .unwrap();
        let v = img.get(160, 120);
        assert!((v - axis_hit.albedo).abs() < 1e-9);
    }

    #[test]
    fn checker_edges_land_where_projected() {
        let scene = uniform_scene(0.0); // overwritten below
        let mut scene = scene;
        scene.pattern.albedo_low = 0.0;
        scene.pattern.albedo_high = 1.0;
        let intr = intr();
        let img = render_camera(&scene, &intr, &Pose::identity(), 4);

        // 3D boundary on the ceiling (z = 1.5): line x = 0.25, sample a point
        let p3 = Vector3::new(0.25, 0.1, 1.5);
        let (px, valid) = project(&intr, &p3);
        assert!(valid);
        // scan the image row for the nearest strong horizontal transition
        let y = px.y.round() as usize;
        let mut best: Option<f64> = None;
        for x in 1..img.width {
            let d = (img.get(x, y) - img.get(x - 1, y)).abs();
            if d > 0.5 {
                let edge_x = x as f64 - 0.5;
                let err = (edge_x - px.x).abs();
                if best.is_none_or(|b| err < b) {
                    best = Some(err);
                }
            }
        }
        let err = best.expect("no edge found in row");
        assert!(err < 1.0, "edge offset {err} px");
    }
}
