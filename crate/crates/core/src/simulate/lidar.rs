use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{sample_scan_directions, ScanPattern, Scene};
use crate::cloud::ReflectivityCloud;
use crate::geom::Pose;

/// Simulate a stationary LiDAR scan. Points are expressed in the sensor
/// frame; `sensor_pose` places the sensor in the world. Range and
/// reflectivity noise are Gaussian with the given sigmas, drawn from a
/// ChaCha stream so identical seeds give bit-identical clouds regardless of
/// thread count.
pub fn simulate_lidar(
    scene: &Scene,
    pat: &ScanPattern,
    sensor_pose: &Pose,
    sigma_range: f64,
    sigma_refl: f64,
    seed: u64,
) -> ReflectivityCloud {
    let samples = sample_scan_directions(pat);
    let origin = sensor_pose.translation();

    // Noise is drawn sequentially up front; ray evaluation is then pure.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: Vec<(f64, f64)> = (0..samples.len())
        .map(|_| (gaussian(&mut rng) * sigma_range, gaussian(&mut rng) * sigma_refl))
        .collect();

    let hits: Vec<Option<(Vector3<f64>, f64, f64)>> = samples
        .par_iter()
        .zip(noise.par_iter())
        .map(|(&(dir, t), &(eps_r, eps_a))| {
            let world_dir = sensor_pose.rotate(&dir);
            scene.raycast(&origin, &world_dir).map(|hit| {
                let p = dir * (hit.range + eps_r);
                let refl = (hit.albedo + eps_a).clamp(0.0, 1.0);
                (p, refl, t)
            })
        })
        .collect();

    let mut cloud = ReflectivityCloud::with_capacity(samples.len());
    for h in hits.into_iter().flatten() {
        cloud.push(h.0, h.1, h.2);
    }
    cloud
}

/// Box-Muller transform; consumes two uniforms per call.
fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    use rand::Rng;
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{PatternKind, WallPattern};
    use approx::assert_abs_diff_eq;

    fn scene() -> Scene {
        Scene {
            room_min: Vector3::new(-3.0, -2.0, -1.5),
            room_max: Vector3::new(3.0, 2.0, 1.5),
            pattern: WallPattern {
                kind: PatternKind::Checker,
                cell: 0.25,
                albedo_low: 0.1,
                albedo_high: 0.9,
            },
            boxes: Vec::new(),
            face_gains: [1.0; 6],
        }
    }

    #[test]
    fn zero_noise_point_on_surface() {
        let scene = scene();
        let pat = ScanPattern::new(7.03, 23.0, 1.2, 1000.0, 0.001).unwrap();
        let cloud = simulate_lidar(&scene, &pat, &Pose::identity(), 0.0, 0.0, 1);
        assert_eq!(cloud.len(), 1);
        // t = 0 looks along +z from the room center: ceiling at 1.5 m
        assert_abs_diff_eq!(cloud.points[0], Vector3::new(0.0, 0.0, 1.5), epsilon = 1e-9);
    }

    #[test]
    fn range_noise_statistics() {
        let scene = scene();
        let pat = ScanPattern::new(7.03, 23.0, 1.2, 100_000.0, 1.0).unwrap();
        let noisy = simulate_lidar(&scene, &pat, &Pose::identity(), 0.01, 0.0, 7);
        let clean = simulate_lidar(&scene, &pat, &Pose::identity(), 0.0, 0.0, 7);
        assert_eq!(noisy.len(), clean.len());
        let residuals: Vec<f64> = noisy
            .points
            .iter()
            .zip(&clean.points)
            .map(|(a, b)| a.norm() - b.norm())
            .collect();
        let n = residuals.len() as f64;
        let mean = residuals.iter().sum::<f64>() / n;
        let var = residuals.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        assert!((std - 0.01).abs() < 0.0005, "sample std {std}");
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let scene = scene();
        let pat = ScanPattern::new(7.03, 23.0, 1.2, 10_000.0, 0.2).unwrap();
        let a = simulate_lidar(&scene, &pat, &Pose::identity(), 0.01, 0.05, 42);
        let b = simulate_lidar(&scene, &pat, &Pose::identity(), 0.01, 0.05, 42);
        assert_eq!(a, b);
    }
}
