use nalgebra::Vector3;

use super::EdgeError;
use crate::cloud::ReflectivityCloud;
use crate::formats::GrayImage;

/// Spherical raster of a sensor-frame cloud: azimuth ∈ [−π,π) across
/// `n_az` columns, elevation ∈ [−π/2, π/2] across `n_el` rows. Each cell
/// aggregates its hits into a minimum range, mean reflectivity, hit count,
/// and 3D centroid; cells with zero count are empty.
#[derive(Debug, Clone)]
pub struct SphericalImage {
    pub n_az: usize,
    pub n_el: usize,
    pub min_range: Vec<f64>,
    pub reflectivity: Vec<f64>,
    pub count: Vec<u32>,
    pub centroid: Vec<Vector3<f64>>,
}

impl SphericalImage {
    #[inline]
    pub fn idx(&self, az: usize, el: usize) -> usize {
        el * self.n_az + az
    }

    #[inline]
    pub fn occupied(&self, az: usize, el: usize) -> bool {
        self.count[self.idx(az, el)] > 0
    }

    /// Azimuth wraps around; elevation does not.
    #[inline]
    pub fn wrap_az(&self, az: isize) -> usize {
        az.rem_euclid(self.n_az as isize) as usize
    }

    /// Column/row bin of a direction. The elevation pole el = π/2 falls into
    /// the last row.
    pub fn bin_of(&self, p: &Vector3<f64>) -> (usize, usize) {
        bin_direction(p, self.n_az, self.n_el)
    }

    /// Reflectivity channel as a grayscale image (empty cells render black).
    pub fn to_image(&self) -> GrayImage {
        GrayImage::from_data(self.n_az, self.n_el, self.reflectivity.clone())
    }
}

fn bin_direction(p: &Vector3<f64>, n_az: usize, n_el: usize) -> (usize, usize) {
    let r = p.norm();
    let az = p.y.atan2(p.x); // [−π, π]
    let el = (p.z / r).clamp(-1.0, 1.0).asin(); // [−π/2, π/2]
    let two_pi = 2.0 * std::f64::consts::PI;
    let ax = (((az + std::f64::consts::PI) / two_pi) * n_az as f64).floor() as isize;
    let ey = (((el + std::f64::consts::FRAC_PI_2) / std::f64::consts::PI) * n_el as f64).floor()
        as isize;
    (
        ax.rem_euclid(n_az as isize) as usize,
        ey.clamp(0, n_el as isize - 1) as usize,
    )
}

pub fn build_spherical_image(
    cloud: &ReflectivityCloud,
    n_az: usize,
    n_el: usize,
) -> Result<SphericalImage, EdgeError> {
    if cloud.points.is_empty() {
        return Err(EdgeError::EmptyCloud);
    }
    let n = n_az * n_el;
    let mut min_range = vec![f64::INFINITY; n];
    let mut refl_sum = vec![0.0; n];
    let mut count = vec![0u32; n];
    let mut centroid_sum = vec![Vector3::zeros(); n];

    for (p, &r) in cloud.points.iter().zip(&cloud.reflectivity) {
        let range = p.norm();
        if range <= 0.0 {
            continue;
        }
        let (ax, ey) = bin_direction(p, n_az, n_el);
        let i = ey * n_az + ax;
        min_range[i] = min_range[i].min(range);
        refl_sum[i] += r;
        count[i] += 1;
        centroid_sum[i] += p;
    }

    let mut reflectivity = vec![0.0; n];
    let mut centroid = vec![Vector3::zeros(); n];
    for i in 0..n {
        if count[i] > 0 {
            let c = count[i] as f64;
            reflectivity[i] = refl_sum[i] / c;
            centroid[i] = centroid_sum[i] / c;
        } else {
            min_range[i] = 0.0;
        }
    }

    Ok(SphericalImage {
        n_az,
        n_el,
        min_range,
        reflectivity,
        count,
        centroid,
    })
}

/// Select reflectivity-edge cells of the spherical raster and emit their 3D
/// centroids, weighted by the local reflectivity gradient magnitude.
///
/// A cell qualifies iff:
/// (a) the Sobel magnitude of the reflectivity channel is at least `g_min`;
/// (b) the 3×3 range spread obeys (max−min)/min ≤ `depth_rel_max`, so the
///     local geometry is continuous and the centroid is not a mixed
///     fore-/background point;
/// (c) the cell has at least `min_count` hits and all 8 neighbors are
///     occupied.
pub fn extract_lidar_edges(
    sph: &SphericalImage,
    g_min: f64,
    depth_rel_max: f64,
    min_count: u32,
) -> Vec<(Vector3<f64>, f64)> {
    let mut out = Vec::new();
    if sph.n_el < 3 || sph.n_az < 3 {
        return out;
    }
    for ey in 1..sph.n_el - 1 {
        'cell: for ax in 0..sph.n_az {
            let i = sph.idx(ax, ey);
            if sph.count[i] < min_count {
                continue;
            }
            // gather the 3x3 neighborhood with azimuth wraparound
            let mut refl = [[0.0f64; 3]; 3];
            let mut rng_min = f64::INFINITY;
            let mut rng_max = 0.0f64;
            for dy in -1..=1isize {
                for dx in -1..=1isize {
                    let nx = sph.wrap_az(ax as isize + dx);
                    let ny = (ey as isize + dy) as usize;
                    let j = sph.idx(nx, ny);
                    if sph.count[j] == 0 {
                        continue 'cell; // criterion (c)
                    }
                    refl[(dy + 1) as usize][(dx + 1) as usize] = sph.reflectivity[j];
                    rng_min = rng_min.min(sph.min_range[j]);
                    rng_max = rng_max.max(sph.min_range[j]);
                }
            }
            // criterion (b): local range continuity
            if (rng_max - rng_min) / rng_min > depth_rel_max {
                continue;
            }
            // criterion (a): Sobel magnitude on the reflectivity channel
            let gx = (refl[0][2] + 2.0 * refl[1][2] + refl[2][2])
                - (refl[0][0] + 2.0 * refl[1][0] + refl[2][0]);
            let gy = (refl[2][0] + 2.0 * refl[2][1] + refl[2][2])
                - (refl[0][0] + 2.0 * refl[0][1] + refl[0][2]);
            let mag = gx.hypot(gy);
            if mag >= g_min {
                out.push((sph.centroid[i], mag));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{se3_exp, Twist};

    fn cloud_from(points: Vec<Vector3<f64>>, refl: Vec<f64>) -> ReflectivityCloud {
        let n = points.len();
        ReflectivityCloud {
            points,
            reflectivity: refl,
            timestamps: vec![0.0; n],
            colors: None,
        }
    }

    #[test]
    fn single_axis_point_single_cell() {
        let cloud = cloud_from(vec![Vector3::new(5.0, 0.0, 0.0)], vec![0.8]);
        let sph = build_spherical_image(&cloud, 100, 50).unwrap();
        let occupied: Vec<usize> = (0..100 * 50).filter(|&i| sph.count[i] > 0).collect();
        assert_eq!(occupied.len(), 1);
        let (ax, ey) = sph.bin_of(&Vector3::new(1.0, 0.0, 0.0));
        assert_eq!(occupied[0], sph.idx(ax, ey));
        // azimuth 0 sits halfway across, elevation 0 halfway up
        assert_eq!(ax, 50);
        assert_eq!(ey, 25);
    }

    #[test]
    fn two_points_mean_reflectivity() {
        let cloud = cloud_from(
            vec![Vector3::new(5.0, 0.0, 0.0), Vector3::new(5.0, 0.001, 0.0)],
            vec![0.2, 0.4],
        );
        let sph = build_spherical_image(&cloud, 100, 50).unwrap();
        let (ax, ey) = sph.bin_of(&Vector3::new(1.0, 0.0, 0.0));
        let i = sph.idx(ax, ey);
        assert_eq!(sph.count[i], 2);
        assert!((sph.reflectivity[i] - 0.3).abs() < 1e-12);
        assert!((sph.min_range[i] - 5.0).abs() < 1e-9);
    }

    #[test]
    fn counts_match_brute_force_binning() {
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(11);
        let n_az = 40;
        let n_el = 20;
        let mut pts = Vec::new();
        for _ in 0..5000 {
            let v = Vector3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            if v.norm() > 0.1 {
                pts.push(v * rng.gen_range(1.0..10.0));
            }
        }
        let n = pts.len();
        let cloud = cloud_from(pts.clone(), vec![0.5; n]);
        let sph = build_spherical_image(&cloud, n_az, n_el).unwrap();

        let mut oracle = vec![0u32; n_az * n_el];
        for p in &pts {
            let az = p.y.atan2(p.x);
            let el = (p.z / p.norm()).asin();
            let mut ax = ((az + std::f64::consts::PI) / (2.0 * std::f64::consts::PI)
                * n_az as f64)
                .floor() as i64;
            if ax >= n_az as i64 {
                ax -= n_az as i64;
            }
            let ey = (((el + std::f64::consts::FRAC_PI_2) / std::f64::consts::PI) * n_el as f64)
                .floor()
                .min(n_el as f64 - 1.0) as usize;
            oracle[ey * n_az + ax as usize] += 1;
        }
        assert_eq!(sph.count, oracle);
    }

    #[test]
    fn empty_cloud_rejected() {
        let cloud = cloud_from(vec![], vec![]);
        assert!(matches!(
            build_spherical_image(&cloud, 10, 10),
            Err(EdgeError::EmptyCloud)
        ));
    }

    /// Dense scan of the plane x = 2 with reflectivity from a y/z checker.
    fn checker_wall_cloud(cell: f64, jitter: bool) -> ReflectivityCloud {
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(21);
        let mut pts = Vec::new();
        let mut refl = Vec::new();
        let n = 400;
        for iy in 0..n {
            for iz in 0..n {
                let mut y = -1.0 + 2.0 * (iy as f64 + 0.5) / n as f64;
                let mut z = -1.0 + 2.0 * (iz as f64 + 0.5) / n as f64;
                if jitter {
                    y += rng.gen_range(-0.002..0.002);
                    z += rng.gen_range(-0.002..0.002);
                }
                let parity = ((y / cell).floor() + (z / cell).floor()) as i64;
                pts.push(Vector3::new(2.0, y, z));
                refl.push(if parity.rem_euclid(2) == 0 { 0.1 } else { 0.9 });
            }
        }
        let n = pts.len();
        ReflectivityCloud {
            points: pts,
            reflectivity: refl,
            timestamps: vec![0.0; n],
            colors: None,
        }
    }

    #[test]
    fn uniform_wall_yields_no_edges() {
        let mut cloud = checker_wall_cloud(0.25, false);
        cloud.reflectivity.iter_mut().for_each(|r| *r = 0.5);
        let sph = build_spherical_image(&cloud, 500, 250).unwrap();
        let edges = extract_lidar_edges(&sph, 0.4, 0.1, 2);
        assert!(edges.is_empty());
    }

    #[test]
    fn checker_edges_near_true_boundaries() {
        let cell = 0.25;
        let cloud = checker_wall_cloud(cell, true);
        let n_az = 500;
        let n_el = 250;
        let sph = build_spherical_image(&cloud, n_az, n_el).unwrap();
        let edges = extract_lidar_edges(&sph, 0.4, 0.1, 2);
        assert!(!edges.is_empty(), "no edges extracted");
        let cell_ang = (2.0 * std::f64::consts::PI / n_az as f64)
            .max(std::f64::consts::PI / n_el as f64);
        for (p, _w) in &edges {
            let range = p.norm();
            // distance on the wall to the nearest checker boundary line
            let dy = {
                let m = (p.y / cell).fract().abs() * cell;
                m.min(cell - m)
            };
            let dz = {
                let m = (p.z / cell).fract().abs() * cell;
                m.min(cell - m)
            };
            let d = dy.min(dz);
            assert!(
                d <= 2.0 * cell_ang * range,
                "edge point {p:?} is {d} m from a boundary"
            );
        }
    }

    #[test]
    fn depth_discontinuity_excluded() {
        // bright near surface next to a dark far surface: strong reflectivity
        // contrast, but range jumps across the seam
        let mut pts = Vec::new();
        let mut refl = Vec::new();
        let n = 300;
        for iy in 0..n {
            for iz in 0..n {
                let y = -0.5 + (iy as f64 + 0.5) / n as f64;
                let z = -0.5 + (iz as f64 + 0.5) / n as f64;
                let (x, r) = if y < 0.0 { (1.0, 0.9) } else { (5.0, 0.1) };
                // scale y,z with depth so both surfaces subtend the same angles
                pts.push(Vector3::new(x, y * x, z * x));
                refl.push(r);
            }
        }
        let len = pts.len();
        let cloud = ReflectivityCloud {
            points: pts,
            reflectivity: refl,
            timestamps: vec![0.0; len],
            colors: None,
        };
        let sph = build_spherical_image(&cloud, 300, 150).unwrap();
        let with_depth_gate = extract_lidar_edges(&sph, 0.4, 0.1, 1);
        assert!(with_depth_gate.is_empty(), "depth seam leaked through");
        // sanity: the contrast would qualify without the range gate
        let without_gate = extract_lidar_edges(&sph, 0.4, f64::INFINITY, 1);
        assert!(!without_gate.is_empty());
    }

    #[test]
    fn rigid_invariance_within_cell_quantization() {
        let cell = 0.25;
        let cloud = checker_wall_cloud(cell, true);
        let n_az = 500;
        let n_el = 250;
        let sph = build_spherical_image(&cloud, n_az, n_el).unwrap();
        let base = extract_lidar_edges(&sph, 0.4, 0.1, 2);
        assert!(!base.is_empty());

        let t = se3_exp(&Twist {
            omega: Vector3::new(0.01, -0.02, 0.015),
            v: Vector3::new(0.03, -0.01, 0.02),
        });
        let moved = cloud.transformed(&t);
        let sph2 = build_spherical_image(&moved, n_az, n_el).unwrap();
        let edges2: Vec<Vector3<f64>> = extract_lidar_edges(&sph2, 0.4, 0.1, 2)
            .into_iter()
            .map(|(p, _)| t.inverse().apply(&p))
            .collect();
        assert!(!edges2.is_empty());

        let cell_ang = (2.0 * std::f64::consts::PI / n_az as f64)
            .max(std::f64::consts::PI / n_el as f64);
        // every re-extracted point lies within one cell diagonal (in metric
        // terms at its range) of some original edge point
        let diag = 2.0f64.sqrt();
        for q in &edges2 {
            let tol = diag * cell_ang * q.norm() + 1e-9;
            let nearest = base
                .iter()
                .map(|(p, _)| (p - q).norm())
                .fold(f64::INFINITY, f64::min);
            assert!(nearest <= 2.0 * tol, "point {q:?} off by {nearest}");
        }
    }
}
