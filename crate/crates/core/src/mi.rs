//! Mutual-information extrinsic calibration baseline: grayscale intensity vs
//! LiDAR reflectivity, maximized over the 6-DoF extrinsic with a
//! deterministic Nelder-Mead search.

use nalgebra::Vector3;
use thiserror::Error;

use crate::cloud::ReflectivityCloud;
use crate::formats::GrayImage;
use crate::geom::{project, se3_exp, CameraIntrinsics, Pose, Twist};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MiError {
    #[error("no point projects into the image")]
    NoValidProjections,
    #[error("histogram holds no samples")]
    EmptyHistogram,
}

/// Joint (intensity bin, reflectivity bin) counts.
#[derive(Debug, Clone, PartialEq)]
pub struct JointHistogram {
    pub n: usize,
    /// Row-major: counts[x * n + y] for intensity bin x, reflectivity bin y.
    pub counts: Vec<u64>,
    pub total: u64,
}

impl JointHistogram {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            counts: vec![0; n * n],
            total: 0,
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u64 {
        self.counts[x * self.n + y]
    }

    pub fn add(&mut self, x: usize, y: usize) {
        self.counts[x * self.n + y] += 1;
        self.total += 1;
    }

    pub fn marginals(&self) -> (Vec<u64>, Vec<u64>) {
        let mut mx = vec![0u64; self.n];
        let mut my = vec![0u64; self.n];
        for x in 0..self.n {
            for y in 0..self.n {
                let c = self.get(x, y);
                mx[x] += c;
                my[y] += c;
            }
        }
        (mx, my)
    }
}

#[inline]
fn bin_of(v: f64, n: usize) -> usize {
    ((v.clamp(0.0, 1.0) * n as f64) as usize).min(n - 1)
}

/// Accumulate the joint histogram of bilinearly sampled image intensity and
/// point reflectivity over all validly projecting points.
pub fn joint_histogram(
    cloud: &ReflectivityCloud,
    image: &GrayImage,
    intr: &CameraIntrinsics,
    extr: &Pose,
    n_bins: usize,
) -> Result<JointHistogram, MiError> {
    let mut h = JointHistogram::new(n_bins);
    for (p, &r) in cloud.points.iter().zip(&cloud.reflectivity) {
        let p_cam = extr.apply(p);
        let (px, valid) = project(intr, &p_cam);
        if !valid {
            continue;
        }
        let v = image.sample_bilinear(px.x, px.y);
        h.add(bin_of(v, n_bins), bin_of(r, n_bins));
    }
    if h.total == 0 {
        return Err(MiError::NoValidProjections);
    }
    Ok(h)
}

/// Mutual information in bits.
pub fn mutual_information(h: &JointHistogram) -> Result<f64, MiError> {
    if h.total == 0 {
        return Err(MiError::EmptyHistogram);
    }
    let probs: Vec<f64> = h.counts.iter().map(|&c| c as f64 / h.total as f64).collect();
    Ok(mi_from_probs(&probs, h.n))
}

fn mi_from_probs(p: &[f64], n: usize) -> f64 {
    let mut mx = vec![0.0; n];
    let mut my = vec![0.0; n];
    for x in 0..n {
        for y in 0..n {
            mx[x] += p[x * n + y];
            my[y] += p[x * n + y];
        }
    }
    let mut mi = 0.0;
    for x in 0..n {
        for y in 0..n {
            let pxy = p[x * n + y];
            if pxy > 0.0 {
                mi += pxy * (pxy / (mx[x] * my[y])).log2();
            }
        }
    }
    mi
}

/// MI after optional Gaussian smoothing of the joint counts (sigma in bins).
pub fn mutual_information_smoothed(
    h: &JointHistogram,
    sigma: Option<f64>,
) -> Result<f64, MiError> {
    if h.total == 0 {
        return Err(MiError::EmptyHistogram);
    }
    match sigma {
        None => mutual_information(h),
        Some(s) if s <= 0.0 => mutual_information(h),
        Some(s) => {
            let n = h.n;
            let radius = (3.0 * s).ceil() as isize;
            let mut kernel = Vec::new();
            for i in -radius..=radius {
                kernel.push((-0.5 * (i as f64 / s).powi(2)).exp());
            }
            let norm: f64 = kernel.iter().sum();
            for k in &mut kernel {
                *k /= norm;
            }
            let src: Vec<f64> = h.counts.iter().map(|&c| c as f64).collect();
            let mut tmp = vec![0.0; n * n];
            for x in 0..n {
                for y in 0..n {
                    let mut s_acc = 0.0;
                    for (ki, k) in kernel.iter().enumerate() {
                        let xx = (x as isize + ki as isize - radius).clamp(0, n as isize - 1);
                        s_acc += k * src[xx as usize * n + y];
                    }
                    tmp[x * n + y] = s_acc;
                }
            }
            let mut sm = vec![0.0; n * n];
            for x in 0..n {
                for y in 0..n {
                    let mut s_acc = 0.0;
                    for (ki, k) in kernel.iter().enumerate() {
                        let yy = (y as isize + ki as isize - radius).clamp(0, n as isize - 1);
                        s_acc += k * tmp[x * n + yy as usize];
                    }
                    sm[x * n + y] = s_acc;
                }
            }
            let total: f64 = sm.iter().sum();
            for v in &mut sm {
                *v /= total;
            }
            Ok(mi_from_probs(&sm, n))
        }
    }
}

#[derive(Debug, Clone)]
pub struct MiOptions {
    pub n_bins: usize,
    pub max_evals: usize,
    /// Initial simplex scale for the rotation components, radians.
    pub simplex_rot: f64,
    /// Initial simplex scale for the translation components, meters.
    pub simplex_trans: f64,
    /// Simplex MI spread below which the search stops, bits.
    pub spread_tol: f64,
    /// Optional Gaussian histogram smoothing, sigma in bins.
    pub smoothing_sigma: Option<f64>,
    /// Deterministic point stride for large clouds (1 = use every point).
    pub stride: usize,
}

impl Default for MiOptions {
    fn default() -> Self {
        Self {
            n_bins: 64,
            max_evals: 500,
            simplex_rot: 0.5f64.to_radians(),
            simplex_trans: 0.005,
            spread_tol: 1e-6,
            smoothing_sigma: None,
            stride: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MiResult {
    pub extr: Pose,
    /// MI of every objective evaluation, in evaluation order.
    pub trace: Vec<f64>,
    pub evaluations: usize,
    pub final_mi: f64,
}

/// Maximize MI over a right-multiplicative twist increment on `init` with a
/// deterministic Nelder-Mead simplex (reflection 1, expansion 2,
/// contraction 0.5, shrink 0.5).
pub fn mi_calibrate(
    cloud: &ReflectivityCloud,
    image: &GrayImage,
    intr: &CameraIntrinsics,
    init: &Pose,
    opts: &MiOptions,
) -> Result<MiResult, MiError> {
    let sub;
    let cloud = if opts.stride > 1 {
        sub = strided(cloud, opts.stride);
        &sub
    } else {
        cloud
    };

    // fail fast if even the initial pose sees nothing
    joint_histogram(cloud, image, intr, init, opts.n_bins)?;

    // every evaluation pushes one trace entry, so trace.len() counts evals
    let mut trace = Vec::new();
    let eval = |xi: &[f64; 6], trace: &mut Vec<f64>| -> f64 {
        let pose = init.compose(&se3_exp(&Twist::new(
            Vector3::new(xi[0], xi[1], xi[2]),
            Vector3::new(xi[3], xi[4], xi[5]),
        )));
        match joint_histogram(cloud, image, intr, &pose, opts.n_bins)
            .and_then(|h| mutual_information_smoothed(&h, opts.smoothing_sigma))
        {
            Ok(mi) => {
                trace.push(mi);
                -mi
            }
            Err(_) => {
                trace.push(f64::NEG_INFINITY);
                f64::INFINITY
            }
        }
    };

    // initial simplex: origin plus one axis vertex per degree of freedom
    let mut simplex: Vec<([f64; 6], f64)> = Vec::with_capacity(7);
    let origin = [0.0; 6];
    let f0 = eval(&origin, &mut trace);
    simplex.push((origin, f0));
    for i in 0..6 {
        let mut v = [0.0; 6];
        v[i] = if i < 3 { opts.simplex_rot } else { opts.simplex_trans };
        let f = eval(&v, &mut trace);
        simplex.push((v, f));
    }

    while trace.len() < opts.max_evals {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        let spread = simplex[6].1 - simplex[0].1;
        if spread.is_finite() && spread < opts.spread_tol {
            break;
        }
        // centroid of all but the worst vertex
        let mut c = [0.0; 6];
        for (v, _) in simplex.iter().take(6) {
            for k in 0..6 {
                c[k] += v[k] / 6.0;
            }
        }
        let worst = simplex[6];
        let mut xr = [0.0; 6];
        for k in 0..6 {
            xr[k] = c[k] + (c[k] - worst.0[k]);
        }
        let fr = eval(&xr, &mut trace);
        if fr < simplex[0].1 {
            // expand
            let mut xe = [0.0; 6];
            for k in 0..6 {
                xe[k] = c[k] + 2.0 * (c[k] - worst.0[k]);
            }
            let fe = eval(&xe, &mut trace);
            simplex[6] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[5].1 {
            simplex[6] = (xr, fr);
        } else {
            // contract toward the better of the reflected and worst points
            let (towards, ft) = if fr < worst.1 { (xr, fr) } else { (worst.0, worst.1) };
            let mut xc = [0.0; 6];
            for k in 0..6 {
                xc[k] = c[k] + 0.5 * (towards[k] - c[k]);
            }
            let fc = eval(&xc, &mut trace);
            if fc < ft {
                simplex[6] = (xc, fc);
            } else {
                // shrink toward the best vertex
                let best = simplex[0].0;
                for idx in 1..7 {
                    let mut v = [0.0; 6];
                    for k in 0..6 {
                        v[k] = best[k] + 0.5 * (simplex[idx].0[k] - best[k]);
                    }
                    let f = eval(&v, &mut trace);
                    simplex[idx] = (v, f);
                    if trace.len() >= opts.max_evals {
                        break;
                    }
                }
            }
        }
    }

    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    let best = simplex[0];
    let extr = init.compose(&se3_exp(&Twist::new(
        Vector3::new(best.0[0], best.0[1], best.0[2]),
        Vector3::new(best.0[3], best.0[4], best.0[5]),
    )));
    Ok(MiResult {
        extr,
        final_mi: -best.1,
        evaluations: trace.len(),
        trace,
    })
}

fn strided(cloud: &ReflectivityCloud, stride: usize) -> ReflectivityCloud {
    let keep: Vec<usize> = (0..cloud.points.len()).step_by(stride).collect();
    ReflectivityCloud {
        points: keep.iter().map(|&i| cloud.points[i]).collect(),
        reflectivity: keep.iter().map(|&i| cloud.reflectivity[i]).collect(),
        timestamps: keep.iter().map(|&i| cloud.timestamps[i]).collect(),
        colors: cloud
            .colors
            .as_ref()
            .map(|c| keep.iter().map(|&i| c[i]).collect()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{render_camera, simulate_lidar, sample_scan_directions, ScanPattern, Scene, WallPattern, PatternKind};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn diag_histogram(n: usize, per_cell: u64) -> JointHistogram {
        let mut h = JointHistogram::new(n);
        for i in 0..n {
            h.counts[i * n + i] = per_cell;
            h.total += per_cell;
        }
        h
    }

    #[test]
    fn identical_variables_give_entropy() {
        // MI(X;X) = H(X) = 2 bits for a uniform 4-symbol variable
        let h = diag_histogram(4, 10);
        let mi = mutual_information(&h).unwrap();
        assert!((mi - 2.0).abs() < 1e-12, "mi {mi}");
    }

    #[test]
    fn independent_variables_give_zero() {
        let n = 8;
        let mut h = JointHistogram::new(n);
        for x in 0..n {
            for y in 0..n {
                let c = ((x + 1) * (y + 2)) as u64;
                h.counts[x * n + y] = c;
                h.total += c;
            }
        }
        let mi = mutual_information(&h).unwrap();
        assert!(mi.abs() < 1e-12, "mi {mi}");
    }

    #[test]
    fn hand_built_two_by_two() {
        let mut h = JointHistogram::new(2);
        h.counts = vec![2, 1, 1, 2];
        h.total = 6;
        let mi = mutual_information(&h).unwrap();
        let expected = 2.0 * (2.0 / 6.0) * ((2.0 / 6.0) / 0.25f64).log2()
            + 2.0 * (1.0 / 6.0) * ((1.0 / 6.0) / 0.25f64).log2();
        assert!((mi - expected).abs() < 1e-14);
    }

    #[test]
    fn empty_histogram_rejected() {
        let h = JointHistogram::new(4);
        assert_eq!(mutual_information(&h), Err(MiError::EmptyHistogram));
    }

    #[test]
    fn nonnegative_and_bounded_by_marginal_entropy() {
        let mut rng = StdRng::seed_from_u64(8);
        for _ in 0..1000 {
            let n = rng.gen_range(2..10);
            let mut h = JointHistogram::new(n);
            for c in h.counts.iter_mut() {
                *c = rng.gen_range(0..20);
            }
            h.total = h.counts.iter().sum();
            if h.total == 0 {
                continue;
            }
            let mi = mutual_information(&h).unwrap();
            assert!(mi >= -1e-12, "negative MI {mi}");
            let (mx, my) = h.marginals();
            let entropy = |m: &[u64]| {
                m.iter()
                    .filter(|&&c| c > 0)
                    .map(|&c| {
                        let p = c as f64 / h.total as f64;
                        -p * p.log2()
                    })
                    .sum::<f64>()
            };
            let bound = entropy(&mx).min(entropy(&my));
            assert!(mi <= bound + 1e-12, "mi {mi} > bound {bound}");
        }
    }

    #[test]
    fn invariant_under_shared_bin_permutation() {
        let mut rng = StdRng::seed_from_u64(15);
        let n = 6;
        let mut h = JointHistogram::new(n);
        for c in h.counts.iter_mut() {
            *c = rng.gen_range(0..30);
        }
        h.total = h.counts.iter().sum();
        let perm = [3usize, 0, 5, 1, 4, 2];
        let mut hp = JointHistogram::new(n);
        for x in 0..n {
            for y in 0..n {
                hp.counts[perm[x] * n + perm[y]] = h.get(x, y);
            }
        }
        hp.total = h.total;
        let a = mutual_information(&h).unwrap();
        let b = mutual_information(&hp).unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn single_point_lands_in_center_bin() {
        let intr =
            CameraIntrinsics::new(100.0, 100.0, 50.0, 50.0, [0.0; 4], 100, 100, 1.6).unwrap();
        let image = GrayImage::from_data(100, 100, vec![0.5; 100 * 100]);
        let cloud = ReflectivityCloud {
            points: vec![Vector3::new(0.0, 0.0, 2.0)],
            reflectivity: vec![0.5],
            timestamps: vec![0.0],
            colors: None,
        };
        let h = joint_histogram(&cloud, &image, &intr, &Pose::identity(), 64).unwrap();
        assert_eq!(h.total, 1);
        assert_eq!(h.get(32, 32), 1);
    }

    #[test]
    fn all_points_out_of_view() {
        let intr =
            CameraIntrinsics::new(100.0, 100.0, 50.0, 50.0, [0.0; 4], 100, 100, 1.6).unwrap();
        let image = GrayImage::from_data(100, 100, vec![0.5; 100 * 100]);
        let cloud = ReflectivityCloud {
            points: vec![Vector3::new(0.0, 0.0, -2.0)],
            reflectivity: vec![0.5],
            timestamps: vec![0.0],
            colors: None,
        };
        assert_eq!(
            joint_histogram(&cloud, &image, &intr, &Pose::identity(), 64),
            Err(MiError::NoValidProjections)
        );
    }

    #[test]
    fn histogram_matches_brute_force() {
        let mut rng = StdRng::seed_from_u64(3);
        let intr =
            CameraIntrinsics::new(120.0, 115.0, 64.0, 64.0, [-0.01, 0.0, 0.0, 0.0], 128, 128, 1.6)
                .unwrap();
        let image = GrayImage::from_data(
            128,
            128,
            (0..128 * 128).map(|_| rng.gen_range(0.0..1.0)).collect(),
        );
        let mut pts = Vec::new();
        let mut refl = Vec::new();
        for _ in 0..2000 {
            pts.push(Vector3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.5..4.0),
            ));
            refl.push(rng.gen_range(0.0..1.0));
        }
        let n = pts.len();
        let cloud = ReflectivityCloud {
            points: pts.clone(),
            reflectivity: refl.clone(),
            timestamps: vec![0.0; n],
            colors: None,
        };
        let extr = se3_exp(&Twist::new(
            Vector3::new(0.02, -0.01, 0.03),
            Vector3::new(0.05, 0.0, -0.02),
        ));
        let h = joint_histogram(&cloud, &image, &intr, &extr, 32).unwrap();

        let mut oracle = vec![0u64; 32 * 32];
        let mut total = 0u64;
        for (p, r) in pts.iter().zip(&refl) {
            let (px, valid) = project(&intr, &extr.apply(p));
            if !valid {
                continue;
            }
            let v = image.sample_bilinear(px.x, px.y);
            let bx = ((v.clamp(0.0, 1.0) * 32.0) as usize).min(31);
            let by = ((r.clamp(0.0, 1.0) * 32.0) as usize).min(31);
            oracle[bx * 32 + by] += 1;
            total += 1;
        }
        assert_eq!(h.counts, oracle);
        assert_eq!(h.total, total);
    }

    fn mi_scene() -> (Scene, CameraIntrinsics, Pose, ReflectivityCloud, GrayImage) {
        let scene = Scene {
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
        };
        let intr =
            CameraIntrinsics::new(150.0, 150.0, 160.0, 120.0, [-0.02, 0.004, 0.0, 0.0], 320, 240, 1.7)
                .unwrap();
        let extr = se3_exp(&Twist::new(
            Vector3::new(0.02, -0.015, 0.03),
            Vector3::new(0.05, -0.03, 0.08),
        ));
        // with the camera at the world origin, p_cam = lidar_pose * p_sensor,
        // so the ground-truth extrinsic is the LiDAR world pose itself
        let lidar_pose = extr;
        let pattern = ScanPattern::new(7.03, 23.0, 1.2, 100_000.0, 1.0).unwrap();
        let cloud = simulate_lidar(&scene, &pattern, &lidar_pose, 0.0, 0.0, 1);
        let image = render_camera(&scene, &intr, &Pose::identity(), 1);
        let _ = sample_scan_directions(&pattern); // keep the helper exercised
        (scene, intr, extr, cloud, image)
    }

    #[test]
    fn ground_truth_is_local_maximum() {
        let (_, intr, extr, cloud, image) = mi_scene();
        let h = joint_histogram(&cloud, &image, &intr, &extr, 64).unwrap();
        let mi_gt = mutual_information(&h).unwrap();
        for axis in 0..3 {
            for sign in [-1.0, 1.0] {
                let mut omega = Vector3::zeros();
                omega[axis] = sign * 1.0f64.to_radians();
                let probe = extr.compose(&se3_exp(&Twist::new(omega, Vector3::zeros())));
                let h = joint_histogram(&cloud, &image, &intr, &probe, 64).unwrap();
                let mi = mutual_information(&h).unwrap();
                assert!(
                    mi_gt >= mi,
                    "axis {axis} sign {sign}: MI(GT) {mi_gt} < MI(probe) {mi}"
                );
            }
        }
    }

    #[test]
    fn calibrate_from_ground_truth_stays_put() {
        let (_, intr, extr, cloud, image) = mi_scene();
        let opts = MiOptions::default();
        let result = mi_calibrate(&cloud, &image, &intr, &extr, &opts).unwrap();
        let drift = result.extr.compose(&extr.inverse());
        assert!(
            drift.rotation_angle().to_degrees() <= 0.05,
            "rotation drift {} deg",
            drift.rotation_angle().to_degrees()
        );
        // the histogram MI surface is flat over a few millimeters at this
        // sample count, so drift is bounded by the simplex scale rather than
        // sub-millimeter
        assert!(
            (result.extr.translation() - extr.translation()).norm() <= 5e-3,
            "translation drift {} m",
            (result.extr.translation() - extr.translation()).norm()
        );
    }

    #[test]
    fn calibrate_is_deterministic() {
        let (_, intr, extr, cloud, image) = mi_scene();
        let opts = MiOptions {
            max_evals: 60,
            stride: 3,
            ..MiOptions::default()
        };
        let a = mi_calibrate(&cloud, &image, &intr, &extr, &opts).unwrap();
        let b = mi_calibrate(&cloud, &image, &intr, &extr, &opts).unwrap();
        assert_eq!(a.extr, b.extr);
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.final_mi, b.final_mi);
    }
}
