//! Self-contained synthetic reproduction run: simulate a scene with known
//! ground truth, perturb the initialization, run both the edge-based
//! co-calibration and the MI baseline, and report both against ground truth.

use std::path::Path;
use std::time::Instant;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use calmap_core::calib::{
    cocalibrate, default_schedule, evaluate_calibration, CalibProblem, EvalReport,
};
use calmap_core::calib::build_dt_pyramid;
use calmap_core::edges::{build_spherical_image, extract_lidar_edges};
use calmap_core::formats::{write_json, CannyConfig, LidarEdgeConfig, SceneConfig};
use calmap_core::geom::{se3_exp, Twist};
use calmap_core::mi::{mi_calibrate, MiOptions};
use calmap_core::simulate::{render_camera, simulate_lidar, ScanPattern, Scene};

use crate::util::{algo, invalid, write_atomic, CliError};

/// Reproduction report (`repro_report.json`). Deliberately excludes wall
/// times so identical seeds produce byte-identical files on any machine and
/// any thread count; runtimes go to stdout only.
#[derive(Debug, Serialize, Deserialize)]
pub struct ReproReport {
    pub seed: u64,
    pub non_lambertian: bool,
    /// Per-face brightness gains used for rendering.
    pub face_gains: [f64; 6],
    /// Initialization offsets applied to the ground truth.
    pub perturbation: PerturbationDoc,
    pub edge_based: EvalReport,
    pub mi_baseline: EvalReport,
    pub edge_inlier_count: usize,
    pub edge_termination: String,
    pub mi_evaluations: usize,
    pub mi_final_bits: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PerturbationDoc {
    pub rot_deg: f64,
    pub trans_m: f64,
    pub fx_rel: f64,
}

pub fn run_repro(seed: u64, non_lambertian: bool, out_dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out_dir).map_err(|e| invalid(out_dir, e))?;

    // --- scene with ground truth -----------------------------------------
    let mut cfg = SceneConfig {
        seed,
        ..SceneConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e3779b97f4a7c15));
    if non_lambertian {
        for g in &mut cfg.face_gains {
            *g = rng.gen_range(0.7..1.3);
        }
    }
    let scene = Scene::from_config(&cfg).map_err(algo)?;
    let pattern = ScanPattern::from_config(&cfg.scan).map_err(algo)?;

    let t0 = Instant::now();
    let cloud = simulate_lidar(
        &scene,
        &pattern,
        &cfg.lidar_pose,
        cfg.sigma_range,
        cfg.sigma_reflectivity,
        cfg.seed,
    );
    let cam_pose = cfg.lidar_pose.compose(&cfg.extrinsic.inverse());
    let image = render_camera(&scene, &cfg.intrinsics, &cam_pose, cfg.supersample);
    let sim_s = t0.elapsed().as_secs_f64();

    // --- perturbed initialization: 3 deg, 5 cm, +3% fx --------------------
    let perturbation = PerturbationDoc {
        rot_deg: 3.0,
        trans_m: 0.05,
        fx_rel: 0.03,
    };
    let axis = random_unit(&mut rng);
    let tdir = random_unit(&mut rng);
    let offset = se3_exp(&Twist::new(
        axis * perturbation.rot_deg.to_radians(),
        tdir * perturbation.trans_m,
    ));
    let init_extr = cfg.extrinsic.compose(&offset);
    let mut init_intr = cfg.intrinsics;
    init_intr.fx *= 1.0 + perturbation.fx_rel;

    // --- edge-based co-calibration ----------------------------------------
    let t1 = Instant::now();
    let edge_cfg = LidarEdgeConfig::default();
    let sph = build_spherical_image(&cloud, edge_cfg.n_az, edge_cfg.n_el).map_err(algo)?;
    let lidar_edges = extract_lidar_edges(
        &sph,
        edge_cfg.g_min,
        edge_cfg.depth_rel_max,
        edge_cfg.min_count as u32,
    );
    let levels = 3;
    let dt_pyramid = build_dt_pyramid(&image, &CannyConfig::default(), levels).map_err(algo)?;
    let problem = CalibProblem {
        lidar_edges,
        dt_pyramid,
        init_intr,
        init_extr,
        schedule: default_schedule(levels),
    };
    let calib = cocalibrate(&problem).map_err(algo)?;
    let edge_s = t1.elapsed().as_secs_f64();
    let edge_based =
        evaluate_calibration(&calib.intr, &calib.extr, &cfg.intrinsics, &cfg.extrinsic, &problem);

    // --- MI baseline (extrinsics only, from the same init) -----------------
    let t2 = Instant::now();
    let mi_opts = MiOptions {
        stride: 11,
        max_evals: 1500,
        simplex_rot: 1.0f64.to_radians(),
        simplex_trans: 0.02,
        ..MiOptions::default()
    };
    let mi = mi_calibrate(&cloud, &image, &init_intr, &init_extr, &mi_opts).map_err(algo)?;
    let mi_s = t2.elapsed().as_secs_f64();
    let mi_baseline =
        evaluate_calibration(&init_intr, &mi.extr, &cfg.intrinsics, &cfg.extrinsic, &problem);

    // --- report ------------------------------------------------------------
    let report = ReproReport {
        seed,
        non_lambertian,
        face_gains: cfg.face_gains,
        perturbation,
        edge_based,
        mi_baseline,
        edge_inlier_count: calib.inlier_count,
        edge_termination: calib.termination.clone(),
        mi_evaluations: mi.evaluations,
        mi_final_bits: mi.final_mi,
    };
    print_table(&report, sim_s, edge_s, mi_s);
    write_atomic(&out_dir.join("repro_report.json"), |p| {
        write_json(p, &report)
    })?;
    Ok(())
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n < 1.0 {
            return v / n;
        }
    }
}

fn print_table(r: &ReproReport, sim_s: f64, edge_s: f64, mi_s: f64) {
    println!("seed {}   non-lambertian: {}", r.seed, r.non_lambertian);
    println!(
        "simulation {:.1} s   edge-based calibration {:.1} s   MI baseline {:.1} s",
        sim_s, edge_s, mi_s
    );
    println!();
    println!("method       rot err (deg)   trans err (mm)   fx rel err   fy rel err");
    println!(
        "edge-based   {:>13.4}   {:>14.2}   {:>10.2e}   {:>10.2e}",
        r.edge_based.rot_err_deg,
        r.edge_based.trans_err_mm,
        r.edge_based.intr_rel_err[0],
        r.edge_based.intr_rel_err[1],
    );
    println!(
        "mi           {:>13.4}   {:>14.2}   {:>10.2e}   {:>10.2e}",
        r.mi_baseline.rot_err_deg,
        r.mi_baseline.trans_err_mm,
        r.mi_baseline.intr_rel_err[0],
        r.mi_baseline.intr_rel_err[1],
    );
}
