//! One function per subcommand; all return `CliError` for exit-code mapping.

use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use calmap_core::calib::{
    cocalibrate, default_schedule, evaluate_params, CalibProblem, Stage,
};
use calmap_core::calib::build_dt_pyramid;
use calmap_core::edges::{build_spherical_image, detect_image_edges, extract_lidar_edges};
use calmap_core::formats::{
    read_config, read_pgm, read_ply, read_poses, write_json, write_pgm, write_pgm_16, write_ply,
    CalibInitConfig, CalibResultDoc, GrayImage, GroundTruthDoc, RgbImage, SceneConfig,
    StageConfig,
};
use calmap_core::mapping::{
    assemble_coarse_map, colorize, propose_viewpoints, stitch_fine, IcpParams, View,
};
use calmap_core::mi::{mi_calibrate, MiOptions};
use calmap_core::simulate::{render_camera, simulate_lidar, ScanPattern, Scene};
use calmap_core::{Pose, ReflectivityCloud};

use crate::util::{algo, invalid, require_file, write_atomic, CliError};

/// MI baseline result document (`mi_result.json`).
#[derive(Debug, Serialize, Deserialize)]
pub struct MiResultDoc {
    pub extrinsic: Pose,
    pub final_mi_bits: f64,
    pub evaluations: usize,
}

/// Viewpoint proposal document (`viewpoints.json`).
#[derive(Debug, Serialize, Deserialize)]
pub struct ViewpointsDoc {
    pub viewpoints: Vec<Pose>,
}

pub fn simulate(config: &Path, out: &Path, seed: Option<u64>) -> Result<(), CliError> {
    require_file(config)?;
    let mut cfg: SceneConfig = read_config(config).map_err(|e| invalid(config, e))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    std::fs::create_dir_all(out).map_err(|e| invalid(out, e))?;

    let scene = Scene::from_config(&cfg).map_err(algo)?;
    let pattern = ScanPattern::from_config(&cfg.scan).map_err(algo)?;
    let cloud = simulate_lidar(
        &scene,
        &pattern,
        &cfg.lidar_pose,
        cfg.sigma_range,
        cfg.sigma_reflectivity,
        cfg.seed,
    );
    // the camera rides on the rig: p_cam = extrinsic * p_lidar
    let cam_pose = cfg.lidar_pose.compose(&cfg.extrinsic.inverse());
    let image = render_camera(&scene, &cfg.intrinsics, &cam_pose, cfg.supersample);

    write_atomic(&out.join("cloud.ply"), |p| write_ply(p, &cloud))?;
    write_atomic(&out.join("image.pgm"), |p| write_pgm_16(p, &image))?;
    let gt = GroundTruthDoc {
        intrinsics: cfg.intrinsics,
        extrinsic: cfg.extrinsic,
        lidar_pose: cfg.lidar_pose,
    };
    write_atomic(&out.join("gt.json"), |p| write_json(p, &gt))?;
    Ok(())
}

fn read_cloud(path: &Path) -> Result<ReflectivityCloud, CliError> {
    require_file(path)?;
    read_ply(path).map_err(|e| invalid(path, e))
}

fn read_gray(path: &Path) -> Result<GrayImage, CliError> {
    require_file(path)?;
    read_pgm(path).map_err(|e| invalid(path, e))
}

/// Build the chamfer-calibration problem from on-disk artifacts.
pub fn load_problem(
    cloud_path: &Path,
    image_path: &Path,
    init_path: &Path,
) -> Result<(CalibProblem, CalibInitConfig), CliError> {
    let cloud = read_cloud(cloud_path)?;
    let image = read_gray(image_path)?;
    require_file(init_path)?;
    let init: CalibInitConfig = read_config(init_path).map_err(|e| invalid(init_path, e))?;
    init.intrinsics
        .validate()
        .map_err(|e| invalid(init_path, e))?;

    let sph = build_spherical_image(&cloud, init.lidar_edges.n_az, init.lidar_edges.n_el)
        .map_err(algo)?;
    let lidar_edges = extract_lidar_edges(
        &sph,
        init.lidar_edges.g_min,
        init.lidar_edges.depth_rel_max,
        init.lidar_edges.min_count as u32,
    );
    let dt_pyramid = build_dt_pyramid(&image, &init.canny, init.pyramid_levels).map_err(algo)?;
    let schedule = match &init.stages {
        Some(stages) => stages.iter().map(stage_from_config).collect(),
        None => default_schedule(init.pyramid_levels),
    };
    let problem = CalibProblem {
        lidar_edges,
        dt_pyramid,
        init_intr: init.intrinsics,
        init_extr: init.extrinsic,
        schedule,
    };
    Ok((problem, init))
}

fn stage_from_config(cfg: &StageConfig) -> Stage {
    Stage {
        pyramid_level: cfg.pyramid_level,
        free_params: cfg.free_params.clone(),
        max_iters: cfg.max_iters,
        huber_delta: cfg.huber_delta,
    }
}

pub fn calibrate(
    cloud: &Path,
    image: &Path,
    init: &Path,
    out: &Path,
) -> Result<(), CliError> {
    let (problem, _) = load_problem(cloud, image, init)?;
    let result = cocalibrate(&problem).map_err(algo)?;
    let doc = CalibResultDoc {
        intrinsics: result.intr,
        extrinsic: result.extr,
        stages: result.stages,
        inlier_count: result.inlier_count,
        termination: result.termination,
        wall_time_s: result.wall_time_s,
    };
    write_atomic(out, |p| write_json(p, &doc))
}

#[allow(clippy::too_many_arguments)]
pub fn calibrate_mi(
    cloud_path: &Path,
    image_path: &Path,
    init_path: &Path,
    out: &Path,
    stride: usize,
    max_evals: usize,
    bins: usize,
) -> Result<(), CliError> {
    let cloud = read_cloud(cloud_path)?;
    let image = read_gray(image_path)?;
    require_file(init_path)?;
    let init: CalibInitConfig = read_config(init_path).map_err(|e| invalid(init_path, e))?;
    if stride == 0 || bins < 2 {
        return Err(CliError::Validation(
            "--stride must be >= 1 and --bins >= 2".into(),
        ));
    }
    let opts = MiOptions {
        stride,
        max_evals,
        n_bins: bins,
        ..MiOptions::default()
    };
    let result = mi_calibrate(&cloud, &image, &init.intrinsics, &init.extrinsic, &opts)
        .map_err(algo)?;
    let doc = MiResultDoc {
        extrinsic: result.extr,
        final_mi_bits: result.final_mi,
        evaluations: result.evaluations,
    };
    write_atomic(out, |p| write_json(p, &doc))
}

pub fn evaluate(calib: &Path, gt: &Path, out: Option<&Path>) -> Result<(), CliError> {
    require_file(calib)?;
    require_file(gt)?;
    let est: CalibResultDoc = read_config(calib).map_err(|e| invalid(calib, e))?;
    let truth: GroundTruthDoc = read_config(gt).map_err(|e| invalid(gt, e))?;
    let report = evaluate_params(
        &est.intrinsics,
        &est.extrinsic,
        &truth.intrinsics,
        &truth.extrinsic,
        0.0,
    );
    let text = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    println!("{text}");
    if let Some(path) = out {
        write_atomic(path, |p| write_json(p, &report))?;
    }
    Ok(())
}

pub fn edges_debug(
    cloud_path: &Path,
    image_path: &Path,
    init_path: &Path,
    out: &Path,
) -> Result<(), CliError> {
    let cloud = read_cloud(cloud_path)?;
    let image = read_gray(image_path)?;
    require_file(init_path)?;
    let init: CalibInitConfig = read_config(init_path).map_err(|e| invalid(init_path, e))?;
    std::fs::create_dir_all(out).map_err(|e| invalid(out, e))?;

    let edges = detect_image_edges(&image, init.canny.sigma, init.canny.t_low, init.canny.t_high);
    write_atomic(&out.join("image_edges.pgm"), |p| {
        write_pgm(p, &edges.to_image())
    })?;
    let pyramid = build_dt_pyramid(&image, &init.canny, 1).map_err(algo)?;
    let (dt_img, _scale) = pyramid[0].to_image_16();
    write_atomic(&out.join("dt.pgm"), |p| write_pgm_16(p, &dt_img))?;

    let sph = build_spherical_image(&cloud, init.lidar_edges.n_az, init.lidar_edges.n_el)
        .map_err(algo)?;
    write_atomic(&out.join("spherical.pgm"), |p| write_pgm(p, &sph.to_image()))?;
    let lidar_edges = extract_lidar_edges(
        &sph,
        init.lidar_edges.g_min,
        init.lidar_edges.depth_rel_max,
        init.lidar_edges.min_count as u32,
    );
    let mut edge_cloud = ReflectivityCloud::new();
    let max_w = lidar_edges.iter().map(|(_, w)| *w).fold(0.0f64, f64::max);
    for (p, w) in &lidar_edges {
        edge_cloud.push(*p, if max_w > 0.0 { w / max_w } else { 0.0 }, 0.0);
    }
    write_atomic(&out.join("lidar_edges.ply"), |p| write_ply(p, &edge_cloud))?;
    Ok(())
}

pub fn colorize_cmd(
    map_path: &Path,
    image_paths: &[PathBuf],
    poses_path: Option<&Path>,
    calib_path: &Path,
    tol: f64,
    out: &Path,
) -> Result<(), CliError> {
    let map = read_cloud(map_path)?;
    require_file(calib_path)?;
    let calib: CalibResultDoc = read_config(calib_path).map_err(|e| invalid(calib_path, e))?;
    let poses: Vec<Pose> = match poses_path {
        Some(p) => {
            require_file(p)?;
            read_poses(p)
                .map_err(|e| invalid(p, e))?
                .into_iter()
                .map(|r| r.pose)
                .collect()
        }
        None => vec![Pose::identity(); image_paths.len()],
    };
    if poses.len() != image_paths.len() {
        return Err(CliError::Validation(format!(
            "{} images but {} poses",
            image_paths.len(),
            poses.len()
        )));
    }
    let mut images: Vec<RgbImage> = Vec::new();
    for path in image_paths {
        require_file(path)?;
        let is_ppm = path.extension().is_some_and(|e| e == "ppm");
        let img = if is_ppm {
            calmap_core::formats::read_ppm(path).map_err(|e| invalid(path, e))?
        } else {
            gray_to_rgb(&read_pgm(path).map_err(|e| invalid(path, e))?)
        };
        images.push(img);
    }
    let views: Vec<View<'_>> = images
        .iter()
        .zip(&poses)
        .map(|(image, &pose)| View { image, pose })
        .collect();
    let (colored, _mask) = colorize(&map, &views, &calib.intrinsics, &calib.extrinsic, tol);
    write_atomic(out, |p| write_ply(p, &colored))
}

fn gray_to_rgb(g: &GrayImage) -> RgbImage {
    let mut img = RgbImage::new(g.width, g.height);
    for (dst, &v) in img.data.iter_mut().zip(&g.data) {
        *dst = [v, v, v];
    }
    img
}

pub fn assemble(
    scan_paths: &[PathBuf],
    poses_path: &Path,
    voxel: f64,
    out: &Path,
) -> Result<(), CliError> {
    if voxel <= 0.0 {
        return Err(CliError::Validation("--voxel must be positive".into()));
    }
    let mut scans = Vec::new();
    for path in scan_paths {
        scans.push(read_cloud(path)?);
    }
    require_file(poses_path)?;
    let poses = read_poses(poses_path).map_err(|e| invalid(poses_path, e))?;
    let map = assemble_coarse_map(&scans, &poses, voxel).map_err(algo)?;
    write_atomic(out, |p| write_ply(p, &map))
}

/// Per-scan stitch outcome document (`stitch_report.json`).
#[derive(Debug, Serialize, Deserialize)]
pub struct StitchReportDoc {
    pub scans: Vec<ScanReportDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ScanReportDoc {
    pub ok: bool,
    /// Registered pose when ok, otherwise absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pose: Option<Pose>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub rms_history: Vec<f64>,
    pub inlier_fraction: f64,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[allow(clippy::too_many_arguments)]
pub fn stitch(
    coarse_path: &Path,
    fine_paths: &[PathBuf],
    poses_path: &Path,
    fusion_voxel: f64,
    max_corr_dist: f64,
    out: &Path,
    report_out: Option<&Path>,
) -> Result<(), CliError> {
    if fusion_voxel <= 0.0 || max_corr_dist <= 0.0 {
        return Err(CliError::Validation(
            "--fusion-voxel and --max-corr-dist must be positive".into(),
        ));
    }
    let coarse = read_cloud(coarse_path)?;
    let mut fines = Vec::new();
    for path in fine_paths {
        fines.push(read_cloud(path)?);
    }
    require_file(poses_path)?;
    let inits: Vec<Pose> = read_poses(poses_path)
        .map_err(|e| invalid(poses_path, e))?
        .into_iter()
        .map(|r| r.pose)
        .collect();
    let icp = IcpParams {
        max_corr_dist,
        ..IcpParams::default()
    };
    let (merged, reports) =
        stitch_fine(&coarse, &fines, &inits, &icp, fusion_voxel).map_err(algo)?;
    write_atomic(out, |p| write_ply(p, &merged))?;
    if let Some(path) = report_out {
        let doc = StitchReportDoc {
            scans: reports
                .iter()
                .map(|r| match r {
                    Ok(rep) => ScanReportDoc {
                        ok: true,
                        pose: Some(rep.pose),
                        rms_history: rep.rms_history.clone(),
                        inlier_fraction: rep.inlier_fraction,
                        converged: rep.converged,
                        error: None,
                    },
                    Err(e) => ScanReportDoc {
                        ok: false,
                        pose: None,
                        rms_history: Vec::new(),
                        inlier_fraction: 0.0,
                        converged: false,
                        error: Some(e.to_string()),
                    },
                })
                .collect(),
        };
        write_atomic(path, |p| write_json(p, &doc))?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn viewpoints(
    map_path: &Path,
    roi_min: Vector3<f64>,
    roi_max: Vector3<f64>,
    k: usize,
    clearance: f64,
    voxel: f64,
    out: &Path,
) -> Result<(), CliError> {
    let map = read_cloud(map_path)?;
    let poses = propose_viewpoints(&map, &roi_min, &roi_max, k, clearance, voxel).map_err(algo)?;
    let doc = ViewpointsDoc { viewpoints: poses };
    write_atomic(out, |p| write_json(p, &doc))
}
