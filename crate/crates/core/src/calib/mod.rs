//! Staged coarse-to-fine co-calibration: Levenberg–Marquardt on a
//! robustified chamfer objective over the camera intrinsics and the
//! LiDAR-to-camera extrinsic.

mod cost;
mod lm;

pub use cost::{build_dt_pyramid, edge_cost, free_mask, EdgeCost, Params, N_PARAMS};
pub use lm::lm_minimize;

use nalgebra::{DMatrix, Vector3};
use thiserror::Error;

use crate::edges::DistanceField;
use crate::formats::{FreeParam, StageReportDoc};
use crate::geom::{CameraIntrinsics, Pose};

#[derive(Debug, Error)]
pub enum CalibError {
    #[error("no LiDAR edge point projects into the image (initialization grossly wrong)")]
    NoValidProjections,
    #[error("degenerate edge geometry: normal-matrix condition number {0:.3e} exceeds 1e12")]
    DegenerateGeometry(f64),
    #[error("too few LiDAR edge points: {got} (need at least {need})")]
    TooFewEdges { got: usize, need: usize },
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
}

/// Immutable optimization input.
#[derive(Debug, Clone)]
pub struct CalibProblem {
    /// 3D edge points in the LiDAR frame with per-point weights.
    pub lidar_edges: Vec<(Vector3<f64>, f64)>,
    /// Level 0 is full resolution; each level halves the previous one. Edge
    /// maps are re-detected per level rather than downsampled.
    pub dt_pyramid: Vec<DistanceField>,
    pub init_intr: CameraIntrinsics,
    pub init_extr: Pose,
    pub schedule: Vec<Stage>,
}

/// One optimization stage: which pyramid level is sampled and which parameter
/// blocks move.
#[derive(Debug, Clone)]
pub struct Stage {
    pub pyramid_level: usize,
    pub free_params: Vec<FreeParam>,
    pub max_iters: usize,
    /// Huber transition point, in pixels at this stage's level.
    pub huber_delta: f64,
}

#[derive(Debug, Clone)]
pub struct CalibResult {
    pub intr: CameraIntrinsics,
    pub extr: Pose,
    pub stages: Vec<StageReportDoc>,
    /// Valid level-0 projections with distance within the final Huber delta.
    pub inlier_count: usize,
    pub termination: String,
    pub wall_time_s: f64,
}

/// Rotation-first default schedule over `levels` pyramid levels.
pub fn default_schedule(levels: usize) -> Vec<Stage> {
    let coarsest = levels.saturating_sub(1);
    let mid = coarsest / 2;
    let delta_at = |level: usize| 2.0 * (1u32 << level) as f64;
    vec![
        Stage {
            pyramid_level: coarsest,
            free_params: vec![FreeParam::Rot],
            max_iters: 50,
            huber_delta: delta_at(coarsest),
        },
        Stage {
            pyramid_level: mid,
            free_params: vec![FreeParam::Rot, FreeParam::Trans],
            max_iters: 50,
            huber_delta: delta_at(mid),
        },
        Stage {
            pyramid_level: 0,
            free_params: vec![FreeParam::Rot, FreeParam::Trans, FreeParam::Focal, FreeParam::Principal],
            max_iters: 50,
            huber_delta: delta_at(0),
        },
        Stage {
            pyramid_level: 0,
            free_params: vec![
                FreeParam::Rot,
                FreeParam::Trans,
                FreeParam::Focal,
                FreeParam::Principal,
                FreeParam::Distortion,
            ],
            max_iters: 50,
            huber_delta: delta_at(0),
        },
    ]
}

/// Minimum edge count for running the full schedule.
pub const MIN_EDGE_POINTS: usize = 50;

/// Run the staged schedule. Each stage starts from the previous stage's
/// output; before the final stage the full 14x14 normal matrix is checked for
/// a degenerate edge configuration.
pub fn cocalibrate(problem: &CalibProblem) -> Result<CalibResult, CalibError> {
    let start = std::time::Instant::now();
    if problem.dt_pyramid.is_empty() {
        return Err(CalibError::InvalidProblem("empty distance-field pyramid".into()));
    }
    if problem.schedule.is_empty() {
        return Err(CalibError::InvalidProblem("empty stage schedule".into()));
    }
    if problem.lidar_edges.len() < MIN_EDGE_POINTS {
        return Err(CalibError::TooFewEdges {
            got: problem.lidar_edges.len(),
            need: MIN_EDGE_POINTS,
        });
    }
    for stage in &problem.schedule {
        if stage.free_params.is_empty() {
            return Err(CalibError::InvalidProblem("stage with no free parameters".into()));
        }
        if stage.pyramid_level >= problem.dt_pyramid.len() {
            return Err(CalibError::InvalidProblem(format!(
                "stage references pyramid level {} but only {} exist",
                stage.pyramid_level,
                problem.dt_pyramid.len()
            )));
        }
    }

    let mut params = Params {
        intr: problem.init_intr,
        extr: problem.init_extr,
    };
    let mut stages = Vec::with_capacity(problem.schedule.len());
    let last = problem.schedule.len() - 1;
    for (si, stage) in problem.schedule.iter().enumerate() {
        if si == last {
            check_conditioning(problem, &params, stage)?;
        }
        let (next, report) = lm_minimize(problem, stage, params)?;
        // accepted-step monotonicity is a structural invariant of the history
        debug_assert!(report
            .cost_history
            .windows(2)
            .all(|w| w[1] <= w[0]));
        params = next;
        stages.push(report);
    }

    let final_stage = &problem.schedule[last];
    let ec = edge_cost(&params.intr, &params.extr, problem, 0, final_stage.huber_delta)?;
    let inlier_count = problem
        .lidar_edges
        .iter()
        .zip(&ec.residuals)
        .zip(&ec.valid_mask)
        .filter(|((&(_, w), &r), &valid)| valid && r / w <= final_stage.huber_delta)
        .count();

    let termination = stages.last().map(|s| s.termination.clone()).unwrap_or_default();
    Ok(CalibResult {
        intr: params.intr,
        extr: params.extr,
        stages,
        inlier_count,
        termination,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Condition-number gate on the full (unmasked) normal matrix at the final
/// stage's level.
fn check_conditioning(
    problem: &CalibProblem,
    params: &Params,
    stage: &Stage,
) -> Result<(), CalibError> {
    let ec = edge_cost(
        &params.intr,
        &params.extr,
        problem,
        stage.pyramid_level,
        stage.huber_delta,
    )?;
    let jtj: DMatrix<f64> = ec.jacobian.transpose() * &ec.jacobian;
    let svd = jtj.svd(false, false);
    let max = svd.singular_values.max();
    let min = svd.singular_values.min();
    let cond = if min > 0.0 { max / min } else { f64::INFINITY };
    if cond > 1e12 {
        return Err(CalibError::DegenerateGeometry(cond));
    }
    Ok(())
}

/// Calibration accuracy against ground truth, plus the level-0 residual RMSE
/// at the estimated parameters.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalReport {
    pub rot_err_deg: f64,
    pub trans_err_mm: f64,
    /// Relative errors for fx, fy, cx, cy, k1..k4 (absolute where the
    /// ground-truth value is ~0).
    pub intr_rel_err: [f64; 8],
    pub edge_rmse_px: f64,
}

pub fn evaluate_calibration(
    est_intr: &CameraIntrinsics,
    est_extr: &Pose,
    gt_intr: &CameraIntrinsics,
    gt_extr: &Pose,
    problem: &CalibProblem,
) -> EvalReport {
    let rel = problem
        .schedule
        .last()
        .map(|s| s.huber_delta)
        .unwrap_or(2.0);
    let edge_rmse_px = match edge_cost(est_intr, est_extr, problem, 0, rel) {
        Ok(ec) => {
            let n = ec.residuals.len().max(1);
            (ec.residuals.iter().map(|r| r * r).sum::<f64>() / n as f64).sqrt()
        }
        Err(_) => f64::INFINITY,
    };
    evaluate_params(est_intr, est_extr, gt_intr, gt_extr, edge_rmse_px)
}

/// Parameter-space part of the evaluation; usable without a problem in hand.
pub fn evaluate_params(
    est_intr: &CameraIntrinsics,
    est_extr: &Pose,
    gt_intr: &CameraIntrinsics,
    gt_extr: &Pose,
    edge_rmse_px: f64,
) -> EvalReport {
    let rel_delta = est_extr.compose(&gt_extr.inverse());
    let rot_err_deg = rel_delta.rotation_angle().to_degrees();
    let trans_err_mm = (est_extr.translation() - gt_extr.translation()).norm() * 1000.0;
    let pairs = [
        (est_intr.fx, gt_intr.fx),
        (est_intr.fy, gt_intr.fy),
        (est_intr.cx, gt_intr.cx),
        (est_intr.cy, gt_intr.cy),
        (est_intr.k1, gt_intr.k1),
        (est_intr.k2, gt_intr.k2),
        (est_intr.k3, gt_intr.k3),
        (est_intr.k4, gt_intr.k4),
    ];
    let mut intr_rel_err = [0.0; 8];
    for (dst, (e, g)) in intr_rel_err.iter_mut().zip(pairs) {
        *dst = if g.abs() > 1e-9 {
            (e - g).abs() / g.abs()
        } else {
            (e - g).abs()
        };
    }
    EvalReport {
        rot_err_deg,
        trans_err_mm,
        intr_rel_err,
        edge_rmse_px,
    }
}
