use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{CalibError, CalibProblem};
use crate::edges::{detect_image_edges, distance_transform, DistanceField};
use crate::formats::{CannyConfig, FreeParam, GrayImage};
use crate::geom::{project, project_jacobian, se3_exp, CameraIntrinsics, Pose, Twist};

/// Parameter vector layout: [omega(3), v(3), fx, fy, cx, cy, k1..k4].
pub const N_PARAMS: usize = 14;

/// Current optimization state.
#[derive(Debug, Clone)]
pub struct Params {
    pub intr: CameraIntrinsics,
    pub extr: Pose,
}

impl Params {
    /// Apply a full 14-dimensional increment: the extrinsic moves
    /// right-multiplicatively by the twist in the first six entries, the
    /// intrinsics additively. Fails if the stepped intrinsics are invalid
    /// (e.g. non-monotonic distortion), which the optimizer treats as a
    /// rejected step.
    pub fn apply_step(&self, delta: &[f64; N_PARAMS]) -> Result<Params, crate::geom::GeomError> {
        let xi = Twist::new(
            nalgebra::Vector3::new(delta[0], delta[1], delta[2]),
            nalgebra::Vector3::new(delta[3], delta[4], delta[5]),
        );
        let extr = self.extr.compose(&se3_exp(&xi));
        let mut intr = self.intr;
        intr.fx += delta[6];
        intr.fy += delta[7];
        intr.cx += delta[8];
        intr.cy += delta[9];
        intr.k1 += delta[10];
        intr.k2 += delta[11];
        intr.k3 += delta[12];
        intr.k4 += delta[13];
        intr.validate()?;
        Ok(Params { intr, extr })
    }
}

/// Column mask for a stage's free parameter blocks.
pub fn free_mask(free: &[FreeParam]) -> [bool; N_PARAMS] {
    let mut mask = [false; N_PARAMS];
    for f in free {
        let range = match f {
            FreeParam::Rot => 0..3,
            FreeParam::Trans => 3..6,
            FreeParam::Focal => 6..8,
            FreeParam::Principal => 8..10,
            FreeParam::Distortion => 10..14,
        };
        for i in range {
            mask[i] = true;
        }
    }
    mask
}

/// Robust loss: 0.5 r^2 inside delta, delta * (|r| - delta/2) outside.
pub fn huber(r: f64, delta: f64) -> f64 {
    let a = r.abs();
    if a <= delta {
        0.5 * r * r
    } else {
        delta * (a - 0.5 * delta)
    }
}

/// Evaluation of the chamfer objective at one pyramid level.
#[derive(Debug, Clone)]
pub struct EdgeCost {
    /// Sum of per-point weights times the Huber loss of the sampled distance.
    pub cost: f64,
    /// residual_i = w_i * D(pi(T p_i)); invalid projections carry w_i * d_max.
    pub residuals: Vec<f64>,
    /// Jacobian of the residual vector; zero rows for invalid projections.
    pub jacobian: DMatrix<f64>,
    pub valid_mask: Vec<bool>,
    pub valid: usize,
}

/// Chamfer cost, residuals, and analytic Jacobian at `level`.
///
/// Projections that leave the camera's valid domain or the field contribute
/// the constant penalty `d_max` with a zero Jacobian row, keeping the cost
/// bounded without destabilizing the solve.
pub fn edge_cost(
    intr: &CameraIntrinsics,
    extr: &Pose,
    problem: &CalibProblem,
    level: usize,
    huber_delta: f64,
) -> Result<EdgeCost, CalibError> {
    let field = &problem.dt_pyramid[level];
    // level-L pixel centers sit at s*u0 - 0.5*(1 - s) in level-0 coordinates
    let s = 0.5f64.powi(level as i32);
    let off = 0.5 * (1.0 - s);

    struct Row {
        residual: f64,
        jac: [f64; N_PARAMS],
        valid: bool,
        cost: f64,
    }

    let rows: Vec<Row> = problem
        .lidar_edges
        .par_iter()
        .map(|&(p, w)| {
            let p_cam = extr.apply(&p);
            let (px, valid) = project(intr, &p_cam);
            let ul = (px.x * s - off, px.y * s - off);
            if valid && field.contains(ul.0, ul.1) {
                let d = field.sample(ul.0, ul.1);
                let (gx, gy) = field.sample_grad(ul.0, ul.1);
                let jp = project_jacobian(intr, extr, &p).expect("projection validated above");
                let mut jac = [0.0; N_PARAMS];
                for c in 0..N_PARAMS {
                    jac[c] = w * s * (gx * jp[(0, c)] + gy * jp[(1, c)]);
                }
                Row {
                    residual: w * d,
                    jac,
                    valid: true,
                    cost: w * huber(d, huber_delta),
                }
            } else {
                Row {
                    residual: w * field.d_max,
                    jac: [0.0; N_PARAMS],
                    valid: false,
                    cost: w * huber(field.d_max, huber_delta),
                }
            }
        })
        .collect();

    let valid = rows.iter().filter(|r| r.valid).count();
    if valid == 0 {
        return Err(CalibError::NoValidProjections);
    }

    let n = rows.len();
    let mut residuals = Vec::with_capacity(n);
    let mut valid_mask = Vec::with_capacity(n);
    let mut jacobian = DMatrix::zeros(n, N_PARAMS);
    let mut cost = 0.0;
    // fixed index-order reduction keeps the sum independent of thread count
    for (i, row) in rows.iter().enumerate() {
        residuals.push(row.residual);
        valid_mask.push(row.valid);
        for c in 0..N_PARAMS {
            jacobian[(i, c)] = row.jac[c];
        }
        cost += row.cost;
    }

    Ok(EdgeCost {
        cost,
        residuals,
        jacobian,
        valid_mask,
        valid,
    })
}

/// Build the distance-field pyramid: edges are re-detected on each
/// half-resolution image rather than downsampled from level 0.
pub fn build_dt_pyramid(
    image: &GrayImage,
    canny: &CannyConfig,
    levels: usize,
) -> Result<Vec<DistanceField>, crate::edges::EdgeError> {
    let mut pyramid = Vec::with_capacity(levels.max(1));
    let mut img = image.clone();
    for level in 0..levels.max(1) {
        if level > 0 {
            img = img.half_size();
        }
        let edges = detect_image_edges(&img, canny.sigma, canny.t_low, canny.t_high);
        pyramid.push(distance_transform(&edges)?);
    }
    Ok(pyramid)
}
