use nalgebra::{Matrix3, SMatrix, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::{GeomError, Pose};

/// Equidistant-polynomial fisheye intrinsics (Kannala-Brandt form).
///
/// The mapped radius is `d(theta) = theta + k1 th^3 + k2 th^5 + k3 th^7 + k4 th^9`
/// with `theta` the incidence angle off the optical axis. Supports FoV beyond
/// 180 degrees. `d` must be strictly increasing on `[0, theta_max]`; this is
/// checked at construction by sampling in 1e-3 rad steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    pub width: u32,
    pub height: u32,
    pub theta_max: f64,
}

impl CameraIntrinsics {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        k: [f64; 4],
        width: u32,
        height: u32,
        theta_max: f64,
    ) -> Result<Self, GeomError> {
        let intr = Self {
            fx,
            fy,
            cx,
            cy,
            k1: k[0],
            k2: k[1],
            k3: k[2],
            k4: k[3],
            width,
            height,
            theta_max,
        };
        intr.validate()?;
        Ok(intr)
    }

    pub fn validate(&self) -> Result<(), GeomError> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(GeomError::InvalidIntrinsics("fx and fy must be positive".into()));
        }
        if !(self.theta_max > 0.0 && self.theta_max <= std::f64::consts::PI) {
            return Err(GeomError::InvalidIntrinsics(
                "theta_max must be in (0, pi]".into(),
            ));
        }
        // d(theta) strictly increasing, sampled at 1e-3 rad
        let mut theta = 0.0;
        let mut prev = self.distort(0.0);
        while theta < self.theta_max {
            theta = (theta + 1e-3).min(self.theta_max);
            let d = self.distort(theta);
            if d <= prev {
                return Err(GeomError::InvalidIntrinsics(format!(
                    "distortion polynomial not increasing near theta = {theta:.4}"
                )));
            }
            prev = d;
        }
        Ok(())
    }

    /// `d(theta)`.
    pub fn distort(&self, theta: f64) -> f64 {
        let t2 = theta * theta;
        theta * (1.0 + t2 * (self.k1 + t2 * (self.k2 + t2 * (self.k3 + t2 * self.k4))))
    }

    /// `d'(theta)`.
    pub fn distort_deriv(&self, theta: f64) -> f64 {
        let t2 = theta * theta;
        1.0 + t2 * (3.0 * self.k1 + t2 * (5.0 * self.k2 + t2 * (7.0 * self.k3 + t2 * 9.0 * self.k4)))
    }

    pub fn contains(&self, px: &Vector2<f64>) -> bool {
        px.x >= 0.0 && px.y >= 0.0 && px.x < self.width as f64 && px.y < self.height as f64
    }
}

/// Project a camera-frame point. The flag is false when the point is outside
/// the FoV cone or lands off the image; the pixel is still returned so callers
/// can reason about near-boundary behavior.
pub fn project(intr: &CameraIntrinsics, p_cam: &Vector3<f64>) -> (Vector2<f64>, bool) {
    let rho = p_cam.x.hypot(p_cam.y);
    let theta = rho.atan2(p_cam.z);
    if rho < 1e-12 {
        // On the optical axis (or its antipode).
        let px = Vector2::new(intr.cx, intr.cy);
        let valid = theta <= intr.theta_max && intr.contains(&px);
        return (px, valid);
    }
    let d = intr.distort(theta);
    let px = Vector2::new(
        intr.fx * d * (p_cam.x / rho) + intr.cx,
        intr.fy * d * (p_cam.y / rho) + intr.cy,
    );
    let valid = theta <= intr.theta_max && intr.contains(&px);
    (px, valid)
}

/// Invert the projection: pixel to unit direction in the camera frame.
///
/// Newton iteration on `d(theta) = r`, at most 20 iterations, tolerance 1e-12.
pub fn unproject(intr: &CameraIntrinsics, px: &Vector2<f64>) -> Result<Vector3<f64>, GeomError> {
    let mx = (px.x - intr.cx) / intr.fx;
    let my = (px.y - intr.cy) / intr.fy;
    let r = mx.hypot(my);
    if r < 1e-14 {
        return Ok(Vector3::new(0.0, 0.0, 1.0));
    }
    let mut theta = r.min(intr.theta_max);
    let mut converged = false;
    for _ in 0..20 {
        let f = intr.distort(theta) - r;
        let fp = intr.distort_deriv(theta);
        let step = f / fp;
        theta -= step;
        if step.abs() < 1e-12 {
            converged = true;
            break;
        }
    }
    if !converged || !theta.is_finite() || theta < 0.0 || theta > intr.theta_max + 1e-9 {
        return Err(GeomError::NoConvergence);
    }
    let (sp, cp) = (my / r, mx / r);
    let (st, ct) = theta.sin_cos();
    Ok(Vector3::new(st * cp, st * sp, ct))
}

/// Jacobian of the projected pixel with respect to the 14-vector
/// `[omega(3), v(3), fx, fy, cx, cy, k1, k2, k3, k4]`, where `(omega, v)` is a
/// right-multiplicative twist increment on the extrinsic: the projection is
/// `pi(intr, T * exp(xi) * p_lidar)` evaluated at `xi = 0`.
pub fn project_jacobian(
    intr: &CameraIntrinsics,
    extr: &Pose,
    p_lidar: &Vector3<f64>,
) -> Result<SMatrix<f64, 2, 14>, GeomError> {
    let p_cam = extr.apply(p_lidar);
    let (_, valid) = project(intr, &p_cam);
    if !valid {
        return Err(GeomError::InvalidPoint);
    }

    let (x, y, z) = (p_cam.x, p_cam.y, p_cam.z);
    let rho2 = x * x + y * y;
    let rho = rho2.sqrt();
    let n2 = rho2 + z * z;
    let theta = rho.atan2(z);
    let d = intr.distort(theta);
    let dp = intr.distort_deriv(theta);

    // d pixel / d p_cam
    let dpx_dp: nalgebra::Matrix2x3<f64> = if rho < 1e-9 {
        // axis limit: u ~ fx * x / z
        nalgebra::Matrix2x3::new(intr.fx / z, 0.0, 0.0, 0.0, intr.fy / z, 0.0)
    } else {
        let dth = Vector3::new(z * x / (rho * n2), z * y / (rho * n2), -rho / n2);
        // unit direction in the image plane and its derivative
        let (cx_d, cy_d) = (x / rho, y / rho);
        let dcx = Vector3::new(y * y / (rho2 * rho), -x * y / (rho2 * rho), 0.0);
        let dcy = Vector3::new(-x * y / (rho2 * rho), x * x / (rho2 * rho), 0.0);
        let du = (dth * (dp * cx_d) + dcx * d) * intr.fx;
        let dv = (dth * (dp * cy_d) + dcy * d) * intr.fy;
        nalgebra::Matrix2x3::new(du.x, du.y, du.z, dv.x, dv.y, dv.z)
    };

    // d p_cam / d xi for T * exp(xi) * p: [-R [p]x | R]
    let r_mat = extr.rotation_matrix();
    let px_skew = Matrix3::new(
        0.0, -p_lidar.z, p_lidar.y, p_lidar.z, 0.0, -p_lidar.x, -p_lidar.y, p_lidar.x, 0.0,
    );
    let dp_domega = -r_mat * px_skew;
    let dp_dv = r_mat;

    let mut jac = SMatrix::<f64, 2, 14>::zeros();
    jac.fixed_view_mut::<2, 3>(0, 0).copy_from(&(dpx_dp * dp_domega));
    jac.fixed_view_mut::<2, 3>(0, 3).copy_from(&(dpx_dp * dp_dv));

    let (cx_d, cy_d) = if rho < 1e-9 { (0.0, 0.0) } else { (x / rho, y / rho) };
    // fx, fy
    jac[(0, 6)] = d * cx_d;
    jac[(1, 7)] = d * cy_d;
    // cx, cy
    jac[(0, 8)] = 1.0;
    jac[(1, 9)] = 1.0;
    // k1..k4
    let mut tp = theta * theta * theta;
    for i in 0..4 {
        jac[(0, 10 + i)] = intr.fx * tp * cx_d;
        jac[(1, 10 + i)] = intr.fy * tp * cy_d;
        tp *= theta * theta;
    }
    Ok(jac)
}
