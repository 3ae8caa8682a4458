use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

/// Rigid transform: rotates then translates, `p' = R p + t`.
///
/// Houses the camera-LiDAR extrinsic as well as all scan and viewpoint poses.
/// The quaternion is renormalized after every composing operation.
///
/// Serializes as `{"rotation": [w, x, y, z], "translation": [x, y, z]}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "PoseRepr", into = "PoseRepr")]
pub struct Pose {
    rotation: UnitQuaternion<f64>,
    translation: Vector3<f64>,
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation: renormalize_if_drifted(rotation),
            translation,
        }
    }

    /// From raw quaternion components (w, x, y, z); the quaternion is renormalized.
    pub fn from_wxyz_t(w: f64, x: f64, y: f64, z: f64, t: Vector3<f64>) -> Self {
        let q = UnitQuaternion::new_unchecked(nalgebra::Quaternion::new(w, x, y, z));
        Self::new(q, t)
    }

    pub fn rotation(&self) -> UnitQuaternion<f64> {
        self.rotation
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    pub fn translation(&self) -> Vector3<f64> {
        self.translation
    }

    /// `self * other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: renormalize_if_drifted(self.rotation * other.rotation),
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rinv = self.rotation.inverse();
        Pose {
            rotation: rinv,
            translation: -(rinv * self.translation),
        }
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Rotation-only action, for directions.
    pub fn rotate(&self, d: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * d
    }

    /// Angle of the rotation part, radians in [0, pi].
    pub fn rotation_angle(&self) -> f64 {
        self.rotation.angle()
    }
}

/// Renormalize only when the norm has actually drifted, so that storing an
/// already-unit quaternion is bit-stable.
fn renormalize_if_drifted(q: UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    if (q.quaternion().norm() - 1.0).abs() < 1e-12 {
        q
    } else {
        UnitQuaternion::new_normalize(q.into_inner())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseRepr {
    rotation: [f64; 4],
    translation: [f64; 3],
}

impl From<PoseRepr> for Pose {
    fn from(r: PoseRepr) -> Self {
        Pose::from_wxyz_t(
            r.rotation[0],
            r.rotation[1],
            r.rotation[2],
            r.rotation[3],
            Vector3::new(r.translation[0], r.translation[1], r.translation[2]),
        )
    }
}

impl From<Pose> for PoseRepr {
    fn from(p: Pose) -> Self {
        let q = p.rotation.quaternion();
        PoseRepr {
            rotation: [q.w, q.i, q.j, q.k],
            translation: [p.translation.x, p.translation.y, p.translation.z],
        }
    }
}

/// 6-DoF tangent-space increment: rotation part `omega` (radians) and
/// translation part `v` (meters). This is the optimization parameterization
/// of [`Pose`]; updates are right-multiplicative, `T <- T * exp(xi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Twist {
    pub omega: Vector3<f64>,
    pub v: Vector3<f64>,
}

impl Twist {
    pub fn zero() -> Self {
        Self {
            omega: Vector3::zeros(),
            v: Vector3::zeros(),
        }
    }

    pub fn new(omega: Vector3<f64>, v: Vector3<f64>) -> Self {
        Self { omega, v }
    }
}

fn skew(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// SE(3) exponential map.
pub fn se3_exp(xi: &Twist) -> Pose {
    let theta = xi.omega.norm();
    let rotation = UnitQuaternion::from_scaled_axis(xi.omega);
    let wx = skew(&xi.omega);
    // V = I + a*W + b*W^2 with a = (1-cos)/th^2, b = (th-sin)/th^3
    let (a, b) = if theta < 1e-6 {
        let t2 = theta * theta;
        (0.5 - t2 / 24.0, 1.0 / 6.0 - t2 / 120.0)
    } else {
        (
            (1.0 - theta.cos()) / (theta * theta),
            (theta - theta.sin()) / (theta * theta * theta),
        )
    };
    let v_mat = Matrix3::identity() + wx * a + wx * wx * b;
    Pose::new(rotation, v_mat * xi.v)
}

/// SE(3) logarithm; inverse of [`se3_exp`] for rotation angles below pi.
pub fn se3_log(pose: &Pose) -> Twist {
    let omega = pose.rotation.scaled_axis();
    let theta = omega.norm();
    let wx = skew(&omega);
    // V^{-1} = I - W/2 + c*W^2
    let c = if theta < 1e-6 {
        1.0 / 12.0 + theta * theta / 720.0
    } else {
        (1.0 / (theta * theta)) * (1.0 - theta * theta.sin() / (2.0 * (1.0 - theta.cos())))
    };
    let v_inv = Matrix3::identity() - wx * 0.5 + wx * wx * c;
    Twist {
        omega,
        v: v_inv * pose.translation(),
    }
}
