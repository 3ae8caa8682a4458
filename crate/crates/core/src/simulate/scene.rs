use nalgebra::Vector3;

use super::SimError;
use crate::formats::SceneConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatternKind {
    Checker,
    Stripe,
}

/// Planar albedo pattern applied to every room face in face-local (u, v)
/// coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallPattern {
    pub kind: PatternKind,
    pub cell: f64,
    pub albedo_low: f64,
    pub albedo_high: f64,
}

impl WallPattern {
    pub fn albedo_at(&self, u: f64, v: f64) -> f64 {
        let iu = (u / self.cell).floor() as i64;
        let iv = (v / self.cell).floor() as i64;
        let parity = match self.kind {
            PatternKind::Checker => (iu + iv).rem_euclid(2),
            PatternKind::Stripe => iu.rem_euclid(2),
        };
        if parity == 0 {
            self.albedo_low
        } else {
            self.albedo_high
        }
    }
}

/// Uniform-albedo interior occluder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneBox {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
    pub albedo: f64,
}

/// Axis-aligned box room with patterned walls, viewed from inside.
///
/// Faces are indexed `x-, x+, y-, y+, z-, z+` (0..6); `face_gains` is the
/// per-face image brightness multiplier seen only by the camera renderer.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub room_min: Vector3<f64>,
    pub room_max: Vector3<f64>,
    pub pattern: WallPattern,
    pub boxes: Vec<SceneBox>,
    pub face_gains: [f64; 6],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub range: f64,
    pub albedo: f64,
    /// Brightness gain of the surface (1.0 for interior boxes and Lambertian
    /// walls); the renderer multiplies intensity by this.
    pub gain: f64,
}

impl Scene {
    pub fn from_config(cfg: &SceneConfig) -> Result<Self, SimError> {
        let kind = match cfg.pattern.as_str() {
            "checker" => PatternKind::Checker,
            "stripe" => PatternKind::Stripe,
            other => return Err(SimError::InvalidScene(format!("unknown pattern '{other}'"))),
        };
        let scene = Scene {
            room_min: Vector3::from(cfg.room_min),
            room_max: Vector3::from(cfg.room_max),
            pattern: WallPattern {
                kind,
                cell: cfg.cell,
                albedo_low: cfg.albedo_low,
                albedo_high: cfg.albedo_high,
            },
            boxes: cfg
                .boxes
                .iter()
                .map(|b| SceneBox {
                    min: Vector3::from(b.min),
                    max: Vector3::from(b.max),
                    albedo: b.albedo,
                })
                .collect(),
            face_gains: cfg.face_gains,
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        for a in 0..3 {
            if !(self.room_max[a] > self.room_min[a]) {
                return Err(SimError::InvalidScene("non-positive room extent".into()));
            }
        }
        let albedos_ok = [self.pattern.albedo_low, self.pattern.albedo_high]
            .iter()
            .chain(self.boxes.iter().map(|b| &b.albedo))
            .all(|a| (0.0..=1.0).contains(a));
        if !albedos_ok {
            return Err(SimError::InvalidScene("albedo outside [0,1]".into()));
        }
        if self.pattern.cell <= 0.0 {
            return Err(SimError::InvalidScene("non-positive pattern cell".into()));
        }
        Ok(())
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|a| p[a] > self.room_min[a] && p[a] < self.room_max[a])
    }

    pub fn center(&self) -> Vector3<f64> {
        (self.room_min + self.room_max) * 0.5
    }

    /// Face-local coordinates of a point lying on face `face`.
    fn face_uv(&self, face: usize, p: &Vector3<f64>) -> (f64, f64) {
        match face / 2 {
            0 => (p.y, p.z),
            1 => (p.x, p.z),
            _ => (p.x, p.y),
        }
    }

    /// Nearest intersection along `dir` from `origin` (inside the room).
    pub fn raycast(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<Hit> {
        const T_EPS: f64 = 1e-9;
        let mut best: Option<(f64, f64, f64)> = None; // (t, albedo, gain)

        for face in 0..6 {
            let axis = face / 2;
            let plane = if face % 2 == 0 {
                self.room_min[axis]
            } else {
                self.room_max[axis]
            };
            if dir[axis].abs() < 1e-15 {
                continue;
            }
            let t = (plane - origin[axis]) / dir[axis];
            if t <= T_EPS {
                continue;
            }
            let p = origin + dir * t;
            // inside the face rectangle (other two axes within room bounds)
            let inside = (0..3).filter(|&a| a != axis).all(|a| {
                p[a] >= self.room_min[a] - 1e-9 && p[a] <= self.room_max[a] + 1e-9
            });
            if !inside {
                continue;
            }
            if best.is_none_or(|(bt, _, _)| t < bt) {
                let (u, v) = self.face_uv(face, &p);
                best = Some((t, self.pattern.albedo_at(u, v), self.face_gains[face]));
            }
        }

        for b in &self.boxes {
            if let Some(t) = ray_aabb(origin, dir, &b.min, &b.max) {
                if t > T_EPS && best.is_none_or(|(bt, _, _)| t < bt) {
                    best = Some((t, b.albedo, 1.0));
                }
            }
        }

        best.map(|(t, albedo, gain)| Hit {
            range: t,
            albedo,
            gain,
        })
    }
}

/// Entry parameter of a ray against an AABB, from outside; None when the ray
/// misses or starts inside.
fn ray_aabb(
    origin: &Vector3<f64>,
    dir: &Vector3<f64>,
    min: &Vector3<f64>,
    max: &Vector3<f64>,
) -> Option<f64> {
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    for a in 0..3 {
        if dir[a].abs() < 1e-15 {
            if origin[a] < min[a] || origin[a] > max[a] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / dir[a];
        let (t0, t1) = {
            let ta = (min[a] - origin[a]) * inv;
            let tb = (max[a] - origin[a]) * inv;
            if ta <= tb {
                (ta, tb)
            } else {
                (tb, ta)
            }
        };
        t_near = t_near.max(t0);
        t_far = t_far.min(t1);
        if t_near > t_far {
            return None;
        }
    }
    (t_near > 0.0).then_some(t_near)
}
