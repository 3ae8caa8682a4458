use nalgebra::Vector3;

use super::SimError;
use crate::formats::ScanConfig;

/// Non-repetitive rosette scan: polar angle nods at `f1`, azimuth spins at
/// `f2`. The frequency ratio must stay at least 1e-6 away from every rational
/// p/q with p, q <= 50, so the trajectory never retraces itself at sample
/// scale and coverage densifies with integration time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanPattern {
    pub f1: f64,
    pub f2: f64,
    pub cone_half_angle: f64,
    pub rate: f64,
    pub duration: f64,
}

impl ScanPattern {
    pub fn new(
        f1: f64,
        f2: f64,
        cone_half_angle: f64,
        rate: f64,
        duration: f64,
    ) -> Result<Self, SimError> {
        if !(f1 > 0.0 && f2 > 0.0) {
            return Err(SimError::InvalidPattern("frequencies must be positive".into()));
        }
        if !(cone_half_angle > 0.0 && cone_half_angle <= std::f64::consts::PI) {
            return Err(SimError::InvalidPattern("cone_half_angle must be in (0, pi]".into()));
        }
        if rate < 0.0 || duration < 0.0 {
            return Err(SimError::InvalidPattern("rate and duration must be non-negative".into()));
        }
        let ratio = f1 / f2;
        for q in 1..=50u32 {
            let p = (ratio * q as f64).round();
            if (1.0..=50.0).contains(&p) && (ratio - p / q as f64).abs() <= 1e-6 {
                return Err(SimError::InvalidPattern(format!(
                    "f1/f2 = {ratio} is within 1e-6 of {p}/{q}; pattern would repeat"
                )));
            }
        }
        Ok(Self {
            f1,
            f2,
            cone_half_angle,
            rate,
            duration,
        })
    }

    pub fn from_config(cfg: &ScanConfig) -> Result<Self, SimError> {
        Self::new(cfg.f1, cfg.f2, cfg.cone_half_angle, cfg.rate, cfg.duration)
    }

    pub fn sample_count(&self) -> usize {
        (self.rate * self.duration).floor() as usize
    }

    /// Direction at sample time `t`, unit norm, in the sensor frame (+z cone
    /// axis).
    pub fn direction_at(&self, t: f64) -> Vector3<f64> {
        let theta = self.cone_half_angle * (2.0 * std::f64::consts::PI * self.f1 * t).sin().abs();
        let phi = 2.0 * std::f64::consts::PI * self.f2 * t;
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        Vector3::new(st * cp, st * sp, ct)
    }
}

pub fn sample_scan_directions(pat: &ScanPattern) -> Vec<(Vector3<f64>, f64)> {
    let n = pat.sample_count();
    (0..n)
        .map(|i| {
            let t = i as f64 / pat.rate;
            (pat.direction_at(t), t)
        })
        .collect()
}
