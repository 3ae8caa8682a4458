//! Point-cloud containers and spatial queries.

mod kdtree;

pub use kdtree::KdTree;

use nalgebra::Vector3;
use thiserror::Error;

use crate::geom::Pose;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CloudError {
    #[error("operation requires a non-empty cloud")]
    EmptyCloud,
    #[error("too few points: need at least {needed}, have {have}")]
    TooFewPoints { needed: usize, have: usize },
    #[error("parallel attribute lists have mismatched lengths")]
    LengthMismatch,
    #[error("reflectivity outside [0,1] or non-finite coordinate at index {0}")]
    InvalidAttribute(usize),
}

/// Accumulated LiDAR scan: 3D points with per-return reflectivity in [0,1]
/// and timestamps, plus optional RGB assigned by colorization.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReflectivityCloud {
    pub points: Vec<Vector3<f64>>,
    pub reflectivity: Vec<f64>,
    pub timestamps: Vec<f64>,
    pub colors: Option<Vec<[f64; 3]>>,
}

impl ReflectivityCloud {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Self {
            points: Vec::with_capacity(n),
            reflectivity: Vec::with_capacity(n),
            timestamps: Vec::with_capacity(n),
            colors: None,
        }
    }

    pub fn push(&mut self, p: Vector3<f64>, reflectivity: f64, t: f64) {
        self.points.push(p);
        self.reflectivity.push(reflectivity);
        self.timestamps.push(t);
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn validate(&self) -> Result<(), CloudError> {
        if self.reflectivity.len() != self.points.len()
            || self.timestamps.len() != self.points.len()
            || self.colors.as_ref().is_some_and(|c| c.len() != self.points.len())
        {
            return Err(CloudError::LengthMismatch);
        }
        for (i, (p, r)) in self.points.iter().zip(&self.reflectivity).enumerate() {
            if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite())
                || !(0.0..=1.0).contains(r)
            {
                return Err(CloudError::InvalidAttribute(i));
            }
        }
        Ok(())
    }

    /// Cloud with every point mapped through `pose` (attributes carried over).
    pub fn transformed(&self, pose: &Pose) -> Self {
        Self {
            points: self.points.iter().map(|p| pose.apply(p)).collect(),
            reflectivity: self.reflectivity.clone(),
            timestamps: self.timestamps.clone(),
            colors: self.colors.clone(),
        }
    }

    pub fn extend(&mut self, other: &ReflectivityCloud) {
        self.points.extend_from_slice(&other.points);
        self.reflectivity.extend_from_slice(&other.reflectivity);
        self.timestamps.extend_from_slice(&other.timestamps);
        match (&mut self.colors, &other.colors) {
            (Some(a), Some(b)) => a.extend_from_slice(b),
            (Some(a), None) => a.extend(std::iter::repeat_n([0.0; 3], other.len())),
            (None, Some(b)) => {
                let mut c = vec![[0.0; 3]; self.points.len() - other.len()];
                c.extend_from_slice(b);
                self.colors = Some(c);
            }
            (None, None) => {}
        }
    }
}

pub fn build_kdtree(cloud: &ReflectivityCloud) -> Result<KdTree, CloudError> {
    KdTree::build(&cloud.points)
}

fn voxel_key(p: &Vector3<f64>, voxel: f64) -> (i64, i64, i64) {
    (
        (p.x / voxel).floor() as i64,
        (p.y / voxel).floor() as i64,
        (p.z / voxel).floor() as i64,
    )
}

/// One output point per occupied voxel: centroid position, mean reflectivity,
/// earliest timestamp (and mean color when present). Output order follows the
/// lexicographic order of voxel indices so the result is deterministic.
pub fn voxel_downsample(cloud: &ReflectivityCloud, voxel: f64) -> ReflectivityCloud {
    assert!(voxel > 0.0, "voxel size must be positive");
    struct Accum {
        sum: Vector3<f64>,
        refl: f64,
        t_min: f64,
        color: [f64; 3],
        n: usize,
    }
    let mut cells: std::collections::BTreeMap<(i64, i64, i64), Accum> =
        std::collections::BTreeMap::new();
    for i in 0..cloud.len() {
        let key = voxel_key(&cloud.points[i], voxel);
        let c = cloud.colors.as_ref().map_or([0.0; 3], |c| c[i]);
        let e = cells.entry(key).or_insert(Accum {
            sum: Vector3::zeros(),
            refl: 0.0,
            t_min: f64::INFINITY,
            color: [0.0; 3],
            n: 0,
        });
        e.sum += cloud.points[i];
        e.refl += cloud.reflectivity[i];
        e.t_min = e.t_min.min(cloud.timestamps[i]);
        for k in 0..3 {
            e.color[k] += c[k];
        }
        e.n += 1;
    }
    let mut out = ReflectivityCloud::with_capacity(cells.len());
    let mut colors = Vec::with_capacity(cells.len());
    for acc in cells.values() {
        let n = acc.n as f64;
        out.push(acc.sum / n, acc.refl / n, acc.t_min);
        colors.push([acc.color[0] / n, acc.color[1] / n, acc.color[2] / n]);
    }
    if cloud.colors.is_some() {
        out.colors = Some(colors);
    }
    out
}

/// Per-point unit normals from the smallest-eigenvalue direction of the k-NN
/// covariance. The sign is flipped toward `viewpoint` (sensor origin).
pub fn estimate_normals(
    cloud: &ReflectivityCloud,
    k: usize,
    viewpoint: &Vector3<f64>,
) -> Result<Vec<Vector3<f64>>, CloudError> {
    if k < 3 || cloud.len() < k {
        return Err(CloudError::TooFewPoints {
            needed: k.max(3),
            have: cloud.len(),
        });
    }
    let tree = build_kdtree(cloud)?;
    let normals = cloud
        .points
        .iter()
        .map(|p| {
            let nn = tree.nearest_k(p, k);
            let mut mean = Vector3::zeros();
            for &(idx, _) in &nn {
                mean += cloud.points[idx];
            }
            mean /= nn.len() as f64;
            let mut cov = nalgebra::Matrix3::zeros();
            for &(idx, _) in &nn {
                let d = cloud.points[idx] - mean;
                cov += d * d.transpose();
            }
            let eig = nalgebra::SymmetricEigen::new(cov);
            let mut min_i = 0;
            for i in 1..3 {
                if eig.eigenvalues[i] < eig.eigenvalues[min_i] {
                    min_i = i;
                }
            }
            let mut n: Vector3<f64> = eig.eigenvectors.column(min_i).into();
            n.normalize_mut();
            if n.dot(&(viewpoint - p)) < 0.0 {
                n = -n;
            }
            n
        })
        .collect();
    Ok(normals)
}
