use super::{EdgeError, EdgeMap};
use crate::formats::GrayImage;

/// Exact Euclidean distance transform of an edge mask, with a precomputed
/// central-difference gradient field. Both channels are bilinearly
/// interpolable at fractional pixel positions.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    pub width: usize,
    pub height: usize,
    pub d: Vec<f64>,
    /// (d/dx, d/dy) per pixel.
    pub grad: Vec<(f64, f64)>,
    pub d_max: f64,
}

impl DistanceField {
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.d[y * self.width + x]
    }

    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let (x0, y0, x1, y1, fx, fy) = self.bilinear_setup(x, y);
        let v00 = self.d[y0 * self.width + x0];
        let v10 = self.d[y0 * self.width + x1];
        let v01 = self.d[y1 * self.width + x0];
        let v11 = self.d[y1 * self.width + x1];
        v00 * (1.0 - fx) * (1.0 - fy)
            + v10 * fx * (1.0 - fy)
            + v01 * (1.0 - fx) * fy
            + v11 * fx * fy
    }

    /// Bilinearly interpolated central-difference gradient.
    pub fn sample_grad(&self, x: f64, y: f64) -> (f64, f64) {
        let (x0, y0, x1, y1, fx, fy) = self.bilinear_setup(x, y);
        let g00 = self.grad[y0 * self.width + x0];
        let g10 = self.grad[y0 * self.width + x1];
        let g01 = self.grad[y1 * self.width + x0];
        let g11 = self.grad[y1 * self.width + x1];
        let mix = |a: f64, b: f64, c: f64, d: f64| {
            a * (1.0 - fx) * (1.0 - fy) + b * fx * (1.0 - fy) + c * (1.0 - fx) * fy + d * fx * fy
        };
        (
            mix(g00.0, g10.0, g01.0, g11.0),
            mix(g00.1, g10.1, g01.1, g11.1),
        )
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= 0.0 && y >= 0.0 && x <= (self.width - 1) as f64 && y <= (self.height - 1) as f64
    }

    fn bilinear_setup(&self, x: f64, y: f64) -> (usize, usize, usize, usize, f64, f64) {
        let x = x.clamp(0.0, (self.width - 1) as f64);
        let y = y.clamp(0.0, (self.height - 1) as f64);
        let x0 = (x.floor() as usize).min(self.width - 1);
        let y0 = (y.floor() as usize).min(self.height - 1);
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        (x0, y0, x1, y1, x - x0 as f64, y - y0 as f64)
    }

    /// 16-bit visualization; returns the scale (pixels of distance per unit
    /// intensity) for the sidecar.
    pub fn to_image_16(&self) -> (GrayImage, f64) {
        let scale = if self.d_max > 0.0 { self.d_max } else { 1.0 };
        (
            GrayImage::from_data(
                self.width,
                self.height,
                self.d.iter().map(|&v| v / scale).collect(),
            ),
            scale,
        )
    }
}

/// Exact squared-Euclidean transform via the two-pass 1-D lower-envelope
/// method, then square root.
pub fn distance_transform(edges: &EdgeMap) -> Result<DistanceField, EdgeError> {
    let w = edges.width;
    let h = edges.height;
    if !edges.mask.iter().any(|&m| m) {
        return Err(EdgeError::NoEdges);
    }

    const INF: f64 = 1e18;
    let mut f: Vec<f64> = edges.mask.iter().map(|&m| if m { 0.0 } else { INF }).collect();

    // columns
    let mut col = vec![0.0; h];
    let mut out_col = vec![0.0; h];
    for x in 0..w {
        for y in 0..h {
            col[y] = f[y * w + x];
        }
        edt_1d(&col, &mut out_col);
        for y in 0..h {
            f[y * w + x] = out_col[y];
        }
    }
    // rows
    let mut row = vec![0.0; w];
    let mut out_row = vec![0.0; w];
    for y in 0..h {
        row.copy_from_slice(&f[y * w..(y + 1) * w]);
        edt_1d(&row, &mut out_row);
        for x in 0..w {
            f[y * w + x] = out_row[x];
        }
    }

    let d: Vec<f64> = f.iter().map(|&v| v.sqrt()).collect();
    let d_max = d.iter().cloned().fold(0.0, f64::max);

    let mut grad = vec![(0.0, 0.0); w * h];
    for y in 0..h {
        for x in 0..w {
            let gx = match x {
                0 => d[y * w + 1] - d[y * w],
                x if x == w - 1 => d[y * w + x] - d[y * w + x - 1],
                _ => (d[y * w + x + 1] - d[y * w + x - 1]) * 0.5,
            };
            let gy = match y {
                0 => d[w + x] - d[x],
                y if y == h - 1 => d[y * w + x] - d[(y - 1) * w + x],
                _ => (d[(y + 1) * w + x] - d[(y - 1) * w + x]) * 0.5,
            };
            grad[y * w + x] = (gx, gy);
        }
    }

    Ok(DistanceField {
        width: w,
        height: h,
        d,
        grad,
        d_max,
    })
}

/// 1-D squared-distance transform (lower envelope of parabolas).
fn edt_1d(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    if n == 1 {
        out[0] = f[0];
        return;
    }
    let mut v = vec![0usize; n]; // parabola apexes
    let mut z = vec![0.0f64; n + 1]; // envelope boundaries
    let mut k = 0usize;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q - p) as f64);
            if s <= z[k] {
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    k = 0;
    for q in 0..n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let dq = q as f64 - p as f64;
        out[q] = dq * dq + f[p];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn brute_force(edges: &EdgeMap) -> Vec<f64> {
        let w = edges.width;
        let h = edges.height;
        let pts: Vec<(f64, f64)> = (0..w * h)
            .filter(|&i| edges.mask[i])
            .map(|i| ((i % w) as f64, (i / w) as f64))
            .collect();
        (0..w * h)
            .map(|i| {
                let x = (i % w) as f64;
                let y = (i / w) as f64;
                pts.iter()
                    .map(|&(px, py)| ((x - px).powi(2) + (y - py).powi(2)).sqrt())
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    #[test]
    fn single_corner_edge() {
        let mut e = EdgeMap::new(3, 3);
        e.set(0, 0, true);
        let dt = distance_transform(&e).unwrap();
        assert_eq!(dt.get(0, 0), 0.0);
        assert!((dt.get(2, 2) - 2.0 * 2.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn all_edges_all_zero() {
        let mut e = EdgeMap::new(4, 5);
        e.mask.iter_mut().for_each(|m| *m = true);
        let dt = distance_transform(&e).unwrap();
        assert!(dt.d.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn no_edges_rejected() {
        let e = EdgeMap::new(4, 4);
        assert_eq!(distance_transform(&e), Err(EdgeError::NoEdges));
    }

    #[test]
    fn exact_match_to_brute_force() {
        let mut rng = StdRng::seed_from_u64(5);
        for trial in 0..100 {
            let density = 0.01 + 0.49 * (trial as f64 / 99.0);
            let mut e = EdgeMap::new(64, 64);
            for m in e.mask.iter_mut() {
                *m = rng.gen_bool(density);
            }
            if e.count() == 0 {
                e.set(10, 10, true);
            }
            let dt = distance_transform(&e).unwrap();
            let oracle = brute_force(&e);
            for (a, b) in dt.d.iter().zip(&oracle) {
                assert!(
                    (a - b).abs() < 1e-9,
                    "trial {trial}: {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn lipschitz_in_eight_neighborhood() {
        let mut rng = StdRng::seed_from_u64(9);
        let mut e = EdgeMap::new(32, 32);
        for m in e.mask.iter_mut() {
            *m = rng.gen_bool(0.05);
        }
        e.set(3, 3, true);
        let dt = distance_transform(&e).unwrap();
        let limit = 2.0f64.sqrt() + 1e-12;
        for y in 0..31 {
            for x in 0..31 {
                for (dx, dy) in [(1, 0), (0, 1), (1, 1)] {
                    let a = dt.get(x, y);
                    let b = dt.get(x + dx, y + dy);
                    assert!((a - b).abs() <= limit);
                }
            }
        }
    }
}
