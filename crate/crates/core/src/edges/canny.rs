use crate::formats::GrayImage;

/// Binary edge mask aligned with its source image.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeMap {
    pub width: usize,
    pub height: usize,
    pub mask: Vec<bool>,
}

impl EdgeMap {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            mask: vec![false; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.mask[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.mask[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// 0/255 visualization image.
    pub fn to_image(&self) -> GrayImage {
        GrayImage::from_data(
            self.width,
            self.height,
            self.mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect(),
        )
    }
}

/// Canny-style edge detector.
///
/// Gaussian blur (kernel truncated at 3 sigma), Sobel gradients, non-maximum
/// suppression along the quantized gradient direction (8 sectors), hysteresis
/// from strong seeds through weak 8-connected pixels. `t_low` and `t_high`
/// are fractions of the maximum gradient magnitude.
pub fn detect_image_edges(img: &GrayImage, sigma: f64, t_low: f64, t_high: f64) -> EdgeMap {
    assert!(t_low < t_high, "t_low must be below t_high");
    assert!(sigma >= 0.0);
    let w = img.width;
    let h = img.height;
    let mut edges = EdgeMap::new(w, h);
    if w < 3 || h < 3 {
        return edges;
    }

    let blurred = if sigma > 0.0 {
        gaussian_blur(img, sigma)
    } else {
        img.clone()
    };

    let (gx, gy) = sobel(&blurred);
    let mag: Vec<f64> = gx
        .iter()
        .zip(&gy)
        .map(|(a, b)| (a * a + b * b).sqrt())
        .collect();
    let max_mag = mag.iter().cloned().fold(0.0, f64::max);
    if max_mag <= 0.0 {
        return edges;
    }
    let lo = t_low * max_mag;
    let hi = t_high * max_mag;

    // Non-maximum suppression: keep pixels at least as large as both
    // neighbors along the gradient direction, so symmetric two-column steps
    // survive.
    let sector_offsets = |gx: f64, gy: f64| -> (isize, isize) {
        let angle = gy.atan2(gx);
        let sector = ((angle / std::f64::consts::FRAC_PI_4).round() as i64).rem_euclid(8) as usize;
        // dx, dy along the gradient for each of the 8 sectors
        const OFF: [(isize, isize); 8] = [
            (1, 0),
            (1, 1),
            (0, 1),
            (-1, 1),
            (-1, 0),
            (-1, -1),
            (0, -1),
            (1, -1),
        ];
        OFF[sector]
    };

    let mut nms = vec![false; w * h];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let i = y * w + x;
            let m = mag[i];
            if m < lo {
                continue;
            }
            let (dx, dy) = sector_offsets(gx[i], gy[i]);
            let fwd = mag[(y as isize + dy) as usize * w + (x as isize + dx) as usize];
            let bwd = mag[(y as isize - dy) as usize * w + (x as isize - dx) as usize];
            if m >= fwd && m >= bwd {
                nms[i] = true;
            }
        }
    }

    // Hysteresis: flood from strong pixels through weak NMS survivors.
    let mut stack: Vec<usize> = (0..w * h).filter(|&i| nms[i] && mag[i] >= hi).collect();
    let mut visited = vec![false; w * h];
    for &i in &stack {
        visited[i] = true;
    }
    while let Some(i) = stack.pop() {
        edges.mask[i] = true;
        let x = (i % w) as isize;
        let y = (i / w) as isize;
        for dy in -1..=1isize {
            for dx in -1..=1isize {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let nx = x + dx;
                let ny = y + dy;
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if !visited[j] && nms[j] {
                    visited[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    edges
}

fn gaussian_blur(img: &GrayImage, sigma: f64) -> GrayImage {
    let radius = (3.0 * sigma).ceil() as isize;
    let mut kernel = Vec::with_capacity((2 * radius + 1) as usize);
    for i in -radius..=radius {
        kernel.push((-0.5 * (i as f64 / sigma).powi(2)).exp());
    }
    let norm: f64 = kernel.iter().sum();
    for k in &mut kernel {
        *k /= norm;
    }

    let w = img.width as isize;
    let h = img.height as isize;
    let clamp_x = |x: isize| x.clamp(0, w - 1) as usize;
    let clamp_y = |y: isize| y.clamp(0, h - 1) as usize;

    let mut tmp = GrayImage::new(img.width, img.height);
    for y in 0..img.height {
        for x in 0..w {
            let mut s = 0.0;
            for (ki, k) in kernel.iter().enumerate() {
                s += k * img.get(clamp_x(x + ki as isize - radius), y);
            }
            tmp.set(x as usize, y, s);
        }
    }
    let mut out = GrayImage::new(img.width, img.height);
    for y in 0..h {
        for x in 0..img.width {
            let mut s = 0.0;
            for (ki, k) in kernel.iter().enumerate() {
                s += k * tmp.get(x, clamp_y(y + ki as isize - radius));
            }
            out.set(x, y as usize, s);
        }
    }
    out
}

/// Sobel gradients; border pixels get zero gradient.
pub(crate) fn sobel(img: &GrayImage) -> (Vec<f64>, Vec<f64>) {
    let w = img.width;
    let h = img.height;
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let p = |dx: isize, dy: isize| {
                img.get((x as isize + dx) as usize, (y as isize + dy) as usize)
            };
            gx[y * w + x] = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1))
                - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
            gy[y * w + x] = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1))
                - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
        }
    }
    (gx, gy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn constant_image_has_no_edges() {
        let img = GrayImage::from_data(32, 32, vec![0.7; 32 * 32]);
        let edges = detect_image_edges(&img, 1.4, 0.04, 0.10);
        assert_eq!(edges.count(), 0);
    }

    #[test]
    fn vertical_step_confined_to_adjacent_columns() {
        let w = 32;
        let h = 16;
        let step = 16;
        let data: Vec<f64> = (0..w * h)
            .map(|i| if i % w < step { 0.0 } else { 1.0 })
            .collect();
        let img = GrayImage::from_data(w, h, data);
        let edges = detect_image_edges(&img, 0.0, 0.04, 0.10);
        for y in 0..h {
            let mut row_marked = false;
            for x in 0..w {
                if edges.get(x, y) {
                    assert!(
                        x == step - 1 || x == step,
                        "edge at ({x},{y}) outside step columns"
                    );
                    row_marked = true;
                }
            }
            if y > 0 && y < h - 1 {
                assert!(row_marked, "row {y} has no edge pixel");
            }
        }
    }

    #[test]
    fn edges_are_subset_of_low_threshold_sobel() {
        let mut rng = StdRng::seed_from_u64(77);
        for _ in 0..10 {
            let w = 48;
            let h = 40;
            let data: Vec<f64> = (0..w * h).map(|_| rng.gen_range(0.0..1.0)).collect();
            let img = GrayImage::from_data(w, h, data);
            let t_low = 0.2;
            let edges = detect_image_edges(&img, 0.0, t_low, 0.5);
            let (gx, gy) = sobel(&img);
            let mag: Vec<f64> = gx.iter().zip(&gy).map(|(a, b)| a.hypot(*b)).collect();
            let max_mag = mag.iter().cloned().fold(0.0, f64::max);
            for i in 0..w * h {
                if edges.mask[i] {
                    assert!(mag[i] >= t_low * max_mag);
                }
            }
        }
    }

    #[test]
    fn invariant_under_constant_offset() {
        let mut rng = StdRng::seed_from_u64(3);
        let w = 40;
        let h = 40;
        let data: Vec<f64> = (0..w * h).map(|_| rng.gen_range(0.0..0.5)).collect();
        let shifted: Vec<f64> = data.iter().map(|v| v + 0.4).collect();
        let a = detect_image_edges(&GrayImage::from_data(w, h, data), 1.0, 0.1, 0.3);
        let b = detect_image_edges(&GrayImage::from_data(w, h, shifted), 1.0, 0.1, 0.3);
        assert_eq!(a, b);
    }
}
