//! Gaussian-blurred fixation densities over pixels.

use super::calibration::GazePoint;
use crate::error::{Error, Result};

/// Kernel support along each principal axis, in standard deviations.
pub const TRUNCATION_SIGMAS: f64 = 6.0;
/// Added to the covariance diagonal (px²) when it is not positive definite.
pub const SINGULAR_REGULARIZATION: f64 = 0.25;

/// Calibrated fixations for one UI seen during one session.
#[derive(Debug, Clone, PartialEq)]
pub struct FixationSet {
    pub ui_id: String,
    pub points: Vec<GazePoint>,
    pub covariance: [[f64; 2]; 2],
}

/// Nonnegative density over a `width × height` raster, row-major, sums to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelSaliencyMap {
    pub width: usize,
    pub height: usize,
    pub density: Vec<f64>,
}

impl PixelSaliencyMap {
    pub fn new(width: usize, height: usize, density: Vec<f64>) -> Result<Self> {
        if density.len() != width * height {
            return Err(Error::Shape(format!(
                "{}x{} map needs {} values, got {}",
                width,
                height,
                width * height,
                density.len()
            )));
        }
        Ok(Self { width, height, density })
    }

    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.density[y * self.width + x]
    }

    pub fn total(&self) -> f64 {
        self.density.iter().sum()
    }

    pub fn argmax(&self) -> (usize, usize) {
        let (i, _) =
            self.density.iter().enumerate().fold(
                (0, f64::NEG_INFINITY),
                |best, (i, &v)| if v > best.1 { (i, v) } else { best },
            );
        (i % self.width, i / self.width)
    }

    /// Grayscale 16-bit PNG scaled so the peak density is white.
    pub fn save_png16(&self, path: &std::path::Path) -> Result<()> {
        let peak = self.density.iter().copied().fold(0.0f64, f64::max);
        let scale = if peak > 0.0 { 65535.0 / peak } else { 0.0 };
        let raw: Vec<u16> = self.density.iter().map(|v| (v * scale).round() as u16).collect();
        let img = image::ImageBuffer::<image::Luma<u16>, _>::from_raw(self.width as u32, self.height as u32, raw)
            .expect("buffer length matches dimensions");
        img.save_with_format(path, image::ImageFormat::Png)
            .map_err(|source| Error::Image {
                path: path.to_path_buf(),
                source,
            })
    }

    fn normalize(&mut self) -> Result<()> {
        let total = self.total();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::Numeric(format!("saliency map mass {total}")));
        }
        self.density.iter_mut().for_each(|v| *v /= total);
        Ok(())
    }
}

/// Eigen-decomposition of a symmetric 2×2 matrix: `(values, unit vectors)`.
fn sym_eigen(c: [[f64; 2]; 2]) -> ([f64; 2], [[f64; 2]; 2]) {
    let (a, b, d) = (c[0][0], 0.5 * (c[0][1] + c[1][0]), c[1][1]);
    let mean = 0.5 * (a + d);
    let r = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    let (l1, l2) = (mean + r, mean - r);
    let v1 = if b.abs() > 1e-300 {
        let (x, y) = (l1 - d, b);
        let n = (x * x + y * y).sqrt();
        [x / n, y / n]
    } else if a >= d {
        [1.0, 0.0]
    } else {
        [0.0, 1.0]
    };
    ([l1, l2], [v1, [-v1[1], v1[0]]])
}

/// Covariance used for blurring, regularised when not positive definite.
pub fn effective_covariance(c: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let sym = [
        [c[0][0], 0.5 * (c[0][1] + c[1][0])],
        [0.5 * (c[0][1] + c[1][0]), c[1][1]],
    ];
    let (vals, _) = sym_eigen(sym);
    if vals[1] > 1e-12 && vals.iter().all(|v| v.is_finite()) {
        sym
    } else {
        [
            [sym[0][0] + SINGULAR_REGULARIZATION, sym[0][1]],
            [sym[1][0], sym[1][1] + SINGULAR_REGULARIZATION],
        ]
    }
}

/// Precomputed Gaussian kernel geometry.
struct Kernel {
    inv: [[f64; 2]; 2],
    axes: [[f64; 2]; 2],
    limits: [f64; 2],
    half_extent: [f64; 2],
}

impl Kernel {
    fn new(cov: [[f64; 2]; 2], truncate: Option<f64>) -> Self {
        let det = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
        let inv = [[cov[1][1] / det, -cov[0][1] / det], [-cov[1][0] / det, cov[0][0] / det]];
        let (vals, axes) = sym_eigen(cov);
        let k = truncate.unwrap_or(f64::INFINITY);
        let limits = [k * vals[0].max(0.0).sqrt(), k * vals[1].max(0.0).sqrt()];
        let half_extent = [
            limits[0] * axes[0][0].abs() + limits[1] * axes[1][0].abs(),
            limits[0] * axes[0][1].abs() + limits[1] * axes[1][1].abs(),
        ];
        Self {
            inv,
            axes,
            limits,
            half_extent,
        }
    }

    fn weight(&self, dx: f64, dy: f64) -> f64 {
        let q = dx * (self.inv[0][0] * dx + self.inv[0][1] * dy) + dy * (self.inv[1][0] * dx + self.inv[1][1] * dy);
        (-0.5 * q).exp()
    }

    fn inside(&self, dx: f64, dy: f64) -> bool {
        let u1 = self.axes[0][0] * dx + self.axes[0][1] * dy;
        let u2 = self.axes[1][0] * dx + self.axes[1][1] * dy;
        u1.abs() <= self.limits[0] && u2.abs() <= self.limits[1]
    }
}

fn accumulate(points: &[GazePoint], kernel: &Kernel, width: usize, height: usize, density: &mut [f64]) {
    for p in points {
        let (x_lo, x_hi, y_lo, y_hi) = if kernel.half_extent[0].is_finite() {
            (
                (p.x - kernel.half_extent[0]).floor().max(0.0) as usize,
                ((p.x + kernel.half_extent[0]).ceil().min((width - 1) as f64)) as usize,
                (p.y - kernel.half_extent[1]).floor().max(0.0) as usize,
                ((p.y + kernel.half_extent[1]).ceil().min((height - 1) as f64)) as usize,
            )
        } else {
            (0, width - 1, 0, height - 1)
        };
        for y in y_lo..=y_hi {
            let dy = y as f64 - p.y;
            let row = &mut density[y * width..(y + 1) * width];
            for (x, cell) in row.iter_mut().enumerate().take(x_hi + 1).skip(x_lo) {
                let dx = x as f64 - p.x;
                if kernel.inside(dx, dy) {
                    *cell += kernel.weight(dx, dy);
                }
            }
        }
    }
}

fn build_map(fx: &FixationSet, width: usize, height: usize, truncate: Option<f64>) -> Result<PixelSaliencyMap> {
    if fx.points.is_empty() {
        return Err(Error::EmptyFixations);
    }
    if width == 0 || height == 0 {
        return Err(Error::Invalid("saliency map needs nonzero dimensions".into()));
    }
    let points: Vec<GazePoint> = fx.points.iter().map(|p| p.clamped(width, height)).collect();
    let kernel = Kernel::new(effective_covariance(fx.covariance), truncate);
    let mut density = vec![0.0; width * height];
    accumulate(&points, &kernel, width, height, &mut density);
    if density.iter().sum::<f64>() <= 0.0 {
        // kernel narrower than the pixel grid: all mass on the nearest pixel
        for p in &points {
            let (x, y) = (p.x.round() as usize, p.y.round() as usize);
            density[y * width + x] += 1.0;
        }
    }
    let mut map = PixelSaliencyMap::new(width, height, density)?;
    map.normalize()?;
    Ok(map)
}

/// Sum of Gaussians `N(p; fixation, Σ)` evaluated at pixel centres (integer
/// coordinates), each kernel truncated to ±6σ along its principal axes,
/// normalised to total mass 1. Fixations are clamped into the image first.
pub fn fixations_to_pixel_saliency(fx: &FixationSet, width: usize, height: usize) -> Result<PixelSaliencyMap> {
    build_map(fx, width, height, Some(TRUNCATION_SIGMAS))
}

/// The same density without truncation; every kernel covers the whole image.
pub fn fixations_to_pixel_saliency_dense(fx: &FixationSet, width: usize, height: usize) -> Result<PixelSaliencyMap> {
    build_map(fx, width, height, None)
}

/// Equal-weight average of per-session maps, renormalised.
pub fn average_maps(maps: &[PixelSaliencyMap]) -> Result<PixelSaliencyMap> {
    let first = maps.first().ok_or(Error::EmptyFixations)?;
    let mut density = vec![0.0; first.density.len()];
    for m in maps {
        if m.width != first.width || m.height != first.height {
            return Err(Error::Shape("session maps differ in size".into()));
        }
        for (d, v) in density.iter_mut().zip(&m.density) {
            *d += v;
        }
    }
    let mut out = PixelSaliencyMap::new(first.width, first.height, density)?;
    out.normalize()?;
    Ok(out)
}
