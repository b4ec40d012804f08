//! Per-session affine gaze calibration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A gaze sample (or calibration target) in screen pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazePoint {
    pub x: f64,
    pub y: f64,
    pub frame: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp_ms: Option<f64>,
}

impl GazePoint {
    pub fn new(x: f64, y: f64, frame: u64) -> Self {
        Self {
            x,
            y,
            frame,
            timestamp_ms: None,
        }
    }

    /// Points indexed by their position, the layout used in manifests.
    pub fn from_pairs(pairs: &[[f64; 2]]) -> Vec<Self> {
        pairs
            .iter()
            .enumerate()
            .map(|(i, p)| Self::new(p[0], p[1], i as u64))
            .collect()
    }

    /// Clamped into `[0, w−1] × [0, h−1]`.
    pub fn clamped(self, width: usize, height: usize) -> Self {
        Self {
            x: self.x.clamp(0.0, (width.max(1) - 1) as f64),
            y: self.y.clamp(0.0, (height.max(1) - 1) as f64),
            ..self
        }
    }
}

pub const MIN_CALIBRATION_POINTS: usize = 8;

/// Affine correction `(x', y') = A·(x, y, 1)` plus the 2×2 covariance of
/// held-out residuals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationModel {
    pub affine: [[f64; 3]; 2],
    pub covariance: [[f64; 2]; 2],
    /// RMSE of the calibrated test split, pixels.
    pub test_rmse: f64,
    /// RMSE of the raw (uncalibrated) test split, pixels.
    pub raw_rmse: f64,
    pub train_points: usize,
    pub test_points: usize,
}

impl CalibrationModel {
    pub fn identity() -> Self {
        Self {
            affine: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            covariance: [[0.0; 2]; 2],
            test_rmse: 0.0,
            raw_rmse: 0.0,
            train_points: 0,
            test_points: 0,
        }
    }

    pub fn apply(&self, p: GazePoint) -> GazePoint {
        let a = &self.affine;
        GazePoint {
            x: a[0][0] * p.x + a[0][1] * p.y + a[0][2],
            y: a[1][0] * p.x + a[1][1] * p.y + a[1][2],
            ..p
        }
    }

    /// Calibrated and clamped into a `width × height` screen.
    pub fn apply_on_screen(&self, p: GazePoint, width: usize, height: usize) -> GazePoint {
        self.apply(p).clamped(width, height)
    }
}

/// True when the sorted pair at `position` belongs to the test split (3:1).
pub fn is_test_position(position: usize) -> bool {
    position % 4 == 3
}

/// Fits the calibration from raw tracker output and the true target
/// positions, paired by frame index.
pub fn fit_calibration(raw: &[GazePoint], truth: &[GazePoint]) -> Result<CalibrationModel> {
    let mut pairs: Vec<(GazePoint, GazePoint)> = Vec::with_capacity(raw.len());
    let mut truth_sorted: Vec<&GazePoint> = truth.iter().collect();
    truth_sorted.sort_by_key(|p| p.frame);
    for r in raw {
        if let Ok(i) = truth_sorted.binary_search_by_key(&r.frame, |p| p.frame) {
            pairs.push((*r, *truth_sorted[i]));
        }
    }
    pairs.sort_by_key(|(r, _)| r.frame);
    pairs.dedup_by_key(|(r, _)| r.frame);
    if pairs.len() < MIN_CALIBRATION_POINTS {
        return Err(Error::InsufficientData(format!(
            "calibration needs at least {MIN_CALIBRATION_POINTS} paired frames, got {}",
            pairs.len()
        )));
    }
    if pairs
        .iter()
        .any(|(r, t)| !(r.x.is_finite() && r.y.is_finite() && t.x.is_finite() && t.y.is_finite()))
    {
        return Err(Error::Invalid("non-finite calibration coordinate".into()));
    }

    let (train, test): (Vec<_>, Vec<_>) = pairs.iter().enumerate().partition(|(i, _)| !is_test_position(*i));
    let train: Vec<(GazePoint, GazePoint)> = train.into_iter().map(|(_, p)| *p).collect();
    let test: Vec<(GazePoint, GazePoint)> = test.into_iter().map(|(_, p)| *p).collect();

    let affine = fit_affine(&train)?;
    let mut model = CalibrationModel {
        affine,
        covariance: [[0.0; 2]; 2],
        test_rmse: 0.0,
        raw_rmse: 0.0,
        train_points: train.len(),
        test_points: test.len(),
    };

    let residuals: Vec<[f64; 2]> = test
        .iter()
        .map(|(r, t)| {
            let p = model.apply(*r);
            [t.x - p.x, t.y - p.y]
        })
        .collect();
    model.covariance = sample_covariance(&residuals);
    model.test_rmse = rms(&residuals);
    let raw_residuals: Vec<[f64; 2]> = test.iter().map(|(r, t)| [t.x - r.x, t.y - r.y]).collect();
    model.raw_rmse = rms(&raw_residuals);
    Ok(model)
}

/// Ordinary least squares with intercept on features `(x, y, 1)`, one fit per
/// output coordinate. Features are centred first, which keeps the 2×2 normal
/// equations well conditioned for pixel-scale coordinates.
fn fit_affine(pairs: &[(GazePoint, GazePoint)]) -> Result<[[f64; 3]; 2]> {
    let n = pairs.len() as f64;
    let mean = |f: &dyn Fn(&(GazePoint, GazePoint)) -> f64| pairs.iter().map(f).sum::<f64>() / n;
    let (mx, my) = (mean(&|p| p.0.x), mean(&|p| p.0.y));
    let (mtx, mty) = (mean(&|p| p.1.x), mean(&|p| p.1.y));

    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    let (mut sx_tx, mut sy_tx, mut sx_ty, mut sy_ty) = (0.0, 0.0, 0.0, 0.0);
    for (r, t) in pairs {
        let (dx, dy) = (r.x - mx, r.y - my);
        let (dtx, dty) = (t.x - mtx, t.y - mty);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
        sx_tx += dx * dtx;
        sy_tx += dy * dtx;
        sx_ty += dx * dty;
        sy_ty += dy * dty;
    }
    let det = sxx * syy - sxy * sxy;
    if !(sxx > 0.0 && syy > 0.0) || det <= 1e-12 * sxx * syy {
        return Err(Error::DegenerateCalibration(
            "raw gaze points are collinear or constant".into(),
        ));
    }
    let solve = |bx: f64, by: f64| ((syy * bx - sxy * by) / det, (sxx * by - sxy * bx) / det);
    let (ax, bx) = solve(sx_tx, sy_tx);
    let (ay, by) = solve(sx_ty, sy_ty);
    Ok([[ax, bx, mtx - ax * mx - bx * my], [ay, by, mty - ay * mx - by * my]])
}

fn sample_covariance(res: &[[f64; 2]]) -> [[f64; 2]; 2] {
    if res.len() < 2 {
        return [[0.0; 2]; 2];
    }
    let n = res.len() as f64;
    let m0 = res.iter().map(|r| r[0]).sum::<f64>() / n;
    let m1 = res.iter().map(|r| r[1]).sum::<f64>() / n;
    let (mut c00, mut c01, mut c11) = (0.0, 0.0, 0.0);
    for r in res {
        let (a, b) = (r[0] - m0, r[1] - m1);
        c00 += a * a;
        c01 += a * b;
        c11 += b * b;
    }
    let d = n - 1.0;
    [[c00 / d, c01 / d], [c01 / d, c11 / d]]
}

fn rms(res: &[[f64; 2]]) -> f64 {
    if res.is_empty() {
        return 0.0;
    }
    (res.iter().map(|r| r[0] * r[0] + r[1] * r[1]).sum::<f64>() / res.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    fn grid(n: usize, rng: &mut SeededRng) -> Vec<GazePoint> {
        (0..n)
            .map(|i| GazePoint::new(rng.uniform_range(0.0, 1080.0), rng.uniform_range(0.0, 1920.0), i as u64))
            .collect()
    }

    #[test]
    fn identity_recovered() {
        let mut rng = SeededRng::new(1);
        let raw = grid(40, &mut rng);
        let m = fit_calibration(&raw, &raw).unwrap();
        let id = CalibrationModel::identity().affine;
        for r in 0..2 {
            for c in 0..3 {
                assert!((m.affine[r][c] - id[r][c]).abs() < 1e-9);
            }
        }
        assert!(m.test_rmse < 1e-9);
        assert!(m.covariance.iter().flatten().all(|v| v.abs() < 1e-12));
        assert_eq!((m.train_points, m.test_points), (30, 10));
    }

    #[test]
    fn affine_recovered_and_round_trips() {
        let mut rng = SeededRng::new(2);
        let raw = grid(60, &mut rng);
        let truth: Vec<GazePoint> = raw
            .iter()
            .map(|p| GazePoint::new(1.1 * p.x + 5.0, 0.9 * p.y - 3.0, p.frame))
            .collect();
        let m = fit_calibration(&raw, &truth).unwrap();
        let want = [[1.1, 0.0, 5.0], [0.0, 0.9, -3.0]];
        for r in 0..2 {
            for c in 0..3 {
                assert!((m.affine[r][c] - want[r][c]).abs() < 1e-9, "{:?}", m.affine);
            }
        }
        for (r, t) in raw.iter().zip(&truth) {
            let p = m.apply(*r);
            assert!((p.x - t.x).abs() < 1e-7 && (p.y - t.y).abs() < 1e-7);
        }
    }

    #[test]
    fn apply_scales_x() {
        let mut m = CalibrationModel::identity();
        m.affine[0] = [2.0, 0.0, 0.0];
        let p = m.apply(GazePoint::new(3.0, 4.0, 0));
        assert_eq!((p.x, p.y), (6.0, 4.0));
        let q = m.apply_on_screen(GazePoint::new(300.0, -4.0, 0), 100, 50);
        assert_eq!((q.x, q.y), (99.0, 0.0));
    }

    #[test]
    fn too_few_points() {
        let raw = GazePoint::from_pairs(&[[0.0, 0.0]; 7]);
        assert!(matches!(fit_calibration(&raw, &raw), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn collinear_is_degenerate() {
        let raw: Vec<GazePoint> = (0..20).map(|i| GazePoint::new(i as f64, 2.0 * i as f64, i)).collect();
        assert!(matches!(
            fit_calibration(&raw, &raw),
            Err(Error::DegenerateCalibration(_))
        ));
    }

    #[test]
    fn translation_equivariance() {
        let mut rng = SeededRng::new(3);
        let raw = grid(50, &mut rng);
        let truth: Vec<GazePoint> = raw
            .iter()
            .map(|p| {
                GazePoint::new(
                    0.8 * p.x + 0.1 * p.y + rng.normal() * 20.0,
                    1.2 * p.y + rng.normal() * 20.0,
                    p.frame,
                )
            })
            .collect();
        let shifted: Vec<GazePoint> = truth
            .iter()
            .map(|p| GazePoint::new(p.x + 13.0, p.y - 7.5, p.frame))
            .collect();
        let a = fit_calibration(&raw, &truth).unwrap();
        let b = fit_calibration(&raw, &shifted).unwrap();
        for r in 0..2 {
            for c in 0..2 {
                assert!((a.affine[r][c] - b.affine[r][c]).abs() < 1e-9);
            }
        }
        assert!((b.affine[0][2] - a.affine[0][2] - 13.0).abs() < 1e-8);
        assert!((b.affine[1][2] - a.affine[1][2] + 7.5).abs() < 1e-8);
    }

    #[test]
    fn pairs_by_frame_not_position() {
        let mut rng = SeededRng::new(4);
        let raw = grid(30, &mut rng);
        let mut truth: Vec<GazePoint> = raw.iter().map(|p| GazePoint::new(p.x + 1.0, p.y, p.frame)).collect();
        truth.reverse();
        let m = fit_calibration(&raw, &truth).unwrap();
        assert!((m.affine[0][2] - 1.0).abs() < 1e-9);
    }
}
