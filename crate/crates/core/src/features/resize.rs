use super::RgbImage;

/// Bilinear resampling with half-pixel centres and edge clamping; aspect
/// ratio is not preserved.
pub fn resize_bilinear(src: &RgbImage, width: usize, height: usize) -> RgbImage {
    assert!(width > 0 && height > 0, "resize target must be nonempty");
    let xs = taps(src.width, width);
    let ys = taps(src.height, height);
    let mut data = Vec::with_capacity(width * height * 3);
    for &(y0, y1, ty) in &ys {
        for &(x0, x1, tx) in &xs {
            let p00 = src.pixel(x0, y0);
            let p01 = src.pixel(x1, y0);
            let p10 = src.pixel(x0, y1);
            let p11 = src.pixel(x1, y1);
            for c in 0..3 {
                let top = lerp(p00[c] as f64, p01[c] as f64, tx);
                let bottom = lerp(p10[c] as f64, p11[c] as f64, tx);
                data.push(lerp(top, bottom, ty) as f32);
            }
        }
    }
    RgbImage { width, height, data }
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    if t == 0.0 {
        a
    } else {
        a * (1.0 - t) + b * t
    }
}

/// For each destination index: the two source neighbours and the weight of the second.
fn taps(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    let last = (src - 1) as f64;
    (0..dst)
        .map(|i| {
            let s = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, last);
            let i0 = s.floor() as usize;
            let i1 = (i0 + 1).min(src - 1);
            (i0, i1, s - i0 as f64)
        })
        .collect()
}
