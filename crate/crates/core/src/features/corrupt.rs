use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::rng::SeededRng;

/// Number of pixels zeroed for fraction `f` of an `h × w` crop.
pub fn corrupted_count(f: f64, h: usize, w: usize) -> usize {
    (f * (h * w) as f64).round() as usize
}

/// Zeroes all channels at exactly `round(f·H·W)` distinct pixel positions
/// drawn uniformly without replacement.
pub fn corrupt_pixels(crop: &Tensor<f32>, f: f64, rng: &mut SeededRng) -> Result<Tensor<f32>> {
    if !(0.0..=1.0).contains(&f) {
        return Err(Error::Config(format!("corruption fraction {f} outside [0, 1]")));
    }
    let (c, h, w) = crop.dims3()?;
    let hw = h * w;
    let n = corrupted_count(f, h, w).min(hw);
    let mut out = crop.clone();
    let data = out.data_mut();
    for idx in rng.sample_indices(hw, n) {
        for ch in 0..c {
            data[ch * hw + idx] = 0.0;
        }
    }
    Ok(out)
}
