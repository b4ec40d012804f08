//! Colour moments and geometry of an element.

use super::{BoundingBox, RgbImage, UiElement, UiScreen};
use crate::error::{Error, Result};

pub const LOW_LEVEL_DIM: usize = 17;

pub const FEATURE_NAMES: [&str; LOW_LEVEL_DIM] = [
    "width",
    "height",
    "area",
    "center_x",
    "center_y",
    "elem_mean_r",
    "elem_mean_g",
    "elem_mean_b",
    "elem_std_r",
    "elem_std_g",
    "elem_std_b",
    "image_mean_r",
    "image_mean_g",
    "image_mean_b",
    "image_std_r",
    "image_std_g",
    "image_std_b",
];

/// First (mean) and second (population standard deviation) colour moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColorMoments {
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

pub fn color_moments(pixels: &[[f32; 3]]) -> Result<ColorMoments> {
    if pixels.is_empty() {
        return Err(Error::Invalid("colour moments of an empty region".into()));
    }
    let n = pixels.len() as f64;
    let mut mean = [0.0; 3];
    for p in pixels {
        for c in 0..3 {
            mean[c] += p[c] as f64;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = [0.0; 3];
    for p in pixels {
        for c in 0..3 {
            let d = p[c] as f64 - mean[c];
            var[c] += d * d;
        }
    }
    Ok(ColorMoments {
        mean,
        std: var.map(|v| (v / n).sqrt()),
    })
}

pub fn region_moments(image: &RgbImage, region: &BoundingBox) -> Result<ColorMoments> {
    let mut pixels = Vec::with_capacity(region.area() as usize);
    for y in region.y0 as usize..region.y1 as usize {
        for x in region.x0 as usize..region.x1 as usize {
            pixels.push(image.pixel(x, y));
        }
    }
    color_moments(&pixels)
}

pub fn image_moments(image: &RgbImage) -> Result<ColorMoments> {
    region_moments(image, &BoundingBox::full(image.width, image.height))
}

/// `[width, height, area, center_x, center_y, element M(3), element σ(3),
/// image M(3), image σ(3)]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowLevelFeatures(pub [f64; LOW_LEVEL_DIM]);

impl LowLevelFeatures {
    pub fn values(&self) -> &[f64; LOW_LEVEL_DIM] {
        &self.0
    }
}

/// Low-level features with the whole-image moments supplied by the caller,
/// so they are computed once per screen.
pub fn low_level_features_with(
    image_stats: &ColorMoments,
    screen: &UiScreen,
    element: &UiElement,
) -> Result<LowLevelFeatures> {
    let b = element.bbox;
    if !b.fits(screen.width(), screen.height()) {
        return Err(Error::Invalid(format!("element {} outside screen", element.id)));
    }
    let m = region_moments(&screen.image, &b)?;
    let (cx, cy) = b.center();
    let mut v = [0.0; LOW_LEVEL_DIM];
    v[..5].copy_from_slice(&[b.width() as f64, b.height() as f64, b.area() as f64, cx, cy]);
    v[5..8].copy_from_slice(&m.mean);
    v[8..11].copy_from_slice(&m.std);
    v[11..14].copy_from_slice(&image_stats.mean);
    v[14..17].copy_from_slice(&image_stats.std);
    Ok(LowLevelFeatures(v))
}

pub fn low_level_features(screen: &UiScreen, element: &UiElement) -> Result<LowLevelFeatures> {
    low_level_features_with(&image_moments(&screen.image)?, screen, element)
}
