//! Scale crops, denoising corruption and low-level element statistics.

mod corrupt;
mod lowlevel;
mod resize;
mod scales;
mod types;

pub use corrupt::{corrupt_pixels, corrupted_count};
pub use lowlevel::{
    color_moments, image_moments, low_level_features, low_level_features_with, region_moments, ColorMoments,
    LowLevelFeatures, FEATURE_NAMES, LOW_LEVEL_DIM,
};
pub use resize::resize_bilinear;
pub use scales::{
    chw_to_image, crop_resized, extract_scales, image_to_chw, scale_boxes, surround_box, ScaleTriplet, CROP_HEIGHT,
    CROP_SHAPE, CROP_WIDTH,
};
pub use types::{BoundingBox, RgbImage, UiElement, UiScreen};
