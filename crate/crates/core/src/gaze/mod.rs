//! From raw gaze samples to per-element ground-truth saliency.

mod calibration;
mod element;
mod heatmap;

pub use calibration::{fit_calibration, is_test_position, CalibrationModel, GazePoint, MIN_CALIBRATION_POINTS};
pub use element::{
    pixel_to_element_saliency, resolve_element_ownership, ElementSaliency, ElementSaliencyVector, OwnershipRaster,
    SUM_TOLERANCE,
};
pub use heatmap::{
    average_maps, effective_covariance, fixations_to_pixel_saliency, fixations_to_pixel_saliency_dense, FixationSet,
    PixelSaliencyMap, SINGULAR_REGULARIZATION, TRUNCATION_SIGMAS,
};

use crate::error::Result;
use crate::features::UiElement;

/// One viewing session: calibration pairs and the raw gaze recorded on the UI.
#[derive(Debug, Clone, PartialEq)]
pub struct GazeSession {
    pub calibration_raw: Vec<GazePoint>,
    pub calibration_truth: Vec<GazePoint>,
    pub gaze: Vec<GazePoint>,
}

/// Result of turning every session on one screen into ground truth.
#[derive(Debug, Clone)]
pub struct ScreenGroundTruth {
    pub calibrations: Vec<CalibrationModel>,
    pub pixel_map: PixelSaliencyMap,
    pub elements: ElementSaliency,
}

/// Calibrates each session, blurs its fixations with the session's residual
/// covariance, averages the session maps with equal weight and integrates
/// over elements.
pub fn screen_ground_truth(
    ui_id: &str,
    sessions: &[GazeSession],
    elements: &[UiElement],
    width: usize,
    height: usize,
) -> Result<ScreenGroundTruth> {
    let mut calibrations = Vec::with_capacity(sessions.len());
    let mut maps = Vec::with_capacity(sessions.len());
    for s in sessions {
        let model = fit_calibration(&s.calibration_raw, &s.calibration_truth)?;
        let points = s
            .gaze
            .iter()
            .map(|p| model.apply_on_screen(*p, width, height))
            .collect();
        let fx = FixationSet {
            ui_id: ui_id.to_string(),
            points,
            covariance: model.covariance,
        };
        maps.push(fixations_to_pixel_saliency(&fx, width, height)?);
        calibrations.push(model);
    }
    let pixel_map = average_maps(&maps)?;
    let raster = resolve_element_ownership(elements, width, height)?;
    let elements = pixel_to_element_saliency(&pixel_map, elements, &raster)?;
    Ok(ScreenGroundTruth {
        calibrations,
        pixel_map,
        elements,
    })
}
