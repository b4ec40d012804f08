//! Pixel-to-element integration with smallest-on-top ownership.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::heatmap::PixelSaliencyMap;
use crate::error::{Error, Result};
use crate::features::UiElement;

pub const SUM_TOLERANCE: f64 = 1e-6;

/// Per-element fixation probabilities, in element-list order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ElementSaliencyVector(Vec<f64>);

impl ElementSaliencyVector {
    /// Validates nonnegativity and unit mass (±1e-6).
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Invalid("empty saliency vector".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Invalid("saliency values must be finite and nonnegative".into()));
        }
        let total: f64 = values.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::Invalid(format!("saliency vector sums to {total}, not 1")));
        }
        Ok(Self(values))
    }

    /// Scales nonnegative masses to unit sum.
    pub fn normalized(masses: &[f64]) -> Result<Self> {
        let total: f64 = masses.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::Numeric(format!("cannot normalise mass {total}")));
        }
        Self::new(masses.iter().map(|m| m / total).collect())
    }

    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Invalid("uniform vector over zero elements".into()));
        }
        Ok(Self(vec![1.0 / k as f64; k]))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for ElementSaliencyVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ElementSaliencyVector> for Vec<f64> {
    fn from(v: ElementSaliencyVector) -> Self {
        v.0
    }
}

/// Which element (by id) owns each pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OwnershipRaster {
    pub width: usize,
    pub height: usize,
    pub owner: Vec<Option<u32>>,
}

impl OwnershipRaster {
    pub fn at(&self, x: usize, y: usize) -> Option<u32> {
        self.owner[y * self.width + x]
    }
}

/// A pixel covered by several boxes belongs to the smallest by area, ties to
/// the lower id. Painting largest-first leaves exactly that element on top.
pub fn resolve_element_ownership(elements: &[UiElement], width: usize, height: usize) -> Result<OwnershipRaster> {
    for e in elements {
        if !e.bbox.fits(width, height) {
            return Err(Error::Invalid(format!("element {} outside {width}x{height}", e.id)));
        }
    }
    let mut order: Vec<&UiElement> = elements.iter().collect();
    order.sort_by(|a, b| b.bbox.area().cmp(&a.bbox.area()).then(b.id.cmp(&a.id)));
    let mut owner = vec![None; width * height];
    for e in order {
        let b = e.bbox;
        for y in b.y0 as usize..b.y1 as usize {
            owner[y * width + b.x0 as usize..y * width + b.x1 as usize].fill(Some(e.id));
        }
    }
    Ok(OwnershipRaster { width, height, owner })
}

/// Element vector plus the raw integrated masses it was normalised from.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementSaliency {
    pub vector: ElementSaliencyVector,
    pub masses: Vec<f64>,
    /// Set when no density fell on any element and the uniform vector was used.
    pub uniform_fallback: bool,
}

/// Integrates pixel density over each element's owned pixels and normalises
/// over elements.
pub fn pixel_to_element_saliency(
    map: &PixelSaliencyMap,
    elements: &[UiElement],
    raster: &OwnershipRaster,
) -> Result<ElementSaliency> {
    if elements.is_empty() {
        return Err(Error::Invalid("no elements to integrate over".into()));
    }
    if map.width != raster.width || map.height != raster.height {
        return Err(Error::Shape("saliency map and ownership raster differ in size".into()));
    }
    let slot: HashMap<u32, usize> = elements.iter().enumerate().map(|(i, e)| (e.id, i)).collect();
    let mut masses = vec![0.0; elements.len()];
    for (d, o) in map.density.iter().zip(&raster.owner) {
        if let Some(id) = o {
            let i = *slot
                .get(id)
                .ok_or_else(|| Error::Invalid(format!("raster names unknown element {id}")))?;
            masses[i] += d;
        }
    }
    let total: f64 = masses.iter().sum();
    if total > 0.0 {
        Ok(ElementSaliency {
            vector: ElementSaliencyVector::normalized(&masses)?,
            masses,
            uniform_fallback: false,
        })
    } else {
        log::warn!("no saliency mass on any element; using uniform vector");
        Ok(ElementSaliency {
            vector: ElementSaliencyVector::uniform(elements.len())?,
            masses,
            uniform_fallback: true,
        })
    }
}
