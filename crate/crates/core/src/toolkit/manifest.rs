//! JSON dataset manifest: screens, element boxes, optional ground truth and
//! optional raw gaze sessions. Image paths are relative to the manifest.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::synth::SynthScreen;
use crate::error::{Error, Result};
use crate::features::{RgbImage, UiElement, UiScreen};
use crate::gaze::{ElementSaliencyVector, GazePoint, GazeSession, SUM_TOLERANCE};
use crate::par;

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub version: u32,
    pub screens: Vec<ScreenEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub px_per_cm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScreenEntry {
    pub id: String,
    pub image: String,
    pub width: usize,
    pub height: usize,
    pub elements: Vec<UiElement>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_element_saliency: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sessions: Vec<SessionEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionEntry {
    pub calibration: CalibrationEntry,
    pub gaze: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationEntry {
    pub raw: Vec<[f64; 2]>,
    pub truth: Vec<[f64; 2]>,
}

impl SessionEntry {
    pub fn to_session(&self) -> GazeSession {
        GazeSession {
            calibration_raw: GazePoint::from_pairs(&self.calibration.raw),
            calibration_truth: GazePoint::from_pairs(&self.calibration.truth),
            gaze: GazePoint::from_pairs(&self.gaze),
        }
    }

    pub fn from_session(s: &GazeSession) -> Self {
        let pairs = |v: &[GazePoint]| v.iter().map(|p| [p.x, p.y]).collect();
        Self {
            calibration: CalibrationEntry {
                raw: pairs(&s.calibration_raw),
                truth: pairs(&s.calibration_truth),
            },
            gaze: pairs(&s.gaze),
        }
    }
}

impl ScreenEntry {
    fn fail(&self, reason: impl Into<String>) -> Error {
        Error::Manifest {
            screen: self.id.clone(),
            reason: reason.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(self.fail("image dimensions must be positive"));
        }
        if self.elements.is_empty() {
            return Err(self.fail("screen has no elements"));
        }
        let mut ids = HashSet::new();
        for e in &self.elements {
            if !ids.insert(e.id) {
                return Err(self.fail(format!("duplicate element id {}", e.id)));
            }
            if !e.bbox.fits(self.width, self.height) {
                return Err(self.fail(format!(
                    "element {} bbox {:?} outside {}x{} image",
                    e.id,
                    <[u32; 4]>::from(e.bbox),
                    self.width,
                    self.height
                )));
            }
        }
        if let Some(gt) = &self.gt_element_saliency {
            if gt.len() != self.elements.len() {
                return Err(self.fail(format!(
                    "gt_element_saliency has {} values for {} elements",
                    gt.len(),
                    self.elements.len()
                )));
            }
            ElementSaliencyVector::new(gt.clone()).map_err(|e| self.fail(e.to_string()))?;
            let total: f64 = gt.iter().sum();
            if (total - 1.0).abs() > SUM_TOLERANCE {
                return Err(self.fail(format!("gt_element_saliency sums to {total}")));
            }
        }
        for (i, s) in self.sessions.iter().enumerate() {
            if s.calibration.raw.len() != s.calibration.truth.len() {
                return Err(self.fail(format!("session {i}: calibration raw/truth lengths differ")));
            }
            let all = s.calibration.raw.iter().chain(&s.calibration.truth).chain(&s.gaze);
            if all.flatten().any(|v| !v.is_finite()) {
                return Err(self.fail(format!("session {i}: non-finite coordinate")));
            }
        }
        Ok(())
    }

    pub fn ground_truth(&self) -> Result<Option<ElementSaliencyVector>> {
        self.gt_element_saliency
            .as_ref()
            .map(|v| ElementSaliencyVector::new(v.clone()).map_err(|e| self.fail(e.to_string())))
            .transpose()
    }

    pub fn gaze_sessions(&self) -> Vec<GazeSession> {
        self.sessions.iter().map(SessionEntry::to_session).collect()
    }

    /// Reads the PNG and checks it against the declared size.
    pub fn load(&self, base: &Path) -> Result<UiScreen> {
        let image = RgbImage::load_png(&base.join(&self.image))?;
        if image.width != self.width || image.height != self.height {
            return Err(self.fail(format!(
                "image is {}x{}, manifest declares {}x{}",
                image.width, image.height, self.width, self.height
            )));
        }
        let screen = UiScreen::new(self.id.clone(), image, self.elements.clone())?;
        match self.ground_truth()? {
            Some(gt) => screen.with_ground_truth(gt),
            None => Ok(screen),
        }
    }
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        if self.version != MANIFEST_VERSION {
            return Err(Error::Manifest {
                screen: "-".into(),
                reason: format!("unsupported manifest version {}", self.version),
            });
        }
        let mut ids = HashSet::new();
        for s in &self.screens {
            if !ids.insert(s.id.as_str()) {
                return Err(s.fail("duplicate screen id"));
            }
            s.validate()?;
        }
        if let Some(p) = self.px_per_cm {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::Manifest {
                    screen: "-".into(),
                    reason: format!("px_per_cm {p} must be positive"),
                });
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    /// Parses and validates a manifest; returns it with the directory its
    /// image paths are relative to.
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let m = Self::from_json(&fs::read_to_string(path)?)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((m, base))
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load_screens(&self, base: &Path) -> Result<Vec<UiScreen>> {
        par::map_slice(&self.screens, |s| s.load(base)).into_iter().collect()
    }

    pub fn entry(screen: &UiScreen, image: String, sessions: &[GazeSession]) -> ScreenEntry {
        ScreenEntry {
            id: screen.id.clone(),
            image,
            width: screen.width(),
            height: screen.height(),
            elements: screen.elements.clone(),
            gt_element_saliency: screen.ground_truth.as_ref().map(|g| g.values().to_vec()),
            sessions: sessions.iter().map(SessionEntry::from_session).collect(),
        }
    }
}

/// Writes `images/<id>.png` for every screen plus `manifest.json` under
/// `dir`, returning the manifest.
pub fn write_dataset(screens: &[SynthScreen], dir: &Path) -> Result<DatasetManifest> {
    fs::create_dir_all(dir.join("images"))?;
    let mut entries = Vec::with_capacity(screens.len());
    for s in screens {
        let rel = format!("images/{}.png", s.screen.id);
        s.screen.image.save_png(&dir.join(&rel))?;
        entries.push(DatasetManifest::entry(&s.screen, rel, &s.sessions));
    }
    let manifest = DatasetManifest {
        version: MANIFEST_VERSION,
        screens: entries,
        px_per_cm: None,
    };
    manifest.validate()?;
    manifest.save(&dir.join("manifest.json"))?;
    Ok(manifest)
}
