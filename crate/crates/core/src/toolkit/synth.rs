//! Seeded synthetic UI screens with a known saliency rule.
//!
//! Each screen is a flat background with coloured rectangles and striped
//! "text" blocks. Ground truth is
//! `softmax(a·contrast + b·ln(area) − c·distance_to_top_left)` over the
//! screen's elements, where contrast is the RGB distance between an
//! element's rendered mean colour and the background (scaled to `[0, 1]`),
//! area is in pixels and the distance runs from the top-left corner to the
//! element centre as a fraction of the screen diagonal.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{region_moments, BoundingBox, RgbImage, UiElement, UiScreen};
use crate::gaze::{ElementSaliencyVector, GazePoint, GazeSession};
use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub screens: usize,
    pub width: usize,
    pub height: usize,
    pub min_elements: usize,
    pub max_elements: usize,
    pub seed: u64,
    /// `a`: weight on contrast.
    pub contrast_weight: f64,
    /// `b`: weight on log area.
    pub area_weight: f64,
    /// `c`: penalty on distance from the top-left corner.
    pub distance_weight: f64,
    /// Simulated gaze sessions per screen; zero skips gaze simulation.
    pub sessions_per_screen: usize,
    pub fixations_per_session: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            screens: 20,
            width: 180,
            height: 320,
            min_elements: 4,
            max_elements: 50,
            seed: 0,
            contrast_weight: 2.0,
            area_weight: 0.5,
            distance_weight: 2.0,
            sessions_per_screen: 0,
            fixations_per_session: 40,
        }
    }
}

/// Smallest element edge in pixels.
pub const MIN_ELEMENT_SIDE: usize = 4;
const PLACEMENT_ATTEMPTS: usize = 40;

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.screens == 0 {
            return bad("screen count must be at least 1".into());
        }
        if self.min_elements == 0 || self.min_elements > self.max_elements {
            return bad(format!(
                "element range {}..={} is empty",
                self.min_elements, self.max_elements
            ));
        }
        if self.width < 4 * MIN_ELEMENT_SIDE || self.height < 4 * MIN_ELEMENT_SIDE {
            return bad(format!(
                "{}x{} screen is too small for any element",
                self.width, self.height
            ));
        }
        let cells = (self.width / MIN_ELEMENT_SIDE) * (self.height / MIN_ELEMENT_SIDE);
        if cells < self.min_elements {
            return bad(format!(
                "{}x{} screen cannot hold {} elements",
                self.width, self.height, self.min_elements
            ));
        }
        for (name, v) in [
            ("contrast_weight", self.contrast_weight),
            ("area_weight", self.area_weight),
            ("distance_weight", self.distance_weight),
        ] {
            if !v.is_finite() {
                return bad(format!("{name} must be finite"));
            }
        }
        if self.sessions_per_screen > 0 && self.fixations_per_session == 0 {
            return bad("fixations_per_session must be positive when simulating gaze".into());
        }
        Ok(())
    }
}

/// One generated screen; `screen.ground_truth` holds the rule's vector.
#[derive(Debug, Clone)]
pub struct SynthScreen {
    pub screen: UiScreen,
    pub sessions: Vec<GazeSession>,
}

/// Per-element inputs to the saliency rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuleInputs {
    pub contrast: f64,
    pub area: f64,
    pub distance: f64,
}

/// `softmax(a·contrast + b·ln(area) − c·distance)`.
pub fn rule_saliency(inputs: &[RuleInputs], cfg: &SynthConfig) -> Result<ElementSaliencyVector> {
    if inputs.is_empty() {
        return Err(Error::Invalid("no elements".into()));
    }
    let logits: Vec<f64> = inputs
        .iter()
        .map(|r| cfg.contrast_weight * r.contrast + cfg.area_weight * r.area.ln() - cfg.distance_weight * r.distance)
        .collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = w.iter().sum();
    ElementSaliencyVector::new(w.iter().map(|v| v / total).collect())
}

/// Rule inputs measured on the rendered image.
pub fn rule_inputs(image: &RgbImage, background: [f32; 3], elements: &[UiElement]) -> Result<Vec<RuleInputs>> {
    let diag = ((image.width * image.width + image.height * image.height) as f64).sqrt();
    elements
        .iter()
        .map(|e| {
            let m = region_moments(image, &e.bbox)?;
            let d2: f64 = (0..3).map(|c| (m.mean[c] - background[c] as f64).powi(2)).sum();
            let (cx, cy) = e.bbox.center();
            Ok(RuleInputs {
                contrast: (d2 / 3.0).sqrt(),
                area: e.bbox.area() as f64,
                distance: (cx * cx + cy * cy).sqrt() / diag,
            })
        })
        .collect()
}

fn color(rng: &mut SeededRng) -> [f32; 3] {
    std::array::from_fn(|_| rng.int_range(0, 255) as f32 / 255.0)
}

fn background(rng: &mut SeededRng) -> [f32; 3] {
    let base = rng.int_range(200, 250);
    std::array::from_fn(|_| (base + rng.int_range(0, 5)) as f32 / 255.0)
}

fn overlaps(a: &BoundingBox, b: &BoundingBox) -> bool {
    a.x0 < b.x1 && b.x0 < a.x1 && a.y0 < b.y1 && b.y0 < a.y1
}

fn random_box(rng: &mut SeededRng, w: usize, h: usize) -> BoundingBox {
    let bw = rng.int_range(MIN_ELEMENT_SIDE.max(w / 12), (w / 2).max(MIN_ELEMENT_SIDE));
    let bh = rng.int_range(MIN_ELEMENT_SIDE.max(h / 40), (h / 6).max(MIN_ELEMENT_SIDE));
    let x0 = rng.int_range(0, w - bw);
    let y0 = rng.int_range(0, h - bh);
    BoundingBox {
        x0: x0 as u32,
        y0: y0 as u32,
        x1: (x0 + bw) as u32,
        y1: (y0 + bh) as u32,
    }
}

/// Places boxes without overlap while possible, then lets later boxes
/// overlap earlier ones.
fn layout(rng: &mut SeededRng, k: usize, w: usize, h: usize) -> Vec<BoundingBox> {
    let mut boxes: Vec<BoundingBox> = Vec::with_capacity(k);
    while boxes.len() < k {
        let mut candidate = random_box(rng, w, h);
        for _ in 0..PLACEMENT_ATTEMPTS {
            if !boxes.iter().any(|b| overlaps(b, &candidate)) {
                break;
            }
            candidate = random_box(rng, w, h);
        }
        boxes.push(candidate);
    }
    boxes
}

fn paint(image: &mut RgbImage, b: &BoundingBox, rgb: [f32; 3], striped: bool) {
    if !striped {
        image.fill_box(b, rgb);
        return;
    }
    for y in b.y0 as usize..b.y1 as usize {
        if (y - b.y0 as usize) % 4 < 2 {
            for x in b.x0 as usize..b.x1 as usize {
                image.set_pixel(x, y, rgb);
            }
        }
    }
}

/// A smooth random affine distortion and its noisy observations of
/// `truth`, standing in for an uncalibrated eye tracker.
fn simulate_session(rng: &mut SeededRng, screen: &UiScreen, cfg: &SynthConfig) -> GazeSession {
    let (w, h) = (screen.width() as f64, screen.height() as f64);
    let a = [
        [1.0 + 0.05 * rng.normal(), 0.03 * rng.normal(), 8.0 * rng.normal()],
        [0.03 * rng.normal(), 1.0 + 0.05 * rng.normal(), 8.0 * rng.normal()],
    ];
    let noise = 3.0;
    let distort = |x: f64, y: f64, rng: &mut SeededRng| {
        [
            a[0][0] * x + a[0][1] * y + a[0][2] + noise * rng.normal(),
            a[1][0] * x + a[1][1] * y + a[1][2] + noise * rng.normal(),
        ]
    };
    let mut truth = Vec::new();
    for gy in 0..4 {
        for gx in 0..4 {
            truth.push([w * (gx as f64 + 0.5) / 4.0, h * (gy as f64 + 0.5) / 4.0]);
        }
    }
    let raw: Vec<[f64; 2]> = truth.iter().map(|p| distort(p[0], p[1], rng)).collect();

    let gt = screen
        .ground_truth
        .as_ref()
        .expect("synthetic screens carry ground truth");
    let mut gaze = Vec::with_capacity(cfg.fixations_per_session);
    for _ in 0..cfg.fixations_per_session {
        let u = rng.uniform();
        let mut acc = 0.0;
        let mut pick = screen.elements.len() - 1;
        for (j, v) in gt.values().iter().enumerate() {
            acc += v;
            if u < acc {
                pick = j;
                break;
            }
        }
        let b = screen.elements[pick].bbox;
        let x = rng.uniform_range(b.x0 as f64, b.x1 as f64);
        let y = rng.uniform_range(b.y0 as f64, b.y1 as f64);
        gaze.push(distort(x, y, rng));
    }
    GazeSession {
        calibration_raw: GazePoint::from_pairs(&raw),
        calibration_truth: GazePoint::from_pairs(&truth),
        gaze: GazePoint::from_pairs(&gaze),
    }
}

/// Screen `index` of the dataset described by `cfg`; independent of the
/// other screens.
pub fn synth_screen(cfg: &SynthConfig, index: usize) -> Result<SynthScreen> {
    let mut rng = SeededRng::derive(cfg.seed, &[index as u64]);
    let (w, h) = (cfg.width, cfg.height);
    let k = rng.int_range(cfg.min_elements, cfg.max_elements);
    let bg = background(&mut rng);
    let mut image = RgbImage::filled(w, h, bg);
    let boxes = layout(&mut rng, k, w, h);
    for b in &boxes {
        let c = color(&mut rng);
        let striped = rng.uniform() < 0.3;
        paint(&mut image, b, c, striped);
    }
    let elements: Vec<UiElement> = boxes
        .into_iter()
        .enumerate()
        .map(|(id, bbox)| UiElement { id: id as u32, bbox })
        .collect();
    let gt = rule_saliency(&rule_inputs(&image, bg, &elements)?, cfg)?;
    let screen = UiScreen::new(format!("synth-{index:04}"), image, elements)?.with_ground_truth(gt)?;
    let sessions = (0..cfg.sessions_per_screen)
        .map(|_| simulate_session(&mut rng, &screen, cfg))
        .collect();
    Ok(SynthScreen { screen, sessions })
}

pub fn synth_screens(cfg: &SynthConfig) -> Result<Vec<SynthScreen>> {
    cfg.validate()?;
    (0..cfg.screens).map(|i| synth_screen(cfg, i)).collect()
}
