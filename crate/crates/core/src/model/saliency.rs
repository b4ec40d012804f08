//! The element-saliency predictor: three encoders, a low-level feature
//! normaliser and the dense head.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::autoencoder::{Autoencoder, CODE_LEN};
use super::head::SaliencyHead;
use super::providers::{hook_block, FeatureProvider, HookSpec, ProviderRegistry};
use crate::error::{shape_err, Error, Result};
use crate::features::{
    crop_resized, extract_scales, image_moments, low_level_features_with, BoundingBox, ColorMoments, LowLevelFeatures,
    UiElement, UiScreen, LOW_LEVEL_DIM,
};
use crate::gaze::ElementSaliencyVector;
use crate::numerics::sigmoid_scalar;
use crate::par;
use crate::rng::SeededRng;

pub const STD_FLOOR: f64 = 1e-8;

/// Head input width without extra providers: `3·9216 + 17`.
pub const BASE_FEATURE_DIM: usize = 3 * CODE_LEN + LOW_LEVEL_DIM;

/// Per-feature z-scoring fitted on a training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureNormalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureNormalizer {
    /// Population mean and standard deviation per feature; deviations below
    /// [`STD_FLOOR`] are raised to it.
    pub fn fit(rows: &[LowLevelFeatures]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyDataset("no elements to fit the normalizer on".into()));
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; LOW_LEVEL_DIM];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r.values()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = [0.0; LOW_LEVEL_DIM];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r.values()).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var.iter().map(|s| (s / n).sqrt().max(STD_FLOOR)).collect();
        Ok(Self { mean, std })
    }

    pub fn validate(&self) -> Result<()> {
        if self.mean.len() != LOW_LEVEL_DIM || self.std.len() != LOW_LEVEL_DIM {
            return Err(shape_err(format!("normalizer must have {LOW_LEVEL_DIM} entries")));
        }
        if self.std.iter().any(|s| !(*s >= STD_FLOOR && s.is_finite())) || self.mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::Invalid(
                "normalizer statistics must be finite with std ≥ 1e-8".into(),
            ));
        }
        Ok(())
    }

    pub fn apply(&self, f: &LowLevelFeatures) -> [f32; LOW_LEVEL_DIM] {
        std::array::from_fn(|i| ((f.0[i] - self.mean[i]) / self.std[i]) as f32)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyModel {
    /// Element, surround and whole-screen encoders, in that order.
    pub encoders: [Autoencoder<f32>; 3],
    pub normalizer: Option<FeatureNormalizer>,
    pub head: SaliencyHead<f32>,
    pub hooks: Vec<HookSpec>,
}

/// Per-screen state shared by all of its elements.
pub struct ScreenContext<'a> {
    screen: &'a UiScreen,
    stats: ColorMoments,
    global_code: Vec<f32>,
    providers: Vec<Arc<dyn FeatureProvider>>,
}

impl SaliencyModel {
    /// Fresh head on top of `encoders`; the normaliser is fitted by training.
    pub fn new(encoders: [Autoencoder<f32>; 3], hidden: [usize; 2], hooks: Vec<HookSpec>, seed: u64) -> Self {
        let dim = feature_dim(&hooks);
        let head = SaliencyHead::init(dim, hidden, &mut SeededRng::derive(seed, &[0x4845_4144]));
        Self {
            encoders,
            normalizer: None,
            head,
            hooks,
        }
    }

    pub fn feature_dim(&self) -> usize {
        feature_dim(&self.hooks)
    }

    /// Checks internal consistency: head width matches the feature layout
    /// and the normaliser, if any, is well formed.
    pub fn validate(&self) -> Result<()> {
        if self.head.input_dim() != self.feature_dim() {
            return Err(shape_err(format!(
                "head expects {} inputs, features have {}",
                self.head.input_dim(),
                self.feature_dim()
            )));
        }
        if let Some(n) = &self.normalizer {
            n.validate()?;
        }
        Ok(())
    }

    fn normalizer(&self) -> Result<&FeatureNormalizer> {
        self.normalizer
            .as_ref()
            .ok_or_else(|| Error::Invalid("feature normalizer has not been fitted".into()))
    }

    pub fn screen_context<'a>(&self, screen: &'a UiScreen, registry: &ProviderRegistry) -> Result<ScreenContext<'a>> {
        self.normalizer()?;
        let whole = crop_resized(&screen.image, &BoundingBox::full(screen.width(), screen.height()));
        Ok(ScreenContext {
            screen,
            stats: image_moments(&screen.image)?,
            global_code: self.encoders[2].encode_crop(&whole)?,
            providers: registry.resolve(&self.hooks)?,
        })
    }

    /// Feature row for one element of a prepared screen.
    pub fn element_features(&self, ctx: &ScreenContext<'_>, element: &UiElement) -> Result<Vec<f32>> {
        let scales = extract_scales(ctx.screen, element)?;
        let mut row = Vec::with_capacity(self.feature_dim());
        row.extend(self.encoders[0].encode_crop(&scales.crops[0])?);
        row.extend(self.encoders[1].encode_crop(&scales.crops[1])?);
        row.extend_from_slice(&ctx.global_code);
        let low = low_level_features_with(&ctx.stats, ctx.screen, element)?;
        row.extend(self.normalizer()?.apply(&low));
        row.extend(hook_block(&ctx.providers, ctx.screen, element)?);
        Ok(row)
    }

    /// `[code₀ ‖ code₁ ‖ code₂ ‖ z-scored low-level ‖ provider blocks]`.
    pub fn assemble_features(
        &self,
        screen: &UiScreen,
        element: &UiElement,
        registry: &ProviderRegistry,
    ) -> Result<Vec<f32>> {
        let ctx = self.screen_context(screen, registry)?;
        self.element_features(&ctx, element)
    }

    /// Row-major `k × feature_dim` matrix for all elements of a screen.
    pub fn screen_features(&self, screen: &UiScreen, registry: &ProviderRegistry) -> Result<Vec<f32>> {
        let ctx = self.screen_context(screen, registry)?;
        let rows = par::map_slice(&screen.elements, |e| self.element_features(&ctx, e));
        let mut out = Vec::with_capacity(screen.elements.len() * self.feature_dim());
        for r in rows {
            out.extend(r?);
        }
        Ok(out)
    }

    /// Head logits for `n` feature rows.
    pub fn logits(&self, rows: &[f32], n: usize) -> Result<Vec<f64>> {
        if rows.len() != n * self.feature_dim() {
            return Err(shape_err(format!(
                "expected {n} rows of {} features, got {} values",
                self.feature_dim(),
                rows.len()
            )));
        }
        let cache = self.head.forward_batch(rows, n, 0.0, None)?;
        let z: Vec<f64> = cache.logits().iter().map(|&z| z as f64).collect();
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite head output".into()));
        }
        Ok(z)
    }

    /// Head probabilities for `n` feature rows.
    pub fn predict_rows(&self, rows: &[f32], n: usize) -> Result<Vec<f64>> {
        Ok(self.logits(rows, n)?.into_iter().map(sigmoid_scalar).collect())
    }

    pub fn predict_element(&self, features: &[f32]) -> Result<f64> {
        Ok(self.predict_rows(features, 1)?[0])
    }

    /// Raw probabilities normalised to sum to one over the screen.
    pub fn predict_ui(&self, screen: &UiScreen, registry: &ProviderRegistry) -> Result<ElementSaliencyVector> {
        if screen.elements.is_empty() {
            return Err(Error::Invalid(format!("screen {} has no elements", screen.id)));
        }
        let rows = self.screen_features(screen, registry)?;
        normalize_logits(&self.logits(&rows, screen.elements.len())?)
    }
}

pub fn feature_dim(hooks: &[HookSpec]) -> usize {
    BASE_FEATURE_DIM + hooks.iter().map(|h| h.dim).sum::<usize>()
}

/// `σ(zⱼ) / Σ σ(z)`, evaluated through `ln σ(z) = −softplus(−z)` so that
/// probabilities far below f64 range still normalise.
pub fn normalize_logits(z: &[f64]) -> Result<ElementSaliencyVector> {
    let log_p: Vec<f64> = z.iter().map(|&v| -softplus(-v)).collect();
    let max = log_p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_p.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::Numeric(format!("prediction mass {total}")));
    }
    ElementSaliencyVector::new(w.iter().map(|v| v / total).collect())
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::RgbImage;
    use crate::model::ZeroProvider;

    fn encoders(seed: u64) -> [Autoencoder<f32>; 3] {
        let mut rng = SeededRng::new(seed);
        std::array::from_fn(|_| Autoencoder::init(&mut rng))
    }

    fn screen(seed: u64, k: usize) -> UiScreen {
        let mut rng = SeededRng::new(seed);
        let mut img = RgbImage::filled(90, 160, [0.9, 0.9, 0.9]);
        let mut elements = Vec::new();
        for id in 0..k as u32 {
            let x0 = rng.int_range(0, 60) as u32;
            let y0 = rng.int_range(0, 120) as u32;
            let b = BoundingBox::new(
                x0,
                y0,
                x0 + rng.int_range(5, 29) as u32,
                y0 + rng.int_range(5, 39) as u32,
            )
            .unwrap();
            img.fill_box(&b, [rng.uniform() as f32, rng.uniform() as f32, rng.uniform() as f32]);
            elements.push(UiElement { id, bbox: b });
        }
        UiScreen::new(format!("s{seed}"), img, elements).unwrap()
    }

    fn fitted(hooks: Vec<HookSpec>) -> SaliencyModel {
        let mut m = SaliencyModel::new(encoders(1), [8, 4], hooks, 2);
        let s = screen(5, 6);
        let rows: Vec<_> = s
            .elements
            .iter()
            .map(|e| crate::features::low_level_features(&s, e).unwrap())
            .collect();
        m.normalizer = Some(FeatureNormalizer::fit(&rows).unwrap());
        m
    }

    #[test]
    fn feature_length_and_determinism() {
        let m = fitted(vec![]);
        let s = screen(3, 4);
        let reg = ProviderRegistry::new();
        let a = m.assemble_features(&s, &s.elements[1], &reg).unwrap();
        assert_eq!(a.len(), 27665);
        assert_eq!(a, m.assemble_features(&s, &s.elements[1], &reg).unwrap());
        let rows = m.screen_features(&s, &reg).unwrap();
        assert_eq!(&rows[27665..2 * 27665], &a[..]);
    }

    #[test]
    fn unfitted_normalizer_is_error() {
        let m = SaliencyModel::new(encoders(1), [8, 4], vec![], 2);
        let s = screen(3, 2);
        assert!(m
            .assemble_features(&s, &s.elements[0], &ProviderRegistry::new())
            .is_err());
    }

    #[test]
    fn zero_provider_widens_input() {
        let mut reg = ProviderRegistry::new();
        reg.register(Arc::new(ZeroProvider::new("zeros", 8))).unwrap();
        let m = fitted(reg.specs(&["zeros".into()]).unwrap());
        assert_eq!(m.head.input_dim(), 27673);
        let s = screen(4, 3);
        let v = m.predict_ui(&s, &reg).unwrap();
        assert!((v.values().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(matches!(
            m.predict_ui(&s, &ProviderRegistry::new()),
            Err(Error::UnknownProvider(_))
        ));
    }

    #[test]
    fn zero_head_is_uniform_and_half() {
        let mut m = fitted(vec![]);
        for l in m.head.layers.iter_mut() {
            l.weight.fill(0.0);
            l.bias.fill(0.0);
        }
        let s = screen(6, 5);
        let reg = ProviderRegistry::new();
        let f = m.assemble_features(&s, &s.elements[0], &reg).unwrap();
        assert_eq!(m.predict_element(&f).unwrap(), 0.5);
        assert_eq!(m.predict_ui(&s, &reg).unwrap().values(), &[0.2; 5]);
    }

    #[test]
    fn single_element_gets_everything() {
        let m = fitted(vec![]);
        let s = screen(7, 1);
        assert_eq!(m.predict_ui(&s, &ProviderRegistry::new()).unwrap().values(), &[1.0]);
    }

    #[test]
    fn predictions_follow_element_permutation() {
        let m = fitted(vec![]);
        let s = screen(8, 5);
        let reg = ProviderRegistry::new();
        let base = m.predict_ui(&s, &reg).unwrap();
        let mut shuffled = s.clone();
        shuffled.elements.reverse();
        let rev = m.predict_ui(&shuffled, &reg).unwrap();
        for i in 0..5 {
            assert_eq!(base.values()[i], rev.values()[4 - i]);
        }
    }

    #[test]
    fn logit_normalisation_matches_direct_ratio() {
        let z = [-2.0, 0.5, 3.0];
        let p: Vec<f64> = z.iter().map(|&v| sigmoid_scalar(v)).collect();
        let total: f64 = p.iter().sum();
        let v = normalize_logits(&z).unwrap();
        for (a, b) in v.values().iter().zip(&p) {
            assert!((a - b / total).abs() < 1e-15);
        }
        let far = normalize_logits(&[-2000.0, -2001.0]).unwrap();
        assert!((far.values()[0] - 1.0 / (1.0 + (-1.0f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn normalizer_floor() {
        let rows = vec![LowLevelFeatures([1.0; LOW_LEVEL_DIM]); 3];
        let n = FeatureNormalizer::fit(&rows).unwrap();
        assert!(n.std.iter().all(|&s| s == STD_FLOOR));
        assert_eq!(n.apply(&rows[0]), [0.0; LOW_LEVEL_DIM]);
    }
}
