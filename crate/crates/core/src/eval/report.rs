//! Per-screen metrics and dataset aggregation.

use serde::{Deserialize, Serialize};

use super::metrics::{auc_with_ids, cc, kl};
use crate::error::{Error, Result};
use crate::features::UiScreen;
use crate::gaze::ElementSaliencyVector;
use crate::model::{ProviderRegistry, SaliencyModel};
use crate::par;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenMetrics {
    pub id: String,
    pub auc: f64,
    pub cc: f64,
    pub kl: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub cc_degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanMetrics {
    pub auc: f64,
    pub cc: f64,
    pub kl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub per_screen: Vec<ScreenMetrics>,
    pub mean: MeanMetrics,
    pub skipped: Vec<Skipped>,
}

impl MeanMetrics {
    /// Unweighted mean; `None` for an empty slice.
    pub fn of(items: impl IntoIterator<Item = (f64, f64, f64)>) -> Option<Self> {
        let (mut a, mut c, mut k, mut n) = (0.0, 0.0, 0.0, 0usize);
        for (x, y, z) in items {
            a += x;
            c += y;
            k += z;
            n += 1;
        }
        (n > 0).then(|| Self {
            auc: a / n as f64,
            cc: c / n as f64,
            kl: k / n as f64,
        })
    }
}

/// All three metrics for one screen. Errors describe why the screen cannot
/// be scored.
pub fn screen_metrics(screen: &UiScreen, pred: &ElementSaliencyVector) -> Result<ScreenMetrics> {
    let gt = screen
        .ground_truth
        .as_ref()
        .ok_or_else(|| Error::MissingGroundTruth(screen.id.clone()))?;
    let ids: Vec<u32> = screen.elements.iter().map(|e| e.id).collect();
    let c = cc(gt.values(), pred.values())?;
    Ok(ScreenMetrics {
        id: screen.id.clone(),
        auc: auc_with_ids(gt.values(), pred.values(), &ids)?,
        cc: c.value,
        kl: kl(gt.values(), pred.values())?,
        cc_degenerate: c.degenerate,
    })
}

/// Scores `predict` on every screen. Screens whose metrics are undefined
/// (fewer than two elements) are listed as skipped; any other error aborts.
pub fn evaluate_with<F>(screens: &[UiScreen], predict: F) -> Result<MetricReport>
where
    F: Fn(&UiScreen) -> Result<ElementSaliencyVector> + Sync + Send,
{
    if screens.is_empty() {
        return Err(Error::EmptyDataset("no screens to evaluate".into()));
    }
    for s in screens {
        if s.ground_truth.is_none() {
            return Err(Error::MissingGroundTruth(s.id.clone()));
        }
    }
    let results = par::map_slice(screens, |s| -> Result<Result<ScreenMetrics, Skipped>> {
        if s.elements.len() < 2 {
            return Ok(Err(Skipped {
                id: s.id.clone(),
                reason: format!("{} element(s); AUC needs a negative class", s.elements.len()),
            }));
        }
        Ok(Ok(screen_metrics(s, &predict(s)?)?))
    });
    let mut per_screen = Vec::new();
    let mut skipped = Vec::new();
    for r in results {
        match r? {
            Ok(m) => per_screen.push(m),
            Err(s) => skipped.push(s),
        }
    }
    let mean = MeanMetrics::of(per_screen.iter().map(|m| (m.auc, m.cc, m.kl)))
        .ok_or_else(|| Error::InsufficientData("every screen was skipped".into()))?;
    Ok(MetricReport {
        per_screen,
        mean,
        skipped,
    })
}

pub fn evaluate_dataset(
    model: &SaliencyModel,
    screens: &[UiScreen],
    registry: &ProviderRegistry,
) -> Result<MetricReport> {
    evaluate_with(screens, |s| model.predict_ui(s, registry))
}

/// The `1/k` predictor every learned model has to beat.
pub fn evaluate_uniform(screens: &[UiScreen]) -> Result<MetricReport> {
    evaluate_with(screens, |s| ElementSaliencyVector::uniform(s.elements.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toolkit::{synth_screens, SynthConfig};

    fn screens() -> Vec<UiScreen> {
        let cfg = SynthConfig {
            screens: 5,
            max_elements: 12,
            ..Default::default()
        };
        synth_screens(&cfg).unwrap().into_iter().map(|s| s.screen).collect()
    }

    #[test]
    fn perfect_predictor() {
        let s = screens();
        let r = evaluate_with(&s, |x| Ok(x.ground_truth.clone().unwrap())).unwrap();
        assert_eq!(r.mean.auc, 1.0);
        assert!((r.mean.cc - 1.0).abs() < 1e-12);
        assert!(r.mean.kl.abs() < 1e-9);
    }

    #[test]
    fn uniform_is_chance() {
        let r = evaluate_uniform(&screens()).unwrap();
        assert_eq!(r.mean.auc, 0.5);
        assert_eq!(r.mean.cc, 0.0);
        assert!(r.per_screen.iter().all(|m| m.cc_degenerate));
    }

    #[test]
    fn means_are_plain_averages() {
        let s = screens();
        let r = evaluate_with(&s, |x| {
            let k = x.elements.len();
            let w: Vec<f64> = (1..=k).map(|i| i as f64).collect();
            ElementSaliencyVector::normalized(&w)
        })
        .unwrap();
        let n = r.per_screen.len() as f64;
        let auc: f64 = r.per_screen.iter().map(|m| m.auc).sum::<f64>() / n;
        let kl: f64 = r.per_screen.iter().map(|m| m.kl).sum::<f64>() / n;
        assert!((r.mean.auc - auc).abs() < 1e-15);
        assert!((r.mean.kl - kl).abs() < 1e-15);
    }

    #[test]
    fn single_element_screens_are_skipped() {
        let mut s = screens();
        let first = &mut s[0];
        first.elements.truncate(1);
        first.ground_truth = Some(ElementSaliencyVector::uniform(1).unwrap());
        let r = evaluate_uniform(&s).unwrap();
        assert_eq!(r.skipped.len(), 1);
        assert_eq!(r.skipped[0].id, s[0].id);
        assert_eq!(r.per_screen.len(), 4);
    }

    #[test]
    fn json_shape() {
        let r = evaluate_uniform(&screens()).unwrap();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        assert!(v["per_screen"][0]["auc"].is_number());
        assert!(v["mean"]["kl"].is_number());
        assert!(v["skipped"].is_array());
    }
}
