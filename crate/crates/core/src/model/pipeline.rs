//! Dataset to trained model: pretrain one autoencoder per scale, then train
//! the head on top of them.

use serde::{Deserialize, Serialize};

use super::autoencoder::Autoencoder;
use super::config::{ExperimentConfig, TrainConfig};
use super::history::TrainHistory;
use super::pretrain::pretrain_autoencoder;
use super::providers::ProviderRegistry;
use super::saliency::SaliencyModel;
use super::train::train_saliency_with;
use crate::error::{Error, Result};
use crate::features::{crop_resized, scale_boxes, BoundingBox, UiScreen};
use crate::numerics::Tensor;
use crate::par;
use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitHistory {
    pub autoencoders: Vec<TrainHistory>,
    pub head: TrainHistory,
}

/// Crop regions for one scale. The whole-screen scale has one region per
/// screen; the others one per element.
pub fn scale_regions(screens: &[UiScreen], scale: usize) -> Vec<(usize, BoundingBox)> {
    let mut out = Vec::new();
    for (i, s) in screens.iter().enumerate() {
        if scale == 2 {
            out.push((i, BoundingBox::full(s.width(), s.height())));
            continue;
        }
        for e in &s.elements {
            out.push((i, scale_boxes(&e.bbox, s.width(), s.height())[scale]));
        }
    }
    out
}

/// Pretraining crops for one scale, subsampled to at most `limit` by seed.
pub fn pretraining_crops(screens: &[UiScreen], scale: usize, limit: Option<usize>, seed: u64) -> Vec<Tensor<f32>> {
    let mut regions = scale_regions(screens, scale);
    if let Some(limit) = limit.filter(|&l| l < regions.len()) {
        let mut keep = SeededRng::derive(seed, &[0x4352_4f50, scale as u64]).sample_indices(regions.len(), limit);
        keep.sort_unstable();
        regions = keep.into_iter().map(|i| regions[i]).collect();
    }
    par::map_slice(&regions, |(i, b)| crop_resized(&screens[*i].image, b))
}

fn scale_seed(seed: u64, scale: usize) -> u64 {
    SeededRng::derive(seed, &[0x5343_414c, scale as u64]).next_u64()
}

/// Pretrains the three autoencoders.
pub fn pretrain_scales(
    screens: &[UiScreen],
    cfg: &TrainConfig,
    limit: Option<usize>,
) -> Result<([Autoencoder<f32>; 3], Vec<TrainHistory>)> {
    let mut encoders = Vec::with_capacity(3);
    let mut histories = Vec::with_capacity(3);
    for scale in 0..3 {
        let crops = pretraining_crops(screens, scale, limit, cfg.seed);
        let scfg = TrainConfig {
            seed: scale_seed(cfg.seed, scale),
            ..cfg.clone()
        };
        let (ae, h) = pretrain_autoencoder(&crops, &scfg)?;
        log::info!(
            "scale {scale}: {} crops, reconstruction {:.4} -> {:.4}",
            crops.len(),
            h.initial_loss,
            h.best_val_loss()
        );
        encoders.push(ae);
        histories.push(h);
    }
    let encoders: [Autoencoder<f32>; 3] = encoders.try_into().map_err(|_| Error::Invalid("three scales".into()))?;
    Ok((encoders, histories))
}

/// Full training run on `screens` (all of which need ground truth).
pub fn fit_model(
    screens: &[UiScreen],
    cfg: &ExperimentConfig,
    registry: &ProviderRegistry,
) -> Result<(SaliencyModel, FitHistory)> {
    cfg.validate()?;
    if screens.is_empty() {
        return Err(Error::EmptyDataset("no screens to fit".into()));
    }
    let (encoders, autoencoders) = pretrain_scales(screens, &cfg.autoencoder, cfg.max_crops_per_scale)?;
    let (model, head) = fit_head(encoders, screens, cfg, registry)?;
    Ok((model, FitHistory { autoencoders, head }))
}

/// Trains a fresh head on top of already pretrained encoders.
pub fn fit_head(
    encoders: [Autoencoder<f32>; 3],
    screens: &[UiScreen],
    cfg: &ExperimentConfig,
    registry: &ProviderRegistry,
) -> Result<(SaliencyModel, TrainHistory)> {
    cfg.validate()?;
    let hooks = registry.specs(&cfg.providers)?;
    let model = SaliencyModel::new(encoders, cfg.hidden, hooks, cfg.head.seed);
    let (model, head) = train_saliency_with(model, screens, &cfg.head, cfg.fine_tune, registry, |_| true)?;
    log::info!(
        "head: best epoch {} of {}, loss {:.5}",
        head.best_epoch + 1,
        head.epochs(),
        head.best_val_loss()
    );
    Ok((model, head))
}
