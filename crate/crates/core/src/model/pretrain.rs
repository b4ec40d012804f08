//! Denoising autoencoder pretraining for one scale.

use super::autoencoder::Autoencoder;
use super::config::TrainConfig;
use super::history::TrainHistory;
use crate::error::{shape_err, Error, Result};
use crate::features::{corrupt_pixels, CROP_SHAPE};
use crate::numerics::{euclidean_loss, Optimizer, Tensor};
use crate::par;
use crate::rng::SeededRng;

// Stream tags for `SeededRng::derive`.
const INIT: u64 = 0;
const SPLIT: u64 = 1;
const ORDER: u64 = 2;
const EVAL_NOISE: u64 = 3;
const TRAIN_NOISE: u64 = 4;

/// Mean reconstruction loss against the clean crops, with a corruption
/// pattern fixed by `seed` and the crop index.
pub fn reconstruction_loss(ae: &Autoencoder, crops: &[&Tensor<f32>], corruption: f64, seed: u64) -> Result<f64> {
    if crops.is_empty() {
        return Err(Error::EmptyDataset("no crops to evaluate".into()));
    }
    let losses = par::map_range(crops.len(), |i| -> Result<f64> {
        let mut rng = SeededRng::derive(seed, &[EVAL_NOISE, i as u64]);
        let noisy = corrupt_pixels(crops[i], corruption, &mut rng)?;
        let out = ae.reconstruct(&noisy)?;
        Ok(euclidean_loss(&out, crops[i])?.0 as f64)
    });
    let mut total = 0.0;
    for l in losses {
        total += l?;
    }
    Ok(total / crops.len() as f64)
}

pub fn pretrain_autoencoder(crops: &[Tensor<f32>], cfg: &TrainConfig) -> Result<(Autoencoder, TrainHistory)> {
    pretrain_autoencoder_with(crops, cfg, |_| true)
}

/// Pretrains with a per-epoch callback; returning `false` stops training.
///
/// Crops are split into train/validation by seed. Each step corrupts every
/// crop of the batch with its own derived stream, sums per-crop gradients in
/// batch order and takes one optimizer step on the batch mean. The weights
/// with the lowest validation reconstruction loss are returned (training
/// loss when there is no validation split).
pub fn pretrain_autoencoder_with(
    crops: &[Tensor<f32>],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&TrainHistory) -> bool,
) -> Result<(Autoencoder, TrainHistory)> {
    cfg.validate()?;
    if crops.is_empty() {
        return Err(Error::EmptyDataset("no crops to pretrain on".into()));
    }
    if let Some(c) = crops.iter().find(|c| c.shape() != CROP_SHAPE) {
        return Err(shape_err(format!(
            "pretraining crop {:?}, expected {CROP_SHAPE:?}",
            c.shape()
        )));
    }

    let mut order: Vec<usize> = (0..crops.len()).collect();
    SeededRng::derive(cfg.seed, &[SPLIT]).shuffle(&mut order);
    let n_val = cfg.validation_count(crops.len());
    let (val_idx, train_idx) = order.split_at(n_val);
    let mut train_idx = train_idx.to_vec();
    train_idx.sort_unstable();
    let train: Vec<&Tensor<f32>> = train_idx.iter().map(|&i| &crops[i]).collect();
    let val: Vec<&Tensor<f32>> = val_idx.iter().map(|&i| &crops[i]).collect();
    let selection = if val.is_empty() { &train } else { &val };

    let mut ae = Autoencoder::<f32>::init(&mut SeededRng::derive(cfg.seed, &[INIT]));
    let mut opt = Optimizer::<f32>::new(cfg.optimizer, cfg.lr, cfg.l2);
    let mut history = TrainHistory {
        initial_loss: reconstruction_loss(&ae, selection, cfg.corruption, cfg.seed)?,
        ..Default::default()
    };
    let mut best = ae.clone();

    for epoch in 0..cfg.epochs {
        let mut perm: Vec<usize> = (0..train.len()).collect();
        SeededRng::derive(cfg.seed, &[ORDER, epoch as u64]).shuffle(&mut perm);
        let mut epoch_loss = 0.0;
        for batch in perm.chunks(cfg.batch_size) {
            let results = par::map_slice(batch, |&i| -> Result<(f64, Vec<Tensor<f32>>)> {
                let mut rng = SeededRng::derive(cfg.seed, &[TRAIN_NOISE, epoch as u64, train_idx[i] as u64]);
                let noisy = corrupt_pixels(train[i], cfg.corruption, &mut rng)?;
                let cache = ae.forward(&noisy)?;
                let (loss, grad) = euclidean_loss(cache.output(), train[i])?;
                Ok((loss as f64, ae.backward(&cache, &grad)?))
            });
            let mut sum: Option<Vec<Tensor<f32>>> = None;
            for r in results {
                let (loss, grads) = r?;
                epoch_loss += loss;
                match sum.as_mut() {
                    None => sum = Some(grads),
                    Some(acc) => {
                        for (a, g) in acc.iter_mut().zip(&grads) {
                            a.add_assign(g)?;
                        }
                    }
                }
            }
            let mut grads = sum.expect("non-empty batch");
            for g in grads.iter_mut() {
                g.scale(1.0 / batch.len() as f32);
            }
            opt.step(&mut ae.params_mut(), &grads)?;
        }
        if ae.layers.iter().any(|l| !l.weight.all_finite() || !l.bias.all_finite()) {
            return Err(Error::Numeric(format!(
                "autoencoder weights diverged in epoch {}",
                epoch + 1
            )));
        }
        let val_loss = reconstruction_loss(&ae, selection, cfg.corruption, cfg.seed)?;
        if history.record(epoch_loss / train.len() as f64, val_loss) {
            best = ae.clone();
        }
        log::debug!(
            "ae epoch {} train {} val {}",
            epoch + 1,
            epoch_loss / train.len() as f64,
            val_loss
        );
        if !on_epoch(&history) || cfg.patience.is_some_and(|p| history.stale_epochs() >= p) {
            break;
        }
    }
    Ok((best, history))
}
