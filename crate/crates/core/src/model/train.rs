//! Head training. Encoders stay frozen unless fine-tuning is requested, in
//! which case their gradients flow back from the head's input.

use super::autoencoder::{EncoderCache, CODE_LEN};
use super::config::TrainConfig;
use super::head::{head_loss, SaliencyHead};
use super::history::TrainHistory;
use super::providers::{hook_block, FeatureProvider, ProviderRegistry};
use super::saliency::{FeatureNormalizer, SaliencyModel};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::features::{extract_scales, image_moments, low_level_features_with, ColorMoments, UiScreen};
use crate::numerics::{Optimizer, Tensor};
use crate::par;
use crate::rng::SeededRng;

const SPLIT: u64 = 10;
const ORDER: u64 = 11;
const DROPOUT: u64 = 12;
const EVAL_CHUNK: usize = 128;

/// Screen indices held out for validation and kept for training, both
/// ascending.
pub fn split_screens(n: usize, cfg: &TrainConfig) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..n).collect();
    SeededRng::derive(cfg.seed, &[SPLIT]).shuffle(&mut order);
    let (val, train) = order.split_at(cfg.validation_count(n));
    let (mut train, mut val) = (train.to_vec(), val.to_vec());
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

/// Ground-truth targets of every element in `screens`, in order.
fn targets(screens: &[&UiScreen]) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for s in screens {
        let gt = s
            .ground_truth
            .as_ref()
            .ok_or_else(|| Error::MissingGroundTruth(s.id.clone()))?;
        out.extend_from_slice(gt.values());
    }
    Ok(out)
}

fn fit_normalizer(screens: &[&UiScreen]) -> Result<FeatureNormalizer> {
    let mut rows = Vec::new();
    for s in screens {
        let stats = image_moments(&s.image)?;
        for e in &s.elements {
            rows.push(low_level_features_with(&stats, s, e)?);
        }
    }
    FeatureNormalizer::fit(&rows)
}

fn feature_matrix(model: &SaliencyModel, screens: &[&UiScreen], registry: &ProviderRegistry) -> Result<Vec<f32>> {
    let mut out = Vec::new();
    for s in screens {
        out.extend(model.screen_features(s, registry)?);
    }
    Ok(out)
}

/// Mean loss over all rows with dropout off.
pub fn dataset_loss(model: &SaliencyModel, rows: &[f32], targets: &[f64], cfg: &TrainConfig) -> Result<f64> {
    let dim = model.feature_dim();
    let mut total = 0.0;
    for (x, t) in rows.chunks(EVAL_CHUNK * dim).zip(targets.chunks(EVAL_CHUNK)) {
        let cache = model.head.forward_batch(x, t.len(), 0.0, None)?;
        total += head_loss(cfg.loss, cache.logits(), t)?.0 * t.len() as f64;
    }
    Ok(total / targets.len() as f64)
}

/// Loss of `model` over every element of `screens` (dropout off).
pub fn evaluate_loss(
    model: &SaliencyModel,
    screens: &[UiScreen],
    cfg: &TrainConfig,
    registry: &ProviderRegistry,
) -> Result<f64> {
    let refs: Vec<&UiScreen> = screens.iter().collect();
    let t = targets(&refs)?;
    dataset_loss(model, &feature_matrix(model, &refs, registry)?, &t, cfg)
}

pub fn train_saliency(
    model: SaliencyModel,
    screens: &[UiScreen],
    cfg: &TrainConfig,
    registry: &ProviderRegistry,
) -> Result<(SaliencyModel, TrainHistory)> {
    train_saliency_with(model, screens, cfg, false, registry, |_| true)
}

/// Trains the head (and, with `fine_tune`, the encoder halves of the
/// autoencoders) on screens with ground truth.
///
/// A seeded fraction of screens is held out; the normaliser is fitted on the
/// rest. Each epoch visits the training elements in a seeded order in
/// batches of `cfg.batch_size`, then evaluates the held-out loss with dropout
/// off. The weights with the lowest held-out loss (training loss without a
/// held-out split) are returned. `on_epoch` returning `false` stops early.
pub fn train_saliency_with(
    mut model: SaliencyModel,
    screens: &[UiScreen],
    cfg: &TrainConfig,
    fine_tune: bool,
    registry: &ProviderRegistry,
    mut on_epoch: impl FnMut(&TrainHistory) -> bool,
) -> Result<(SaliencyModel, TrainHistory)> {
    cfg.validate()?;
    if screens.is_empty() {
        return Err(Error::EmptyDataset("no screens to train on".into()));
    }
    for s in screens {
        s.validate()?;
        if s.ground_truth.is_none() {
            return Err(Error::MissingGroundTruth(s.id.clone()));
        }
    }
    model.validate()?;
    registry.resolve(&model.hooks)?;

    let (train_idx, val_idx) = split_screens(screens.len(), cfg);
    let train: Vec<&UiScreen> = train_idx.iter().map(|&i| &screens[i]).collect();
    let val: Vec<&UiScreen> = val_idx.iter().map(|&i| &screens[i]).collect();
    model.normalizer = Some(fit_normalizer(&train)?);
    let train_t = targets(&train)?;
    let val_t = targets(&val)?;
    let n = train_t.len();
    let dim = model.feature_dim();

    let mut cached = if fine_tune {
        None
    } else {
        let x = feature_matrix(&model, &train, registry)?;
        let xv = feature_matrix(&model, &val, registry)?;
        Some((x, xv))
    };
    let elements: Vec<(usize, usize)> = train
        .iter()
        .enumerate()
        .flat_map(|(s, sc)| (0..sc.elements.len()).map(move |e| (s, e)))
        .collect();
    let stats: Vec<ColorMoments> = if fine_tune {
        train.iter().map(|s| image_moments(&s.image)).collect::<Result<_>>()?
    } else {
        Vec::new()
    };

    let selection_loss = |m: &SaliencyModel, cached: &Option<(Vec<f32>, Vec<f32>)>| -> Result<f64> {
        match (cached, val.is_empty()) {
            (Some((x, _)), true) => dataset_loss(m, x, &train_t, cfg),
            (Some((_, xv)), false) => dataset_loss(m, xv, &val_t, cfg),
            (None, true) => dataset_loss(m, &feature_matrix(m, &train, registry)?, &train_t, cfg),
            (None, false) => dataset_loss(m, &feature_matrix(m, &val, registry)?, &val_t, cfg),
        }
    };

    let mut head_opt = Optimizer::<f32>::new(cfg.optimizer, cfg.lr, cfg.l2);
    let mut enc_opts: Vec<Optimizer<f32>> = (0..3).map(|_| Optimizer::new(cfg.optimizer, cfg.lr, cfg.l2)).collect();
    let mut history = TrainHistory {
        initial_loss: selection_loss(&model, &cached)?,
        ..Default::default()
    };
    let mut best = model.clone();
    let providers = registry.resolve(&model.hooks)?;

    for epoch in 0..cfg.epochs {
        let mut perm: Vec<usize> = (0..n).collect();
        SeededRng::derive(cfg.seed, &[ORDER, epoch as u64]).shuffle(&mut perm);
        let mut epoch_loss = 0.0;
        for (b, batch) in perm.chunks(cfg.batch_size).enumerate() {
            let t: Vec<f64> = batch.iter().map(|&i| train_t[i]).collect();
            let mut rng = SeededRng::derive(cfg.seed, &[DROPOUT, epoch as u64, b as u64]);
            let loss = match &mut cached {
                Some((x, _)) => {
                    let mut xb = Vec::with_capacity(batch.len() * dim);
                    for &i in batch {
                        xb.extend_from_slice(&x[i * dim..(i + 1) * dim]);
                    }
                    let cache = model
                        .head
                        .forward_batch(&xb, batch.len(), cfg.dropout, Some(&mut rng))?;
                    let (loss, gz) = head_loss(cfg.loss, cache.logits(), &t)?;
                    let (grads, _) = model.head.backward_batch(&xb, &cache, &gz, false)?;
                    head_opt.step(&mut model.head.params_mut(), &grads)?;
                    loss
                }
                None => {
                    let items: Vec<(usize, usize)> = batch.iter().map(|&i| elements[i]).collect();
                    fine_tune_step(
                        &mut model,
                        &train,
                        &stats,
                        &providers,
                        &items,
                        &t,
                        cfg,
                        &mut rng,
                        &mut head_opt,
                        &mut enc_opts,
                    )?
                }
            };
            epoch_loss += loss * batch.len() as f64;
        }
        if !head_is_finite(&model.head) {
            return Err(Error::Numeric(format!("head weights diverged in epoch {}", epoch + 1)));
        }
        let sel = selection_loss(&model, &cached)?;
        if history.record(epoch_loss / n as f64, sel) {
            best = model.clone();
        }
        log::debug!("head epoch {} train {} val {}", epoch + 1, epoch_loss / n as f64, sel);
        if !on_epoch(&history) || cfg.patience.is_some_and(|p| history.stale_epochs() >= p) {
            break;
        }
    }
    Ok((best, history))
}

fn head_is_finite(head: &SaliencyHead) -> bool {
    head.layers.iter().all(|l| l.weight.all_finite() && l.bias.all_finite())
}

#[allow(clippy::too_many_arguments)]
fn fine_tune_step(
    model: &mut SaliencyModel,
    screens: &[&UiScreen],
    stats: &[ColorMoments],
    providers: &[Arc<dyn FeatureProvider>],
    items: &[(usize, usize)],
    targets: &[f64],
    cfg: &TrainConfig,
    rng: &mut SeededRng,
    head_opt: &mut Optimizer<f32>,
    enc_opts: &mut [Optimizer<f32>],
) -> Result<f64> {
    let dim = model.feature_dim();
    let normalizer = model.normalizer.clone().expect("fitted before training");
    let m: &SaliencyModel = model;
    type Forward = (Vec<f32>, [EncoderCache<f32>; 3]);
    let forwards = par::map_slice(items, |&(s, e)| -> Result<Forward> {
        let screen = screens[s];
        let element = &screen.elements[e];
        let scales = extract_scales(screen, element)?;
        let caches: [EncoderCache<f32>; 3] = [
            m.encoders[0].encode_cached(&scales.crops[0])?,
            m.encoders[1].encode_cached(&scales.crops[1])?,
            m.encoders[2].encode_cached(&scales.crops[2])?,
        ];
        let mut row = Vec::with_capacity(dim);
        for c in &caches {
            row.extend_from_slice(c.code.data());
        }
        row.extend(normalizer.apply(&low_level_features_with(&stats[s], screen, element)?));
        row.extend(hook_block(providers, screen, element)?);
        Ok((row, caches))
    });
    let mut xb = Vec::with_capacity(items.len() * dim);
    let mut caches = Vec::with_capacity(items.len());
    for f in forwards {
        let (row, c) = f?;
        xb.extend(row);
        caches.push(c);
    }

    let cache = m.head.forward_batch(&xb, items.len(), cfg.dropout, Some(rng))?;
    let (loss, gz) = head_loss(cfg.loss, cache.logits(), targets)?;
    let (head_grads, dx) = m.head.backward_batch(&xb, &cache, &gz, true)?;
    let dx = dx.expect("requested");

    let code_shape = caches[0][0].code.shape().to_vec();
    let enc_grads = par::map_range(items.len(), |r| -> Result<Vec<Vec<Tensor<f32>>>> {
        (0..3)
            .map(|k| {
                let start = r * dim + k * CODE_LEN;
                let g = Tensor::new(code_shape.clone(), dx[start..start + CODE_LEN].to_vec())?;
                m.encoders[k].encoder_backward(&caches[r][k], &g)
            })
            .collect()
    });
    let mut sums: Vec<Option<Vec<Tensor<f32>>>> = vec![None, None, None];
    for per_row in enc_grads {
        for (k, g) in per_row?.into_iter().enumerate() {
            match sums[k].as_mut() {
                None => sums[k] = Some(g),
                Some(acc) => {
                    for (a, b) in acc.iter_mut().zip(&g) {
                        a.add_assign(b)?;
                    }
                }
            }
        }
    }

    head_opt.step(&mut model.head.params_mut(), &head_grads)?;
    for (k, (enc, opt)) in model.encoders.iter_mut().zip(enc_opts).enumerate() {
        let grads = sums[k].take().expect("non-empty batch");
        opt.step(&mut enc.encoder_params_mut(), &grads)?;
    }
    Ok(loss)
}
