use serde::{Deserialize, Serialize};

use super::folds::{FoldSplit, DEFAULT_FOLDS};
use super::report::{evaluate_dataset, MeanMetrics, MetricReport};
use crate::error::{Error, Result};
use crate::features::UiScreen;
use crate::model::{fit_model, ExperimentConfig, FitHistory, ProviderRegistry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub test_ids: Vec<String>,
    pub report: MetricReport,
    pub history: FitHistory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossvalReport {
    pub seed: u64,
    pub folds: Vec<FoldResult>,
    /// Unweighted mean of the fold means.
    pub fold_mean: MeanMetrics,
    /// Unweighted mean over every scored screen.
    pub pooled_mean: MeanMetrics,
}

/// k-fold cross-validation: each fold is scored by a model fitted from
/// scratch on the remaining folds. Folds run in order.
pub fn crossval(
    screens: &[UiScreen],
    cfg: &ExperimentConfig,
    seed: u64,
    registry: &ProviderRegistry,
) -> Result<CrossvalReport> {
    crossval_k(screens, cfg, seed, DEFAULT_FOLDS, registry)
}

pub fn crossval_k(
    screens: &[UiScreen],
    cfg: &ExperimentConfig,
    seed: u64,
    k: usize,
    registry: &ProviderRegistry,
) -> Result<CrossvalReport> {
    let split = FoldSplit::new(screens.len(), k, seed)?;
    let cfg = cfg.with_seed(seed);
    let mut folds = Vec::with_capacity(k);
    for (f, test_idx) in split.folds.iter().enumerate() {
        let train: Vec<UiScreen> = split.train_indices(f).into_iter().map(|i| screens[i].clone()).collect();
        let test: Vec<UiScreen> = test_idx.iter().map(|&i| screens[i].clone()).collect();
        log::info!("fold {}/{k}: {} train, {} test screens", f + 1, train.len(), test.len());
        let (model, history) = fit_model(&train, &cfg, registry)?;
        let report = evaluate_dataset(&model, &test, registry)?;
        log::info!(
            "fold {}: auc {:.4} cc {:.4} kl {:.4}",
            f + 1,
            report.mean.auc,
            report.mean.cc,
            report.mean.kl
        );
        folds.push(FoldResult {
            fold: f,
            test_ids: test.iter().map(|s| s.id.clone()).collect(),
            report,
            history,
        });
    }
    let fold_mean = MeanMetrics::of(
        folds
            .iter()
            .map(|f| (f.report.mean.auc, f.report.mean.cc, f.report.mean.kl)),
    )
    .ok_or_else(|| Error::InsufficientData("no folds".into()))?;
    let pooled_mean = MeanMetrics::of(
        folds
            .iter()
            .flat_map(|f| f.report.per_screen.iter().map(|m| (m.auc, m.cc, m.kl))),
    )
    .ok_or_else(|| Error::InsufficientData("no scored screens".into()))?;
    Ok(CrossvalReport {
        seed,
        folds,
        fold_mean,
        pooled_mean,
    })
}
