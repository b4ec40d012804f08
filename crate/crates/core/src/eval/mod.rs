//! Saliency metrics, dataset reports and cross-validation.

mod crossval;
mod folds;
mod metrics;
mod report;

pub use crossval::{crossval, crossval_k, CrossvalReport, FoldResult};
pub use folds::{FoldSplit, DEFAULT_FOLDS};
pub use metrics::{
    auc, auc_with_ids, average_ranks, cc, kl, positive_count, positive_mask, spearman, Correlation, KL_EPSILON,
};
pub use report::{
    evaluate_dataset, evaluate_uniform, evaluate_with, screen_metrics, MeanMetrics, MetricReport, ScreenMetrics,
    Skipped,
};
