//! Autoencoders, the saliency head and their training loops.

mod autoencoder;
mod config;
mod gradsuite;
mod head;
mod history;
mod pipeline;
mod pretrain;
mod providers;
mod saliency;
mod train;

pub use autoencoder::{
    AeCache, Autoencoder, EncoderCache, CODE_CHANNELS, CODE_HEIGHT, CODE_LEN, CODE_WIDTH, LAYER_NAMES,
};
pub use config::{ExperimentConfig, TrainConfig};
pub use gradsuite::{gradient_suite, run_case, SuiteResult, SUITE_CASES, SUITE_EPS, SUITE_TOLERANCE};
pub use head::{head_loss, HeadCache, LossKind, SaliencyHead, DEFAULT_HIDDEN, HEAD_LAYER_NAMES};
pub use history::TrainHistory;
pub use pipeline::{fit_head, fit_model, pretrain_scales, pretraining_crops, scale_regions, FitHistory};
pub use pretrain::{pretrain_autoencoder, pretrain_autoencoder_with, reconstruction_loss};
pub use providers::{FeatureProvider, FnProvider, HookSpec, ProviderRegistry, ZeroProvider};
pub use saliency::{
    feature_dim, normalize_logits, FeatureNormalizer, SaliencyModel, ScreenContext, BASE_FEATURE_DIM, STD_FLOOR,
};
pub use train::{dataset_loss, evaluate_loss, split_screens, train_saliency, train_saliency_with};
