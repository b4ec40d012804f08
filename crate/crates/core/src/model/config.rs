use serde::{Deserialize, Serialize};

use super::head::{LossKind, DEFAULT_HIDDEN};
use crate::error::{Error, Result};
use crate::numerics::{check_rate, OptimizerKind};

/// Hyperparameters shared by autoencoder pretraining and head training.
/// `dropout` and `loss` only affect the head; `corruption` only the
/// autoencoders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub optimizer: OptimizerKind,
    pub lr: f64,
    pub l2: f64,
    pub dropout: f64,
    pub corruption: f64,
    pub loss: LossKind,
    pub seed: u64,
    pub validation_fraction: f64,
    /// Stop after this many epochs without a validation improvement.
    pub patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 30,
            epochs: 50,
            optimizer: OptimizerKind::Adam,
            lr: 1e-3,
            l2: 1e-4,
            dropout: 0.5,
            corruption: 0.25,
            loss: LossKind::Bce,
            seed: 0,
            validation_fraction: 0.1,
            patience: Some(10),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("learning rate {} must be positive", self.lr));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return bad(format!("l2 {} must be non-negative", self.l2));
        }
        check_rate(self.dropout)?;
        if !(0.0..=1.0).contains(&self.corruption) {
            return bad(format!("corruption {} outside [0, 1]", self.corruption));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad(format!(
                "validation_fraction {} outside [0, 1)",
                self.validation_fraction
            ));
        }
        if self.patience == Some(0) {
            return bad("patience must be at least 1 when set".into());
        }
        Ok(())
    }

    /// Number of held-out items out of `n`: at least one when the fraction is
    /// positive and `n ≥ 2`, never all of them.
    pub fn validation_count(&self, n: usize) -> usize {
        if self.validation_fraction == 0.0 || n < 2 {
            return 0;
        }
        ((n as f64 * self.validation_fraction).round() as usize).clamp(1, n - 1)
    }
}

/// Everything needed to go from a dataset to a trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub autoencoder: TrainConfig,
    pub head: TrainConfig,
    pub hidden: [usize; 2],
    /// Backpropagate into the encoders during head training.
    pub fine_tune: bool,
    /// Cap on pretraining crops per scale, sampled by seed.
    pub max_crops_per_scale: Option<usize>,
    /// Registered feature providers whose blocks are appended to the input.
    pub providers: Vec<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            autoencoder: TrainConfig {
                epochs: 20,
                patience: None,
                ..TrainConfig::default()
            },
            head: TrainConfig::default(),
            hidden: DEFAULT_HIDDEN,
            fine_tune: false,
            max_crops_per_scale: None,
            providers: Vec::new(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.autoencoder.validate()?;
        self.head.validate()?;
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden widths must be positive".into()));
        }
        if self.max_crops_per_scale == Some(0) {
            return Err(Error::Config("max_crops_per_scale must be positive".into()));
        }
        Ok(())
    }

    /// Copy with both stage seeds replaced.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.autoencoder.seed = seed;
        c.head.seed = seed;
        c
    }
}
