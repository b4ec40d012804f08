use std::fmt::Write;

use serde::{Deserialize, Serialize};

/// Per-epoch losses of one training run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// Zero-based index of the epoch whose weights were kept.
    pub best_epoch: usize,
    /// Selection loss before the first update.
    pub initial_loss: f64,
}

impl TrainHistory {
    pub fn epochs(&self) -> usize {
        self.train_loss.len()
    }

    pub fn best_val_loss(&self) -> f64 {
        self.val_loss.get(self.best_epoch).copied().unwrap_or(f64::NAN)
    }

    /// Running minimum of the training loss.
    pub fn train_envelope(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.train_loss
            .iter()
            .map(|&l| {
                best = best.min(l);
                best
            })
            .collect()
    }

    /// One `epoch train_loss val_loss` line per epoch, epochs counted from 1.
    pub fn metrics_log(&self) -> String {
        let mut s = String::from("epoch train_loss val_loss\n");
        for (e, (t, v)) in self.train_loss.iter().zip(&self.val_loss).enumerate() {
            let _ = writeln!(s, "{} {t} {v}", e + 1);
        }
        s
    }

    pub(crate) fn record(&mut self, train: f64, val: f64) -> bool {
        self.train_loss.push(train);
        self.val_loss.push(val);
        let e = self.val_loss.len() - 1;
        let improved = e == 0 || val < self.val_loss[self.best_epoch];
        if improved {
            self.best_epoch = e;
        }
        improved
    }

    pub(crate) fn stale_epochs(&self) -> usize {
        self.val_loss.len() - 1 - self.best_epoch
    }
}
