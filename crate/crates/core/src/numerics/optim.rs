//! Adam and plain SGD with coupled L2 regularisation.

use serde::{Deserialize, Serialize};

use super::{Real, Tensor};
use crate::error::{shape_err, Result};

/// A trainable tensor handed to an optimizer. `decay` selects whether the
/// L2 term applies (weights yes, biases no).
pub struct Param<'a, T> {
    pub value: &'a mut Tensor<T>,
    pub decay: bool,
}

impl<'a, T> Param<'a, T> {
    pub fn weight(value: &'a mut Tensor<T>) -> Self {
        Self { value, decay: true }
    }

    pub fn bias(value: &'a mut Tensor<T>) -> Self {
        Self { value, decay: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub l2: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            l2: 1e-4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdamState<T = f32> {
    pub config: AdamConfig,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
    t: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            m: Vec::new(),
            v: Vec::new(),
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn first_moments(&self) -> &[Tensor<T>] {
        &self.m
    }

    pub fn second_moments(&self) -> &[Tensor<T>] {
        &self.v
    }

    pub fn step(&mut self, params: &mut [Param<'_, T>], grads: &[Tensor<T>]) -> Result<()> {
        check_aligned(params, grads)?;
        if self.m.is_empty() {
            self.m = grads.iter().map(|g| Tensor::zeros(g.shape())).collect();
            self.v = self.m.clone();
        } else if self.m.len() != params.len() || self.m.iter().zip(grads).any(|(m, g)| m.shape() != g.shape()) {
            return Err(shape_err("adam state does not mirror parameters"));
        }

        self.t += 1;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powi(self.t as i32);
        let bc2 = 1.0 - c.beta2.powi(self.t as i32);
        let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
        let (one_b1, one_b2) = (T::of(1.0 - c.beta1), T::of(1.0 - c.beta2));
        let (lr, eps, l2) = (T::of(c.lr), T::of(c.eps), T::of(c.l2));
        let (bc1, bc2) = (T::of(bc1), T::of(bc2));

        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let decay = p.decay && c.l2 != 0.0;
            let values = p.value.data_mut();
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            for j in 0..values.len() {
                let mut gj = g.data()[j];
                if decay {
                    gj += l2 * values[j];
                }
                m[j] = b1 * m[j] + one_b1 * gj;
                v[j] = b2 * v[j] + one_b2 * gj * gj;
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                values[j] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sgd {
    pub lr: f64,
    pub l2: f64,
}

impl Sgd {
    pub fn step<T: Real>(&self, params: &mut [Param<'_, T>], grads: &[Tensor<T>]) -> Result<()> {
        check_aligned(params, grads)?;
        let (lr, l2) = (T::of(self.lr), T::of(self.l2));
        for (p, g) in params.iter_mut().zip(grads) {
            let decay = p.decay && self.l2 != 0.0;
            for (w, &gj) in p.value.data_mut().iter_mut().zip(g.data()) {
                let gj = if decay { gj + l2 * *w } else { gj };
                *w -= lr * gj;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    #[default]
    Adam,
    Sgd,
}

/// Either optimizer behind one interface.
#[derive(Debug, Clone)]
pub enum Optimizer<T = f32> {
    Adam(AdamState<T>),
    Sgd(Sgd),
}

impl<T: Real> Optimizer<T> {
    pub fn new(kind: OptimizerKind, lr: f64, l2: f64) -> Self {
        match kind {
            OptimizerKind::Adam => Optimizer::Adam(AdamState::new(AdamConfig {
                lr,
                l2,
                ..AdamConfig::default()
            })),
            OptimizerKind::Sgd => Optimizer::Sgd(Sgd { lr, l2 }),
        }
    }

    pub fn step(&mut self, params: &mut [Param<'_, T>], grads: &[Tensor<T>]) -> Result<()> {
        match self {
            Optimizer::Adam(s) => s.step(params, grads),
            Optimizer::Sgd(s) => s.step(params, grads),
        }
    }
}

fn check_aligned<T: Real>(params: &[Param<'_, T>], grads: &[Tensor<T>]) -> Result<()> {
    if params.len() != grads.len() {
        return Err(shape_err(format!(
            "{} parameters but {} gradients",
            params.len(),
            grads.len()
        )));
    }
    for (p, g) in params.iter().zip(grads) {
        p.value.same_shape(g)?;
    }
    Ok(())
}
