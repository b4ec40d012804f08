//! Fully connected saliency head: dense→ReLU→dropout twice, then a single
//! sigmoid unit.

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::numerics::{sigmoid_scalar, DenseLayer, DropoutMask, Param, Real, Tensor};
use crate::rng::SeededRng;

pub const DEFAULT_HIDDEN: [usize; 2] = [512, 128];

/// Names of the three dense layers; used as checkpoint keys.
pub const HEAD_LAYER_NAMES: [&str; 3] = ["fc1", "fc2", "fc3"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    #[default]
    Bce,
    Mse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyHead<T = f32> {
    pub layers: [DenseLayer<T>; 3],
}

/// Parameter gradients in layer order, plus the input gradient when asked.
pub type HeadGrads<T> = (Vec<Tensor<T>>, Option<Vec<T>>);

/// Activations of one batch, kept for the backward pass.
pub struct HeadCache<T> {
    n: usize,
    pre1: Vec<T>,
    act1: Vec<T>,
    mask1: DropoutMask<T>,
    pre2: Vec<T>,
    act2: Vec<T>,
    mask2: DropoutMask<T>,
    logits: Vec<T>,
}

impl<T: Real> HeadCache<T> {
    pub fn logits(&self) -> &[T] {
        &self.logits
    }

    pub fn probabilities(&self) -> Vec<T> {
        self.logits.iter().map(|&z| sigmoid_scalar(z)).collect()
    }
}

impl<T: Real> SaliencyHead<T> {
    pub fn init(input_dim: usize, hidden: [usize; 2], rng: &mut SeededRng) -> Self {
        Self {
            layers: [
                DenseLayer::init(input_dim, hidden[0], rng),
                DenseLayer::init(hidden[0], hidden[1], rng),
                DenseLayer::init(hidden[1], 1, rng),
            ],
        }
    }

    pub fn from_layers(layers: [DenseLayer<T>; 3]) -> Result<Self> {
        if layers[0].out_dim() != layers[1].in_dim()
            || layers[1].out_dim() != layers[2].in_dim()
            || layers[2].out_dim() != 1
        {
            return Err(shape_err("head layers do not chain to a single output"));
        }
        Ok(Self { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn hidden(&self) -> [usize; 2] {
        [self.layers[0].out_dim(), self.layers[1].out_dim()]
    }

    pub fn cast<U: Real>(&self) -> SaliencyHead<U> {
        SaliencyHead {
            layers: std::array::from_fn(|i| self.layers[i].cast()),
        }
    }

    pub fn params_mut(&mut self) -> Vec<Param<'_, T>> {
        self.layers
            .iter_mut()
            .flat_map(|l| [Param::weight(&mut l.weight), Param::bias(&mut l.bias)])
            .collect()
    }

    /// Forward pass over `n` row-major inputs. Dropout is applied after each
    /// hidden ReLU when `rng` is given and `rate > 0`.
    pub fn forward_batch(&self, x: &[T], n: usize, rate: f64, rng: Option<&mut SeededRng>) -> Result<HeadCache<T>> {
        let pre1 = self.layers[0].forward_batch(x, n)?;
        let mut act1 = relu_vec(&pre1);
        let (mask1, mask2) = match rng {
            Some(rng) if rate > 0.0 => (
                DropoutMask::sample(act1.len(), rate, rng)?,
                DropoutMask::sample(n * self.layers[1].out_dim(), rate, rng)?,
            ),
            _ => (
                DropoutMask::identity(act1.len()),
                DropoutMask::identity(n * self.layers[1].out_dim()),
            ),
        };
        mask1.apply_slice(&mut act1)?;
        let pre2 = self.layers[1].forward_batch(&act1, n)?;
        let mut act2 = relu_vec(&pre2);
        mask2.apply_slice(&mut act2)?;
        let logits = self.layers[2].forward_batch(&act2, n)?;
        Ok(HeadCache {
            n,
            pre1,
            act1,
            mask1,
            pre2,
            act2,
            mask2,
            logits,
        })
    }

    /// Sigmoid outputs without dropout.
    pub fn predict_batch(&self, x: &[T], n: usize) -> Result<Vec<T>> {
        Ok(self.forward_batch(x, n, 0.0, None)?.probabilities())
    }

    /// Gradients of the six parameter tensors (in [`SaliencyHead::params_mut`]
    /// order) given `∂L/∂logit` per row, plus the input gradient when asked.
    pub fn backward_batch(
        &self,
        x: &[T],
        cache: &HeadCache<T>,
        grad_logits: &[T],
        need_input_grad: bool,
    ) -> Result<HeadGrads<T>> {
        let n = cache.n;
        if grad_logits.len() != n {
            return Err(shape_err("one logit gradient per row"));
        }
        let g3 = self.layers[2].backward_batch(&cache.act2, n, grad_logits, true)?;
        let mut d2 = g3.input.expect("requested");
        cache.mask2.apply_slice(&mut d2)?;
        relu_grad_in_place(&cache.pre2, &mut d2);
        let g2 = self.layers[1].backward_batch(&cache.act1, n, &d2, true)?;
        let mut d1 = g2.input.expect("requested");
        cache.mask1.apply_slice(&mut d1)?;
        relu_grad_in_place(&cache.pre1, &mut d1);
        let g1 = self.layers[0].backward_batch(x, n, &d1, need_input_grad)?;
        Ok((
            vec![g1.weight, g1.bias, g2.weight, g2.bias, g3.weight, g3.bias],
            g1.input,
        ))
    }
}

fn relu_vec<T: Real>(v: &[T]) -> Vec<T> {
    v.iter().map(|&x| if x > T::zero() { x } else { T::zero() }).collect()
}

fn relu_grad_in_place<T: Real>(pre: &[T], grad: &mut [T]) {
    for (g, &z) in grad.iter_mut().zip(pre) {
        if z <= T::zero() {
            *g = T::zero();
        }
    }
}

/// Mean loss over a batch and its gradient w.r.t. each logit.
///
/// BCE is evaluated from the logit as `softplus(z) − t·z`, which equals
/// `−t ln p − (1−t) ln(1−p)` for `p = σ(z)` without saturating in f32.
pub fn head_loss<T: Real>(kind: LossKind, logits: &[T], targets: &[f64]) -> Result<(f64, Vec<T>)> {
    if logits.len() != targets.len() || logits.is_empty() {
        return Err(shape_err("head loss: logits and targets differ in length"));
    }
    let n = logits.len() as f64;
    let mut total = 0.0;
    let mut grad = Vec::with_capacity(logits.len());
    for (&z, &t) in logits.iter().zip(targets) {
        let z = z.as_f64();
        let p = sigmoid_scalar(z);
        match kind {
            LossKind::Bce => {
                total += z.max(0.0) - z * t + (-z.abs()).exp().ln_1p();
                grad.push(T::of((p - t) / n));
            }
            LossKind::Mse => {
                total += (p - t) * (p - t);
                grad.push(T::of(2.0 * (p - t) * p * (1.0 - p) / n));
            }
        }
    }
    let loss = total / n;
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("head loss is {loss}")));
    }
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{bce_loss, binary_entropy, grad_check};

    #[test]
    fn bce_from_logits_matches_probability_form() {
        let z = [-3.0f64, -0.2, 0.0, 1.5, 4.0];
        let t = [0.1, 0.9, 0.5, 0.3, 1.0];
        let (a, _) = head_loss::<f64>(LossKind::Bce, &z, &t).unwrap();
        let p = Tensor::vector(z.iter().map(|&v| sigmoid_scalar(v)).collect());
        let (b, _) = bce_loss(&p, &Tensor::vector(t.to_vec())).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn bce_floor_is_entropy() {
        let t = [0.2f64, 0.7];
        let z: Vec<f64> = t.iter().map(|&p: &f64| (p / (1.0 - p)).ln()).collect();
        let (l, g) = head_loss::<f64>(LossKind::Bce, &z, &t).unwrap();
        let floor = t.iter().map(|&v| binary_entropy(v)).sum::<f64>() / 2.0;
        assert!((l - floor).abs() < 1e-12);
        assert!(g.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn output_in_unit_interval() {
        let mut rng = SeededRng::new(2);
        let head = SaliencyHead::<f32>::init(40, [16, 8], &mut rng);
        let x: Vec<f32> = (0..40 * 5).map(|_| 10.0 * rng.normal() as f32).collect();
        let p = head.predict_batch(&x, 5).unwrap();
        assert_eq!(p.len(), 5);
        assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    fn check(kind: LossKind, seed: u64) -> f64 {
        let mut rng = SeededRng::new(seed);
        let (d, n) = (12, 4);
        let mut head = SaliencyHead::<f64>::init(d, [7, 5], &mut rng);
        for l in head.layers.iter_mut() {
            l.bias = Tensor::from_fn(l.bias.shape(), |_| 0.1 * rng.normal());
        }
        let x: Vec<f64> = (0..d * n).map(|_| rng.normal()).collect();
        let t: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
        let params: Vec<Tensor<f64>> = head
            .layers
            .iter()
            .flat_map(|l| [l.weight.clone(), l.bias.clone()])
            .collect();
        let r = grad_check(&params, 1e-5, None, |ps| {
            let layers = std::array::from_fn(|i| DenseLayer::new(ps[2 * i].clone(), ps[2 * i + 1].clone()).unwrap());
            let h = SaliencyHead::from_layers(layers).unwrap();
            let c = h.forward_batch(&x, n, 0.0, None).unwrap();
            let (loss, gz) = head_loss(kind, c.logits(), &t).unwrap();
            (loss, h.backward_batch(&x, &c, &gz, false).unwrap().0)
        });
        r.max_rel_err
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..3 {
            assert!(check(LossKind::Bce, seed) < 1e-4);
            assert!(check(LossKind::Mse, seed) < 1e-4);
        }
    }

    #[test]
    fn dropout_masks_scale_survivors() {
        let mut rng = SeededRng::new(4);
        let head = SaliencyHead::<f64>::init(6, [200, 100], &mut rng);
        let x: Vec<f64> = (0..6).map(|_| rng.normal()).collect();
        let c = head.forward_batch(&x, 1, 0.5, Some(&mut rng)).unwrap();
        let dropped = c.mask1.dropped();
        assert!(dropped > 50 && dropped < 150);
        for (a, z) in c.act1.iter().zip(&c.pre1) {
            assert!(*a == 0.0 || (*a - 2.0 * z).abs() < 1e-12);
        }
    }
}
