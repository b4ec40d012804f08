//! Finite-difference checks of every differentiable component, in 64-bit.
//!
//! Each case draws its parameters and inputs from the given seed and compares
//! backprop against central differences with step [`SUITE_EPS`].

use super::autoencoder::Autoencoder;
use super::head::{head_loss, LossKind, SaliencyHead};
use crate::numerics::{
    bce_loss, euclidean_loss, grad_check, maxpool, maxpool_backward, mse_loss, relu, relu_backward, sigmoid,
    sigmoid_backward, upsample, upsample_backward, ConvLayer, DenseLayer, GradCheck, Tensor,
};
use crate::par;
use crate::rng::SeededRng;

pub const SUITE_EPS: f64 = 1e-5;
pub const SUITE_TOLERANCE: f64 = 1e-4;

/// Components covered by [`gradient_suite`].
pub const SUITE_CASES: [&str; 12] = [
    "conv",
    "dense",
    "relu",
    "sigmoid",
    "maxpool",
    "upsample",
    "euclidean",
    "bce",
    "mse",
    "autoencoder",
    "head-bce",
    "head-mse",
];

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SuiteResult {
    pub case: &'static str,
    pub seed: u64,
    pub max_rel_err: f64,
    pub checked: usize,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.max_rel_err < SUITE_TOLERANCE
    }
}

fn normal(shape: &[usize], rng: &mut SeededRng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.normal())
}

/// Values bounded away from zero so no difference straddles the ReLU kink.
fn off_kink(shape: &[usize], rng: &mut SeededRng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| {
        let v = rng.normal();
        v.signum() * (v.abs() + 0.05)
    })
}

/// Squared distance to a fixed target: turns any map into a scalar loss with
/// a generic upstream gradient.
fn probe(out: &Tensor<f64>, target: &Tensor<f64>) -> (f64, Tensor<f64>) {
    euclidean_loss(out, target).expect("probe shapes match")
}

fn conv(rng: &mut SeededRng) -> GradCheck {
    let mut layer = ConvLayer::<f64>::init(2, 3, rng);
    layer.bias = normal(&[3], rng);
    let x = normal(&[2, 5, 4], rng);
    let target = normal(&[3, 5, 4], rng);
    let params = vec![layer.weight, layer.bias, x];
    grad_check(&params, SUITE_EPS, None, |ps| {
        let l = ConvLayer::new(ps[0].clone(), ps[1].clone()).unwrap();
        let (loss, g) = probe(&l.forward(&ps[2]).unwrap(), &target);
        let gr = l.backward(&ps[2], &g, true).unwrap();
        (loss, vec![gr.weight, gr.bias, gr.input.unwrap()])
    })
}

fn dense(rng: &mut SeededRng) -> GradCheck {
    let (n, d, o) = (3, 6, 4);
    let mut layer = DenseLayer::<f64>::init(d, o, rng);
    layer.bias = normal(&[o], rng);
    let x = normal(&[n, d], rng);
    let target = normal(&[n, o], rng);
    let params = vec![layer.weight, layer.bias, x];
    grad_check(&params, SUITE_EPS, None, |ps| {
        let l = DenseLayer::new(ps[0].clone(), ps[1].clone()).unwrap();
        let y = Tensor::new(vec![n, o], l.forward_batch(ps[2].data(), n).unwrap()).unwrap();
        let (loss, g) = probe(&y, &target);
        let gr = l.backward_batch(ps[2].data(), n, g.data(), true).unwrap();
        let gx = Tensor::new(vec![n, d], gr.input.unwrap()).unwrap();
        (loss, vec![gr.weight, gr.bias, gx])
    })
}

fn elementwise(
    rng: &mut SeededRng,
    x: Tensor<f64>,
    fwd: impl Fn(&Tensor<f64>) -> Tensor<f64>,
    bwd: impl Fn(&Tensor<f64>, &Tensor<f64>, &Tensor<f64>) -> Tensor<f64>,
) -> GradCheck {
    let target = normal(x.shape(), rng);
    grad_check(&[x], SUITE_EPS, None, |ps| {
        let y = fwd(&ps[0]);
        let (loss, g) = probe(&y, &target);
        (loss, vec![bwd(&ps[0], &y, &g)])
    })
}

fn pooling(rng: &mut SeededRng) -> GradCheck {
    // distinct, well separated values keep every argmax stable under ±ε
    let mut values: Vec<f64> = (0..2 * 6 * 6).map(|i| i as f64 * 0.01).collect();
    rng.shuffle(&mut values);
    let x = Tensor::new(vec![2, 6, 6], values).unwrap();
    let target = normal(&[2, 2, 2], rng);
    grad_check(&[x], SUITE_EPS, None, |ps| {
        let pooled = maxpool(&ps[0]).unwrap();
        let (loss, g) = probe(&pooled.output, &target);
        (loss, vec![maxpool_backward(&g, &pooled.argmax, ps[0].shape()).unwrap()])
    })
}

fn unpooling(rng: &mut SeededRng) -> GradCheck {
    let x = normal(&[2, 3, 2], rng);
    let target = normal(&[2, 9, 6], rng);
    grad_check(&[x], SUITE_EPS, None, |ps| {
        let (loss, g) = probe(&upsample(&ps[0]).unwrap(), &target);
        (loss, vec![upsample_backward(&g).unwrap()])
    })
}

type LossFn = fn(&Tensor<f64>, &Tensor<f64>) -> crate::Result<(f64, Tensor<f64>)>;

fn prediction_loss(rng: &mut SeededRng, loss: LossFn) -> GradCheck {
    let p = Tensor::from_fn(&[7], |_| 0.1 + 0.8 * rng.uniform());
    let t = Tensor::from_fn(&[7], |_| rng.uniform());
    grad_check(&[p], SUITE_EPS, None, |ps| {
        let (l, g) = loss(&ps[0], &t).unwrap();
        (l, vec![g])
    })
}

fn autoencoder(rng: &mut SeededRng) -> GradCheck {
    let mut ae = Autoencoder::<f64>::init(rng);
    for l in ae.layers.iter_mut() {
        l.bias = Tensor::from_fn(l.bias.shape(), |_| 0.1 * rng.normal());
    }
    let x = Tensor::from_fn(&[3, 9, 9], |_| rng.uniform());
    let params: Vec<Tensor<f64>> = ae
        .layers
        .iter()
        .flat_map(|l| [l.weight.clone(), l.bias.clone()])
        .collect();
    grad_check(&params, SUITE_EPS, Some(60), |ps| {
        let layers: [ConvLayer<f64>; 5] =
            std::array::from_fn(|i| ConvLayer::new(ps[2 * i].clone(), ps[2 * i + 1].clone()).unwrap());
        let ae = Autoencoder::from_layers(layers).unwrap();
        let cache = ae.forward(&x).unwrap();
        let (loss, g) = euclidean_loss(cache.output(), &x).unwrap();
        (loss, ae.backward(&cache, &g).unwrap())
    })
}

fn head(rng: &mut SeededRng, kind: LossKind) -> GradCheck {
    let (d, n) = (12, 4);
    let mut head = SaliencyHead::<f64>::init(d, [7, 5], rng);
    for l in head.layers.iter_mut() {
        l.bias = Tensor::from_fn(l.bias.shape(), |_| 0.1 * rng.normal());
    }
    let x = normal(&[n, d], rng);
    let t: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
    let mut params: Vec<Tensor<f64>> = head
        .layers
        .iter()
        .flat_map(|l| [l.weight.clone(), l.bias.clone()])
        .collect();
    params.push(x);
    grad_check(&params, SUITE_EPS, None, |ps| {
        let layers = std::array::from_fn(|i| DenseLayer::new(ps[2 * i].clone(), ps[2 * i + 1].clone()).unwrap());
        let h = SaliencyHead::from_layers(layers).unwrap();
        let x = ps[6].data();
        let c = h.forward_batch(x, n, 0.0, None).unwrap();
        let (loss, gz) = head_loss(kind, c.logits(), &t).unwrap();
        let (mut grads, gx) = h.backward_batch(x, &c, &gz, true).unwrap();
        grads.push(Tensor::new(vec![n, d], gx.unwrap()).unwrap());
        (loss, grads)
    })
}

/// Runs one named case; `None` for an unknown name.
pub fn run_case(case: &str, seed: u64) -> Option<SuiteResult> {
    let case = *SUITE_CASES.iter().find(|c| **c == case)?;
    let mut rng = SeededRng::derive(seed, &[0x4752_4144]);
    let r = match case {
        "conv" => conv(&mut rng),
        "dense" => dense(&mut rng),
        "relu" => {
            let x = off_kink(&[3, 4, 4], &mut rng);
            elementwise(&mut rng, x, relu, |x, _, g| relu_backward(x, g).unwrap())
        }
        "sigmoid" => {
            let x = normal(&[3, 4, 4], &mut rng);
            elementwise(&mut rng, x, sigmoid, |_, y, g| sigmoid_backward(y, g).unwrap())
        }
        "maxpool" => pooling(&mut rng),
        "upsample" => unpooling(&mut rng),
        "euclidean" => prediction_loss(&mut rng, euclidean_loss),
        "bce" => prediction_loss(&mut rng, bce_loss),
        "mse" => prediction_loss(&mut rng, mse_loss),
        "autoencoder" => autoencoder(&mut rng),
        "head-bce" => head(&mut rng, LossKind::Bce),
        "head-mse" => head(&mut rng, LossKind::Mse),
        _ => unreachable!("case list and dispatch agree"),
    };
    Some(SuiteResult {
        case,
        seed,
        max_rel_err: r.max_rel_err,
        checked: r.checked,
    })
}

/// Every case for every seed, ordered by case then seed.
pub fn gradient_suite(seeds: std::ops::Range<u64>) -> Vec<SuiteResult> {
    let jobs: Vec<(&str, u64)> = SUITE_CASES
        .iter()
        .flat_map(|c| seeds.clone().map(move |s| (*c, s)))
        .collect();
    par::map_slice(&jobs, |(c, s)| run_case(c, *s).expect("listed case"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_case_passes_for_a_few_seeds() {
        for r in gradient_suite(0..3) {
            assert!(r.passed(), "{r:?}");
            assert!(r.checked > 0);
        }
    }

    #[test]
    fn unknown_case() {
        assert!(run_case("lstm", 0).is_none());
    }
}
