//! Convolutional denoising autoencoder.
//!
//! Encoder: conv(3→3) ReLU, maxpool, conv(3→16) ReLU, maxpool.
//! Decoder: conv(16→16) ReLU, upsample, conv(16→32) ReLU, upsample, conv(32→3).
//! A `[3, 162, 288]` crop encodes to `[16, 18, 32]` (9216 values).

use crate::error::{shape_err, Result};
use crate::features::{CROP_HEIGHT, CROP_WIDTH};
use crate::numerics::{
    maxpool, maxpool_backward, relu, relu_backward, upsample, upsample_backward, ConvLayer, Param, Real, Tensor, POOL,
};
use crate::rng::SeededRng;

pub const CODE_CHANNELS: usize = 16;
pub const CODE_HEIGHT: usize = CROP_HEIGHT / (POOL * POOL);
pub const CODE_WIDTH: usize = CROP_WIDTH / (POOL * POOL);
pub const CODE_LEN: usize = CODE_CHANNELS * CODE_HEIGHT * CODE_WIDTH;

/// Names of the five conv layers, in order; used as checkpoint keys.
pub const LAYER_NAMES: [&str; 5] = ["enc1", "enc2", "dec1", "dec2", "dec3"];
const CHANNELS: [(usize, usize); 5] = [(3, 3), (3, 16), (16, 16), (16, 32), (32, 3)];

#[derive(Debug, Clone, PartialEq)]
pub struct Autoencoder<T = f32> {
    pub layers: [ConvLayer<T>; 5],
}

/// Intermediate values kept for the backward pass.
pub struct AeCache<T> {
    input: Tensor<T>,
    pre: [Tensor<T>; 5],
    post: [Tensor<T>; 4],
    pool1: Vec<usize>,
    pool2: Vec<usize>,
    pooled1: Tensor<T>,
    code: Tensor<T>,
    up1: Tensor<T>,
    up2: Tensor<T>,
}

impl<T> AeCache<T> {
    pub fn output(&self) -> &Tensor<T> {
        &self.pre[4]
    }

    pub fn code(&self) -> &Tensor<T> {
        &self.code
    }
}

/// Encoder-only cache.
pub struct EncoderCache<T> {
    input: Tensor<T>,
    pre1: Tensor<T>,
    post1: Tensor<T>,
    pool1: Vec<usize>,
    pooled1: Tensor<T>,
    pre2: Tensor<T>,
    post2: Tensor<T>,
    pool2: Vec<usize>,
    pub code: Tensor<T>,
}

impl<T: Real> Autoencoder<T> {
    pub fn init(rng: &mut SeededRng) -> Self {
        Self {
            layers: CHANNELS.map(|(i, o)| ConvLayer::init(i, o, rng)),
        }
    }

    pub fn from_layers(layers: [ConvLayer<T>; 5]) -> Result<Self> {
        for (l, (i, o)) in layers.iter().zip(CHANNELS) {
            if l.in_channels() != i || l.out_channels() != o {
                return Err(shape_err(format!(
                    "autoencoder layer {i}->{o} has shape {:?}",
                    l.weight.shape()
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn cast<U: Real>(&self) -> Autoencoder<U> {
        Autoencoder {
            layers: std::array::from_fn(|i| self.layers[i].cast()),
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// Weight/bias pairs for all layers, in layer order.
    pub fn params_mut(&mut self) -> Vec<Param<'_, T>> {
        self.layers
            .iter_mut()
            .flat_map(|l| [Param::weight(&mut l.weight), Param::bias(&mut l.bias)])
            .collect()
    }

    /// Encoder-only parameters (first two layers).
    pub fn encoder_params_mut(&mut self) -> Vec<Param<'_, T>> {
        self.layers[..2]
            .iter_mut()
            .flat_map(|l| [Param::weight(&mut l.weight), Param::bias(&mut l.bias)])
            .collect()
    }

    pub fn encode_cached(&self, input: &Tensor<T>) -> Result<EncoderCache<T>> {
        let pre1 = self.layers[0].forward(input)?;
        let post1 = relu(&pre1);
        let p1 = maxpool(&post1)?;
        let pre2 = self.layers[1].forward(&p1.output)?;
        let post2 = relu(&pre2);
        let p2 = maxpool(&post2)?;
        Ok(EncoderCache {
            input: input.clone(),
            pre1,
            post1,
            pool1: p1.argmax,
            pooled1: p1.output,
            pre2,
            post2,
            pool2: p2.argmax,
            code: p2.output,
        })
    }

    /// Code tensor `[16, H/9, W/9]`.
    pub fn encode(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.encode_cached(input)?.code)
    }

    /// Gradients of the two encoder layers given `∂L/∂code`.
    /// Returns `[w1, b1, w2, b2]`.
    pub fn encoder_backward(&self, cache: &EncoderCache<T>, grad_code: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        let g_post2 = maxpool_backward(grad_code, &cache.pool2, cache.post2.shape())?;
        let g_pre2 = relu_backward(&cache.pre2, &g_post2)?;
        let g2 = self.layers[1].backward(&cache.pooled1, &g_pre2, true)?;
        let g_pooled1 = g2.input.expect("requested");
        let g_post1 = maxpool_backward(&g_pooled1, &cache.pool1, cache.post1.shape())?;
        let g_pre1 = relu_backward(&cache.pre1, &g_post1)?;
        let g1 = self.layers[0].backward(&cache.input, &g_pre1, false)?;
        Ok(vec![g1.weight, g1.bias, g2.weight, g2.bias])
    }

    pub fn forward(&self, input: &Tensor<T>) -> Result<AeCache<T>> {
        let enc = self.encode_cached(input)?;
        let pre3 = self.layers[2].forward(&enc.code)?;
        let post3 = relu(&pre3);
        let up1 = upsample(&post3)?;
        let pre4 = self.layers[3].forward(&up1)?;
        let post4 = relu(&pre4);
        let up2 = upsample(&post4)?;
        let pre5 = self.layers[4].forward(&up2)?;
        Ok(AeCache {
            input: enc.input,
            pre: [enc.pre1, enc.pre2, pre3, pre4, pre5],
            post: [enc.post1, enc.post2, post3, post4],
            pool1: enc.pool1,
            pool2: enc.pool2,
            pooled1: enc.pooled1,
            code: enc.code,
            up1,
            up2,
        })
    }

    pub fn reconstruct(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.forward(input)?.pre[4].clone())
    }

    /// Gradients for all ten parameter tensors given `∂L/∂output`,
    /// in [`Autoencoder::params_mut`] order.
    pub fn backward(&self, cache: &AeCache<T>, grad_out: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        let g5 = self.layers[4].backward(&cache.up2, grad_out, true)?;
        let g_post4 = upsample_backward(&g5.input.expect("requested"))?;
        let g_pre4 = relu_backward(&cache.pre[3], &g_post4)?;
        let g4 = self.layers[3].backward(&cache.up1, &g_pre4, true)?;
        let g_post3 = upsample_backward(&g4.input.expect("requested"))?;
        let g_pre3 = relu_backward(&cache.pre[2], &g_post3)?;
        let g3 = self.layers[2].backward(&cache.code, &g_pre3, true)?;
        let g_code = g3.input.expect("requested");

        let g_post2 = maxpool_backward(&g_code, &cache.pool2, cache.post[1].shape())?;
        let g_pre2 = relu_backward(&cache.pre[1], &g_post2)?;
        let g2 = self.layers[1].backward(&cache.pooled1, &g_pre2, true)?;
        let g_post1 = maxpool_backward(&g2.input.expect("requested"), &cache.pool1, cache.post[0].shape())?;
        let g_pre1 = relu_backward(&cache.pre[0], &g_post1)?;
        let g1 = self.layers[0].backward(&cache.input, &g_pre1, false)?;

        Ok(vec![
            g1.weight, g1.bias, g2.weight, g2.bias, g3.weight, g3.bias, g4.weight, g4.bias, g5.weight, g5.bias,
        ])
    }
}

impl Autoencoder<f32> {
    /// Flattened (channel-major) code of a `[3, 162, 288]` crop.
    pub fn encode_crop(&self, crop: &Tensor<f32>) -> Result<Vec<f32>> {
        if crop.shape() != [3, CROP_HEIGHT, CROP_WIDTH] {
            return Err(shape_err(format!(
                "encoder expects [3, {CROP_HEIGHT}, {CROP_WIDTH}], got {:?}",
                crop.shape()
            )));
        }
        Ok(self.encode(crop)?.into_data())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{euclidean_loss, grad_check};

    #[test]
    fn code_shape_contract() {
        let ae = Autoencoder::<f32>::init(&mut SeededRng::new(0));
        let code = ae.encode(&Tensor::zeros(&[3, 162, 288])).unwrap();
        assert_eq!(code.shape(), &[16, 18, 32]);
        assert_eq!(CODE_LEN, 9216);
        let out = ae.reconstruct(&Tensor::zeros(&[3, 162, 288])).unwrap();
        assert_eq!(out.shape(), &[3, 162, 288]);
    }

    #[test]
    fn zero_crop_code_is_relu_of_bias() {
        let mut ae = Autoencoder::<f32>::init(&mut SeededRng::new(0));
        ae.layers[0].bias = Tensor::vector(vec![0.1, -0.2, 0.3]);
        let a = ae.encode_crop(&Tensor::zeros(&[3, 162, 288])).unwrap();
        let b = ae.encode_crop(&Tensor::zeros(&[3, 162, 288])).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|v| v.is_finite() && *v >= 0.0));
    }

    #[test]
    fn wrong_crop_shape() {
        let ae = Autoencoder::<f32>::init(&mut SeededRng::new(0));
        assert!(ae.encode_crop(&Tensor::zeros(&[3, 9, 9])).is_err());
    }

    #[test]
    fn gradients_match_finite_differences_on_toy_input() {
        let mut rng = SeededRng::new(31);
        let mut ae = Autoencoder::<f64>::init(&mut rng);
        for l in ae.layers.iter_mut() {
            l.bias = Tensor::from_fn(l.bias.shape(), |_| 0.1 * rng.normal());
        }
        let x = Tensor::from_fn(&[3, 9, 9], |_| rng.uniform());
        let params: Vec<Tensor<f64>> = ae
            .layers
            .iter()
            .flat_map(|l| [l.weight.clone(), l.bias.clone()])
            .collect();
        let report = grad_check(&params, 1e-5, Some(60), |ps| {
            let layers: [ConvLayer<f64>; 5] =
                std::array::from_fn(|i| ConvLayer::new(ps[2 * i].clone(), ps[2 * i + 1].clone()).unwrap());
            let ae = Autoencoder::from_layers(layers).unwrap();
            let cache = ae.forward(&x).unwrap();
            let (loss, g) = euclidean_loss(cache.output(), &x).unwrap();
            (loss, ae.backward(&cache, &g).unwrap())
        });
        assert!(report.max_rel_err < 1e-4, "{report:?}");
    }
}
