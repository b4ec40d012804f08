//! Fully connected layer with batched forward/backward.
//!
//! Products are split into fixed 64-row blocks of the output so the work can
//! fan out across threads while every output element is still produced by the
//! same sequence of operations regardless of thread count.

use super::init::he_uniform;
use super::real::{gemm, MatRef};
use super::{Real, Tensor};
use crate::error::{shape_err, Result};
use crate::par;
use crate::rng::SeededRng;

const BLOCK: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<T = f32> {
    /// `[out_dim, in_dim]`
    pub weight: Tensor<T>,
    /// `[out_dim]`
    pub bias: Tensor<T>,
}

#[derive(Debug, Clone)]
pub struct DenseGrads<T> {
    /// `n × in_dim`, row-major, when requested.
    pub input: Option<Vec<T>>,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Real> DenseLayer<T> {
    pub fn new(weight: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        match weight.shape() {
            [o, _] if bias.shape() == [*o] => Ok(Self { weight, bias }),
            s => Err(shape_err(format!("dense weight {s:?} / bias {:?}", bias.shape()))),
        }
    }

    pub fn init(in_dim: usize, out_dim: usize, rng: &mut SeededRng) -> Self {
        Self {
            weight: he_uniform(&[out_dim, in_dim], in_dim, rng),
            bias: Tensor::zeros(&[out_dim]),
        }
    }

    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            weight: Tensor::zeros(&[out_dim, in_dim]),
            bias: Tensor::zeros(&[out_dim]),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn cast<U: Real>(&self) -> DenseLayer<U> {
        DenseLayer {
            weight: self.weight.cast(),
            bias: self.bias.cast(),
        }
    }

    /// `W·x + b` for a single input vector.
    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let y = self.forward_batch(x.data(), 1)?;
        Ok(Tensor::vector(y))
    }

    /// Rows of `x` (`n × in_dim`) mapped to rows of the result (`n × out_dim`).
    pub fn forward_batch(&self, x: &[T], n: usize) -> Result<Vec<T>> {
        let (inp, out) = (self.in_dim(), self.out_dim());
        if x.len() != n * inp {
            return Err(shape_err(format!(
                "dense expects {n}x{inp} inputs, got {} values",
                x.len()
            )));
        }
        let w = self.weight.data();
        let mut yt = vec![T::zero(); out * n];
        par::for_each_chunk_mut(&mut yt, BLOCK * n, |bi, chunk| {
            let o0 = bi * BLOCK;
            let rows = chunk.len() / n;
            gemm(
                T::one(),
                MatRef::row_major(&w[o0 * inp..(o0 + rows) * inp], rows, inp),
                MatRef::transposed(x, n, inp),
                T::zero(),
                chunk,
            );
        });
        let b = self.bias.data();
        let mut y = vec![T::zero(); n * out];
        for r in 0..n {
            for o in 0..out {
                y[r * out + o] = yt[o * n + r] + b[o];
            }
        }
        Ok(y)
    }

    pub fn backward(&self, x: &Tensor<T>, grad_out: &Tensor<T>) -> Result<DenseGrads<T>> {
        self.backward_batch(x.data(), 1, grad_out.data(), true)
    }

    pub fn backward_batch(&self, x: &[T], n: usize, grad_out: &[T], need_input_grad: bool) -> Result<DenseGrads<T>> {
        let (inp, out) = (self.in_dim(), self.out_dim());
        if x.len() != n * inp || grad_out.len() != n * out {
            return Err(shape_err("dense backward: batch shape mismatch"));
        }
        let mut dyt = vec![T::zero(); out * n];
        for r in 0..n {
            for o in 0..out {
                dyt[o * n + r] = grad_out[r * out + o];
            }
        }

        let mut gw = vec![T::zero(); out * inp];
        par::for_each_chunk_mut(&mut gw, BLOCK * inp, |bi, chunk| {
            let o0 = bi * BLOCK;
            let rows = chunk.len() / inp;
            gemm(
                T::one(),
                MatRef::row_major(&dyt[o0 * n..(o0 + rows) * n], rows, n),
                MatRef::row_major(x, n, inp),
                T::zero(),
                chunk,
            );
        });
        let gb: Vec<T> = dyt.chunks(n).map(|c| c.iter().copied().sum()).collect();

        let input = if need_input_grad {
            let w = self.weight.data();
            let mut dxt = vec![T::zero(); inp * n];
            par::for_each_chunk_mut(&mut dxt, BLOCK * n, |bi, chunk| {
                let i0 = bi * BLOCK;
                let rows = chunk.len() / n;
                let wt = MatRef {
                    data: &w[i0..],
                    rows,
                    cols: out,
                    rs: 1,
                    cs: inp,
                };
                gemm(T::one(), wt, MatRef::row_major(&dyt, out, n), T::zero(), chunk);
            });
            let mut dx = vec![T::zero(); n * inp];
            for i in 0..inp {
                for r in 0..n {
                    dx[r * inp + i] = dxt[i * n + r];
                }
            }
            Some(dx)
        } else {
            None
        };

        Ok(DenseGrads {
            input,
            weight: Tensor::new(vec![out, inp], gw)?,
            bias: Tensor::new(vec![out], gb)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_passthrough() {
        let w = Tensor::<f32>::from_fn(&[3, 3], |i| if i % 4 == 0 { 1.0 } else { 0.0 });
        let layer = DenseLayer::new(w, Tensor::zeros(&[3])).unwrap();
        let x = Tensor::vector(vec![1.5, -2.0, 0.25]);
        assert_eq!(layer.forward(&x).unwrap(), x);
    }

    #[test]
    fn small_product() {
        let layer = DenseLayer::new(
            Tensor::new(vec![1, 2], vec![1.0f32, 2.0]).unwrap(),
            Tensor::vector(vec![3.0]),
        )
        .unwrap();
        let y = layer.forward(&Tensor::vector(vec![4.0, 5.0])).unwrap();
        assert_eq!(y.data(), &[17.0]);
    }

    #[test]
    fn matches_dot_products() {
        let mut rng = SeededRng::new(11);
        let mut layer = DenseLayer::<f64>::init(8, 3, &mut rng);
        layer.bias = Tensor::from_fn(&[3], |_| rng.normal());
        let x = Tensor::from_fn(&[8], |_| rng.normal());
        let y = layer.forward(&x).unwrap();
        for o in 0..3 {
            let want: f64 = layer.bias.data()[o]
                + (0..8)
                    .map(|i| layer.weight.data()[o * 8 + i] * x.data()[i])
                    .sum::<f64>();
            assert!((y.data()[o] - want).abs() < 1e-6);
        }
    }

    #[test]
    fn batch_rows_match_single_calls_across_blocks() {
        let mut rng = SeededRng::new(12);
        let layer = DenseLayer::<f64>::init(70, 130, &mut rng);
        let n = 5;
        let x: Vec<f64> = (0..n * 70).map(|_| rng.normal()).collect();
        let y = layer.forward_batch(&x, n).unwrap();
        for r in 0..n {
            let single = layer
                .forward(&Tensor::vector(x[r * 70..(r + 1) * 70].to_vec()))
                .unwrap();
            for o in 0..130 {
                assert!((single.data()[o] - y[r * 130 + o]).abs() < 1e-12);
            }
        }
        let g: Vec<f64> = (0..n * 130).map(|_| rng.normal()).collect();
        let grads = layer.backward_batch(&x, n, &g, true).unwrap();
        let dx = grads.input.unwrap();
        // dX = dY · W
        for r in 0..n {
            for i in 0..70 {
                let want: f64 = (0..130).map(|o| g[r * 130 + o] * layer.weight.data()[o * 70 + i]).sum();
                assert!((dx[r * 70 + i] - want).abs() < 1e-10);
            }
        }
        // dW = dY^T · X
        for o in [0, 63, 64, 129] {
            for i in [0, 69] {
                let want: f64 = (0..n).map(|r| g[r * 130 + o] * x[r * 70 + i]).sum();
                assert!((grads.weight.data()[o * 70 + i] - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn shape_mismatch() {
        let layer = DenseLayer::<f32>::zeros(4, 2);
        assert!(layer.forward(&Tensor::vector(vec![1.0; 3])).is_err());
    }
}
