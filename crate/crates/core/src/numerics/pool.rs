//! Disjoint 3×3 max-pooling and ×3 nearest-neighbour upsampling.

use super::{Real, Tensor};
use crate::error::{shape_err, Result};

pub const POOL: usize = 3;

/// Max-pool output together with the flat input index each output came from.
#[derive(Debug, Clone)]
pub struct Pooled<T> {
    pub output: Tensor<T>,
    pub argmax: Vec<usize>,
}

pub fn maxpool<T: Real>(input: &Tensor<T>) -> Result<Pooled<T>> {
    let (c, h, w) = input.dims3()?;
    if h % POOL != 0 || w % POOL != 0 {
        return Err(shape_err(format!(
            "maxpool needs dims divisible by {POOL}, got {h}x{w}"
        )));
    }
    let (oh, ow) = (h / POOL, w / POOL);
    let src = input.data();
    let mut out = Vec::with_capacity(c * oh * ow);
    let mut argmax = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        let base = ch * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best_idx = base + oy * POOL * w + ox * POOL;
                let mut best = src[best_idx];
                for dy in 0..POOL {
                    for dx in 0..POOL {
                        let idx = base + (oy * POOL + dy) * w + ox * POOL + dx;
                        // strict: first occurrence wins ties
                        if src[idx] > best {
                            best = src[idx];
                            best_idx = idx;
                        }
                    }
                }
                out.push(best);
                argmax.push(best_idx);
            }
        }
    }
    Ok(Pooled {
        output: Tensor::new(vec![c, oh, ow], out)?,
        argmax,
    })
}

pub fn maxpool_backward<T: Real>(grad_out: &Tensor<T>, argmax: &[usize], input_shape: &[usize]) -> Result<Tensor<T>> {
    if grad_out.len() != argmax.len() {
        return Err(shape_err("maxpool backward: argmax length"));
    }
    let mut grad = Tensor::zeros(input_shape);
    let g = grad.data_mut();
    for (&idx, &v) in argmax.iter().zip(grad_out.data()) {
        g[idx] += v;
    }
    Ok(grad)
}

pub fn upsample<T: Real>(input: &Tensor<T>) -> Result<Tensor<T>> {
    let (c, h, w) = input.dims3()?;
    let (oh, ow) = (h * POOL, w * POOL);
    let src = input.data();
    let mut out = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        for y in 0..oh {
            let row = &src[(ch * h + y / POOL) * w..(ch * h + y / POOL + 1) * w];
            for x in 0..ow {
                out.push(row[x / POOL]);
            }
        }
    }
    Tensor::new(vec![c, oh, ow], out)
}

/// Sums the gradient over each 3×3 replica block.
pub fn upsample_backward<T: Real>(grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    let (c, oh, ow) = grad_out.dims3()?;
    if oh % POOL != 0 || ow % POOL != 0 {
        return Err(shape_err("upsample backward: dims not divisible by 3"));
    }
    let (h, w) = (oh / POOL, ow / POOL);
    let mut grad = Tensor::zeros(&[c, h, w]);
    let g = grad.data_mut();
    let src = grad_out.data();
    for ch in 0..c {
        for y in 0..oh {
            for x in 0..ow {
                g[(ch * h + y / POOL) * w + x / POOL] += src[(ch * oh + y) * ow + x];
            }
        }
    }
    Ok(grad)
}
