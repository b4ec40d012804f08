//! 3×3 convolution, stride 1, zero padding 1.
//!
//! The input is copied once into a zero-padded plane of width `w + 2`. On
//! that layout every tap is a constant offset, so each tap becomes one GEMM
//! over a shifted strided view, with outputs computed on an `h × (w + 2)`
//! grid whose two trailing columns are discarded.

use super::init::he_uniform;
use super::real::{gemm, gemm_into, MatRef};
use super::{Real, Tensor};
use crate::error::{shape_err, Result};
use crate::rng::SeededRng;

pub const KERNEL: usize = 3;
const TAPS: usize = KERNEL * KERNEL;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer<T = f32> {
    /// `[out_channels, in_channels, 3, 3]`
    pub weight: Tensor<T>,
    /// `[out_channels]`
    pub bias: Tensor<T>,
}

#[derive(Debug, Clone)]
pub struct ConvGrads<T> {
    pub input: Option<Tensor<T>>,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Real> ConvLayer<T> {
    pub fn new(weight: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        match weight.shape() {
            [co, _, KERNEL, KERNEL] if bias.shape() == [*co] => Ok(Self { weight, bias }),
            s => Err(shape_err(format!("conv weight {s:?} / bias {:?}", bias.shape()))),
        }
    }

    /// He-uniform weights, zero bias.
    pub fn init(in_channels: usize, out_channels: usize, rng: &mut SeededRng) -> Self {
        let fan_in = in_channels * TAPS;
        Self {
            weight: he_uniform(&[out_channels, in_channels, KERNEL, KERNEL], fan_in, rng),
            bias: Tensor::zeros(&[out_channels]),
        }
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn cast<U: Real>(&self) -> ConvLayer<U> {
        ConvLayer {
            weight: self.weight.cast(),
            bias: self.bias.cast(),
        }
    }

    fn check_input(&self, input: &Tensor<T>) -> Result<(usize, usize, usize)> {
        let (c, h, w) = input.dims3()?;
        if c != self.in_channels() {
            return Err(shape_err(format!(
                "conv expects {} input channels, got {c}",
                self.in_channels()
            )));
        }
        Ok((c, h, w))
    }

    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let (c, h, w) = self.check_input(input)?;
        let co = self.out_channels();
        let g = Grid::new(h, w);
        let xp = g.pad(input.data(), c);
        let mut grid = vec![T::zero(); co * g.n];
        for (o, row) in grid.chunks_mut(g.n).enumerate() {
            row.fill(self.bias.data()[o]);
        }
        for tap in 0..TAPS {
            gemm(
                T::one(),
                self.tap_weights(tap, c, co),
                MatRef {
                    data: &xp[g.offset(tap)..],
                    rows: c,
                    cols: g.n,
                    rs: g.plane,
                    cs: 1,
                },
                T::one(),
                &mut grid,
            );
        }
        Tensor::new(vec![co, h, w], g.crop(&grid, co, 0))
    }

    /// `[co × c]` slice of the kernel at one tap.
    fn tap_weights(&self, tap: usize, c: usize, co: usize) -> MatRef<'_, T> {
        MatRef {
            data: &self.weight.data()[tap..],
            rows: co,
            cols: c,
            rs: c * TAPS,
            cs: TAPS,
        }
    }

    /// Gradients of a scalar loss given `grad_out = ∂L/∂output`.
    pub fn backward(&self, input: &Tensor<T>, grad_out: &Tensor<T>, need_input_grad: bool) -> Result<ConvGrads<T>> {
        let (c, h, w) = self.check_input(input)?;
        let co = self.out_channels();
        if grad_out.shape() != [co, h, w] {
            return Err(shape_err(format!(
                "conv grad_out {:?}, expected {:?}",
                grad_out.shape(),
                [co, h, w]
            )));
        }
        let g = Grid::new(h, w);
        let xp = g.pad(input.data(), c);
        // Output gradient on the grid; the two junk columns stay zero.
        let mut dy = vec![T::zero(); co * g.n];
        for (o, plane) in grad_out.data().chunks(h * w).enumerate() {
            for (y, row) in plane.chunks(w).enumerate() {
                let at = o * g.n + y * g.wp;
                dy[at..at + w].copy_from_slice(row);
            }
        }
        let gb: Vec<T> = grad_out
            .data()
            .chunks(h * w)
            .map(|ch| ch.iter().copied().sum())
            .collect();

        let mut gw = vec![T::zero(); co * c * TAPS];
        let mut tmp = vec![T::zero(); co * c];
        for tap in 0..TAPS {
            gemm(
                T::one(),
                MatRef::row_major(&dy, co, g.n),
                MatRef {
                    data: &xp[g.offset(tap)..],
                    rows: g.n,
                    cols: c,
                    rs: 1,
                    cs: g.plane,
                },
                T::zero(),
                &mut tmp,
            );
            for (j, &v) in tmp.iter().enumerate() {
                gw[j * TAPS + tap] = v;
            }
        }

        let input_grad = if need_input_grad {
            let mut gxp = vec![T::zero(); c * g.plane + 2];
            for tap in 0..TAPS {
                let wt = MatRef {
                    data: &self.weight.data()[tap..],
                    rows: c,
                    cols: co,
                    rs: TAPS,
                    cs: c * TAPS,
                };
                gemm_into(
                    T::one(),
                    wt,
                    MatRef::row_major(&dy, co, g.n),
                    T::one(),
                    &mut gxp,
                    g.offset(tap),
                    g.plane,
                );
            }
            Some(Tensor::new(vec![c, h, w], g.crop(&gxp, c, g.wp + 1))?)
        } else {
            None
        };

        Ok(ConvGrads {
            input: input_grad,
            weight: Tensor::new(self.weight.shape().to_vec(), gw)?,
            bias: Tensor::new(vec![co], gb)?,
        })
    }
}

/// Geometry of the padded layout for an `h × w` plane.
struct Grid {
    h: usize,
    w: usize,
    wp: usize,
    plane: usize,
    /// Output grid length `h·(w+2)`.
    n: usize,
}

impl Grid {
    fn new(h: usize, w: usize) -> Self {
        let wp = w + 2;
        Self {
            h,
            w,
            wp,
            plane: (h + 2) * wp,
            n: h * wp,
        }
    }

    fn offset(&self, tap: usize) -> usize {
        (tap / KERNEL) * self.wp + tap % KERNEL
    }

    /// Zero-padded copy with two slack elements so the last tap's view of the
    /// junk columns stays in bounds.
    fn pad<T: Real>(&self, src: &[T], c: usize) -> Vec<T> {
        let mut out = vec![T::zero(); c * self.plane + 2];
        for ch in 0..c {
            for y in 0..self.h {
                let s = (ch * self.h + y) * self.w;
                let d = ch * self.plane + (y + 1) * self.wp + 1;
                out[d..d + self.w].copy_from_slice(&src[s..s + self.w]);
            }
        }
        out
    }

    /// Pulls `c` planes of `h × w` out of a buffer with row stride `wp`,
    /// starting at `start` within each plane of length `plane` (channels
    /// packed by `n` when `start == 0`, by `plane` otherwise).
    fn crop<T: Real>(&self, buf: &[T], c: usize, start: usize) -> Vec<T> {
        let stride = if start == 0 { self.n } else { self.plane };
        let mut out = Vec::with_capacity(c * self.h * self.w);
        for ch in 0..c {
            for y in 0..self.h {
                let s = ch * stride + start + y * self.wp;
                out.extend_from_slice(&buf[s..s + self.w]);
            }
        }
        out
    }
}
