use super::{Real, Tensor};
use crate::error::{shape_err, Error, Result};
use crate::rng::SeededRng;

/// Per-unit multipliers from one dropout draw: 0 for dropped units,
/// `1/(1−rate)` for survivors. Reused by the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask<T> {
    scale: Vec<T>,
}

impl<T: Real> DropoutMask<T> {
    pub fn sample(len: usize, rate: f64, rng: &mut SeededRng) -> Result<Self> {
        check_rate(rate)?;
        let keep = T::of(1.0 / (1.0 - rate));
        let scale = (0..len)
            .map(|_| {
                if rate > 0.0 && rng.uniform() < rate {
                    T::zero()
                } else {
                    keep
                }
            })
            .collect();
        Ok(Self { scale })
    }

    pub fn identity(len: usize) -> Self {
        Self {
            scale: vec![T::one(); len],
        }
    }

    pub fn len(&self) -> usize {
        self.scale.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scale.is_empty()
    }

    pub fn dropped(&self) -> usize {
        self.scale.iter().filter(|&&s| s == T::zero()).count()
    }

    /// Multiplies in place; used identically for forward values and gradients.
    pub fn apply_slice(&self, values: &mut [T]) -> Result<()> {
        if values.len() != self.scale.len() {
            return Err(shape_err("dropout mask length"));
        }
        for (v, &s) in values.iter_mut().zip(&self.scale) {
            *v *= s;
        }
        Ok(())
    }
}

pub fn check_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
    }
    Ok(())
}

/// Inverted dropout. Returns the output and the mask for the backward pass;
/// with `training == false` the input passes through unchanged.
pub fn dropout<T: Real>(
    input: &Tensor<T>,
    rate: f64,
    rng: &mut SeededRng,
    training: bool,
) -> Result<(Tensor<T>, DropoutMask<T>)> {
    check_rate(rate)?;
    if !training || rate == 0.0 {
        return Ok((input.clone(), DropoutMask::identity(input.len())));
    }
    let mask = DropoutMask::sample(input.len(), rate, rng)?;
    let mut out = input.clone();
    mask.apply_slice(out.data_mut())?;
    Ok((out, mask))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rate_is_identity() {
        let mut rng = SeededRng::new(0);
        let x = Tensor::<f32>::from_fn(&[10], |i| i as f32);
        assert_eq!(dropout(&x, 0.0, &mut rng, true).unwrap().0, x);
        assert_eq!(dropout(&x, 0.9, &mut rng, false).unwrap().0, x);
    }

    #[test]
    fn half_rate_fraction() {
        let mut rng = SeededRng::new(77);
        let x = Tensor::<f32>::full(&[100_000], 1.0);
        let (y, mask) = dropout(&x, 0.5, &mut rng, true).unwrap();
        let frac = mask.dropped() as f64 / 100_000.0;
        assert!((frac - 0.5).abs() < 0.01, "{frac}");
        assert!(y.data().iter().all(|&v| v == 0.0 || v == 2.0));
    }

    #[test]
    fn invalid_rate() {
        let mut rng = SeededRng::new(0);
        let x = Tensor::<f32>::zeros(&[2]);
        assert!(matches!(dropout(&x, 1.0, &mut rng, true), Err(Error::Config(_))));
        assert!(dropout(&x, -0.1, &mut rng, true).is_err());
    }
}
