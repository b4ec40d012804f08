use super::{Real, Tensor};
use crate::rng::SeededRng;

/// He-uniform: U(−√(6/fan_in), √(6/fan_in)).
pub fn he_uniform<T: Real>(shape: &[usize], fan_in: usize, rng: &mut SeededRng) -> Tensor<T> {
    let limit = (6.0 / fan_in as f64).sqrt();
    Tensor::from_fn(shape, |_| T::of(rng.uniform_range(-limit, limit)))
}
