//! Element-level saliency prediction for mobile UI screenshots.
//!
//! The pipeline turns raw gaze samples into per-element ground truth
//! ([`gaze`]), cuts every UI element into three context crops plus a small
//! vector of colour and geometry statistics ([`features`]), encodes the crops
//! with denoising convolutional autoencoders and scores each element with a
//! fully connected head ([`model`]), and measures predictions with AUC, CC and
//! KL ([`eval`]). [`toolkit`] holds the on-disk formats and the synthetic
//! dataset generator.

pub mod error;
pub mod eval;
pub mod features;
pub mod gaze;
pub mod model;
pub mod numerics;
pub mod par;
pub mod rng;
pub mod toolkit;

pub use error::{Error, Result};
pub use rng::SeededRng;
