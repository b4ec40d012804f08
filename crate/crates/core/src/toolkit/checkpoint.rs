//! Binary checkpoint container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "UISAL1"  u32 version
//! u64 metadata length, compact JSON metadata
//! u32 tensor count
//! per tensor: u32 name length, UTF-8 name, u32 rank, rank × u64 dims,
//!             product(dims) × f32 values, row-major
//! ```
//!
//! Tensors are written in a fixed order, so saving a loaded checkpoint
//! reproduces the original bytes.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{
    Autoencoder, ExperimentConfig, FeatureNormalizer, HookSpec, ProviderRegistry, SaliencyHead, SaliencyModel,
    HEAD_LAYER_NAMES, LAYER_NAMES,
};
use crate::numerics::{ConvLayer, DenseLayer, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 6] = b"UISAL1";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Upper bound on tensor rank accepted when reading.
const MAX_RANK: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckpointKind {
    /// Full predictor: three encoders, head and normaliser.
    Model,
    /// Only the three pretrained autoencoders.
    Autoencoders,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    pub kind: CheckpointKind,
    pub seed: u64,
    #[serde(default)]
    pub config: Option<ExperimentConfig>,
    #[serde(default)]
    pub normalizer: Option<FeatureNormalizer>,
    #[serde(default)]
    pub hooks: Vec<HookSpec>,
    #[serde(default)]
    pub hidden: Option<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub tensors: Vec<(String, Tensor<f32>)>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| bad("truncated file"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn len(&mut self, wide: bool) -> Result<usize> {
        let v = if wide { self.u64()? } else { u64::from(self.u32()?) };
        usize::try_from(v).map_err(|_| bad("length overflows usize"))
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

fn conv_names(prefix: &str) -> impl Iterator<Item = (String, String)> + '_ {
    LAYER_NAMES
        .iter()
        .map(move |l| (format!("{prefix}.{l}.weight"), format!("{prefix}.{l}.bias")))
}

fn head_names() -> impl Iterator<Item = (String, String)> {
    HEAD_LAYER_NAMES
        .iter()
        .map(|l| (format!("head.{l}.weight"), format!("head.{l}.bias")))
}

fn push_autoencoder(out: &mut Vec<(String, Tensor<f32>)>, prefix: &str, ae: &Autoencoder<f32>) {
    for ((w, b), layer) in conv_names(prefix).zip(&ae.layers) {
        out.push((w, layer.weight.clone()));
        out.push((b, layer.bias.clone()));
    }
}

impl Checkpoint {
    /// Container for a full model. `config` is informational and may be absent.
    pub fn from_model(model: &SaliencyModel, seed: u64, config: Option<ExperimentConfig>) -> Result<Self> {
        model.validate()?;
        let normalizer = model
            .normalizer
            .clone()
            .ok_or_else(|| Error::Invalid("cannot checkpoint a model without a fitted normalizer".into()))?;
        let mut tensors = Vec::new();
        for (s, ae) in model.encoders.iter().enumerate() {
            push_autoencoder(&mut tensors, &format!("ae{s}"), ae);
        }
        for ((w, b), layer) in head_names().zip(&model.head.layers) {
            tensors.push((w, layer.weight.clone()));
            tensors.push((b, layer.bias.clone()));
        }
        Ok(Self {
            meta: CheckpointMeta {
                kind: CheckpointKind::Model,
                seed,
                config,
                normalizer: Some(normalizer),
                hooks: model.hooks.clone(),
                hidden: Some(model.head.hidden()),
            },
            tensors,
        })
    }

    pub fn from_autoencoders(encoders: &[Autoencoder<f32>; 3], seed: u64, config: Option<ExperimentConfig>) -> Self {
        let mut tensors = Vec::new();
        for (s, ae) in encoders.iter().enumerate() {
            push_autoencoder(&mut tensors, &format!("ae{s}"), ae);
        }
        Self {
            meta: CheckpointMeta {
                kind: CheckpointKind::Autoencoders,
                seed,
                config,
                normalizer: None,
                hooks: Vec::new(),
                hidden: None,
            },
            tensors,
        }
    }

    fn tensor(&self, name: &str) -> Result<Tensor<f32>> {
        self.tensors
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t.clone())
            .ok_or_else(|| bad(format!("missing tensor `{name}`")))
    }

    /// The three autoencoders; present in both kinds.
    pub fn autoencoders(&self) -> Result<[Autoencoder<f32>; 3]> {
        let build = |s: usize| -> Result<Autoencoder<f32>> {
            let layers = conv_names(&format!("ae{s}"))
                .map(|(w, b)| ConvLayer::new(self.tensor(&w)?, self.tensor(&b)?))
                .collect::<Result<Vec<_>>>()?;
            let layers: [ConvLayer<f32>; 5] = layers.try_into().map_err(|_| bad("autoencoder layer count"))?;
            Autoencoder::from_layers(layers)
        };
        Ok([build(0)?, build(1)?, build(2)?])
    }

    /// Rebuilds the predictor, checking every recorded feature provider
    /// against `registry`.
    pub fn to_model(&self, registry: &ProviderRegistry) -> Result<SaliencyModel> {
        if self.meta.kind != CheckpointKind::Model {
            return Err(bad("checkpoint holds autoencoders only, not a trained model"));
        }
        registry.resolve(&self.meta.hooks)?;
        let layers = head_names()
            .map(|(w, b)| DenseLayer::new(self.tensor(&w)?, self.tensor(&b)?))
            .collect::<Result<Vec<_>>>()?;
        let layers: [DenseLayer<f32>; 3] = layers.try_into().map_err(|_| bad("head layer count"))?;
        let head = SaliencyHead::from_layers(layers)?;
        if let Some(h) = self.meta.hidden {
            if h != head.hidden() {
                return Err(bad(format!(
                    "metadata says hidden {h:?}, tensors say {:?}",
                    head.hidden()
                )));
            }
        }
        let model = SaliencyModel {
            encoders: self.autoencoders()?,
            normalizer: Some(
                self.meta
                    .normalizer
                    .clone()
                    .ok_or_else(|| bad("model checkpoint lacks normalizer"))?,
            ),
            head,
            hooks: self.meta.hooks.clone(),
        };
        model.validate()?;
        Ok(model)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let meta = serde_json::to_vec(&self.meta)?;
        let values: usize = self.tensors.iter().map(|(_, t)| t.len()).sum();
        let mut out = Vec::with_capacity(64 + meta.len() + 4 * values + 64 * self.tensors.len());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(meta.len() as u64).to_le_bytes());
        out.extend_from_slice(&meta);
        let count = u32::try_from(self.tensors.len()).map_err(|_| bad("too many tensors"))?;
        out.extend_from_slice(&count.to_le_bytes());
        for (name, t) in &self.tensors {
            let n = u32::try_from(name.len()).map_err(|_| bad("tensor name too long"))?;
            out.extend_from_slice(&n.to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(CHECKPOINT_MAGIC.len()).ok() != Some(&CHECKPOINT_MAGIC[..]) {
            return Err(bad("not a checkpoint (bad magic)"));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(bad(format!("unsupported format version {version}")));
        }
        let meta_len = r.len(true)?;
        let meta: CheckpointMeta = serde_json::from_slice(r.take(meta_len)?)?;
        let count = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(count.min(256));
        for _ in 0..count {
            let name_len = r.len(false)?;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| bad("tensor name is not UTF-8"))?
                .to_owned();
            let rank = r.len(false)?;
            if rank > MAX_RANK {
                return Err(bad(format!("tensor `{name}` has rank {rank}")));
            }
            let shape = (0..rank).map(|_| r.len(true)).collect::<Result<Vec<_>>>()?;
            let n = shape
                .iter()
                .try_fold(1usize, |a, &d| a.checked_mul(d))
                .filter(|n| n.checked_mul(4).is_some_and(|b| b <= r.remaining()))
                .ok_or_else(|| bad(format!("tensor `{name}` is larger than the file")))?;
            let data = r
                .take(4 * n)?
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            if tensors.iter().any(|(n, _): &(String, _)| *n == name) {
                return Err(bad(format!("duplicate tensor `{name}`")));
            }
            tensors.push((name, Tensor::new(shape, data)?));
        }
        if r.remaining() != 0 {
            return Err(bad(format!("{} trailing bytes", r.remaining())));
        }
        Ok(Self { meta, tensors })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

/// Short content hash identifying a serialized checkpoint.
pub fn model_version(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}
