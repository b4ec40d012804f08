//! On-disk formats and the synthetic dataset generator.

mod checkpoint;
mod manifest;
mod synth;

pub use checkpoint::{model_version, Checkpoint, CheckpointKind, CheckpointMeta, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use manifest::{write_dataset, CalibrationEntry, DatasetManifest, ScreenEntry, SessionEntry, MANIFEST_VERSION};
pub use synth::{
    rule_inputs, rule_saliency, synth_screen, synth_screens, RuleInputs, SynthConfig, SynthScreen, MIN_ELEMENT_SIDE,
};
