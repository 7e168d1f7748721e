//! Model files: a neural checkpoint whose config block names the model kind
//! and whose parameter names carry a per-network prefix.

use std::path::Path;

use fpforge_neural::checkpoint::Checkpoint;
use fpforge_neural::models::{PatchDiscriminatorConfig, UNet, UNetConfig};
use fpforge_neural::ParamSet;
use serde::{Deserialize, Serialize};

use crate::config::{ModelKind, TrainConfig};
use crate::error::{HarnessError, Result};

/// Prefix of the network that maps noisy to clean images.
pub const GENERATOR: &str = "generator";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub model: ModelKind,
    pub input_size: usize,
    pub unet: UNetConfig,
    pub discriminator: Option<PatchDiscriminatorConfig>,
}

impl ModelConfig {
    pub fn from_train(cfg: &TrainConfig) -> Self {
        Self {
            model: cfg.model,
            input_size: cfg.input_size,
            unet: cfg.unet,
            discriminator: (cfg.model != ModelKind::Unet).then(|| cfg.discriminator_config()),
        }
    }
}

/// Flattens named networks into one checkpoint, `<prefix>.<param>`.
pub fn encode_model(cfg: &ModelConfig, nets: &[(&str, &ParamSet<f32>)]) -> Result<Vec<u8>> {
    let mut all = ParamSet::new();
    for (prefix, params) in nets {
        for (name, t) in params.iter() {
            all.push(format!("{prefix}.{name}"), t.clone());
        }
    }
    let json = serde_json::to_string(cfg).expect("model config serializes");
    Ok(Checkpoint::new(json, all).encode()?)
}

pub fn save_model(path: &Path, cfg: &ModelConfig, nets: &[(&str, &ParamSet<f32>)]) -> Result<()> {
    let bytes = encode_model(cfg, nets)?;
    std::fs::write(path, bytes).map_err(HarnessError::io(path))
}

/// Parameters stored under `prefix`, with the prefix removed.
pub fn extract(ck: &Checkpoint, prefix: &str) -> Vec<(String, fpforge_neural::Tensor<f32>)> {
    let lead = format!("{prefix}.");
    ck.params
        .iter()
        .filter_map(|(n, t)| n.strip_prefix(&lead).map(|rest| (rest.to_owned(), t.clone())))
        .collect()
}

/// Decodes a model file and rebuilds its generator.
pub fn decode_generator(bytes: &[u8]) -> Result<(ModelConfig, UNet<f32>)> {
    let ck = Checkpoint::decode(bytes)?;
    let cfg: ModelConfig = serde_json::from_str(&ck.config)
        .map_err(|e| HarnessError::config(format!("checkpoint config: {e}")))?;
    let mut net = UNet::new(cfg.unet)?;
    net.params
        .load_named(extract(&ck, GENERATOR))
        .map_err(|e| HarnessError::config(format!("checkpoint does not match its config: {e}")))?;
    Ok((cfg, net))
}

pub fn load_generator(path: &Path) -> Result<(ModelConfig, UNet<f32>)> {
    let bytes = std::fs::read(path).map_err(HarnessError::io(path))?;
    decode_generator(&bytes)
}
