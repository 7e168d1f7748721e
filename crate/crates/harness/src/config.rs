//! Run configuration shared by every subcommand. Loaded from JSON; any field
//! except `seed` may be omitted and falls back to the desk-scale default.

use std::path::{Path, PathBuf};

use fpforge_core::compositor::DEFAULT_ALPHA;
use fpforge_core::fpsynth::MIN_MASTER_DIM;
use fpforge_core::metrics::MetricConfig;
use fpforge_neural::models::{PatchDiscriminatorConfig, UNetConfig};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Unet,
    Pix2pixSmoke,
    CycleganSmoke,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Unet => "unet",
            Self::Pix2pixSmoke => "pix2pix_smoke",
            Self::CycleganSmoke => "cyclegan_smoke",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unet" => Ok(Self::Unet),
            "pix2pix_smoke" => Ok(Self::Pix2pixSmoke),
            "cyclegan_smoke" => Ok(Self::CycleganSmoke),
            other => Err(HarnessError::config(format!(
                "unknown model {other:?}; expected unet, pix2pix_smoke or cyclegan_smoke"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    /// `N(0, 0.02²)` weights.
    Gaussian,
    /// `N(0, 2/fan_in)` weights.
    He,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateConfig {
    pub count: usize,
    pub width: usize,
    pub height: usize,
    pub alpha: f64,
    /// Directory of PGM/PPM background textures.
    pub textures: Option<PathBuf>,
    /// Use procedural textures when `textures` is unset.
    pub procedural_fallback: bool,
    pub procedural_textures: usize,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self {
            count: 100,
            width: 275,
            height: 400,
            alpha: DEFAULT_ALPHA,
            textures: None,
            procedural_fallback: true,
            procedural_textures: 8,
        }
    }
}

impl GenerateConfig {
    pub fn paper_scale() -> Self {
        Self {
            count: 100_000,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(HarnessError::config("generate.count must be positive"));
        }
        if self.width < MIN_MASTER_DIM || self.height < MIN_MASTER_DIM {
            return Err(HarnessError::config(format!(
                "images must be at least {MIN_MASTER_DIM}x{MIN_MASTER_DIM}, got {}x{}",
                self.width, self.height
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(HarnessError::config(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if self.textures.is_none() && !self.procedural_fallback {
            return Err(HarnessError::config(
                "no texture directory given and procedural fallback is disabled",
            ));
        }
        if self.textures.is_none() && self.procedural_textures == 0 {
            return Err(HarnessError::config("procedural_textures must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub model: ModelKind,
    /// Total optimizer steps; when unset, `epochs` full passes are run.
    pub steps: Option<usize>,
    pub epochs: usize,
    /// Trailing epochs over which the learning rate decays linearly to zero.
    pub decay_epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub input_size: usize,
    pub init: InitScheme,
    pub unet: UNetConfig,
    pub discriminator: PatchDiscriminatorConfig,
    /// Weight of the L1 term added to the pix2pix generator loss.
    pub l1_weight: f64,
    pub cycle_weight: f64,
    /// Train the generator on `−ln D(G(z))` instead of `ln(1 − D(G(z)))`.
    pub non_saturating: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::desk(ModelKind::Unet)
    }
}

impl TrainConfig {
    pub fn desk(model: ModelKind) -> Self {
        let gan = model != ModelKind::Unet;
        Self {
            model,
            steps: Some(200),
            epochs: 1,
            decay_epochs: 0,
            batch_size: 8,
            lr: if gan { 2e-4 } else { 1e-4 },
            beta1: if gan { 0.5 } else { 0.9 },
            beta2: 0.999,
            input_size: 64,
            init: if gan { InitScheme::Gaussian } else { InitScheme::He },
            unet: UNetConfig::default(),
            discriminator: PatchDiscriminatorConfig::default(),
            l1_weight: 100.0,
            cycle_weight: 10.0,
            non_saturating: false,
        }
    }

    pub fn paper_scale(model: ModelKind) -> Self {
        let (epochs, decay_epochs, batch_size) = match model {
            ModelKind::Unet => (50, 0, 32),
            ModelKind::Pix2pixSmoke => (35, 15, 6),
            ModelKind::CycleganSmoke => (30, 10, 64),
        };
        Self {
            steps: None,
            epochs,
            decay_epochs,
            batch_size,
            input_size: 256,
            unet: UNetConfig::paper_scale(),
            discriminator: PatchDiscriminatorConfig {
                base_channels: 64,
                ..PatchDiscriminatorConfig::default()
            },
            ..Self::desk(model)
        }
    }

    /// The discriminator actually built: the conditional one sees the input
    /// and the candidate stacked along channels.
    pub fn discriminator_config(&self) -> PatchDiscriminatorConfig {
        let in_channels = match self.model {
            ModelKind::Pix2pixSmoke => self.unet.in_channels + self.unet.out_channels,
            _ => self.unet.out_channels,
        };
        PatchDiscriminatorConfig {
            in_channels,
            ..self.discriminator
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.unet.validate()?;
        if self.model == ModelKind::CycleganSmoke && self.unet.in_channels != self.unet.out_channels {
            return Err(HarnessError::config(
                "cycle training maps both ways and needs equal input and output channels",
            ));
        }
        self.unet.check_input(self.input_size, self.input_size).map_err(|e| {
            HarnessError::config(format!("train.input_size {}: {e}", self.input_size))
        })?;
        if self.model != ModelKind::Unet {
            self.discriminator.validate()?;
            let f = 1usize << self.discriminator.layers;
            if !self.input_size.is_multiple_of(f) {
                return Err(HarnessError::config(format!(
                    "train.input_size {} not divisible by {f} for a {}-layer discriminator",
                    self.input_size, self.discriminator.layers
                )));
            }
        }
        if self.batch_size == 0 {
            return Err(HarnessError::config("train.batch_size must be positive"));
        }
        if self.steps == Some(0) || (self.steps.is_none() && self.epochs == 0) {
            return Err(HarnessError::config("training needs at least one step"));
        }
        if self.decay_epochs > self.epochs {
            return Err(HarnessError::config(format!(
                "train.decay_epochs {} exceeds train.epochs {}",
                self.decay_epochs, self.epochs
            )));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(HarnessError::config(format!("train.lr {} must be positive", self.lr)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(HarnessError::config(format!("train.{name} {b} outside (0, 1)")));
            }
        }
        if !(self.l1_weight >= 0.0 && self.cycle_weight >= 0.0) {
            return Err(HarnessError::config("loss weights must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Side of the center crop fed to the model and scored.
    pub input_size: usize,
    /// Write `[noisy | ground truth | output]` strips per sample.
    pub strips: bool,
    pub metrics: MetricConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            input_size: 64,
            strips: false,
            metrics: MetricConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Root of every random stream. Required.
    pub seed: u64,
    #[serde(default)]
    pub generate: GenerateConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub eval: EvalConfig,
}

impl RunConfig {
    pub fn desk(seed: u64) -> Self {
        Self {
            seed,
            generate: GenerateConfig::default(),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
        }
    }

    pub fn paper_scale(seed: u64, model: ModelKind) -> Self {
        Self {
            seed,
            generate: GenerateConfig::paper_scale(),
            train: TrainConfig::paper_scale(model),
            eval: EvalConfig {
                input_size: 256,
                ..EvalConfig::default()
            },
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| HarnessError::config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(HarnessError::io(path))?;
        Self::from_json(&text).map_err(|e| HarnessError::config(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_is_mandatory() {
        assert!(RunConfig::from_json("{}").is_err());
        let cfg = RunConfig::from_json(r#"{"seed": 5}"#).unwrap();
        assert_eq!(cfg, RunConfig::desk(5));
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = RunConfig::from_json(r#"{"seed": 1, "train": {"lr": 0.1, "momentum": 3}}"#).unwrap_err();
        assert!(err.to_string().contains("momentum"), "{err}");
    }

    #[test]
    fn model_names_roundtrip() {
        for m in [ModelKind::Unet, ModelKind::Pix2pixSmoke, ModelKind::CycleganSmoke] {
            assert_eq!(m.as_str().parse::<ModelKind>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{}\"", m.as_str()));
        }
        assert!("gan".parse::<ModelKind>().is_err());
    }

    #[test]
    fn validation() {
        let mut t = TrainConfig::default();
        t.validate().unwrap();
        t.input_size = 60;
        assert!(t.validate().is_err());
        let mut t = TrainConfig::paper_scale(ModelKind::Pix2pixSmoke);
        t.validate().unwrap();
        t.decay_epochs = 40;
        assert!(t.validate().is_err());
        let mut g = GenerateConfig::default();
        g.validate().unwrap();
        g.procedural_fallback = false;
        assert!(g.validate().is_err());
    }
}
