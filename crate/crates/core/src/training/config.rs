use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{LossWeights, PixelReduction};
use crate::networks::ArchConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Supervised,
    Selfsup,
}

impl Stage {
    pub fn tag(self) -> u8 {
        match self {
            Stage::Supervised => 0,
            Stage::Selfsup => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Stage::Supervised),
            1 => Some(Stage::Selfsup),
            _ => None,
        }
    }

    pub fn default_lr(self) -> f64 {
        match self {
            Stage::Supervised => 1e-3,
            Stage::Selfsup => 2e-4,
        }
    }
}

/// Random scale-and-crop settings. Scales below 1 are rejected: a shrunk
/// image cannot be cropped back to the training resolution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub enabled: bool,
    pub scale_min: f64,
    pub scale_max: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            enabled: true,
            scale_min: 1.0,
            scale_max: 1.15,
        }
    }
}

/// Everything a training run needs besides the data itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub stage: Stage,
    pub data: Option<PathBuf>,
    pub weights: LossWeights,
    pub reduction: PixelReduction,
    /// Defaults to 1e-3 supervised, 2e-4 self-supervised.
    pub lr: Option<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub augment: AugmentConfig,
    pub snippet_stride: usize,
    pub snippet_skip: usize,
    pub ckpt_in: Option<PathBuf>,
    pub ckpt_out: Option<PathBuf>,
    pub log: Option<PathBuf>,
    pub arch: ArchConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            stage: Stage::Supervised,
            data: None,
            weights: LossWeights::default(),
            reduction: PixelReduction::default(),
            lr: None,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            steps: 1000,
            batch_size: 4,
            seed: 0,
            augment: AugmentConfig::default(),
            snippet_stride: 5,
            snippet_skip: 10,
            ckpt_in: None,
            ckpt_out: None,
            log: None,
            arch: ArchConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn for_stage(stage: Stage) -> Self {
        TrainConfig {
            stage,
            ..Self::default()
        }
    }

    pub fn learning_rate(&self) -> f64 {
        self.lr.unwrap_or(self.stage.default_lr())
    }

    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        self.arch.validate()?;
        let lr = self.learning_rate();
        if !(lr >= 0.0) || !lr.is_finite() {
            return Err(Error::config(format!("learning rate must be finite and >= 0, got {lr}")));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.eps > 0.0) {
            return Err(Error::config("Adam needs beta1, beta2 in [0, 1) and eps > 0"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be at least 1"));
        }
        if self.snippet_stride == 0 || self.snippet_skip == 0 {
            return Err(Error::config("snippet stride and skip must be at least 1"));
        }
        let a = &self.augment;
        if a.scale_min < 1.0 || a.scale_max < a.scale_min || !a.scale_max.is_finite() {
            return Err(Error::config(format!(
                "augmentation scale range must satisfy 1 <= min <= max, got [{}, {}]",
                a.scale_min, a.scale_max
            )));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
