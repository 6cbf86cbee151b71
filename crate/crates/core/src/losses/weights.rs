use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One non-negative weight per loss term of the self-supervised objective.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub w_pho: f64,
    pub w_ssim: f64,
    pub w_sc: f64,
    pub w_sm: f64,
    pub w_om: f64,
    #[serde(rename = "w_D")]
    pub w_d: f64,
    #[serde(rename = "w_S")]
    pub w_s: f64,
}

/// Names of the four shipped weight presets.
pub const PRESET_NAMES: [&str; 4] = ["sn2sn", "sun2sn", "cs2cs", "cs2k"];

impl LossWeights {
    pub const fn from_array(w: [f64; 7]) -> Self {
        LossWeights {
            w_pho: w[0],
            w_ssim: w[1],
            w_sc: w[2],
            w_sm: w[3],
            w_om: w[4],
            w_d: w[5],
            w_s: w[6],
        }
    }

    pub fn to_array(&self) -> [f64; 7] {
        [self.w_pho, self.w_ssim, self.w_sc, self.w_sm, self.w_om, self.w_d, self.w_s]
    }

    pub fn zero() -> Self {
        Self::from_array([0.0; 7])
    }

    pub fn preset(name: &str) -> Option<Self> {
        let w = match name {
            "sn2sn" => [1.0, 0.15, 0.8, 0.025, 0.08, 0.08, 1.5],
            "sun2sn" => [1.0, 0.15, 0.8, 0.01, 0.07, 0.03, 1.5],
            "cs2cs" => [1.0, 0.15, 0.8, 0.07, 0.08, 0.08, 1.5],
            "cs2k" => [1.0, 0.15, 0.8, 0.01, 0.07, 0.03, 1.5],
            _ => return None,
        };
        Some(Self::from_array(w))
    }

    pub fn validate(&self) -> Result<()> {
        match self.to_array().iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            Some(w) => Err(Error::config(format!("loss weights must be finite and >= 0, got {w}"))),
            None => Ok(()),
        }
    }
}

impl Default for LossWeights {
    fn default() -> Self {
        Self::preset("sn2sn").expect("builtin preset")
    }
}

/// How the per-pixel sums (smoothness, outlier regularizer, priors) are
/// reduced inside the total loss.
///
/// `Mean` divides each of them by the pixel count of its scale, putting them
/// on the same footing as the masked means of the consistency terms. `Sum`
/// keeps the raw sums.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PixelReduction {
    #[default]
    Mean,
    Sum,
}
