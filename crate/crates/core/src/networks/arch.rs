use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sizes of the three miniature networks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArchConfig {
    pub classes: usize,
    /// Feature channels of the depth encoder levels, finest first.
    pub depth_channels: [usize; 4],
    pub seg_channels: [usize; 4],
    pub pose_channels: [usize; 4],
    pub depth_scales: usize,
    pub seg_scales: usize,
}

impl Default for ArchConfig {
    fn default() -> Self {
        ArchConfig {
            classes: 6,
            depth_channels: [8, 16, 24, 32],
            seg_channels: [8, 16, 24, 32],
            pose_channels: [8, 16, 24, 32],
            depth_scales: 4,
            seg_scales: 3,
        }
    }
}

/// Every input side must be a multiple of this.
pub const SIZE_MULTIPLE: usize = 8;
/// Smallest input side; the coarsest level must still fit a 3x3 kernel.
pub const MIN_SIDE: usize = 3 * SIZE_MULTIPLE;

impl ArchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depth_scales != 4 || self.seg_scales != 3 {
            return Err(Error::config(format!(
                "networks emit 4 depth and 3 segmentation scales, config asks for {} and {}",
                self.depth_scales, self.seg_scales
            )));
        }
        if !(2..=255).contains(&self.classes) {
            return Err(Error::config(format!("class count must be in [2, 255], got {}", self.classes)));
        }
        let all = self.depth_channels.iter().chain(&self.seg_channels).chain(&self.pose_channels);
        if all.into_iter().any(|&c| c == 0) {
            return Err(Error::config("channel counts must be positive"));
        }
        Ok(())
    }

    pub fn check_input(&self, height: usize, width: usize) -> Result<()> {
        if height % SIZE_MULTIPLE != 0 || width % SIZE_MULTIPLE != 0 || height < MIN_SIDE || width < MIN_SIDE {
            return Err(Error::contract(format!(
                "input {height}x{width} must be a multiple of {SIZE_MULTIPLE} and at least {MIN_SIDE} on both sides"
            )));
        }
        Ok(())
    }
}
