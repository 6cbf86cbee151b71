//! Depth, segmentation and ego-motion evaluation plus result panels.
//!
//! Depth uses the usual monocular error set with optional median scaling,
//! segmentation per-class IoU with absent classes reported as `null`, and
//! ego-motion a snippet-level ATE: predicted camera positions (relative to
//! the snippet's first camera) are scaled by the least-squares factor onto
//! the ground truth and the mean position error is reported.

mod drivers;
mod metrics;
mod render;

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

pub use drivers::*;
pub use metrics::*;
pub use render::*;

pub const DEPTH_REPORT: &str = "eval_depth.json";
pub const SEG_REPORT: &str = "eval_seg.json";
pub const ODOM_REPORT: &str = "eval_odom.json";

/// Writes a report as pretty JSON.
pub fn write_report<T: Serialize>(path: &Path, report: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(report).expect("report serializes");
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests;
