//! Self-supervised consistency, smoothness, outlier and prior losses, the
//! supervised cross-entropy and L1 losses, and the snippet objective.

mod report;
mod supervised;
mod terms;
mod total;
mod weights;

pub use report::{LossReport, LossTerm};
pub use supervised::*;
pub use terms::*;
pub use total::{image_pyramid, total_loss, DEPTH_SCALES, PAIRS, SEG_SCALES};
pub use weights::{LossWeights, PixelReduction, PRESET_NAMES};
