//! Miniature depth/outlier, segmentation and ego-motion networks.
//!
//! All three are plain conv + ELU encoder-decoders (the pose network is an
//! encoder only) whose parameters live in one [`ParamStore`] under the
//! prefixes `depth.`, `seg.` and `pose.`.

mod arch;
mod nets;
mod params;
mod prediction;

pub use arch::{ArchConfig, MIN_SIDE, SIZE_MULTIPLE};
pub use nets::*;
pub use params::{Bound, ParamStore};
pub(crate) use params::rng_for;
pub use prediction::{FramePrediction, FrozenPrediction, PredictionSet};

#[cfg(test)]
mod tests;
