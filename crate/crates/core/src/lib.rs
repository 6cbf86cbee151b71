//! Bootstrapped self-supervised training of depth, semantic segmentation
//! and ego-motion networks from monocular video.

pub mod autodiff;
pub mod error;
pub mod evalmetrics;
pub mod geometry;
pub mod losses;
pub mod networks;
pub mod synthdata;
pub mod training;

pub use autodiff::{Tape, Tensor, Var};
pub use error::{Error, Result};
