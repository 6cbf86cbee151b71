//! Two-stage training: a supervised bootstrap on labeled frames, then
//! self-supervised refinement on unlabeled snippets anchored by frozen
//! copies of the bootstrapped networks.

mod adam;
mod augment;
mod checkpoint;
mod config;
mod record;
mod selfsup;
mod supervised;

pub use adam::Adam;
pub use augment::{Augmentation, Interp};
pub use checkpoint::{Checkpoint, MAGIC, VERSION};
pub use config::{AugmentConfig, Stage, TrainConfig};
pub use record::{read_train_log, StepRecord, TrainLog};
pub use selfsup::train_selfsup;
pub use supervised::{train_supervised, DEPTH_TERM, SEG_TERM};
