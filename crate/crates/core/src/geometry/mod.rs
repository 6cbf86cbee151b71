//! Camera poses, pinhole projection and differentiable inverse warping.

mod intrinsics;
mod pose;
mod warp;

pub use intrinsics::Intrinsics;
pub use pose::{pose_compose, pose_invert, rodrigues, se3_exp, PoseSE3};
pub use warp::{bilinear_sample, bilinear_sample_values, project, project_values, Warp, WarpField};

#[cfg(test)]
mod tests;
