use crate::autodiff::{Tensor, Var};
use crate::error::{Error, Result};
use crate::geometry::pose_invert;

/// Multi-scale outputs for one frame, finest scale first.
#[derive(Clone, Debug)]
pub struct FramePrediction<'t> {
    /// 4 depth maps `[H_s, W_s]`.
    pub depth: Vec<Var<'t>>,
    /// 4 outlier masks `[H_s, W_s]` in `[0, 1]`.
    pub outlier: Vec<Var<'t>>,
    /// 3 softmax maps `[C, H_s, W_s]`.
    pub seg: Vec<Var<'t>>,
}

/// Predictions for a 3-frame snippet.
///
/// `pose_21` and `pose_23` are row-major `[R | t]` vars mapping points of
/// the centre camera into the first and last camera.
#[derive(Clone, Debug)]
pub struct PredictionSet<'t> {
    pub frames: Vec<FramePrediction<'t>>,
    pub pose_21: Var<'t>,
    pub pose_23: Var<'t>,
}

impl<'t> PredictionSet<'t> {
    /// Relative pose mapping camera `from` into camera `to` (0-based, adjacent).
    pub fn pose(&self, from: usize, to: usize) -> Result<Var<'t>> {
        match (from, to) {
            (1, 0) => Ok(self.pose_21),
            (1, 2) => Ok(self.pose_23),
            (0, 1) => pose_invert(self.pose_21),
            (2, 1) => pose_invert(self.pose_23),
            _ => Err(Error::contract(format!("no pose between frames {from} and {to}"))),
        }
    }
}

/// Detached outputs of the frozen networks for one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct FrozenPrediction {
    pub depth: Vec<Tensor>,
    pub seg: Vec<Tensor>,
}
