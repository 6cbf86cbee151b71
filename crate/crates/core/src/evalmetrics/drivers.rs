use crate::autodiff::{Tape, Tensor};
use crate::error::{Error, Result};
use crate::geometry::PoseSE3;
use crate::losses::VOID;
use crate::networks::{depth_forward, pose_forward, seg_forward, ArchConfig, ParamStore};
use crate::synthdata::{make_snippets, Sequence};

use super::{ate, depth_metrics, Confusion, DepthEvalReport, OdomEvalReport, ScaleMode, SegEvalReport};

/// Finest-scale outputs of the live networks on one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameOutputs {
    pub depth: Tensor,
    pub outlier: Tensor,
    /// Arg-max class per pixel.
    pub labels: Vec<u8>,
}

pub fn argmax_labels(probs: &Tensor) -> Result<Vec<u8>> {
    let (c, h, w) = probs.dims3()?;
    let d = probs.data();
    Ok((0..h * w)
        .map(|p| {
            let mut best = 0;
            for k in 1..c {
                if d[k * h * w + p] > d[best * h * w + p] {
                    best = k;
                }
            }
            best as u8
        })
        .collect())
}

pub fn predict_frame(params: &ParamStore, arch: &ArchConfig, image: &Tensor) -> Result<FrameOutputs> {
    let tape = Tape::new();
    let bound = params.bind(&tape, |_| false);
    let x = tape.constant(image.clone());
    let (depth, outlier) = depth_forward(&bound, arch, x)?;
    let probs = seg_forward(&bound, arch, x)?.probs;
    Ok(FrameOutputs {
        depth: (*depth[0].value()).clone(),
        outlier: (*outlier[0].value()).clone(),
        labels: argmax_labels(&probs[0].value())?,
    })
}

/// Camera-to-anchor poses of a snippet as predicted by the pose network.
pub fn predict_snippet_poses(params: &ParamStore, arch: &ArchConfig, images: [&Tensor; 3]) -> Result<[PoseSE3; 3]> {
    if !params.has_prefix("pose.") {
        return Err(Error::config("parameters contain no pose network"));
    }
    let tape = Tape::new();
    let bound = params.bind(&tape, |_| false);
    let frames: Vec<_> = images.iter().map(|t| tape.constant((*t).clone())).collect();
    let out = pose_forward(&bound, arch, &frames)?;
    let p21 = PoseSE3::from_tensor(&out.pose_21.value())?;
    let p23 = PoseSE3::from_tensor(&out.pose_23.value())?;
    Ok([PoseSE3::identity(), p21, p21.compose(&p23.inverse())])
}

/// Depth metrics of `(prediction, ground truth)` pairs, averaged per frame.
pub fn eval_depth_maps<'a>(pairs: impl IntoIterator<Item = (&'a Tensor, &'a Tensor)>, mode: ScaleMode) -> Result<DepthEvalReport> {
    let mut reports = Vec::new();
    for (pred, gt) in pairs {
        if pred.shape() != gt.shape() {
            return Err(Error::shape("eval_depth", format!("pred {:?} vs gt {:?}", pred.shape(), gt.shape())));
        }
        let valid: Vec<bool> = gt.data().iter().map(|&g| g > 0.0 && g.is_finite()).collect();
        reports.push(depth_metrics(pred.data(), gt.data(), &valid, mode)?);
    }
    if reports.is_empty() {
        return Err(Error::config("no frames with ground-truth depth"));
    }
    DepthEvalReport::mean(&reports)
}

/// IoU of `(prediction, ground truth)` label maps, counts pooled across frames.
pub fn eval_label_maps<'a>(pairs: impl IntoIterator<Item = (&'a [u8], &'a [u8])>, classes: usize) -> Result<SegEvalReport> {
    let mut conf = Confusion::new(classes, VOID);
    let mut any = false;
    for (pred, gt) in pairs {
        conf.add(pred, gt)?;
        any = true;
    }
    if !any {
        return Err(Error::config("no labeled frames"));
    }
    Ok(conf.report())
}

/// Snippet ATE of per-frame world-to-camera trajectories.
pub fn eval_trajectory(pred: &[PoseSE3], gt: &[PoseSE3], stride: usize, skip: usize) -> Result<OdomEvalReport> {
    if pred.len() != gt.len() {
        return Err(Error::contract(format!("{} predicted poses for {} frames", pred.len(), gt.len())));
    }
    let rel = |t: &[PoseSE3], i: usize, a: usize| t[a].compose(&t[i].inverse());
    let errors = make_snippets(gt.len(), stride, skip)
        .iter()
        .map(|s| {
            let a = s.indices[0];
            let p: Vec<_> = s.indices.iter().map(|&i| rel(pred, i, a)).collect();
            let g: Vec<_> = s.indices.iter().map(|&i| rel(gt, i, a)).collect();
            ate(&p, &g)
        })
        .collect::<Result<Vec<_>>>()?;
    OdomEvalReport::from_errors(&errors)
}

/// Depth metrics of the network over every frame of `seq` with
/// ground-truth depth.
pub fn eval_depth(params: &ParamStore, arch: &ArchConfig, seq: &Sequence, mode: ScaleMode) -> Result<DepthEvalReport> {
    let mut preds = Vec::new();
    let mut gts = Vec::new();
    for f in &seq.frames {
        let Some(gt) = &f.depth else { continue };
        let tape = Tape::new();
        let bound = params.bind(&tape, |_| false);
        let (depth, _) = depth_forward(&bound, arch, tape.constant(f.image.clone()))?;
        preds.push((*depth[0].value()).clone());
        gts.push(gt);
    }
    eval_depth_maps(preds.iter().zip(gts), mode)
}

/// IoU of the network over every labeled frame of `seq`.
pub fn eval_seg(params: &ParamStore, arch: &ArchConfig, seq: &Sequence) -> Result<SegEvalReport> {
    if arch.classes != seq.classes {
        return Err(Error::config(format!(
            "network predicts {} classes, dataset has {}",
            arch.classes, seq.classes
        )));
    }
    let mut pairs = Vec::new();
    for f in &seq.frames {
        let Some(gt) = &f.labels else { continue };
        let tape = Tape::new();
        let bound = params.bind(&tape, |_| false);
        let probs = seg_forward(&bound, arch, tape.constant(f.image.clone()))?.probs;
        pairs.push((argmax_labels(&probs[0].value())?, gt.as_slice()));
    }
    eval_label_maps(pairs.iter().map(|(p, g)| (p.as_slice(), *g)), seq.classes)
}

/// Snippet ATE of the pose network over all snippets of `seq`.
pub fn eval_odom(params: &ParamStore, arch: &ArchConfig, seq: &Sequence, stride: usize, skip: usize) -> Result<OdomEvalReport> {
    let mut errors = Vec::new();
    for s in make_snippets(seq.len(), stride, skip) {
        let [a, b, c] = s.indices;
        let img = |i: usize| &seq.frames[i].image;
        let pred = predict_snippet_poses(params, arch, [img(a), img(b), img(c)])?;
        let gt: Vec<PoseSE3> = s.indices.iter().map(|&i| seq.relative_pose(i, a)).collect();
        errors.push(ate(&pred, &gt)?);
    }
    OdomEvalReport::from_errors(&errors)
}
