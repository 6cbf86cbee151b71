use rand_chacha::ChaCha8Rng;

use super::params::{he_conv, rng_for};
use super::{ArchConfig, Bound, FramePrediction, FrozenPrediction, ParamStore, PredictionSet};
use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::geometry::se3_exp;

/// Inverse-depth range: `D = 1 / (INV_SCALE * sigmoid(x) + INV_MIN)`.
pub const INV_MIN: f64 = 0.01;
pub const INV_SCALE: f64 = 9.99;
pub const MIN_DEPTH: f64 = 1.0 / (INV_MIN + INV_SCALE);
pub const MAX_DEPTH: f64 = 1.0 / INV_MIN;

const DEPTH_HEAD_BIAS: f64 = -3.9;
const OUTLIER_HEAD_BIAS: f64 = 3.0;

fn init_encdec(store: &mut ParamStore, rng: &mut ChaCha8Rng, prefix: &str, cin: usize, ch: [usize; 4]) {
    he_conv(store, rng, &format!("{prefix}.enc0"), cin, ch[0], 3);
    for l in 1..4 {
        he_conv(store, rng, &format!("{prefix}.enc{l}"), ch[l - 1], ch[l], 3);
    }
    he_conv(store, rng, &format!("{prefix}.dec3"), ch[3], ch[3], 3);
    for l in (0..3).rev() {
        he_conv(store, rng, &format!("{prefix}.dec{l}"), ch[l + 1] + ch[l], ch[l], 3);
    }
}

/// Fresh parameters for all three networks, deterministic in `seed`.
///
/// Names are prefixed `depth.`, `seg.` and `pose.`.
pub fn init_params(seed: u64, arch: &ArchConfig) -> Result<ParamStore> {
    arch.validate()?;
    let mut store = ParamStore::new();

    let mut rng = rng_for(seed, 1);
    init_encdec(&mut store, &mut rng, "depth", 3, arch.depth_channels);
    for l in 0..arch.depth_scales {
        he_conv(&mut store, &mut rng, &format!("depth.head{l}"), arch.depth_channels[l], 2, 3);
        let b = store.get_mut(&format!("depth.head{l}.b")).expect("just inserted");
        b.data_mut().copy_from_slice(&[DEPTH_HEAD_BIAS, OUTLIER_HEAD_BIAS]);
    }

    let mut rng = rng_for(seed, 2);
    init_encdec(&mut store, &mut rng, "seg", 3, arch.seg_channels);
    for l in 0..arch.seg_scales {
        he_conv(&mut store, &mut rng, &format!("seg.head{l}"), arch.seg_channels[l], arch.classes, 3);
    }

    let mut rng = rng_for(seed, 3);
    let pc = arch.pose_channels;
    he_conv(&mut store, &mut rng, "pose.conv0", 9, pc[0], 3);
    for l in 1..4 {
        he_conv(&mut store, &mut rng, &format!("pose.conv{l}"), pc[l - 1], pc[l], 3);
    }
    store.insert("pose.head.w", Tensor::zeros(&[12, pc[3], 1, 1]));
    store.insert("pose.head.b", Tensor::zeros(&[12]));
    Ok(store)
}

fn conv<'t>(p: &Bound<'t>, name: &str, x: Var<'t>) -> Result<Var<'t>> {
    let w = p.get(&format!("{name}.w"))?;
    let b = p.get(&format!("{name}.b"))?;
    let pad = w.shape()[3] / 2;
    x.conv2d(w, Some(b), 1, pad)
}

fn check_image(arch: &ArchConfig, image: Var<'_>, channels: usize) -> Result<()> {
    let shape = image.shape();
    match shape[..] {
        [c, h, w] if c == channels => arch.check_input(h, w),
        _ => Err(Error::contract(format!("expected a [{channels},H,W] input, got {shape:?}"))),
    }
}

/// Decoder features at the four levels, finest first.
fn encdec<'t>(p: &Bound<'t>, prefix: &str, image: Var<'t>) -> Result<Vec<Var<'t>>> {
    let x = image.add_scalar(-0.5);
    let mut enc = vec![conv(p, &format!("{prefix}.enc0"), x)?.elu()];
    for l in 1..4 {
        let down = enc[l - 1].avg_pool2()?;
        enc.push(conv(p, &format!("{prefix}.enc{l}"), down)?.elu());
    }
    let mut dec = vec![conv(p, &format!("{prefix}.dec3"), enc[3])?.elu()];
    for l in (0..3).rev() {
        let up = dec.last().expect("non-empty").upsample_bilinear_x2()?;
        let cat = Var::concat_channels(&[up, enc[l]])?;
        dec.push(conv(p, &format!("{prefix}.dec{l}"), cat)?.elu());
    }
    dec.reverse();
    Ok(dec)
}

fn plane(v: Var<'_>) -> Result<Var<'_>> {
    let s = v.shape();
    v.reshape(&s[1..])
}

/// Depth maps and outlier masks at 4 scales, finest first; each `[H_s, W_s]`.
pub fn depth_forward<'t>(p: &Bound<'t>, arch: &ArchConfig, image: Var<'t>) -> Result<(Vec<Var<'t>>, Vec<Var<'t>>)> {
    check_image(arch, image, 3)?;
    let feats = encdec(p, "depth", image)?;
    let mut depth = Vec::with_capacity(arch.depth_scales);
    let mut outlier = Vec::with_capacity(arch.depth_scales);
    for (l, f) in feats.iter().enumerate().take(arch.depth_scales) {
        let head = conv(p, &format!("depth.head{l}"), *f)?;
        let inv = plane(head.slice_channels(0, 1)?)?.sigmoid().affine(INV_SCALE, INV_MIN);
        depth.push(inv.recip()?);
        outlier.push(plane(head.slice_channels(1, 1)?)?.sigmoid());
    }
    Ok((depth, outlier))
}

/// Segmentation logits and softmax maps at 3 scales, finest first.
#[derive(Clone, Debug)]
pub struct SegOutput<'t> {
    pub logits: Vec<Var<'t>>,
    pub probs: Vec<Var<'t>>,
}

pub fn seg_forward<'t>(p: &Bound<'t>, arch: &ArchConfig, image: Var<'t>) -> Result<SegOutput<'t>> {
    check_image(arch, image, 3)?;
    let feats = encdec(p, "seg", image)?;
    let mut logits = Vec::with_capacity(arch.seg_scales);
    for (l, f) in feats.iter().enumerate().take(arch.seg_scales) {
        logits.push(conv(p, &format!("seg.head{l}"), *f)?);
    }
    let probs = logits.iter().map(|z| z.softmax_channels()).collect::<Result<_>>()?;
    Ok(SegOutput { logits, probs })
}

/// Twists and poses `T_{2->1}`, `T_{2->3}` of a 3-frame snippet.
#[derive(Clone, Copy, Debug)]
pub struct PoseOutput<'t> {
    pub twist_21: Var<'t>,
    pub twist_23: Var<'t>,
    pub pose_21: Var<'t>,
    pub pose_23: Var<'t>,
}

pub fn pose_forward<'t>(p: &Bound<'t>, arch: &ArchConfig, frames: &[Var<'t>]) -> Result<PoseOutput<'t>> {
    if frames.len() != 3 {
        return Err(Error::contract(format!("pose network takes 3 frames, got {}", frames.len())));
    }
    let shape = frames[0].shape();
    for f in frames {
        check_image(arch, *f, 3)?;
        if f.shape() != shape {
            return Err(Error::contract("snippet frames differ in shape"));
        }
    }
    let mut x = conv(p, "pose.conv0", Var::concat_channels(frames)?.add_scalar(-0.5))?.elu();
    for l in 1..4 {
        x = conv(p, &format!("pose.conv{l}"), x.avg_pool2()?)?.elu();
    }
    let out = conv(p, "pose.head", x)?.global_avg_pool()?;
    let twist_21 = out.slice_channels(0, 6)?;
    let twist_23 = out.slice_channels(6, 6)?;
    Ok(PoseOutput {
        twist_21,
        twist_23,
        pose_21: se3_exp(twist_21)?,
        pose_23: se3_exp(twist_23)?,
    })
}

/// Depth, outlier and segmentation outputs for one frame.
pub fn frame_forward<'t>(p: &Bound<'t>, arch: &ArchConfig, image: Var<'t>) -> Result<FramePrediction<'t>> {
    let (depth, outlier) = depth_forward(p, arch, image)?;
    let seg = seg_forward(p, arch, image)?.probs;
    Ok(FramePrediction { depth, outlier, seg })
}

/// Full prediction set for a 3-frame snippet.
pub fn snippet_forward<'t>(p: &Bound<'t>, arch: &ArchConfig, frames: &[Var<'t>]) -> Result<PredictionSet<'t>> {
    let pose = pose_forward(p, arch, frames)?;
    let frames = frames.iter().map(|f| frame_forward(p, arch, *f)).collect::<Result<Vec<_>>>()?;
    Ok(PredictionSet {
        frames,
        pose_21: pose.pose_21,
        pose_23: pose.pose_23,
    })
}

/// Detached copy of the depth and segmentation parameters.
pub fn clone_frozen(params: &ParamStore) -> ParamStore {
    let mut frozen = params.with_prefix("depth.");
    frozen.extend(params.with_prefix("seg."));
    frozen
}

/// Depth and segmentation outputs of `params` on `image`, off any live tape.
pub fn frozen_predict(params: &ParamStore, arch: &ArchConfig, image: &Tensor) -> Result<FrozenPrediction> {
    let tape = Tape::new();
    let bound = params.bind(&tape, |_| false);
    let x = tape.constant(image.clone());
    let (depth, _) = depth_forward(&bound, arch, x)?;
    let seg = seg_forward(&bound, arch, x)?.probs;
    let values = |vs: Vec<Var<'_>>| vs.iter().map(|v| (*v.value()).clone()).collect();
    Ok(FrozenPrediction {
        depth: values(depth),
        seg: values(seg),
    })
}
