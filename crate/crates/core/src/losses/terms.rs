use crate::autodiff::{Tensor, Var};
use crate::error::{Error, Result};
use crate::geometry::{bilinear_sample, Warp};

const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

/// Floor applied to the outlier mask before its logarithm.
pub const OUTLIER_LOG_FLOOR: f64 = 1e-7;

fn same_shape(op: &'static str, a: &[usize], b: &[usize]) -> Result<()> {
    if a != b {
        return Err(Error::contract(format!("{op}: shape {a:?} vs {b:?}")));
    }
    Ok(())
}

fn check_pair(op: &'static str, target: &Tensor, source: &Tensor, warp: &Warp<'_>, outlier: Var<'_>) -> Result<()> {
    same_shape(op, target.shape(), source.shape())?;
    let (_, h, w) = target.dims3()?;
    same_shape(op, &outlier.shape(), &[h, w])?;
    same_shape(op, &warp.coords.shape(), &[2, h, w])
}

/// Masked mean over valid pixels of `O(p) * mean_c |I_t'(p') - I_t(p)|`.
pub fn photometric_loss<'t>(target: &Tensor, source: &Tensor, warp: &Warp<'t>, outlier: Var<'t>) -> Result<Var<'t>> {
    check_pair("photometric_loss", target, source, warp, outlier)?;
    let tape = outlier.tape();
    let warped = bilinear_sample(tape.constant(source.clone()), warp)?;
    let err = warped.sub(tape.constant(target.clone()))?.abs().channel_mean()?;
    err.mul(outlier)?.masked_mean(warp.valid.clone())
}

/// Per-pixel SSIM over 3x3 windows, averaged over channels.
///
/// Output is `[H-2, W-2]`, indexed by window centre minus one.
pub fn ssim_map<'t>(x: Var<'t>, y: Var<'t>) -> Result<Var<'t>> {
    let mx = x.box3()?;
    let my = y.box3()?;
    let sxx = x.square().box3()?.sub(mx.square())?;
    let syy = y.square().box3()?.sub(my.square())?;
    let sxy = x.mul(y)?.box3()?.sub(mx.mul(my)?)?;
    let num = mx.mul(my)?.affine(2.0, SSIM_C1).mul(sxy.affine(2.0, SSIM_C2))?;
    let den = mx.square().add(my.square())?.add_scalar(SSIM_C1).mul(sxx.add(syy)?.add_scalar(SSIM_C2))?;
    num.div(den)?.channel_mean()
}

/// Interior pixels whose whole 3x3 neighbourhood has valid warps, laid out
/// on the `[H-2, W-2]` grid of [`ssim_map`].
pub fn ssim_valid(valid: &[bool], h: usize, w: usize) -> Vec<bool> {
    let mut out = Vec::with_capacity((h - 2) * (w - 2));
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let ok = (y - 1..=y + 1).all(|yy| (x - 1..=x + 1).all(|xx| valid[yy * w + xx]));
            out.push(ok);
        }
    }
    out
}

/// Masked mean of `O(p) * (1 - SSIM(p))` over interior valid pixels.
pub fn ssim_loss<'t>(target: &Tensor, source: &Tensor, warp: &Warp<'t>, outlier: Var<'t>) -> Result<Var<'t>> {
    check_pair("ssim_loss", target, source, warp, outlier)?;
    let (_, h, w) = target.dims3()?;
    if h < 3 || w < 3 {
        return Err(Error::contract(format!("ssim_loss needs at least 3x3, got {h}x{w}")));
    }
    let tape = outlier.tape();
    let warped = bilinear_sample(tape.constant(source.clone()), warp)?;
    let ssim = ssim_map(tape.constant(target.clone()), warped)?;
    let mask = ssim_valid(&warp.valid, h, w);
    ssim.affine(-1.0, 1.0).mul(outlier.crop(1)?)?.masked_mean(mask.into())
}

/// Masked mean of `O(p) * sum_c |S_t'(p') - S_t(p)|`.
///
/// The warp and the outlier mask enter as constants, so only the two
/// segmentation maps receive gradient.
pub fn semantic_consistency_loss<'t>(seg_t: Var<'t>, seg_src: Var<'t>, warp: &Warp<'t>, outlier: Var<'t>) -> Result<Var<'t>> {
    same_shape("semantic_consistency_loss", &seg_t.shape(), &seg_src.shape())?;
    let shape = seg_t.shape();
    if shape.len() != 3 {
        return Err(Error::contract(format!("semantic_consistency_loss: expected [C,H,W], got {shape:?}")));
    }
    same_shape("semantic_consistency_loss", &outlier.shape(), &shape[1..])?;
    let warp = warp.detach();
    let warped = bilinear_sample(seg_src, &warp)?;
    let err = warped.sub(seg_t)?.abs().channel_sum()?;
    err.mul(outlier.detach())?.masked_mean(warp.valid.clone())
}

fn edge_weights(image: &Tensor, diff: impl Fn(&Tensor) -> Tensor) -> Result<Tensor> {
    let (c, _, _) = image.dims3()?;
    let d = diff(image);
    let (_, h, w) = d.dims3()?;
    let plane = h * w;
    Tensor::new(&[h, w], (0..plane).map(|p| {
        let m: f64 = (0..c).map(|k| d.data()[k * plane + p].abs()).sum::<f64>() / c as f64;
        (-m).exp()
    }).collect())
}

fn diff_values(t: &Tensor, along_x: bool) -> Tensor {
    let (c, h, w) = t.dims3().expect("dims");
    let (oh, ow) = if along_x { (h, w - 1) } else { (h - 1, w) };
    Tensor::from_fn(&[c, oh, ow], |i| {
        let (k, r) = (i / (oh * ow), i % (oh * ow));
        let (y, x) = (r / ow, r % ow);
        let at = |yy: usize, xx: usize| t.data()[k * h * w + yy * w + xx];
        if along_x {
            at(y, x + 1) - at(y, x)
        } else {
            at(y + 1, x) - at(y, x)
        }
    })
}

/// Edge-aware smoothness of mean-normalized depth.
///
/// `sum |dx D'| exp(-|dx I|) + |dy D'| exp(-|dy I|)` with `D' = D / mean(D)`,
/// forward differences and `|dI|` averaged over channels.
pub fn smoothness_loss<'t>(depth: Var<'t>, image: &Tensor) -> Result<Var<'t>> {
    let (_, h, w) = image.dims3()?;
    same_shape("smoothness_loss", &depth.shape(), &[h, w])?;
    if let Some(bad) = depth.value().data().iter().find(|&&d| !(d > 0.0)) {
        return Err(Error::contract(format!("smoothness_loss needs positive depth, got {bad}")));
    }
    let tape = depth.tape();
    let norm = depth.div(depth.mean())?;
    let wx = tape.constant(edge_weights(image, |t| diff_values(t, true))?);
    let wy = tape.constant(edge_weights(image, |t| diff_values(t, false))?);
    let sx = norm.diff_x()?.abs().mul(wx)?.sum();
    let sy = norm.diff_y()?.abs().mul(wy)?.sum();
    sx.add(sy)
}

/// `-sum log O(p)`, with `O` floored at [`OUTLIER_LOG_FLOOR`].
pub fn outlier_mask_reg(outlier: Var<'_>) -> Result<Var<'_>> {
    Ok(outlier.clamp_min(OUTLIER_LOG_FLOOR).log()?.sum().neg())
}

fn prior<'t>(op: &'static str, live: Var<'t>, frozen: &Tensor) -> Result<Var<'t>> {
    same_shape(op, &live.shape(), frozen.shape())?;
    Ok(live.sub(live.tape().constant(frozen.clone()))?.abs().sum())
}

/// `sum |D - D_pre|` against a frozen depth prediction.
pub fn depth_prior_loss<'t>(depth: Var<'t>, frozen: &Tensor) -> Result<Var<'t>> {
    prior("depth_prior_loss", depth, frozen)
}

/// `sum |S - S_pre|` over all channels against a frozen segmentation.
pub fn semantic_prior_loss<'t>(seg: Var<'t>, frozen: &Tensor) -> Result<Var<'t>> {
    prior("semantic_prior_loss", seg, frozen)
}
