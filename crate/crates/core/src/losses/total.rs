use crate::autodiff::{avg_pool2_values, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::geometry::{project, Intrinsics};
use crate::networks::{FrozenPrediction, PredictionSet};

use super::terms::*;
use super::{LossReport, LossTerm, LossWeights, PixelReduction};

/// Scales used by the photometric, SSIM, smoothness and depth terms.
pub const DEPTH_SCALES: usize = 4;
/// Scales used by the segmentation terms.
pub const SEG_SCALES: usize = 3;

/// Ordered (source, target) frame pairs of a 3-frame snippet.
pub const PAIRS: [(usize, usize); 4] = [(0, 1), (1, 0), (1, 2), (2, 1)];

/// `levels` images, finest first, by repeated 2x2 average pooling.
pub fn image_pyramid(image: &Tensor, levels: usize) -> Result<Vec<Tensor>> {
    let mut out = vec![image.clone()];
    while out.len() < levels {
        let next = avg_pool2_values(out.last().expect("non-empty"))?;
        out.push(next);
    }
    Ok(out)
}

struct Accum<'t> {
    name: &'static str,
    weight: f64,
    sum: Option<Var<'t>>,
}

impl<'t> Accum<'t> {
    fn add(&mut self, v: Var<'t>) -> Result<()> {
        self.sum = Some(match self.sum {
            Some(s) => s.add(v)?,
            None => v,
        });
        Ok(())
    }
}

fn need(what: &str, have: usize, want: usize) -> Result<()> {
    if have < want {
        return Err(Error::contract(format!("{what}: {have} scales, need {want}")));
    }
    Ok(())
}

/// Snippet objective: pairwise consistency terms over both directions of
/// each adjacent pair plus per-frame smoothness, outlier and prior terms,
/// each summed over its scales, then weighted and added.
///
/// `images` holds one pyramid per frame with at least [`DEPTH_SCALES`]
/// levels; `frozen` holds one frozen prediction per frame.
pub fn total_loss<'t>(
    tape: &'t Tape,
    images: &[Vec<Tensor>],
    k: &Intrinsics,
    pred: &PredictionSet<'t>,
    frozen: &[FrozenPrediction],
    weights: &LossWeights,
    reduction: PixelReduction,
) -> Result<(Var<'t>, LossReport)> {
    weights.validate()?;
    if images.len() != 3 || pred.frames.len() != 3 || frozen.len() != 3 {
        return Err(Error::contract(format!(
            "total_loss needs 3 frames, got {} images, {} predictions, {} frozen",
            images.len(),
            pred.frames.len(),
            frozen.len()
        )));
    }
    for t in 0..3 {
        need("images", images[t].len(), DEPTH_SCALES)?;
        need("depth", pred.frames[t].depth.len(), DEPTH_SCALES)?;
        need("outlier", pred.frames[t].outlier.len(), DEPTH_SCALES)?;
        need("seg", pred.frames[t].seg.len(), SEG_SCALES)?;
        need("frozen depth", frozen[t].depth.len(), DEPTH_SCALES)?;
        need("frozen seg", frozen[t].seg.len(), SEG_SCALES)?;
    }
    let w = weights;
    let mut acc = [
        ("pho", w.w_pho),
        ("ssim", w.w_ssim),
        ("sc", w.w_sc),
        ("sm", w.w_sm),
        ("om", w.w_om),
        ("prior_D", w.w_d),
        ("prior_S", w.w_s),
    ]
    .map(|(name, weight)| Accum { name, weight, sum: None });
    let [pho, ssim, sc, sm, om, pd, ps] = &mut acc;
    let mut valid_pixels = 0;
    let mut warnings = Vec::new();

    let poses = PAIRS.iter().map(|&(s, t)| pred.pose(s, t)).collect::<Result<Vec<_>>>()?;
    for level in 0..DEPTH_SCALES {
        let kl = k.at_level(level as u32);
        let pixels = (kl.width * kl.height) as f64;
        let norm = |v: Var<'t>| match reduction {
            PixelReduction::Mean => v.scale(1.0 / pixels),
            PixelReduction::Sum => v,
        };
        for (pair, &(s, t)) in PAIRS.iter().enumerate() {
            let src = &pred.frames[s];
            let warp = project(src.depth[level], poses[pair], &kl)?;
            let count = warp.valid_count();
            valid_pixels += count;
            if count == 0 {
                warnings.push(format!("pair {s}->{t} scale {level}: no valid pixels"));
            }
            let (target, source) = (&images[s][level], &images[t][level]);
            let o = src.outlier[level];
            pho.add(photometric_loss(target, source, &warp, o)?)?;
            ssim.add(ssim_loss(target, source, &warp, o)?)?;
            if level < SEG_SCALES {
                sc.add(semantic_consistency_loss(src.seg[level], pred.frames[t].seg[level], &warp, o)?)?;
            }
        }
        for f in 0..3 {
            let fp = &pred.frames[f];
            sm.add(norm(smoothness_loss(fp.depth[level], &images[f][level])?))?;
            om.add(norm(outlier_mask_reg(fp.outlier[level])?))?;
            pd.add(norm(depth_prior_loss(fp.depth[level], &frozen[f].depth[level])?))?;
            if level < SEG_SCALES {
                ps.add(norm(semantic_prior_loss(fp.seg[level], &frozen[f].seg[level])?))?;
            }
        }
    }

    let mut total = tape.constant(Tensor::scalar(0.0));
    let mut terms = Vec::with_capacity(acc.len());
    for a in &acc {
        let v = a.sum.expect("every term has at least one scale");
        total = total.add(v.scale(a.weight))?;
        terms.push(LossTerm {
            name: a.name.to_string(),
            weight: a.weight,
            value: v.item()?,
        });
    }
    let report = LossReport {
        total: total.item()?,
        terms,
        valid_pixel_count: valid_pixels,
        warnings,
    };
    Ok((total, report))
}
