use std::rc::Rc;

use crate::autodiff::{avg_pool2_values, Tensor, Var};
use crate::error::{Error, Result};

/// Label id of pixels without a class.
pub const VOID: u8 = 255;

/// Per-pixel class distribution target with a mask of supervised pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct SegTarget {
    pub dist: Rc<Tensor>,
    pub mask: Rc<[bool]>,
}

impl SegTarget {
    /// One-hot target; void pixels are masked out.
    pub fn from_labels(labels: &[u8], height: usize, width: usize, classes: usize) -> Result<Self> {
        let plane = height * width;
        if labels.len() != plane {
            return Err(Error::contract(format!("{} labels for a {height}x{width} map", labels.len())));
        }
        let mut dist = vec![0.0; classes * plane];
        let mut mask = vec![false; plane];
        for (p, &l) in labels.iter().enumerate() {
            if l == VOID {
                continue;
            }
            if l as usize >= classes {
                return Err(Error::contract(format!("label {l} out of range for {classes} classes")));
            }
            dist[l as usize * plane + p] = 1.0;
            mask[p] = true;
        }
        Ok(SegTarget {
            dist: Rc::new(Tensor::new(&[classes, height, width], dist)?),
            mask: mask.into(),
        })
    }

    pub fn supervised_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// Depth target with a mask of pixels carrying ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthTarget {
    pub depth: Tensor,
    pub mask: Rc<[bool]>,
}

impl DepthTarget {
    /// Pixels with positive finite depth are supervised.
    pub fn new(depth: Tensor) -> Result<Self> {
        depth.dims2()?;
        let mask = depth.data().iter().map(|&d| d > 0.0 && d.is_finite()).collect();
        Ok(DepthTarget { depth, mask })
    }

    pub fn supervised_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

fn mask_weights(mask: &[bool], h: usize, w: usize) -> Result<Tensor> {
    Tensor::new(&[h, w], mask.iter().map(|&m| f64::from(u8::from(m))).collect())
}

/// Divides each pooled channel by the pooled weight; blocks without any
/// supervised pixel come out masked.
fn normalize(sums: &Tensor, counts: &Tensor) -> Result<(Tensor, Rc<[bool]>)> {
    let plane = counts.numel();
    let data = sums
        .data()
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let n = counts.data()[i % plane];
            if n > 0.0 { s / n } else { 0.0 }
        })
        .collect();
    Ok((Tensor::new(sums.shape(), data)?, counts.data().iter().map(|&n| n > 0.0).collect()))
}

/// `levels` targets, finest first: each coarse pixel holds the class
/// histogram of the non-void pixels it covers.
pub fn seg_target_pyramid(finest: SegTarget, levels: usize) -> Result<Vec<SegTarget>> {
    let (_, h, w) = finest.dist.dims3()?;
    let mut sums = (*finest.dist).clone();
    let mut counts = mask_weights(&finest.mask, h, w)?;
    let mut out = vec![finest];
    while out.len() < levels {
        sums = avg_pool2_values(&sums)?;
        counts = avg_pool2_values(&counts)?;
        let (dist, mask) = normalize(&sums, &counts)?;
        out.push(SegTarget { dist: Rc::new(dist), mask });
    }
    Ok(out)
}

/// `levels` targets, finest first: each coarse pixel holds the mean of the
/// supervised depths it covers.
pub fn depth_target_pyramid(finest: DepthTarget, levels: usize) -> Result<Vec<DepthTarget>> {
    let (h, w) = finest.depth.dims2()?;
    let mut sums = Tensor::new(
        &[h, w],
        finest.depth.data().iter().zip(finest.mask.iter()).map(|(&d, &m)| if m { d } else { 0.0 }).collect(),
    )?;
    let mut counts = mask_weights(&finest.mask, h, w)?;
    let mut out = vec![finest];
    while out.len() < levels {
        sums = avg_pool2_values(&sums)?;
        counts = avg_pool2_values(&counts)?;
        let (depth, mask) = normalize(&sums, &counts)?;
        out.push(DepthTarget { depth, mask });
    }
    Ok(out)
}

/// Mean cross-entropy over supervised pixels; 0 when there are none.
pub fn supervised_seg_loss<'t>(logits: Var<'t>, target: &SegTarget) -> Result<Var<'t>> {
    if logits.shape() != target.dist.shape() {
        return Err(Error::contract(format!(
            "logits {:?} vs target {:?}",
            logits.shape(),
            target.dist.shape()
        )));
    }
    logits.soft_cross_entropy(Rc::clone(&target.dist), Rc::clone(&target.mask))
}

/// Mean `|D - D_gt|` over supervised pixels; 0 when there are none.
pub fn supervised_depth_loss<'t>(depth: Var<'t>, target: &DepthTarget) -> Result<Var<'t>> {
    if depth.shape() != target.depth.shape() {
        return Err(Error::contract(format!(
            "depth {:?} vs target {:?}",
            depth.shape(),
            target.depth.shape()
        )));
    }
    let gt = depth.tape().constant(target.depth.clone());
    depth.sub(gt)?.abs().masked_mean(Rc::clone(&target.mask))
}
