use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::losses::VOID;

const BASE: [[u8; 3]; 12] = [
    [128, 64, 128],
    [70, 70, 70],
    [220, 220, 0],
    [220, 20, 60],
    [0, 0, 142],
    [107, 142, 35],
    [250, 170, 30],
    [0, 130, 180],
    [255, 255, 255],
    [152, 251, 152],
    [119, 11, 32],
    [190, 153, 153],
];

/// Pairwise distinct colours for `classes` ids; void renders black, which
/// the palette never uses.
pub fn palette(classes: usize) -> Vec<[u8; 3]> {
    let mut out: Vec<[u8; 3]> = BASE.iter().copied().take(classes).collect();
    let mut k: u32 = 0;
    while out.len() < classes {
        k += 1;
        let c = [
            (k.wrapping_mul(97) % 256) as u8,
            (k.wrapping_mul(57).wrapping_add(80) % 256) as u8,
            (k.wrapping_mul(151).wrapping_add(160) % 256) as u8,
        ];
        if c != [0, 0, 0] && !out.contains(&c) {
            out.push(c);
        }
    }
    out
}

const RAMP: [[f64; 3]; 5] = [
    [0.05, 0.02, 0.20],
    [0.35, 0.05, 0.50],
    [0.75, 0.20, 0.40],
    [0.98, 0.55, 0.20],
    [0.99, 0.95, 0.60],
];

/// Near is bright, far is dark; `t` is normalised inverse depth.
fn ramp(t: f64) -> [f64; 3] {
    let x = t.clamp(0.0, 1.0) * (RAMP.len() - 1) as f64;
    let i = (x.floor() as usize).min(RAMP.len() - 2);
    let a = x - i as f64;
    std::array::from_fn(|c| RAMP[i][c] * (1.0 - a) + RAMP[i + 1][c] * a)
}

/// `[3,H,W]` colour image of a depth map on a shared inverse-depth range;
/// non-positive depths render black.
pub fn colorize_depth(depth: &Tensor, near: f64, far: f64) -> Result<Tensor> {
    let (h, w) = depth.dims2()?;
    if !(near > 0.0 && far > near) {
        return Err(Error::contract(format!("depth colour range [{near}, {far}]")));
    }
    let (lo, hi) = (1.0 / far, 1.0 / near);
    let n = h * w;
    let mut out = vec![0.0; 3 * n];
    for (p, &d) in depth.data().iter().enumerate() {
        if d > 0.0 && d.is_finite() {
            let rgb = ramp((1.0 / d - lo) / (hi - lo));
            for c in 0..3 {
                out[c * n + p] = rgb[c];
            }
        }
    }
    Tensor::new(&[3, h, w], out)
}

pub fn colorize_labels(labels: &[u8], h: usize, w: usize, classes: usize) -> Result<Tensor> {
    if labels.len() != h * w {
        return Err(Error::shape("colorize_labels", format!("{} labels for {h}x{w}", labels.len())));
    }
    let pal = palette(classes);
    let n = h * w;
    let mut out = vec![0.0; 3 * n];
    for (p, &l) in labels.iter().enumerate() {
        if l != VOID && (l as usize) < classes {
            for c in 0..3 {
                out[c * n + p] = pal[l as usize][c] as f64 / 255.0;
            }
        }
    }
    Tensor::new(&[3, h, w], out)
}

/// Places `[3,H,W]` panels left to right.
pub fn hstack(panels: &[Tensor]) -> Result<Tensor> {
    let (_, h, _) = panels.first().ok_or_else(|| Error::contract("no panels"))?.dims3()?;
    let widths = panels
        .iter()
        .map(|p| match p.dims3()? {
            (3, ph, pw) if ph == h => Ok(pw),
            _ => Err(Error::shape("hstack", format!("panel {:?}", p.shape()))),
        })
        .collect::<Result<Vec<_>>>()?;
    let total: usize = widths.iter().sum();
    let mut out = vec![0.0; 3 * h * total];
    let mut x0 = 0;
    for (p, &pw) in panels.iter().zip(&widths) {
        for c in 0..3 {
            for y in 0..h {
                let src = &p.data()[(c * h + y) * pw..][..pw];
                out[(c * h + y) * total + x0..][..pw].copy_from_slice(src);
            }
        }
        x0 += pw;
    }
    Tensor::new(&[3, h, total], out)
}

/// input | ground truth | prediction, ground truth black when absent.
pub fn depth_panel(image: &Tensor, gt: Option<&Tensor>, pred: &Tensor) -> Result<Tensor> {
    let (h, w) = pred.dims2()?;
    let range_of = |t: &Tensor| {
        t.data()
            .iter()
            .filter(|d| **d > 0.0 && d.is_finite())
            .fold((f64::INFINITY, 0.0f64), |(a, b), &d| (a.min(d), b.max(d)))
    };
    let (mut near, mut far) = range_of(gt.unwrap_or(pred));
    if !(far > near) {
        (near, far) = (near.min(1.0), near.min(1.0) * 2.0 + 1.0);
    }
    let gt_img = match gt {
        Some(g) => colorize_depth(g, near, far)?,
        None => Tensor::zeros(&[3, h, w]),
    };
    hstack(&[image.clone(), gt_img, colorize_depth(pred, near, far)?])
}

pub fn seg_panel(image: &Tensor, gt: Option<&[u8]>, pred: &[u8], classes: usize) -> Result<Tensor> {
    let (_, h, w) = image.dims3()?;
    let gt_img = match gt {
        Some(g) => colorize_labels(g, h, w, classes)?,
        None => Tensor::zeros(&[3, h, w]),
    };
    hstack(&[image.clone(), gt_img, colorize_labels(pred, h, w, classes)?])
}
