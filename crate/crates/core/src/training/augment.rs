use rand::Rng;

use super::AugmentConfig;
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::geometry::Intrinsics;
use crate::networks::FrozenPrediction;

/// Zoom by `scale` about the top-left corner, then crop the original
/// resolution starting at `(offset_x, offset_y)` full-resolution pixels of
/// the zoomed image.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Augmentation {
    pub scale: f64,
    pub offset_x: f64,
    pub offset_y: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Interp {
    Bilinear,
    Nearest,
}

impl Augmentation {
    pub const IDENTITY: Augmentation = Augmentation {
        scale: 1.0,
        offset_x: 0.0,
        offset_y: 0.0,
    };

    /// Zoom with the crop window centred.
    pub fn centered(scale: f64, width: usize, height: usize) -> Self {
        Augmentation {
            scale,
            offset_x: (scale - 1.0) * width as f64 / 2.0,
            offset_y: (scale - 1.0) * height as f64 / 2.0,
        }
    }

    pub fn sample(config: &AugmentConfig, width: usize, height: usize, rng: &mut impl Rng) -> Self {
        if !config.enabled {
            return Self::IDENTITY;
        }
        let scale = if config.scale_max > config.scale_min {
            rng.random_range(config.scale_min..=config.scale_max)
        } else {
            config.scale_min
        };
        let mut offset = |n: usize| {
            let room = (scale - 1.0) * n as f64;
            if room > 0.0 {
                rng.random_range(0.0..=room)
            } else {
                0.0
            }
        };
        let offset_x = offset(width);
        let offset_y = offset(height);
        Augmentation {
            scale,
            offset_x,
            offset_y,
        }
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }

    pub fn validate(&self, width: usize, height: usize) -> Result<()> {
        let fits = |o: f64, n: usize| o >= 0.0 && o <= (self.scale - 1.0) * n as f64 + 1e-9;
        if !(self.scale >= 1.0) || !fits(self.offset_x, width) || !fits(self.offset_y, height) {
            return Err(Error::contract(format!(
                "crop {:?} leaves the zoomed {width}x{height} image",
                self
            )));
        }
        Ok(())
    }

    /// Camera of the augmented image.
    pub fn intrinsics(&self, k: &Intrinsics) -> Result<Intrinsics> {
        let s = self.scale;
        Intrinsics::new(
            s * k.fx,
            s * k.fy,
            s * (k.cx + 0.5) - 0.5 - self.offset_x,
            s * (k.cy + 0.5) - 0.5 - self.offset_y,
            k.width,
            k.height,
        )
    }

    /// Source coordinate, on the same pyramid level, of augmented pixel `i`
    /// at `level`.
    #[inline]
    fn source(&self, i: usize, offset: f64, level: u32) -> f64 {
        let f = (1u32 << level) as f64;
        (((i as f64 + 0.5) * f + offset) / self.scale) / f - 0.5
    }

    /// Resamples a `[H,W]` or `[C,H,W]` map living on pyramid `level`.
    pub fn apply(&self, t: &Tensor, level: u32, interp: Interp) -> Result<Tensor> {
        let (c, h, w) = match *t.shape() {
            [h, w] => (1, h, w),
            [c, h, w] => (c, h, w),
            _ => return Err(Error::shape("augment", format!("expected [H,W] or [C,H,W], got {:?}", t.shape()))),
        };
        if self.is_identity() {
            return Ok(t.clone());
        }
        let xs: Vec<f64> = (0..w).map(|i| self.source(i, self.offset_x, level)).collect();
        let ys: Vec<f64> = (0..h).map(|j| self.source(j, self.offset_y, level)).collect();
        let src = t.data();
        let mut out = Vec::with_capacity(c * h * w);
        for ch in 0..c {
            let plane = &src[ch * h * w..(ch + 1) * h * w];
            for &y in &ys {
                for &x in &xs {
                    out.push(match interp {
                        Interp::Nearest => {
                            let xi = x.round().clamp(0.0, (w - 1) as f64) as usize;
                            let yi = y.round().clamp(0.0, (h - 1) as f64) as usize;
                            plane[yi * w + xi]
                        }
                        Interp::Bilinear => bilinear_clamped(plane, w, h, x, y),
                    });
                }
            }
        }
        Tensor::new(t.shape(), out)
    }

    pub fn apply_labels(&self, labels: &[u8], width: usize, height: usize) -> Result<Vec<u8>> {
        let t = Tensor::new(&[height, width], labels.iter().map(|&l| l as f64).collect())?;
        Ok(self.apply(&t, 0, Interp::Nearest)?.data().iter().map(|&v| v as u8).collect())
    }

    /// Frozen outputs carried through the same zoom and crop, level by level.
    pub fn apply_frozen(&self, f: &FrozenPrediction) -> Result<FrozenPrediction> {
        let map = |ts: &[Tensor]| -> Result<Vec<Tensor>> {
            ts.iter()
                .enumerate()
                .map(|(l, t)| self.apply(t, l as u32, Interp::Bilinear))
                .collect()
        };
        Ok(FrozenPrediction {
            depth: map(&f.depth)?,
            seg: map(&f.seg)?,
        })
    }
}

fn bilinear_clamped(plane: &[f64], w: usize, h: usize, x: f64, y: f64) -> f64 {
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let (ax, ay) = (x - x0 as f64, y - y0 as f64);
    let top = plane[y0 * w + x0] * (1.0 - ax) + plane[y0 * w + x1] * ax;
    let bottom = plane[y1 * w + x0] * (1.0 - ax) + plane[y1 * w + x1] * ax;
    top * (1.0 - ay) + bottom * ay
}
