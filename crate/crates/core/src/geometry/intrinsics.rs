use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pinhole camera parameters in pixels.
///
/// Pixel `(i, j)` sits at continuous coordinate `(i, j)`; there is no half
/// pixel offset. Valid coordinates span `[0, width-1] x [0, height-1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let k = Intrinsics {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::contract(format!(
                "focal lengths must be positive (fx={}, fy={})",
                self.fx, self.fy
            )));
        }
        let inside = |c: f64, n: usize| c >= 0.0 && c < n as f64;
        if !inside(self.cx, self.width) || !inside(self.cy, self.height) {
            return Err(Error::contract(format!(
                "principal point ({}, {}) outside {}x{} image",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }

    /// Camera of the `level`-times 2x2-average-pooled image.
    ///
    /// A pooled pixel covers a 2x2 block whose centre lies at `2i + 0.5`,
    /// hence `c' = (c - 0.5) / 2` per halving.
    pub fn at_level(&self, level: u32) -> Intrinsics {
        let f = (1u32 << level) as f64;
        let offset = (f - 1.0) / 2.0;
        Intrinsics {
            fx: self.fx / f,
            fy: self.fy / f,
            cx: (self.cx - offset) / f,
            cy: (self.cy - offset) / f,
            width: self.width >> level,
            height: self.height >> level,
        }
    }

    /// Back-projects pixel `(u, v)` to the ray point at unit depth.
    #[inline]
    pub fn unproject(&self, u: f64, v: f64) -> [f64; 3] {
        [(u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0]
    }

    #[inline]
    pub fn project(&self, p: [f64; 3]) -> [f64; 2] {
        [self.fx * p[0] / p[2] + self.cx, self.fy * p[1] / p[2] + self.cy]
    }

    pub fn matrix(&self) -> nalgebra::Matrix3<f64> {
        nalgebra::Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }
}
