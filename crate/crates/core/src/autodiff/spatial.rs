//! Shape manipulation and fixed spatial filters over the two trailing axes.

use super::{Backward, Tensor, Var};
use crate::error::{Error, Result};

/// Splits a shape into (planes, height, width) over its trailing two axes.
fn planes(t: &Tensor) -> Result<(usize, usize, usize)> {
    let (h, w) = t.spatial()?;
    Ok((t.numel() / (h * w).max(1), h, w))
}

struct ReshapeRule;

impl Backward for ReshapeRule {
    fn backward(&self, inputs: &[&Tensor], _: &Tensor, grad: &Tensor, _: &[bool]) -> Vec<Option<Tensor>> {
        vec![Some(grad.clone().reshape(inputs[0].shape()).expect("numel"))]
    }
}

struct ConcatRule;

impl Backward for ConcatRule {
    fn backward(&self, inputs: &[&Tensor], _: &Tensor, grad: &Tensor, needs: &[bool]) -> Vec<Option<Tensor>> {
        let mut offset = 0;
        let g = grad.data();
        inputs
            .iter()
            .zip(needs)
            .map(|(t, &need)| {
                let n = t.numel();
                let part = need.then(|| {
                    Tensor::new(t.shape(), g[offset..offset + n].to_vec()).expect("shape")
                });
                offset += n;
                part
            })
            .collect()
    }
}

struct SliceRule {
    start: usize,
}

impl Backward for SliceRule {
    fn backward(&self, inputs: &[&Tensor], _: &Tensor, grad: &Tensor, _: &[bool]) -> Vec<Option<Tensor>> {
        let mut out = Tensor::zeros(inputs[0].shape());
        out.data_mut()[self.start..self.start + grad.numel()].copy_from_slice(grad.data());
        vec![Some(out)]
    }
}

struct CropRule {
    margin: usize,
}

impl Backward for CropRule {
    fn backward(&self, inputs: &[&Tensor], _: &Tensor, grad: &Tensor, _: &[bool]) -> Vec<Option<Tensor>> {
        let (p, h, w) = planes(inputs[0]).expect("dims");
        let m = self.margin;
        let (oh, ow) = (h - 2 * m, w - 2 * m);
        let mut out = Tensor::zeros(inputs[0].shape());
        let (g, o) = (grad.data(), out.data_mut());
        for k in 0..p {
            for y in 0..oh {
                let src = k * oh * ow + y * ow;
                let dst = k * h * w + (y + m) * w + m;
                o[dst..dst + ow].copy_from_slice(&g[src..src + ow]);
            }
        }
        vec![Some(out)]
    }
}

#[derive(Clone, Copy)]
enum Axis {
    X,
    Y,
}

struct DiffRule {
    axis: Axis,
}

impl Backward for DiffRule {
    fn backward(&self, inputs: &[&Tensor], _: &Tensor, grad: &Tensor, _: &[bool]) -> Vec<Option<Tensor>> {
        let (p, h, w) = planes(inputs[0]).expect("dims");
        let mut out = Tensor::zeros(inputs[0].shape());
        let (g, o) = (grad.data(), out.data_mut());
        match self.axis {
            Axis::X => {
                for k in 0..p {
                    for y in 0..h {
                        for x in 0..w - 1 {
                            let gv = g[k * h * (w - 1) + y * (w - 1) + x];
                            o[k * h * w + y * w + x + 1] += gv;
                            o[k * h * w + y * w + x] -= gv;
                        }
                    }
                }
            }
            Axis::Y => {
                for k in 0..p {
                    for y in 0..h - 1 {
                        for x in 0..w {
                            let gv = g[k * (h - 1) * w + y * w + x];
                            o[k * h * w + (y + 1) * w + x] += gv;
                            o[k * h * w + y * w + x] -= gv;
                        }
                    }
                }
            }
        }
        vec![Some(out)]
    }
}

/// Per-axis interpolation table for the x2 bilinear upsample.
///
/// Output index `j` samples the input at `(j + 0.5) / 2 - 0.5`, clamped to
/// the input range, which keeps pixel centres aligned with 2x2 average
/// pooling.
fn upsample_table(n: usize) -> Vec<(usize, usize, f64)> {
    (0..2 * n)
        .map(|j| {
            let src = ((j as f64 + 0.5) / 2.0 - 0.5).clamp(0.0, (n - 1) as f64);
            let i0 = (src.floor() as usize).min(n - 1);
            let i1 = (i0 + 1).min(n - 1);
            (i0, i1, src - i0 as f64)
        })
        .collect()
}

struct UpsampleRule;

impl Backward for UpsampleRule {
    fn backward(&self, inputs: &[&Tensor], _: &Tensor, grad: &Tensor, _: &[bool]) -> Vec<Option<Tensor>> {
        let (p, h, w) = planes(inputs[0]).expect("dims");
        let (ty, tx) = (upsample_table(h), upsample_table(w));
        let (oh, ow) = (2 * h, 2 * w);
        let mut out = Tensor::zeros(inputs[0].shape());
        let (g, o) = (grad.data(), out.data_mut());
        for k in 0..p {
            let base = k * h * w;
            for (oy, &(y0, y1, fy)) in ty.iter().enumerate() {
                for (ox, &(x0, x1, fx)) in tx.iter().enumerate() {
                    let gv = g[k * oh * ow + oy * ow + ox];
                    o[base + y0 * w + x0] += gv * (1.0 - fy) * (1.0 - fx);
                    o[base + y0 * w + x1] += gv * (1.0 - fy) * fx;
                    o[base + y1 * w + x0] += gv * fy * (1.0 - fx);
                    o[base + y1 * w + x1] += gv * fy * fx;
                }
            }
        }
        vec![Some(out)]
    }
}

struct AvgPoolRule;

impl Backward for AvgPoolRule {
    fn backward(&self, inputs: &[&Tensor], _: &Tensor, grad: &Tensor, _: &[bool]) -> Vec<Option<Tensor>> {
        let (p, h, w) = planes(inputs[0]).expect("dims");
        let (oh, ow) = (h / 2, w / 2);
        let mut out = Tensor::zeros(inputs[0].shape());
        let (g, o) = (grad.data(), out.data_mut());
        for k in 0..p {
            for y in 0..h {
                for x in 0..w {
                    o[k * h * w + y * w + x] = 0.25 * g[k * oh * ow + (y / 2) * ow + x / 2];
                }
            }
        }
        vec![Some(out)]
    }
}

struct Box3Rule;

impl Backward for Box3Rule {
    fn backward(&self, inputs: &[&Tensor], _: &Tensor, grad: &Tensor, _: &[bool]) -> Vec<Option<Tensor>> {
        let (p, h, w) = planes(inputs[0]).expect("dims");
        let (oh, ow) = (h - 2, w - 2);
        let mut out = Tensor::zeros(inputs[0].shape());
        let (g, o) = (grad.data(), out.data_mut());
        for k in 0..p {
            for y in 0..oh {
                for x in 0..ow {
                    let gv = g[k * oh * ow + y * ow + x] / 9.0;
                    for dy in 0..3 {
                        let row = k * h * w + (y + dy) * w + x;
                        o[row] += gv;
                        o[row + 1] += gv;
                        o[row + 2] += gv;
                    }
                }
            }
        }
        vec![Some(out)]
    }
}

/// 2x2 average pooling of a plain tensor over its trailing axes.
pub fn avg_pool2_values(t: &Tensor) -> Result<Tensor> {
    let (p, h, w) = planes(t)?;
    if h % 2 != 0 || w % 2 != 0 || h == 0 || w == 0 {
        return Err(Error::shape("avg_pool2", format!("odd spatial size {h}x{w}")));
    }
    let (oh, ow) = (h / 2, w / 2);
    let d = t.data();
    let mut data = Vec::with_capacity(p * oh * ow);
    for k in 0..p {
        for y in 0..oh {
            for x in 0..ow {
                let i = k * h * w + 2 * y * w + 2 * x;
                data.push(0.25 * (d[i] + d[i + 1] + d[i + w] + d[i + w + 1]));
            }
        }
    }
    let mut shape = t.shape().to_vec();
    let n = shape.len();
    shape[n - 2] = oh;
    shape[n - 1] = ow;
    Tensor::new(&shape, data)
}

/// Bilinear x2 upsample of a plain tensor over its trailing axes.
pub fn upsample_x2_values(t: &Tensor) -> Result<Tensor> {
    let (p, h, w) = planes(t)?;
    if h == 0 || w == 0 {
        return Err(Error::shape("upsample_bilinear_x2", "empty spatial size"));
    }
    let (ty, tx) = (upsample_table(h), upsample_table(w));
    let d = t.data();
    let mut data = Vec::with_capacity(4 * t.numel());
    for k in 0..p {
        let base = k * h * w;
        for &(y0, y1, fy) in &ty {
            for &(x0, x1, fx) in &tx {
                let top = d[base + y0 * w + x0] * (1.0 - fx) + d[base + y0 * w + x1] * fx;
                let bot = d[base + y1 * w + x0] * (1.0 - fx) + d[base + y1 * w + x1] * fx;
                data.push(top * (1.0 - fy) + bot * fy);
            }
        }
    }
    let mut shape = t.shape().to_vec();
    let n = shape.len();
    shape[n - 2] = 2 * h;
    shape[n - 1] = 2 * w;
    Tensor::new(&shape, data)
}

impl<'t> Var<'t> {
    pub fn reshape(self, shape: &[usize]) -> Result<Var<'t>> {
        let out = (*self.value()).clone().reshape(shape)?;
        Ok(self.tape().record(&[self], out, Box::new(ReshapeRule)))
    }

    /// Concatenates `[C_i,H,W]` tensors along the channel axis.
    pub fn concat_channels(parts: &[Var<'t>]) -> Result<Var<'t>> {
        let first = parts
            .first()
            .ok_or_else(|| Error::shape("concat_channels", "no inputs"))?;
        let (_, h, w) = first.value().dims3()?;
        let mut channels = 0;
        let mut data = Vec::new();
        for p in parts {
            let v = p.value();
            let (c, ph, pw) = v.dims3()?;
            if (ph, pw) != (h, w) {
                return Err(Error::shape(
                    "concat_channels",
                    format!("spatial {ph}x{pw} vs {h}x{w}"),
                ));
            }
            channels += c;
            data.extend_from_slice(v.data());
        }
        let out = Tensor::new(&[channels, h, w], data)?;
        Ok(first.tape().record(parts, out, Box::new(ConcatRule)))
    }

    /// Channels `start..start+len` of a `[C,H,W]` tensor, or elements of a
    /// vector.
    pub fn slice_channels(self, start: usize, len: usize) -> Result<Var<'t>> {
        let v = self.value();
        let shape = v.shape();
        let (c, inner) = match shape.len() {
            1 => (shape[0], 1),
            3 => (shape[0], shape[1] * shape[2]),
            _ => return Err(Error::shape("slice_channels", format!("{shape:?}"))),
        };
        if start + len > c || len == 0 {
            return Err(Error::shape(
                "slice_channels",
                format!("range {start}..{} of {c}", start + len),
            ));
        }
        let data = v.data()[start * inner..(start + len) * inner].to_vec();
        let mut out_shape = shape.to_vec();
        out_shape[0] = len;
        let out = Tensor::new(&out_shape, data)?;
        Ok(self
            .tape()
            .record(&[self], out, Box::new(SliceRule { start: start * inner })))
    }

    /// Drops `margin` pixels on every side of the trailing two axes.
    pub fn crop(self, margin: usize) -> Result<Var<'t>> {
        let v = self.value();
        let (p, h, w) = planes(&v)?;
        if h <= 2 * margin || w <= 2 * margin {
            return Err(Error::shape("crop", format!("{h}x{w} too small for margin {margin}")));
        }
        let (oh, ow) = (h - 2 * margin, w - 2 * margin);
        let d = v.data();
        let mut data = Vec::with_capacity(p * oh * ow);
        for k in 0..p {
            for y in 0..oh {
                let row = k * h * w + (y + margin) * w + margin;
                data.extend_from_slice(&d[row..row + ow]);
            }
        }
        let mut shape = v.shape().to_vec();
        let n = shape.len();
        shape[n - 2] = oh;
        shape[n - 1] = ow;
        let out = Tensor::new(&shape, data)?;
        Ok(self.tape().record(&[self], out, Box::new(CropRule { margin })))
    }

    /// Forward difference along x: `out[.., y, x] = in[.., y, x+1] - in[.., y, x]`.
    pub fn diff_x(self) -> Result<Var<'t>> {
        let v = self.value();
        let (p, h, w) = planes(&v)?;
        if w < 2 {
            return Err(Error::shape("diff_x", "width < 2"));
        }
        let d = v.data();
        let mut data = Vec::with_capacity(p * h * (w - 1));
        for k in 0..p {
            for y in 0..h {
                let row = &d[k * h * w + y * w..k * h * w + (y + 1) * w];
                data.extend(row.windows(2).map(|s| s[1] - s[0]));
            }
        }
        let mut shape = v.shape().to_vec();
        let n = shape.len();
        shape[n - 1] = w - 1;
        let out = Tensor::new(&shape, data)?;
        Ok(self.tape().record(&[self], out, Box::new(DiffRule { axis: Axis::X })))
    }

    /// Forward difference along y: `out[.., y, x] = in[.., y+1, x] - in[.., y, x]`.
    pub fn diff_y(self) -> Result<Var<'t>> {
        let v = self.value();
        let (p, h, w) = planes(&v)?;
        if h < 2 {
            return Err(Error::shape("diff_y", "height < 2"));
        }
        let d = v.data();
        let mut data = Vec::with_capacity(p * (h - 1) * w);
        for k in 0..p {
            for y in 0..h - 1 {
                let a = k * h * w + y * w;
                data.extend((0..w).map(|x| d[a + w + x] - d[a + x]));
            }
        }
        let mut shape = v.shape().to_vec();
        let n = shape.len();
        shape[n - 2] = h - 1;
        let out = Tensor::new(&shape, data)?;
        Ok(self.tape().record(&[self], out, Box::new(DiffRule { axis: Axis::Y })))
    }

    /// Bilinear x2 upsampling of the trailing two axes.
    pub fn upsample_bilinear_x2(self) -> Result<Var<'t>> {
        let out = upsample_x2_values(&self.value())?;
        Ok(self.tape().record(&[self], out, Box::new(UpsampleRule)))
    }

    /// 2x2 average pooling of the trailing two axes (even sizes only).
    pub fn avg_pool2(self) -> Result<Var<'t>> {
        let out = avg_pool2_values(&self.value())?;
        Ok(self.tape().record(&[self], out, Box::new(AvgPoolRule)))
    }

    /// Uniform 3x3 mean without padding: `[.., H, W] -> [.., H-2, W-2]`.
    pub fn box3(self) -> Result<Var<'t>> {
        let v = self.value();
        let (p, h, w) = planes(&v)?;
        if h < 3 || w < 3 {
            return Err(Error::shape("box3", format!("{h}x{w} smaller than 3x3")));
        }
        let (oh, ow) = (h - 2, w - 2);
        let d = v.data();
        let mut data = Vec::with_capacity(p * oh * ow);
        for k in 0..p {
            for y in 0..oh {
                for x in 0..ow {
                    let mut s = 0.0;
                    for dy in 0..3 {
                        let row = k * h * w + (y + dy) * w + x;
                        s += d[row] + d[row + 1] + d[row + 2];
                    }
                    data.push(s / 9.0);
                }
            }
        }
        let mut shape = v.shape().to_vec();
        let n = shape.len();
        shape[n - 2] = oh;
        shape[n - 1] = ow;
        let out = Tensor::new(&shape, data)?;
        Ok(self.tape().record(&[self], out, Box::new(Box3Rule)))
    }
}
