use std::rc::Rc;

use super::{Backward, Tensor, Var};
use crate::error::{Error, Result};

struct SoftmaxRule;

impl Backward for SoftmaxRule {
    fn backward(&self, _: &[&Tensor], output: &Tensor, grad: &Tensor, _: &[bool]) -> Vec<Option<Tensor>> {
        let (c, h, w) = output.dims3().expect("dims");
        let plane = h * w;
        let (y, g) = (output.data(), grad.data());
        let mut out = vec![0.0; y.len()];
        for p in 0..plane {
            let dot: f64 = (0..c).map(|k| g[k * plane + p] * y[k * plane + p]).sum();
            for k in 0..c {
                let i = k * plane + p;
                out[i] = y[i] * (g[i] - dot);
            }
        }
        vec![Some(Tensor::new(output.shape(), out).expect("shape"))]
    }
}

/// Per-pixel softmax of a `[C,H,W]` plane stack, with max-subtraction.
pub fn softmax_channels_values(logits: &Tensor) -> Result<Tensor> {
    let (c, h, w) = logits.dims3()?;
    let plane = h * w;
    let z = logits.data();
    let mut out = vec![0.0; z.len()];
    for p in 0..plane {
        let max = (0..c).map(|k| z[k * plane + p]).fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for k in 0..c {
            let e = (z[k * plane + p] - max).exp();
            out[k * plane + p] = e;
            total += e;
        }
        for k in 0..c {
            out[k * plane + p] /= total;
        }
    }
    Tensor::new(logits.shape(), out)
}

struct CrossEntropyRule {
    target: Rc<Tensor>,
    mask: Rc<[bool]>,
    count: usize,
}

impl Backward for CrossEntropyRule {
    fn backward(&self, inputs: &[&Tensor], _: &Tensor, grad: &Tensor, _: &[bool]) -> Vec<Option<Tensor>> {
        let logits = inputs[0];
        let mut out = Tensor::zeros(logits.shape());
        if self.count == 0 {
            return vec![Some(out)];
        }
        let (c, h, w) = logits.dims3().expect("dims");
        let plane = h * w;
        let probs = softmax_channels_values(logits).expect("dims");
        let scale = grad.data()[0] / self.count as f64;
        let (pr, t, o) = (probs.data(), self.target.data(), out.data_mut());
        for p in (0..plane).filter(|&p| self.mask[p]) {
            let mass: f64 = (0..c).map(|k| t[k * plane + p]).sum();
            for k in 0..c {
                let i = k * plane + p;
                o[i] = scale * (pr[i] * mass - t[i]);
            }
        }
        vec![Some(out)]
    }
}

impl<'t> Var<'t> {
    /// Softmax over the channel axis of `[C,H,W]`; needs at least 2 channels.
    pub fn softmax_channels(self) -> Result<Var<'t>> {
        let v = self.value();
        let (c, _, _) = v.dims3()?;
        if c < 2 {
            return Err(Error::contract("softmax_channels needs at least 2 channels"));
        }
        let out = softmax_channels_values(&v)?;
        Ok(self.tape().record(&[self], out, Box::new(SoftmaxRule)))
    }

    /// Mean over masked pixels of `-sum_c target_c * log softmax(logits)_c`.
    ///
    /// `target` is a `[C,H,W]` distribution per pixel (one-hot for hard
    /// labels), `mask` has one entry per pixel. Returns 0 with no masked
    /// pixels.
    pub fn soft_cross_entropy(self, target: Rc<Tensor>, mask: Rc<[bool]>) -> Result<Var<'t>> {
        let z = self.value();
        let (c, h, w) = z.dims3()?;
        let plane = h * w;
        if target.shape() != z.shape() || mask.len() != plane {
            return Err(Error::shape(
                "soft_cross_entropy",
                format!("logits {:?}, target {:?}, mask {}", z.shape(), target.shape(), mask.len()),
            ));
        }
        let zd = z.data();
        let t = target.data();
        let mut total = 0.0;
        let mut count = 0;
        for p in (0..plane).filter(|&p| mask[p]) {
            let max = (0..c).map(|k| zd[k * plane + p]).fold(f64::NEG_INFINITY, f64::max);
            let lse = max + (0..c).map(|k| (zd[k * plane + p] - max).exp()).sum::<f64>().ln();
            total += (0..c).map(|k| t[k * plane + p] * (lse - zd[k * plane + p])).sum::<f64>();
            count += 1;
        }
        let value = if count == 0 { 0.0 } else { total / count as f64 };
        let rule = CrossEntropyRule { target, mask, count };
        Ok(self.tape().record(&[self], Tensor::scalar(value), Box::new(rule)))
    }
}
