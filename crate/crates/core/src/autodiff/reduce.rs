//! Reductions to scalars and over the channel axis.

use std::rc::Rc;

use super::{Backward, Tensor, Var};
use crate::error::{Error, Result};

struct SumRule {
    scale: f64,
}

impl Backward for SumRule {
    fn backward(&self, inputs: &[&Tensor], _: &Tensor, grad: &Tensor, _: &[bool]) -> Vec<Option<Tensor>> {
        let g = grad.data()[0] * self.scale;
        vec![Some(Tensor::full(inputs[0].shape(), g))]
    }
}

struct MaskedMeanRule {
    mask: Rc<[bool]>,
    count: usize,
}

impl Backward for MaskedMeanRule {
    fn backward(&self, inputs: &[&Tensor], _: &Tensor, grad: &Tensor, _: &[bool]) -> Vec<Option<Tensor>> {
        let mut out = Tensor::zeros(inputs[0].shape());
        if self.count > 0 {
            let g = grad.data()[0] / self.count as f64;
            for (o, &m) in out.data_mut().iter_mut().zip(self.mask.iter()) {
                if m {
                    *o = g;
                }
            }
        }
        vec![Some(out)]
    }
}

struct ChannelReduceRule {
    channels: usize,
    scale: f64,
}

impl Backward for ChannelReduceRule {
    fn backward(&self, inputs: &[&Tensor], _: &Tensor, grad: &Tensor, _: &[bool]) -> Vec<Option<Tensor>> {
        let g = grad.data();
        let plane = g.len();
        let mut data = Vec::with_capacity(plane * self.channels);
        for _ in 0..self.channels {
            data.extend(g.iter().map(|v| v * self.scale));
        }
        vec![Some(Tensor::new(inputs[0].shape(), data).expect("shape"))]
    }
}

struct GlobalPoolRule {
    plane: usize,
}

impl Backward for GlobalPoolRule {
    fn backward(&self, inputs: &[&Tensor], _: &Tensor, grad: &Tensor, _: &[bool]) -> Vec<Option<Tensor>> {
        let mut data = Vec::with_capacity(inputs[0].numel());
        for &g in grad.data() {
            let v = g / self.plane as f64;
            data.extend(std::iter::repeat(v).take(self.plane));
        }
        vec![Some(Tensor::new(inputs[0].shape(), data).expect("shape"))]
    }
}

impl<'t> Var<'t> {
    /// Sum of all elements, as a scalar.
    pub fn sum(self) -> Var<'t> {
        let v = self.value();
        let out = Tensor::scalar(v.sum());
        self.tape().record(&[self], out, Box::new(SumRule { scale: 1.0 }))
    }

    pub fn mean(self) -> Var<'t> {
        let v = self.value();
        let n = v.numel() as f64;
        let out = Tensor::scalar(v.sum() / n);
        self.tape()
            .record(&[self], out, Box::new(SumRule { scale: 1.0 / n }))
    }

    /// Mean over the elements where `mask` is true; 0 when none are.
    pub fn masked_mean(self, mask: Rc<[bool]>) -> Result<Var<'t>> {
        let v = self.value();
        if mask.len() != v.numel() {
            return Err(Error::shape(
                "masked_mean",
                format!("mask has {} entries for {} values", mask.len(), v.numel()),
            ));
        }
        let (sum, count) = v
            .data()
            .iter()
            .zip(mask.iter())
            .filter(|(_, &m)| m)
            .fold((0.0, 0usize), |(s, c), (x, _)| (s + x, c + 1));
        let value = if count == 0 { 0.0 } else { sum / count as f64 };
        let out = Tensor::scalar(value);
        Ok(self
            .tape()
            .record(&[self], out, Box::new(MaskedMeanRule { mask, count })))
    }

    fn channel_reduce(self, op: &'static str, mean: bool) -> Result<Var<'t>> {
        let v = self.value();
        let (c, h, w) = v.dims3().map_err(|_| Error::shape(op, format!("{:?}", v.shape())))?;
        let plane = h * w;
        let mut data = vec![0.0; plane];
        for ch in 0..c {
            for (o, x) in data.iter_mut().zip(v.channel(ch)) {
                *o += x;
            }
        }
        let scale = if mean { 1.0 / c as f64 } else { 1.0 };
        if mean {
            data.iter_mut().for_each(|x| *x *= scale);
        }
        let out = Tensor::new(&[h, w], data)?;
        Ok(self
            .tape()
            .record(&[self], out, Box::new(ChannelReduceRule { channels: c, scale })))
    }

    /// `[C,H,W] -> [H,W]` sum over channels.
    pub fn channel_sum(self) -> Result<Var<'t>> {
        self.channel_reduce("channel_sum", false)
    }

    /// `[C,H,W] -> [H,W]` mean over channels.
    pub fn channel_mean(self) -> Result<Var<'t>> {
        self.channel_reduce("channel_mean", true)
    }

    /// `[C,H,W] -> [C]` spatial mean per channel.
    pub fn global_avg_pool(self) -> Result<Var<'t>> {
        let v = self.value();
        let (c, h, w) = v.dims3()?;
        let plane = h * w;
        let data = (0..c)
            .map(|ch| v.channel(ch).iter().sum::<f64>() / plane as f64)
            .collect();
        let out = Tensor::new(&[c], data)?;
        Ok(self
            .tape()
            .record(&[self], out, Box::new(GlobalPoolRule { plane })))
    }
}
