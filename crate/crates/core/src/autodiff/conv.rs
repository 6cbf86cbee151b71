//! 2-D convolution via im2col and a dense matrix product.

use std::rc::Rc;

use super::{Backward, Tensor, Var};
use crate::error::{Error, Result};

/// `c = a * b + beta * c` for row/column-strided matrices.
///
/// `a` is `m x k`, `b` is `k x n`, `c` is `m x n` row-major.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_strides: (isize, isize),
    b: &[f64],
    b_strides: (isize, isize),
    beta: f64,
    c: &mut [f64],
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: slice lengths are checked above and the strides describe
    // dense m x k / k x n layouts inside them.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            a_strides.0,
            a_strides.1,
            b.as_ptr(),
            b_strides.0,
            b_strides.1,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[derive(Clone, Copy, Debug)]
struct Geometry {
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
}

impl Geometry {
    fn rows(&self) -> usize {
        self.c * self.k * self.k
    }

    fn cols(&self) -> usize {
        self.oh * self.ow
    }
}

fn im2col(input: &[f64], g: &Geometry) -> Vec<f64> {
    let p = g.cols();
    let mut cols = vec![0.0; g.rows() * p];
    for c in 0..g.c {
        for ky in 0..g.k {
            for kx in 0..g.k {
                let r = (c * g.k + ky) * g.k + kx;
                let dst = &mut cols[r * p..(r + 1) * p];
                for oy in 0..g.oh {
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let src_row = &input[c * g.h * g.w + iy as usize * g.w..][..g.w];
                    let out_row = &mut dst[oy * g.ow..(oy + 1) * g.ow];
                    for (ox, o) in out_row.iter_mut().enumerate() {
                        let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                        if ix >= 0 && ix < g.w as isize {
                            *o = src_row[ix as usize];
                        }
                    }
                }
            }
        }
    }
    cols
}

fn col2im(cols: &[f64], g: &Geometry) -> Vec<f64> {
    let p = g.cols();
    let mut out = vec![0.0; g.c * g.h * g.w];
    for c in 0..g.c {
        for ky in 0..g.k {
            for kx in 0..g.k {
                let r = (c * g.k + ky) * g.k + kx;
                let src = &cols[r * p..(r + 1) * p];
                for oy in 0..g.oh {
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let row = c * g.h * g.w + iy as usize * g.w;
                    for ox in 0..g.ow {
                        let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                        if ix >= 0 && ix < g.w as isize {
                            out[row + ix as usize] += src[oy * g.ow + ox];
                        }
                    }
                }
            }
        }
    }
    out
}

struct ConvRule {
    geom: Geometry,
    cols: Rc<Vec<f64>>,
    out_channels: usize,
}

impl Backward for ConvRule {
    fn backward(&self, inputs: &[&Tensor], _: &Tensor, grad: &Tensor, needs: &[bool]) -> Vec<Option<Tensor>> {
        let g = &self.geom;
        let (co, r, p) = (self.out_channels, g.rows(), g.cols());
        let gd = grad.data();
        let kernel = inputs[1];

        let input_grad = needs[0].then(|| {
            let mut dcols = vec![0.0; r * p];
            gemm(r, co, p, kernel.data(), (1, r as isize), gd, (p as isize, 1), 0.0, &mut dcols);
            Tensor::new(inputs[0].shape(), col2im(&dcols, g)).expect("shape")
        });
        let kernel_grad = needs[1].then(|| {
            let mut dk = vec![0.0; co * r];
            gemm(co, p, r, gd, (p as isize, 1), &self.cols, (1, p as isize), 0.0, &mut dk);
            Tensor::new(kernel.shape(), dk).expect("shape")
        });
        let mut out = vec![input_grad, kernel_grad];
        if inputs.len() == 3 {
            let bias_grad = needs[2].then(|| {
                let data = (0..co).map(|o| gd[o * p..(o + 1) * p].iter().sum()).collect();
                Tensor::new(&[co], data).expect("shape")
            });
            out.push(bias_grad);
        }
        out
    }
}

impl<'t> Var<'t> {
    /// Cross-correlation of a `[C,H,W]` input with a `[C',C,k,k]` kernel,
    /// optionally adding a `[C']` bias.
    ///
    /// The output size `(H + 2*padding - k) / stride + 1` must be exact.
    pub fn conv2d(
        self,
        kernel: Var<'t>,
        bias: Option<Var<'t>>,
        stride: usize,
        padding: usize,
    ) -> Result<Var<'t>> {
        let x = self.value();
        let kv = kernel.value();
        let (c, h, w) = x.dims3()?;
        let (co, kc, k) = match kv.shape()[..] {
            [co, kc, k1, k2] if k1 == k2 => (co, kc, k1),
            _ => return Err(Error::shape("conv2d", format!("kernel shape {:?}", kv.shape()))),
        };
        if kc != c {
            return Err(Error::shape(
                "conv2d",
                format!("kernel expects {kc} input channels, input has {c}"),
            ));
        }
        if k % 2 == 0 || stride == 0 {
            return Err(Error::contract(format!(
                "conv2d needs odd kernel and stride >= 1 (k={k}, stride={stride})"
            )));
        }
        if h < k || w < k {
            return Err(Error::contract(format!("conv2d input {h}x{w} smaller than kernel {k}")));
        }
        let (span_h, span_w) = (h + 2 * padding - k, w + 2 * padding - k);
        if span_h % stride != 0 || span_w % stride != 0 {
            return Err(Error::contract(format!(
                "conv2d output size not integral: ({h}+2*{padding}-{k})/{stride}"
            )));
        }
        let geom = Geometry {
            c,
            h,
            w,
            k,
            stride,
            pad: padding,
            oh: span_h / stride + 1,
            ow: span_w / stride + 1,
        };
        let p = geom.cols();
        let cols = im2col(x.data(), &geom);
        let mut out = vec![0.0; co * p];
        let mut beta = 0.0;
        if let Some(b) = bias {
            let bv = b.value();
            if bv.shape() != [co] {
                return Err(Error::shape("conv2d", format!("bias shape {:?}", bv.shape())));
            }
            for (o, &bias) in bv.data().iter().enumerate() {
                out[o * p..(o + 1) * p].fill(bias);
            }
            beta = 1.0;
        }
        gemm(co, geom.rows(), p, kv.data(), (geom.rows() as isize, 1), &cols, (p as isize, 1), beta, &mut out);
        let out = Tensor::new(&[co, geom.oh, geom.ow], out)?;
        let rule = ConvRule {
            geom,
            cols: Rc::new(cols),
            out_channels: co,
        };
        let inputs: Vec<Var<'t>> = match bias {
            Some(b) => vec![self, kernel, b],
            None => vec![self, kernel],
        };
        Ok(self.tape().record(&inputs, out, Box::new(rule)))
    }
}
