//! Pointwise unary and binary operations.
//!
//! Binary operations accept equal shapes, or one operand with a single
//! element that broadcasts against the other.

use super::{Backward, Tensor, Var};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
enum BinaryKind {
    Add,
    Sub,
    Mul,
    Div,
}

struct BinaryRule {
    kind: BinaryKind,
}

fn broadcast_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<Vec<usize>> {
    if a.shape() == b.shape() {
        Ok(a.shape().to_vec())
    } else if b.numel() == 1 {
        Ok(a.shape().to_vec())
    } else if a.numel() == 1 {
        Ok(b.shape().to_vec())
    } else {
        Err(Error::shape(
            op,
            format!("{:?} vs {:?} (only scalar broadcasting)", a.shape(), b.shape()),
        ))
    }
}

#[inline]
fn at(t: &Tensor, i: usize) -> f64 {
    let d = t.data();
    if d.len() == 1 {
        d[0]
    } else {
        d[i]
    }
}

fn reduce_to(grad: Vec<f64>, target: &Tensor) -> Tensor {
    if target.numel() == 1 && grad.len() != 1 {
        Tensor::new(target.shape(), vec![grad.iter().sum()]).expect("scalar")
    } else {
        Tensor::new(target.shape(), grad).expect("same numel")
    }
}

impl Backward for BinaryRule {
    fn backward(
        &self,
        inputs: &[&Tensor],
        _output: &Tensor,
        grad: &Tensor,
        needs: &[bool],
    ) -> Vec<Option<Tensor>> {
        let (a, b) = (inputs[0], inputs[1]);
        let g = grad.data();
        let n = g.len();
        let ga = needs[0].then(|| {
            let v: Vec<f64> = match self.kind {
                BinaryKind::Add | BinaryKind::Sub => g.to_vec(),
                BinaryKind::Mul => (0..n).map(|i| g[i] * at(b, i)).collect(),
                BinaryKind::Div => (0..n).map(|i| g[i] / at(b, i)).collect(),
            };
            reduce_to(v, a)
        });
        let gb = needs[1].then(|| {
            let v: Vec<f64> = match self.kind {
                BinaryKind::Add => g.to_vec(),
                BinaryKind::Sub => g.iter().map(|x| -x).collect(),
                BinaryKind::Mul => (0..n).map(|i| g[i] * at(a, i)).collect(),
                BinaryKind::Div => (0..n)
                    .map(|i| {
                        let bi = at(b, i);
                        -g[i] * at(a, i) / (bi * bi)
                    })
                    .collect(),
            };
            reduce_to(v, b)
        });
        vec![ga, gb]
    }
}

fn binary<'t>(kind: BinaryKind, a: Var<'t>, b: Var<'t>) -> Result<Var<'t>> {
    let op = match kind {
        BinaryKind::Add => "add",
        BinaryKind::Sub => "sub",
        BinaryKind::Mul => "mul",
        BinaryKind::Div => "div",
    };
    let (av, bv) = (a.value(), b.value());
    let shape = broadcast_shape(op, &av, &bv)?;
    let n: usize = shape.iter().product();
    if kind == BinaryKind::Div && bv.data().iter().any(|&x| x == 0.0) {
        return Err(Error::domain("div", "division by zero"));
    }
    let data: Vec<f64> = match (kind, av.numel() == n, bv.numel() == n) {
        (BinaryKind::Add, true, true) => av.data().iter().zip(bv.data()).map(|(x, y)| x + y).collect(),
        (BinaryKind::Sub, true, true) => av.data().iter().zip(bv.data()).map(|(x, y)| x - y).collect(),
        (BinaryKind::Mul, true, true) => av.data().iter().zip(bv.data()).map(|(x, y)| x * y).collect(),
        (BinaryKind::Div, true, true) => av.data().iter().zip(bv.data()).map(|(x, y)| x / y).collect(),
        _ => (0..n)
            .map(|i| {
                let (x, y) = (at(&av, i), at(&bv, i));
                match kind {
                    BinaryKind::Add => x + y,
                    BinaryKind::Sub => x - y,
                    BinaryKind::Mul => x * y,
                    BinaryKind::Div => x / y,
                }
            })
            .collect(),
    };
    let out = Tensor::new(&shape, data)?;
    Ok(a.tape().record(&[a, b], out, Box::new(BinaryRule { kind })))
}

/// Pointwise unary operations. Parameters ride along in the variant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum UnaryKind {
    Neg,
    Abs,
    Exp,
    Log,
    Sqrt,
    Square,
    Recip,
    Sigmoid,
    Elu,
    Affine { scale: f64, shift: f64 },
    ClampMin(f64),
}

impl UnaryKind {
    #[inline]
    fn forward(self, x: f64) -> f64 {
        match self {
            UnaryKind::Neg => -x,
            UnaryKind::Abs => x.abs(),
            UnaryKind::Exp => x.exp(),
            UnaryKind::Log => x.ln(),
            UnaryKind::Sqrt => x.sqrt(),
            UnaryKind::Square => x * x,
            UnaryKind::Recip => 1.0 / x,
            UnaryKind::Sigmoid => {
                if x >= 0.0 {
                    1.0 / (1.0 + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (1.0 + e)
                }
            }
            UnaryKind::Elu => {
                if x > 0.0 {
                    x
                } else {
                    x.exp_m1()
                }
            }
            UnaryKind::Affine { scale, shift } => scale * x + shift,
            UnaryKind::ClampMin(floor) => x.max(floor),
        }
    }

    /// d(out)/d(in) given input `x` and output `y`.
    #[inline]
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            UnaryKind::Neg => -1.0,
            // Subgradient 0 at the kink.
            UnaryKind::Abs => {
                if x > 0.0 {
                    1.0
                } else if x < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            UnaryKind::Exp => y,
            UnaryKind::Log => 1.0 / x,
            UnaryKind::Sqrt => 0.5 / y,
            UnaryKind::Square => 2.0 * x,
            UnaryKind::Recip => -y * y,
            UnaryKind::Sigmoid => y * (1.0 - y),
            UnaryKind::Elu => {
                if x > 0.0 {
                    1.0
                } else {
                    y + 1.0
                }
            }
            UnaryKind::Affine { scale, .. } => scale,
            UnaryKind::ClampMin(floor) => {
                if x > floor {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

struct UnaryRule(UnaryKind);

impl Backward for UnaryRule {
    fn backward(
        &self,
        inputs: &[&Tensor],
        output: &Tensor,
        grad: &Tensor,
        _needs: &[bool],
    ) -> Vec<Option<Tensor>> {
        let x = inputs[0].data();
        let y = output.data();
        let g = grad.data();
        let data = (0..g.len())
            .map(|i| g[i] * self.0.derivative(x[i], y[i]))
            .collect();
        vec![Some(Tensor::new(inputs[0].shape(), data).expect("same shape"))]
    }
}

pub(crate) fn unary(kind: UnaryKind, a: Var<'_>) -> Var<'_> {
    let av = a.value();
    let out = av.map(|x| kind.forward(x));
    a.tape().record(&[a], out, Box::new(UnaryRule(kind)))
}

impl<'t> Var<'t> {
    pub fn add(self, other: Var<'t>) -> Result<Var<'t>> {
        binary(BinaryKind::Add, self, other)
    }

    pub fn sub(self, other: Var<'t>) -> Result<Var<'t>> {
        binary(BinaryKind::Sub, self, other)
    }

    pub fn mul(self, other: Var<'t>) -> Result<Var<'t>> {
        binary(BinaryKind::Mul, self, other)
    }

    /// Errors with a domain error if any divisor element is zero.
    pub fn div(self, other: Var<'t>) -> Result<Var<'t>> {
        binary(BinaryKind::Div, self, other)
    }

    pub fn neg(self) -> Var<'t> {
        unary(UnaryKind::Neg, self)
    }

    pub fn abs(self) -> Var<'t> {
        unary(UnaryKind::Abs, self)
    }

    pub fn exp(self) -> Var<'t> {
        unary(UnaryKind::Exp, self)
    }

    /// Natural log; every element must be strictly positive.
    pub fn log(self) -> Result<Var<'t>> {
        if let Some(bad) = self.value().data().iter().find(|&&x| x <= 0.0 || x.is_nan()) {
            return Err(Error::domain("log", format!("non-positive input {bad}")));
        }
        Ok(unary(UnaryKind::Log, self))
    }

    pub fn sqrt(self) -> Result<Var<'t>> {
        if let Some(bad) = self.value().data().iter().find(|&&x| x <= 0.0 || x.is_nan()) {
            return Err(Error::domain("sqrt", format!("non-positive input {bad}")));
        }
        Ok(unary(UnaryKind::Sqrt, self))
    }

    pub fn square(self) -> Var<'t> {
        unary(UnaryKind::Square, self)
    }

    pub fn recip(self) -> Result<Var<'t>> {
        if self.value().data().iter().any(|&x| x == 0.0) {
            return Err(Error::domain("recip", "reciprocal of zero"));
        }
        Ok(unary(UnaryKind::Recip, self))
    }

    pub fn sigmoid(self) -> Var<'t> {
        unary(UnaryKind::Sigmoid, self)
    }

    /// Exponential linear unit with alpha = 1 (continuously differentiable).
    pub fn elu(self) -> Var<'t> {
        unary(UnaryKind::Elu, self)
    }

    /// `scale * x + shift`.
    pub fn affine(self, scale: f64, shift: f64) -> Var<'t> {
        unary(UnaryKind::Affine { scale, shift }, self)
    }

    pub fn scale(self, k: f64) -> Var<'t> {
        self.affine(k, 0.0)
    }

    pub fn add_scalar(self, c: f64) -> Var<'t> {
        self.affine(1.0, c)
    }

    /// `max(x, floor)`; clamped elements pass no gradient.
    pub fn clamp_min(self, floor: f64) -> Var<'t> {
        unary(UnaryKind::ClampMin(floor), self)
    }
}
