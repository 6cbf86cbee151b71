//! Central finite differences, the reference every analytic gradient in
//! this crate is tested against.

use super::{Tape, Tensor, Var};
use crate::error::Result;

/// Estimates `df/dx` coordinate-wise with `(f(x+eps) - f(x-eps)) / (2 eps)`.
pub fn finite_difference_grad(
    mut f: impl FnMut(&Tensor) -> f64,
    params: &Tensor,
    eps: f64,
) -> Tensor {
    let mut probe = params.clone();
    let mut grad = Tensor::zeros(params.shape());
    for i in 0..params.numel() {
        let x = params.data()[i];
        probe.data_mut()[i] = x + eps;
        let up = f(&probe);
        probe.data_mut()[i] = x - eps;
        let down = f(&probe);
        probe.data_mut()[i] = x;
        grad.data_mut()[i] = (up - down) / (2.0 * eps);
    }
    grad
}

/// `||a - b|| / max(||a||, ||b||)` in the Euclidean norm; 0 when both
/// vanish.
pub fn relative_error(a: &Tensor, b: &Tensor) -> f64 {
    let norm = |t: &[f64]| t.iter().map(|v| v * v).sum::<f64>().sqrt();
    let diff: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let scale = norm(a.data()).max(norm(b.data()));
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Relative error between the tape gradient and central differences for
/// each input of `build`, which maps leaf vars to a scalar.
pub fn check_gradients<F>(inputs: &[Tensor], eps: f64, build: F) -> Result<Vec<f64>>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>>,
{
    let tape = Tape::new();
    let leaves: Vec<Var<'_>> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let loss = build(&tape, &leaves)?;
    tape.backward(loss)?;
    let analytic: Vec<Tensor> = leaves
        .iter()
        .zip(inputs)
        .map(|(v, t)| v.grad().unwrap_or_else(|| Tensor::zeros(t.shape())))
        .collect();
    let eval = |xs: &[Tensor]| -> f64 {
        let tape = Tape::new();
        let vars: Vec<Var<'_>> = xs.iter().map(|t| tape.constant(t.clone())).collect();
        build(&tape, &vars).and_then(|v| v.item()).unwrap_or(f64::NAN)
    };
    let mut errors = Vec::with_capacity(inputs.len());
    for (i, grad) in analytic.iter().enumerate() {
        let mut xs = inputs.to_vec();
        let fd = finite_difference_grad(
            |p| {
                xs[i] = p.clone();
                eval(&xs)
            },
            &inputs[i],
            eps,
        );
        errors.push(relative_error(grad, &fd));
    }
    Ok(errors)
}
