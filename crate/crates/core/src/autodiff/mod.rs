//! Minimal reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! A [`Tape`] records every operation of one forward pass; [`Var`] handles
//! point into it. Operations are methods on `Var` and return new vars.
//! Broadcasting is limited to one-element operands.

mod conv;
mod elementwise;
mod gradcheck;
mod reduce;
mod softmax;
mod spatial;
mod tape;
mod tensor;

pub use gradcheck::{check_gradients, finite_difference_grad, relative_error};
pub use softmax::softmax_channels_values;
pub use spatial::{avg_pool2_values, upsample_x2_values};
pub use tape::{Backward, Tape, Var};
pub use tensor::Tensor;
