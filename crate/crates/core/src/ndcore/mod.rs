//! Minimal dense-tensor kernel.
//!
//! Every differentiable op the network needs, each paired with an explicit
//! backward function. Ops are generic over [`Real`] so the same code runs in
//! `f32` for training and in `f64` for finite-difference checks.

mod conv;
mod dense;
mod init;
mod tensor;

pub use conv::{conv2d_backward, conv2d_forward, same_geometry, ConvGrads, ConvKernel};
pub use dense::{
    fc_backward, fc_forward, gap_backward, gap_forward, relu, relu_backward, sigmoid,
    sigmoid_backward, sigmoid_scalar, FcGrads,
};
pub use init::{l2_penalty, xavier_limit, xavier_uniform};
pub use tensor::{Real, Tensor};
