//! Differentiable primitive kernels over [`Tensor`](crate::Tensor).
//!
//! Forward functions are pure. Each backward takes whatever the forward
//! cached (input, output or an index map) plus the output cotangent.

mod conv;
mod pointwise;
mod pool;
mod upsample;

pub use conv::{
    conv2d, conv2d_backward, conv2d_backward_into, conv_output_len, conv_transpose2d,
    conv_transpose2d_backward, conv_transpose2d_backward_into, ConvGrads, Padding,
};
pub use pointwise::{
    add, concat_channels, hadamard, hadamard_backward, relu, relu_backward, sigmoid,
    sigmoid_backward, softmax_channels, split_channels, tanh, tanh_backward,
};
pub use pool::{maxpool2, maxpool2_backward, PoolIndexMap};
pub use upsample::{upsample_bilinear2, upsample_bilinear2_backward};
