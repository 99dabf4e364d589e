//! Recurrent-residual fully convolutional networks for multitemporal SAR
//! change detection, with every forward and backward pass written out by hand.
//!
//! The crate is organised bottom-up:
//!
//! * [`tensor`] and [`ops`]: rank-4 storage and differentiable kernels.
//! * [`nn`]: parameterised layers (convolutions, residual blocks, heads).
//! * [`recurrent`]: RCL, RRCU, ConvLSTM and the residual ConvLSTM block.
//! * [`arch`]: the six network builders and parameter accounting.
//! * [`train`]: weighted cross-entropy, Adam, early stopping, gradient checks.
//! * [`metrics`], [`data`], [`synth`]: evaluation, the raster pipeline and
//!   the synthetic scene generator.
//! * [`formats`] and [`kv`]: on-disk containers and the key=value config format.

pub mod arch;
pub mod data;
pub mod error;
pub mod experiment;
pub mod formats;
pub mod kv;
pub mod metrics;
pub mod nn;
pub mod ops;
pub mod par;
pub mod real;
pub mod recurrent;
pub mod synth;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use real::Real;
pub use tensor::{Shape, Tensor};
