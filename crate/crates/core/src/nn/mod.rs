//! Stateful layers: parameters plus a LIFO stack of forward caches.
//!
//! A layer may be invoked several times before its backward passes run (the
//! recurrent units reuse one convolution across unrolled steps). Each
//! training-mode forward pushes a cache entry and each backward pops one, so
//! backward calls must arrive in reverse order of the forwards.

mod conv;
mod init;
mod param;
mod residual;
mod simple;
mod stages;

pub use conv::{Conv2d, ConvTranspose2d};
pub use init::Init;
pub use param::ParamBlock;
pub use residual::{Projection, ResidualBlock};
pub use simple::{MaxPool2, Relu, Upsample2};
pub use stages::{skip_merge, skip_merge_backward, ConvRelu, SkipMerge, SoftmaxHead, TransposeStage, UpConvStage};

use crate::error::Result;
use crate::real::Real;
use crate::tensor::Tensor;

/// Training keeps caches for backward; inference does not.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

pub trait Layer<T: Real>: Send {
    fn kind(&self) -> &'static str;

    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>>;

    /// Consumes the most recent training-mode forward cache and returns the
    /// gradient with respect to that forward's input. Parameter gradients are
    /// accumulated into the owned blocks.
    fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>>;

    fn visit(&self, _f: &mut dyn FnMut(&ParamBlock<T>)) {}

    fn visit_mut(&mut self, _f: &mut dyn FnMut(&mut ParamBlock<T>)) {}

    /// Drop any pending forward caches.
    fn clear_cache(&mut self);

    fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |b| n += b.len());
        n
    }
}

/// Pops the last cache entry or reports a backward without forward.
#[doc(hidden)]
pub fn pop<C>(stack: &mut Vec<C>, kind: &'static str) -> Result<C> {
    stack.pop().ok_or(crate::Error::NoForwardCache(kind))
}
