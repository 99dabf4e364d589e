use crate::error::Result;
use crate::ops::{self, Padding};
use crate::real::Real;
use crate::tensor::{Shape, Tensor};

use super::{pop, Init, Layer, Mode, ParamBlock};

/// Same-padded, stride-1 convolution with optional bias.
pub struct Conv2d<T: Real> {
    block: ParamBlock<T>,
    cache: Vec<Tensor<T>>,
}

impl<T: Real> Conv2d<T> {
    pub fn new(init: &mut Init, name: &str, in_c: usize, out_c: usize, k: usize, bias: bool) -> Self {
        let shape = Shape::new(out_c, in_c, k, k);
        let block = init.glorot(name, shape, in_c * k * k, out_c * k * k, if bias { out_c } else { 0 }, 0.0);
        Conv2d { block, cache: Vec::new() }
    }

    /// Like [`Conv2d::new`] but with every bias set to `bias_value`.
    pub fn with_bias_value(init: &mut Init, name: &str, in_c: usize, out_c: usize, k: usize, bias_value: f64) -> Self {
        let shape = Shape::new(out_c, in_c, k, k);
        let block = init.glorot(name, shape, in_c * k * k, out_c * k * k, out_c, bias_value);
        Conv2d { block, cache: Vec::new() }
    }

    pub fn block(&self) -> &ParamBlock<T> {
        &self.block
    }

    pub fn block_mut(&mut self) -> &mut ParamBlock<T> {
        &mut self.block
    }

    pub fn in_channels(&self) -> usize {
        self.block.weight.shape().c
    }

    pub fn out_channels(&self) -> usize {
        self.block.weight.shape().n
    }

    fn bias(&self) -> Option<&[T]> {
        (!self.block.bias.is_empty()).then_some(self.block.bias.as_slice())
    }
}

impl<T: Real> Layer<T> for Conv2d<T> {
    fn kind(&self) -> &'static str {
        "conv2d"
    }

    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let y = ops::conv2d(x, &self.block.weight, self.bias(), Padding::Same, 1)?;
        if mode == Mode::Train {
            self.cache.push(x.clone());
        }
        Ok(y)
    }

    fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let x = pop(&mut self.cache, "conv2d")?;
        let b = &mut self.block;
        let gb = (!b.grad_bias.is_empty()).then_some(b.grad_bias.as_mut_slice());
        let gx = ops::conv2d_backward_into(&x, &b.weight, grad, Padding::Same, 1, b.grad_weight.data_mut(), gb, true)?;
        Ok(gx.expect("input gradient requested"))
    }

    fn visit(&self, f: &mut dyn FnMut(&ParamBlock<T>)) {
        f(&self.block)
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut ParamBlock<T>)) {
        f(&mut self.block)
    }

    fn clear_cache(&mut self) {
        self.cache.clear();
    }
}

/// Stride-2 transposed convolution that doubles the spatial size.
/// Weights are laid out `(in_c, out_c, k, k)`.
pub struct ConvTranspose2d<T: Real> {
    block: ParamBlock<T>,
    cache: Vec<Tensor<T>>,
}

impl<T: Real> ConvTranspose2d<T> {
    pub fn new(init: &mut Init, name: &str, in_c: usize, out_c: usize, k: usize) -> Self {
        let shape = Shape::new(in_c, out_c, k, k);
        // fans as seen from the equivalent forward convolution
        let block = init.glorot(name, shape, in_c * k * k, out_c * k * k, out_c, 0.0);
        ConvTranspose2d { block, cache: Vec::new() }
    }

    pub fn block(&self) -> &ParamBlock<T> {
        &self.block
    }
}

impl<T: Real> Layer<T> for ConvTranspose2d<T> {
    fn kind(&self) -> &'static str {
        "conv_transpose2d"
    }

    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let y = ops::conv_transpose2d(x, &self.block.weight, Some(&self.block.bias), 2)?;
        if mode == Mode::Train {
            self.cache.push(x.clone());
        }
        Ok(y)
    }

    fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let x = pop(&mut self.cache, "conv_transpose2d")?;
        let b = &mut self.block;
        let gx = ops::conv_transpose2d_backward_into(
            &x,
            &b.weight,
            grad,
            2,
            b.grad_weight.data_mut(),
            Some(&mut b.grad_bias),
            true,
        )?;
        Ok(gx.expect("input gradient requested"))
    }

    fn visit(&self, f: &mut dyn FnMut(&ParamBlock<T>)) {
        f(&self.block)
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut ParamBlock<T>)) {
        f(&mut self.block)
    }

    fn clear_cache(&mut self) {
        self.cache.clear();
    }
}
