use crate::error::{Error, Result};
use crate::ops::{self, PoolIndexMap};
use crate::real::Real;
use crate::tensor::Tensor;

use super::{pop, Layer, Mode};

/// ReLU that caches its output for the backward mask.
#[derive(Default)]
pub struct Relu<T: Real> {
    cache: Vec<Tensor<T>>,
}

impl<T: Real> Relu<T> {
    pub fn new() -> Self {
        Relu { cache: Vec::new() }
    }
}

impl<T: Real> Layer<T> for Relu<T> {
    fn kind(&self) -> &'static str {
        "relu"
    }

    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let y = ops::relu(x);
        if mode == Mode::Train {
            self.cache.push(y.clone());
        }
        Ok(y)
    }

    fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let y = pop(&mut self.cache, "relu")?;
        ops::relu_backward(&y, grad)
    }

    fn clear_cache(&mut self) {
        self.cache.clear();
    }
}

#[derive(Default)]
pub struct MaxPool2 {
    cache: Vec<PoolIndexMap>,
}

impl MaxPool2 {
    pub fn new() -> Self {
        MaxPool2 { cache: Vec::new() }
    }
}

impl<T: Real> Layer<T> for MaxPool2 {
    fn kind(&self) -> &'static str {
        "maxpool2"
    }

    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let (y, map) = ops::maxpool2(x)?;
        if mode == Mode::Train {
            self.cache.push(map);
        }
        Ok(y)
    }

    fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let map = pop(&mut self.cache, "maxpool2")?;
        ops::maxpool2_backward(grad, &map)
    }

    fn clear_cache(&mut self) {
        self.cache.clear();
    }
}

/// Bilinear 2x upsampling. Stateless apart from counting pending forwards.
#[derive(Default)]
pub struct Upsample2 {
    pending: usize,
}

impl Upsample2 {
    pub fn new() -> Self {
        Upsample2 { pending: 0 }
    }
}

impl<T: Real> Layer<T> for Upsample2 {
    fn kind(&self) -> &'static str {
        "upsample_bilinear2"
    }

    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        if mode == Mode::Train {
            self.pending += 1;
        }
        Ok(ops::upsample_bilinear2(x))
    }

    fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        if self.pending == 0 {
            return Err(Error::NoForwardCache("upsample_bilinear2"));
        }
        self.pending -= 1;
        ops::upsample_bilinear2_backward(grad)
    }

    fn clear_cache(&mut self) {
        self.pending = 0;
    }
}
