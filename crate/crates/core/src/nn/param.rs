use crate::real::Real;
use crate::tensor::Tensor;

/// A learnable weight set with its gradient and Adam moment buffers.
///
/// Moments are stored flat over `weight` followed by `bias`.
#[derive(Clone, Debug)]
pub struct ParamBlock<T: Real = f32> {
    id: u32,
    name: String,
    pub weight: Tensor<T>,
    pub bias: Vec<T>,
    pub grad_weight: Tensor<T>,
    pub grad_bias: Vec<T>,
    pub(crate) m: Vec<T>,
    pub(crate) v: Vec<T>,
}

impl<T: Real> ParamBlock<T> {
    pub fn new(id: u32, name: impl Into<String>, weight: Tensor<T>, bias: Vec<T>) -> Self {
        let n = weight.len() + bias.len();
        ParamBlock {
            id,
            name: name.into(),
            grad_weight: Tensor::zeros(weight.shape()),
            grad_bias: vec![T::zero(); bias.len()],
            weight,
            bias,
            m: vec![T::zero(); n],
            v: vec![T::zero(); n],
        }
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Weight count plus bias count.
    pub fn len(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn zero_grad(&mut self) {
        self.grad_weight.fill(T::zero());
        self.grad_bias.iter_mut().for_each(|g| *g = T::zero());
    }

    pub fn grad_norm(&self) -> f64 {
        let w: f64 = self.grad_weight.data().iter().map(|g| g.as_f64().powi(2)).sum();
        let b: f64 = self.grad_bias.iter().map(|g| g.as_f64().powi(2)).sum();
        (w + b).sqrt()
    }

    /// Flat parameter `i` in (weight, bias) order.
    pub fn get(&self, i: usize) -> T {
        let nw = self.weight.len();
        if i < nw {
            self.weight.data()[i]
        } else {
            self.bias[i - nw]
        }
    }

    pub fn set(&mut self, i: usize, v: T) {
        let nw = self.weight.len();
        if i < nw {
            self.weight.data_mut()[i] = v;
        } else {
            self.bias[i - nw] = v;
        }
    }

    pub fn grad(&self, i: usize) -> T {
        let nw = self.weight.len();
        if i < nw {
            self.grad_weight.data()[i]
        } else {
            self.grad_bias[i - nw]
        }
    }

    /// Copy weights and biases from a block of the same layout, possibly of
    /// another precision.
    pub fn copy_values_from<U: Real>(&mut self, other: &ParamBlock<U>) {
        assert_eq!(self.weight.shape(), other.weight.shape(), "block {} layout", self.name);
        assert_eq!(self.bias.len(), other.bias.len(), "block {} bias", self.name);
        for (d, s) in self.weight.data_mut().iter_mut().zip(other.weight.data()) {
            *d = T::from_f64(s.as_f64());
        }
        for (d, s) in self.bias.iter_mut().zip(&other.bias) {
            *d = T::from_f64(s.as_f64());
        }
    }

    /// Split mutable access used by the optimiser.
    pub(crate) fn optimiser_view(&mut self) -> OptimiserView<'_, T> {
        OptimiserView {
            weight: self.weight.data_mut(),
            bias: &mut self.bias,
            grad_weight: self.grad_weight.data(),
            grad_bias: &self.grad_bias,
            m: &mut self.m,
            v: &mut self.v,
        }
    }
}

pub(crate) struct OptimiserView<'a, T> {
    pub weight: &'a mut [T],
    pub bias: &'a mut [T],
    pub grad_weight: &'a [T],
    pub grad_bias: &'a [T],
    pub m: &'a mut [T],
    pub v: &'a mut [T],
}
