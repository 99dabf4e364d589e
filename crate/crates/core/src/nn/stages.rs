use crate::error::{Error, Result};
use crate::ops;
use crate::real::Real;
use crate::tensor::Tensor;

use super::{pop, Conv2d, ConvTranspose2d, Init, Layer, Mode, ParamBlock, Relu, Upsample2};

/// 3x3 convolution followed by ReLU.
pub struct ConvRelu<T: Real> {
    conv: Conv2d<T>,
    act: Relu<T>,
}

impl<T: Real> ConvRelu<T> {
    pub fn new(init: &mut Init, name: &str, in_c: usize, out_c: usize) -> Self {
        ConvRelu {
            conv: Conv2d::new(init, name, in_c, out_c, 3, true),
            act: Relu::new(),
        }
    }
}

impl<T: Real> Layer<T> for ConvRelu<T> {
    fn kind(&self) -> &'static str {
        "conv_relu"
    }

    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let z = self.conv.forward(x, mode)?;
        self.act.forward(&z, mode)
    }

    fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let g = self.act.backward(grad)?;
        self.conv.backward(&g)
    }

    fn visit(&self, f: &mut dyn FnMut(&ParamBlock<T>)) {
        self.conv.visit(f)
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut ParamBlock<T>)) {
        self.conv.visit_mut(f)
    }

    fn clear_cache(&mut self) {
        self.conv.clear_cache();
        self.act.clear_cache();
    }
}

/// Bilinear 2x upsampling followed by a 3x3 convolution and ReLU.
pub struct UpConvStage<T: Real> {
    up: Upsample2,
    conv: ConvRelu<T>,
}

impl<T: Real> UpConvStage<T> {
    pub fn new(init: &mut Init, name: &str, in_c: usize, out_c: usize) -> Self {
        UpConvStage {
            up: Upsample2::new(),
            conv: ConvRelu::new(init, name, in_c, out_c),
        }
    }
}

impl<T: Real> Layer<T> for UpConvStage<T> {
    fn kind(&self) -> &'static str {
        "up_conv_stage"
    }

    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let u = Layer::<T>::forward(&mut self.up, x, mode)?;
        self.conv.forward(&u, mode)
    }

    fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let g = self.conv.backward(grad)?;
        Layer::<T>::backward(&mut self.up, &g)
    }

    fn visit(&self, f: &mut dyn FnMut(&ParamBlock<T>)) {
        self.conv.visit(f)
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut ParamBlock<T>)) {
        self.conv.visit_mut(f)
    }

    fn clear_cache(&mut self) {
        Layer::<T>::clear_cache(&mut self.up);
        self.conv.clear_cache();
    }
}

/// 3x3 stride-2 transposed convolution followed by ReLU.
pub struct TransposeStage<T: Real> {
    tc: ConvTranspose2d<T>,
    act: Relu<T>,
}

impl<T: Real> TransposeStage<T> {
    pub fn new(init: &mut Init, name: &str, in_c: usize, out_c: usize) -> Self {
        TransposeStage {
            tc: ConvTranspose2d::new(init, name, in_c, out_c, 3),
            act: Relu::new(),
        }
    }
}

impl<T: Real> Layer<T> for TransposeStage<T> {
    fn kind(&self) -> &'static str {
        "transpose_stage"
    }

    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let z = self.tc.forward(x, mode)?;
        self.act.forward(&z, mode)
    }

    fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let g = self.act.backward(grad)?;
        self.tc.backward(&g)
    }

    fn visit(&self, f: &mut dyn FnMut(&ParamBlock<T>)) {
        self.tc.visit(f)
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut ParamBlock<T>)) {
        self.tc.visit_mut(f)
    }

    fn clear_cache(&mut self) {
        self.tc.clear_cache();
        self.act.clear_cache();
    }
}

/// How an encoder feature joins the decoder path at equal resolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SkipMerge {
    /// Channel concatenation, encoder channels first.
    Concat,
    /// Elementwise sum; widths must match.
    Add,
}

impl SkipMerge {
    pub fn out_channels(self, enc_c: usize, dec_c: usize) -> usize {
        match self {
            SkipMerge::Concat => enc_c + dec_c,
            SkipMerge::Add => dec_c,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SkipMerge::Concat => "concat",
            SkipMerge::Add => "add",
        }
    }
}

pub fn skip_merge<T: Real>(mode: SkipMerge, enc: &Tensor<T>, dec: &Tensor<T>) -> Result<Tensor<T>> {
    let (a, b) = (enc.shape(), dec.shape());
    if a.h != b.h {
        return Err(Error::dim("skip_merge", "row", a.h, b.h));
    }
    if a.w != b.w {
        return Err(Error::dim("skip_merge", "col", a.w, b.w));
    }
    match mode {
        SkipMerge::Concat => ops::concat_channels(enc, dec),
        SkipMerge::Add => ops::add(enc, dec),
    }
}

/// Returns `(grad_enc, grad_dec)`.
pub fn skip_merge_backward<T: Real>(
    mode: SkipMerge,
    enc_c: usize,
    grad: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>)> {
    match mode {
        SkipMerge::Concat => ops::split_channels(grad, enc_c),
        SkipMerge::Add => Ok((grad.clone(), grad.clone())),
    }
}

/// 1x1 convolution to class logits, then a per-pixel softmax.
pub struct SoftmaxHead<T: Real> {
    conv: Conv2d<T>,
    probs: Vec<Tensor<T>>,
}

impl<T: Real> SoftmaxHead<T> {
    pub fn new(init: &mut Init, name: &str, in_c: usize, classes: usize) -> Self {
        SoftmaxHead {
            conv: Conv2d::new(init, name, in_c, classes, 1, true),
            probs: Vec::new(),
        }
    }

    pub fn classes(&self) -> usize {
        self.conv.out_channels()
    }

    /// Backward from a gradient taken with respect to the logits, as
    /// produced by the fused softmax cross-entropy.
    pub fn backward_logits(&mut self, grad_logits: &Tensor<T>) -> Result<Tensor<T>> {
        pop(&mut self.probs, "softmax_head")?;
        self.conv.backward(grad_logits)
    }
}

impl<T: Real> Layer<T> for SoftmaxHead<T> {
    fn kind(&self) -> &'static str {
        "softmax_head"
    }

    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let p = ops::softmax_channels(&self.conv.forward(x, mode)?);
        if mode == Mode::Train {
            self.probs.push(p.clone());
        }
        Ok(p)
    }

    /// Backward from a gradient with respect to the probabilities, through
    /// the softmax Jacobian: `dz = p * (g - sum_c p g)`.
    fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let p = pop(&mut self.probs, "softmax_head")?;
        p.expect_same_shape(grad, "softmax_head")?;
        let s = p.shape();
        let plane = s.plane();
        let mut dz = Tensor::zeros(s);
        for n in 0..s.n {
            let (ps, gs) = (p.sample(n), grad.sample(n));
            let out = dz.sample_mut(n);
            for q in 0..plane {
                let dot: T = (0..s.c).map(|c| ps[c * plane + q] * gs[c * plane + q]).sum();
                for c in 0..s.c {
                    let i = c * plane + q;
                    out[i] = ps[i] * (gs[i] - dot);
                }
            }
        }
        self.conv.backward(&dz)
    }

    fn visit(&self, f: &mut dyn FnMut(&ParamBlock<T>)) {
        self.conv.visit(f)
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut ParamBlock<T>)) {
        self.conv.visit_mut(f)
    }

    fn clear_cache(&mut self) {
        self.conv.clear_cache();
        self.probs.clear();
    }
}
