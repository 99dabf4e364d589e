use crate::error::{Error, Result};
use crate::ops;
use crate::real::Real;
use crate::tensor::Tensor;

use super::{Conv2d, Init, Layer, Mode, ParamBlock, Relu};

/// Rule for the convolution on a residual skip path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Projection {
    /// 1 or 3.
    pub kernel: usize,
    /// Project even when input and output widths agree.
    pub always: bool,
}

impl Projection {
    pub const POINTWISE: Projection = Projection { kernel: 1, always: false };

    pub fn needed(&self, in_c: usize, out_c: usize) -> bool {
        self.always || in_c != out_c
    }

    /// Parameters the skip path adds for an `in_c -> out_c` block.
    pub fn count(&self, in_c: usize, out_c: usize) -> usize {
        if self.needed(in_c, out_c) {
            self.kernel * self.kernel * in_c * out_c + out_c
        } else {
            0
        }
    }

    pub(crate) fn build<T: Real>(&self, init: &mut Init, name: &str, in_c: usize, out_c: usize) -> Option<Conv2d<T>> {
        self.needed(in_c, out_c)
            .then(|| Conv2d::new(init, &format!("{name}.skip"), in_c, out_c, self.kernel, true))
    }
}

impl Default for Projection {
    fn default() -> Self {
        Projection::POINTWISE
    }
}

/// `relu(conv2(relu(conv1(x))) + skip(x))` with 3x3 convolutions.
pub struct ResidualBlock<T: Real> {
    in_c: usize,
    conv1: Conv2d<T>,
    act1: Relu<T>,
    conv2: Conv2d<T>,
    skip: Option<Conv2d<T>>,
    act_out: Relu<T>,
}

impl<T: Real> ResidualBlock<T> {
    pub fn new(init: &mut Init, name: &str, in_c: usize, out_c: usize, projection: Projection) -> Self {
        ResidualBlock {
            in_c,
            conv1: Conv2d::new(init, &format!("{name}.conv1"), in_c, out_c, 3, true),
            act1: Relu::new(),
            conv2: Conv2d::new(init, &format!("{name}.conv2"), out_c, out_c, 3, true),
            skip: projection.build(init, name, in_c, out_c),
            act_out: Relu::new(),
        }
    }
}

impl<T: Real> Layer<T> for ResidualBlock<T> {
    fn kind(&self) -> &'static str {
        "residual_block"
    }

    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        if x.shape().c != self.in_c {
            return Err(Error::dim("residual_block", "channel", self.in_c, x.shape().c));
        }
        let a = self.act1.forward(&self.conv1.forward(x, mode)?, mode)?;
        let main = self.conv2.forward(&a, mode)?;
        let sum = match &mut self.skip {
            Some(p) => ops::add(&main, &p.forward(x, mode)?)?,
            None => ops::add(&main, x)?,
        };
        self.act_out.forward(&sum, mode)
    }

    fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let g = self.act_out.backward(grad)?;
        let gs = match &mut self.skip {
            Some(p) => p.backward(&g)?,
            None => g.clone(),
        };
        let gm = self.conv2.backward(&g)?;
        let gm = self.act1.backward(&gm)?;
        let mut gx = self.conv1.backward(&gm)?;
        gx.add_assign(&gs)?;
        Ok(gx)
    }

    fn visit(&self, f: &mut dyn FnMut(&ParamBlock<T>)) {
        self.conv1.visit(f);
        self.conv2.visit(f);
        if let Some(p) = &self.skip {
            p.visit(f);
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut ParamBlock<T>)) {
        self.conv1.visit_mut(f);
        self.conv2.visit_mut(f);
        if let Some(p) = &mut self.skip {
            p.visit_mut(f);
        }
    }

    fn clear_cache(&mut self) {
        self.conv1.clear_cache();
        self.act1.clear_cache();
        self.conv2.clear_cache();
        if let Some(p) = &mut self.skip {
            p.clear_cache();
        }
        self.act_out.clear_cache();
    }
}
