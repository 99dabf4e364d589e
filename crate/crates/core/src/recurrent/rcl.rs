use crate::error::{Error, Result};
use crate::nn::{pop, Conv2d, Init, Layer, Mode, ParamBlock, Projection, Relu};
use crate::ops;
use crate::real::Real;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RclConfig {
    pub in_c: usize,
    pub out_c: usize,
    /// Recurrent refinements after the initial feedforward pass.
    pub t_steps: usize,
}

/// Recurrent convolutional layer:
/// `s0 = relu(ff(x) + b)`, `s_k = relu(ff(x) + rec(s_{k-1}) + b)`.
///
/// The feedforward and recurrent kernels are shared across all steps; the
/// single bias lives on the feedforward convolution.
pub struct Rcl<T: Real> {
    cfg: RclConfig,
    ff: Conv2d<T>,
    rec: Conv2d<T>,
    act: Relu<T>,
    // one entry per training forward, so backward knows it has work
    pending: Vec<()>,
}

impl<T: Real> Rcl<T> {
    pub fn new(init: &mut Init, name: &str, cfg: RclConfig) -> Result<Self> {
        Self::with_kernel(init, name, cfg, 3)
    }

    pub fn with_kernel(init: &mut Init, name: &str, cfg: RclConfig, k: usize) -> Result<Self> {
        if cfg.t_steps == 0 {
            return Err(Error::invalid("rcl", "t_steps must be at least 1"));
        }
        Ok(Rcl {
            cfg,
            ff: Conv2d::new(init, &format!("{name}.ff"), cfg.in_c, cfg.out_c, k, true),
            rec: Conv2d::new(init, &format!("{name}.rec"), cfg.out_c, cfg.out_c, k, false),
            act: Relu::new(),
            pending: Vec::new(),
        })
    }

    pub fn config(&self) -> RclConfig {
        self.cfg
    }

    pub fn feedforward_mut(&mut self) -> &mut Conv2d<T> {
        &mut self.ff
    }

    pub fn recurrent_mut(&mut self) -> &mut Conv2d<T> {
        &mut self.rec
    }
}

impl<T: Real> Layer<T> for Rcl<T> {
    fn kind(&self) -> &'static str {
        "rcl"
    }

    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        if x.shape().c != self.cfg.in_c {
            return Err(Error::dim("rcl", "channel", self.cfg.in_c, x.shape().c));
        }
        let f = self.ff.forward(x, mode)?;
        let mut s = self.act.forward(&f, mode)?;
        for _ in 0..self.cfg.t_steps {
            let z = ops::add(&f, &self.rec.forward(&s, mode)?)?;
            s = self.act.forward(&z, mode)?;
        }
        if mode == Mode::Train {
            self.pending.push(());
        }
        Ok(s)
    }

    fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        pop(&mut self.pending, "rcl")?;
        let mut gf = Tensor::zeros(grad.shape());
        let mut gs = grad.clone();
        for _ in 0..self.cfg.t_steps {
            let gp = self.act.backward(&gs)?;
            gf.add_assign(&gp)?;
            gs = self.rec.backward(&gp)?;
        }
        let gp = self.act.backward(&gs)?;
        gf.add_assign(&gp)?;
        self.ff.backward(&gf)
    }

    fn visit(&self, f: &mut dyn FnMut(&ParamBlock<T>)) {
        self.ff.visit(f);
        self.rec.visit(f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut ParamBlock<T>)) {
        self.ff.visit_mut(f);
        self.rec.visit_mut(f);
    }

    fn clear_cache(&mut self) {
        self.ff.clear_cache();
        self.rec.clear_cache();
        self.act.clear_cache();
        self.pending.clear();
    }
}

/// Recurrent residual unit: `y = skip(x) + rcl2(rcl1(x))`, no output
/// activation.
pub struct Rrcu<T: Real> {
    in_c: usize,
    rcl1: Rcl<T>,
    rcl2: Rcl<T>,
    skip: Option<Conv2d<T>>,
}

impl<T: Real> Rrcu<T> {
    pub fn new(
        init: &mut Init,
        name: &str,
        in_c: usize,
        out_c: usize,
        t_steps: usize,
        projection: Projection,
    ) -> Result<Self> {
        Ok(Rrcu {
            in_c,
            rcl1: Rcl::new(init, &format!("{name}.rcl1"), RclConfig { in_c, out_c, t_steps })?,
            rcl2: Rcl::new(init, &format!("{name}.rcl2"), RclConfig { in_c: out_c, out_c, t_steps })?,
            skip: projection.build(init, name, in_c, out_c),
        })
    }
}

impl<T: Real> Layer<T> for Rrcu<T> {
    fn kind(&self) -> &'static str {
        "rrcu"
    }

    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        if x.shape().c != self.in_c {
            return Err(Error::dim("rrcu", "channel", self.in_c, x.shape().c));
        }
        let a = self.rcl1.forward(x, mode)?;
        let mut y = self.rcl2.forward(&a, mode)?;
        match &mut self.skip {
            Some(p) => y.add_assign(&p.forward(x, mode)?)?,
            None => y.add_assign(x)?,
        }
        Ok(y)
    }

    fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let gs = match &mut self.skip {
            Some(p) => p.backward(grad)?,
            None => grad.clone(),
        };
        let g = self.rcl2.backward(grad)?;
        let mut gx = self.rcl1.backward(&g)?;
        gx.add_assign(&gs)?;
        Ok(gx)
    }

    fn visit(&self, f: &mut dyn FnMut(&ParamBlock<T>)) {
        self.rcl1.visit(f);
        self.rcl2.visit(f);
        if let Some(p) = &self.skip {
            p.visit(f);
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut ParamBlock<T>)) {
        self.rcl1.visit_mut(f);
        self.rcl2.visit_mut(f);
        if let Some(p) = &mut self.skip {
            p.visit_mut(f);
        }
    }

    fn clear_cache(&mut self) {
        self.rcl1.clear_cache();
        self.rcl2.clear_cache();
        if let Some(p) = &mut self.skip {
            p.clear_cache();
        }
    }
}
