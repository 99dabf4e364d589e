use crate::error::{Error, Result};
use crate::nn::{pop, Conv2d, Init, Layer, Mode, ParamBlock, Projection, Relu};
use crate::real::Real;
use crate::tensor::Tensor;

use super::ConvLstmUnit;

/// What sequence the first ConvLSTM of a block consumes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LstmInput {
    /// The whole input is presented at each of `t_steps` steps.
    Replicate,
    /// The stacked channels are split back into timesteps of two
    /// polarisation channels each and fed in order.
    TemporalSlice,
}

impl LstmInput {
    pub fn as_str(self) -> &'static str {
        match self {
            LstmInput::Replicate => "replicate",
            LstmInput::TemporalSlice => "temporal-slice",
        }
    }
}

/// Channels per timestep in temporal-slice mode (VV and VH).
pub const SLICE_CHANNELS: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RclstmConfig {
    pub in_c: usize,
    pub out_c: usize,
    pub sub_units: usize,
    pub t_steps: usize,
    pub peephole: bool,
    pub projection: Projection,
    pub input: LstmInput,
}

impl RclstmConfig {
    pub fn new(in_c: usize, out_c: usize) -> Self {
        RclstmConfig {
            in_c,
            out_c,
            sub_units: 2,
            t_steps: 2,
            peephole: true,
            projection: Projection::POINTWISE,
            input: LstmInput::Replicate,
        }
    }

    /// Input width of the first ConvLSTM.
    pub fn first_lstm_in(&self) -> usize {
        match self.input {
            LstmInput::Replicate => self.in_c,
            LstmInput::TemporalSlice => SLICE_CHANNELS,
        }
    }
}

fn slice_steps<T: Real>(x: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
    let s = x.shape();
    if s.c % SLICE_CHANNELS != 0 {
        return Err(Error::invalid(
            "rclstm",
            format!("temporal slicing needs a multiple of {SLICE_CHANNELS} channels, got {}", s.c),
        ));
    }
    let steps = s.c / SLICE_CHANNELS;
    let step_len = SLICE_CHANNELS * s.plane();
    let mut out = Vec::with_capacity(steps);
    for k in 0..steps {
        let mut data = Vec::with_capacity(s.n * step_len);
        for n in 0..s.n {
            data.extend_from_slice(&x.sample(n)[k * step_len..(k + 1) * step_len]);
        }
        out.push(Tensor::from_vec(s.with_c(SLICE_CHANNELS), data)?);
    }
    Ok(out)
}

fn unslice_steps<T: Real>(parts: &[Tensor<T>]) -> Result<Tensor<T>> {
    let s = parts[0].shape();
    let shape = s.with_c(s.c * parts.len());
    let mut data = Vec::with_capacity(shape.len());
    for n in 0..s.n {
        for p in parts {
            data.extend_from_slice(p.sample(n));
        }
    }
    Tensor::from_vec(shape, data)
}

/// Residual block of ConvLSTM sub-units: `y = skip(x) + relu(U_k(...relu(U_1(x))))`.
///
/// In temporal-slice mode only the first sub-unit sees the time slices;
/// the skip projection always sees the full stacked input.
pub struct RclstmBlock<T: Real> {
    cfg: RclstmConfig,
    subs: Vec<ConvLstmUnit<T>>,
    act: Relu<T>,
    skip: Option<Conv2d<T>>,
    pending: Vec<()>,
}

impl<T: Real> RclstmBlock<T> {
    pub fn new(init: &mut Init, name: &str, cfg: RclstmConfig) -> Result<Self> {
        if cfg.sub_units == 0 {
            return Err(Error::invalid("rclstm", "at least one sub-unit required"));
        }
        if cfg.input == LstmInput::TemporalSlice && cfg.in_c % SLICE_CHANNELS != 0 {
            return Err(Error::invalid("rclstm", format!("odd input width {} in temporal-slice mode", cfg.in_c)));
        }
        let mut subs = Vec::with_capacity(cfg.sub_units);
        for k in 0..cfg.sub_units {
            let in_c = if k == 0 { cfg.first_lstm_in() } else { cfg.out_c };
            subs.push(ConvLstmUnit::new(init, &format!("{name}.lstm{}", k + 1), in_c, cfg.out_c, cfg.t_steps, cfg.peephole)?);
        }
        Ok(RclstmBlock {
            cfg,
            subs,
            act: Relu::new(),
            skip: cfg.projection.build(init, name, cfg.in_c, cfg.out_c),
            pending: Vec::new(),
        })
    }

    pub fn config(&self) -> RclstmConfig {
        self.cfg
    }

    pub fn sub_units_mut(&mut self) -> &mut [ConvLstmUnit<T>] {
        &mut self.subs
    }
}

impl<T: Real> Layer<T> for RclstmBlock<T> {
    fn kind(&self) -> &'static str {
        "rclstm"
    }

    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        if x.shape().c != self.cfg.in_c {
            return Err(Error::dim("rclstm", "channel", self.cfg.in_c, x.shape().c));
        }
        let h = match self.cfg.input {
            LstmInput::Replicate => self.subs[0].forward_replicated(x, mode)?,
            LstmInput::TemporalSlice => self.subs[0].forward_sequence(&slice_steps(x)?, mode)?,
        };
        let mut a = self.act.forward(&h, mode)?;
        for sub in &mut self.subs[1..] {
            let h = sub.forward_replicated(&a, mode)?;
            a = self.act.forward(&h, mode)?;
        }
        match &mut self.skip {
            Some(p) => a.add_assign(&p.forward(x, mode)?)?,
            None => a.add_assign(x)?,
        }
        if mode == Mode::Train {
            self.pending.push(());
        }
        Ok(a)
    }

    fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        pop(&mut self.pending, "rclstm")?;
        let gs = match &mut self.skip {
            Some(p) => p.backward(grad)?,
            None => grad.clone(),
        };
        let mut g = grad.clone();
        for sub in self.subs[1..].iter_mut().rev() {
            g = self.act.backward(&g)?;
            g = sub.backward(&g)?;
        }
        g = self.act.backward(&g)?;
        let parts = self.subs[0].backward_steps(&g)?;
        let mut gx = match self.cfg.input {
            LstmInput::Replicate => parts.into_iter().next().expect("one gradient"),
            LstmInput::TemporalSlice => unslice_steps(&parts)?,
        };
        gx.add_assign(&gs)?;
        Ok(gx)
    }

    fn visit(&self, f: &mut dyn FnMut(&ParamBlock<T>)) {
        for s in &self.subs {
            s.visit(f);
        }
        if let Some(p) = &self.skip {
            p.visit(f);
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut ParamBlock<T>)) {
        for s in &mut self.subs {
            s.visit_mut(f);
        }
        if let Some(p) = &mut self.skip {
            p.visit_mut(f);
        }
    }

    fn clear_cache(&mut self) {
        for s in &mut self.subs {
            s.clear_cache();
        }
        if let Some(p) = &mut self.skip {
            p.clear_cache();
        }
        self.act.clear_cache();
        self.pending.clear();
    }
}

/// A single ConvLSTM sub-unit followed by ReLU, without a residual path.
pub struct SingleConvLstmBlock<T: Real> {
    unit: ConvLstmUnit<T>,
    act: Relu<T>,
}

impl<T: Real> SingleConvLstmBlock<T> {
    pub fn new(init: &mut Init, name: &str, in_c: usize, out_c: usize, t_steps: usize, peephole: bool) -> Result<Self> {
        Ok(SingleConvLstmBlock {
            unit: ConvLstmUnit::new(init, &format!("{name}.lstm1"), in_c, out_c, t_steps, peephole)?,
            act: Relu::new(),
        })
    }

    pub fn unit_mut(&mut self) -> &mut ConvLstmUnit<T> {
        &mut self.unit
    }
}

impl<T: Real> Layer<T> for SingleConvLstmBlock<T> {
    fn kind(&self) -> &'static str {
        "single_convlstm"
    }

    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let h = self.unit.forward_replicated(x, mode)?;
        self.act.forward(&h, mode)
    }

    fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let g = self.act.backward(grad)?;
        self.unit.backward(&g)
    }

    fn visit(&self, f: &mut dyn FnMut(&ParamBlock<T>)) {
        self.unit.visit(f)
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut ParamBlock<T>)) {
        self.unit.visit_mut(f)
    }

    fn clear_cache(&mut self) {
        self.unit.clear_cache();
        self.act.clear_cache();
    }
}
