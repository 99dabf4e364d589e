use crate::error::{Error, Result};
use crate::nn::{pop, Conv2d, Init, Layer, Mode, ParamBlock};
use crate::real::Real;
use crate::tensor::{Shape, Tensor};

/// Cell and hidden state, both `(n, hidden, h, w)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmState<T: Real> {
    pub c: Tensor<T>,
    pub h: Tensor<T>,
}

impl<T: Real> LstmState<T> {
    pub fn zeros(shape: Shape) -> Self {
        LstmState {
            c: Tensor::zeros(shape),
            h: Tensor::zeros(shape),
        }
    }
}

/// Peephole convolutional LSTM cell.
///
/// Gate pre-activations come from two fused convolutions: input-to-state
/// (`in_c -> 4 * hidden`, carries the gate biases) and state-to-state
/// (`hidden -> 4 * hidden`, no bias). Channel blocks are ordered input,
/// forget, candidate, output. Peepholes are per-channel gains on the cell
/// state for the input, forget and output gates.
pub struct ConvLstmCell<T: Real> {
    in_c: usize,
    hidden: usize,
    wx: Conv2d<T>,
    wh: Conv2d<T>,
    peep: Option<ParamBlock<T>>,
}

const GI: usize = 0;
const GF: usize = 1;
const GG: usize = 2;
const GO: usize = 3;

impl<T: Real> ConvLstmCell<T> {
    pub fn new(init: &mut Init, name: &str, in_c: usize, hidden: usize, kernel: usize, peephole: bool) -> Self {
        let mut wx = Conv2d::new(init, &format!("{name}.wx"), in_c, 4 * hidden, kernel, true);
        // forget-gate bias starts at 1 so early training keeps cell memory
        for b in &mut wx.block_mut().bias[GF * hidden..(GF + 1) * hidden] {
            *b = T::one();
        }
        let wh = Conv2d::new(init, &format!("{name}.wh"), hidden, 4 * hidden, kernel, false);
        let peep = peephole.then(|| init.zeros(&format!("{name}.peep"), Shape::new(3, hidden, 1, 1)));
        ConvLstmCell { in_c, hidden, wx, wh, peep }
    }

    pub fn in_channels(&self) -> usize {
        self.in_c
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn input_conv_mut(&mut self) -> &mut Conv2d<T> {
        &mut self.wx
    }

    pub fn state_conv_mut(&mut self) -> &mut Conv2d<T> {
        &mut self.wh
    }

    pub fn peephole_mut(&mut self) -> Option<&mut ParamBlock<T>> {
        self.peep.as_mut()
    }

    fn peep_gain(&self, gate: usize, ch: usize) -> T {
        match &self.peep {
            Some(p) => p.weight.data()[gate * self.hidden + ch],
            None => T::zero(),
        }
    }

    /// Gate arithmetic for one step given the summed pre-activations `z`
    /// (without peephole terms) and the previous cell state.
    fn gates(&self, z: &Tensor<T>, c_prev: Option<&Tensor<T>>) -> Step<T> {
        let s = z.shape();
        let h = self.hidden;
        let plane = s.plane();
        let hs = Shape::new(s.n, h, s.h, s.w);
        let mut act = Tensor::zeros(s);
        let mut c = Tensor::zeros(hs);
        let mut tc = Tensor::zeros(hs);
        let mut out = Tensor::zeros(hs);
        let zd = z.data();
        let cp = c_prev.map(|t| t.data());
        {
            let (ad, cd, td, od) = (act.data_mut(), c.data_mut(), tc.data_mut(), out.data_mut());
            for n in 0..s.n {
                for ch in 0..h {
                    let (pi, pf, po) = (self.peep_gain(0, ch), self.peep_gain(1, ch), self.peep_gain(2, ch));
                    let zi = |g: usize, p: usize| ((n * 4 + g) * h + ch) * plane + p;
                    for p in 0..plane {
                        let hi = (n * h + ch) * plane + p;
                        let cprev = cp.map_or(T::zero(), |d| d[hi]);
                        let i = sigmoid(zd[zi(GI, p)] + pi * cprev);
                        let f = sigmoid(zd[zi(GF, p)] + pf * cprev);
                        let g = zd[zi(GG, p)].tanh();
                        let cn = f * cprev + i * g;
                        let o = sigmoid(zd[zi(GO, p)] + po * cn);
                        let t = cn.tanh();
                        ad[zi(GI, p)] = i;
                        ad[zi(GF, p)] = f;
                        ad[zi(GG, p)] = g;
                        ad[zi(GO, p)] = o;
                        cd[hi] = cn;
                        td[hi] = t;
                        od[hi] = o * t;
                    }
                }
            }
        }
        Step { act, c, tanh_c: tc, h: out }
    }

    /// Given `dh` and `dc` flowing into this step's outputs, returns the
    /// pre-activation gradient and the gradient into `c_prev`; peephole
    /// gradients are accumulated.
    fn gates_backward(
        &mut self,
        st: &Step<T>,
        c_prev: Option<&Tensor<T>>,
        dh: &Tensor<T>,
        dc_next: Option<&Tensor<T>>,
    ) -> (Tensor<T>, Tensor<T>) {
        let s = st.act.shape();
        let h = self.hidden;
        let plane = s.plane();
        let mut dz = Tensor::zeros(s);
        let mut dc_prev = Tensor::zeros(st.c.shape());
        let mut gpeep = vec![T::zero(); 3 * h];
        let (ad, cd, td) = (st.act.data(), st.c.data(), st.tanh_c.data());
        let cp = c_prev.map(|t| t.data());
        let dcn = dc_next.map(|t| t.data());
        let dhd = dh.data();
        {
            let (zd, dcp) = (dz.data_mut(), dc_prev.data_mut());
            let one = T::one();
            for n in 0..s.n {
                for ch in 0..h {
                    let (pi, pf, po) = (self.peep_gain(0, ch), self.peep_gain(1, ch), self.peep_gain(2, ch));
                    let zi = |g: usize, p: usize| ((n * 4 + g) * h + ch) * plane + p;
                    for p in 0..plane {
                        let hi = (n * h + ch) * plane + p;
                        let (i, f, g, o) = (ad[zi(GI, p)], ad[zi(GF, p)], ad[zi(GG, p)], ad[zi(GO, p)]);
                        let t = td[hi];
                        let cprev = cp.map_or(T::zero(), |d| d[hi]);
                        let dho = dhd[hi];
                        let dao = dho * t * o * (one - o);
                        let dc = dcn.map_or(T::zero(), |d| d[hi]) + dho * o * (one - t * t) + dao * po;
                        let dai = dc * g * i * (one - i);
                        let dag = dc * i * (one - g * g);
                        let daf = dc * cprev * f * (one - f);
                        zd[zi(GI, p)] = dai;
                        zd[zi(GF, p)] = daf;
                        zd[zi(GG, p)] = dag;
                        zd[zi(GO, p)] = dao;
                        dcp[hi] = dc * f + dai * pi + daf * pf;
                        gpeep[ch] = gpeep[ch] + dai * cprev;
                        gpeep[h + ch] = gpeep[h + ch] + daf * cprev;
                        gpeep[2 * h + ch] = gpeep[2 * h + ch] + dao * cd[hi];
                    }
                }
            }
        }
        if let Some(pb) = &mut self.peep {
            for (g, d) in pb.grad_weight.data_mut().iter_mut().zip(gpeep) {
                *g = *g + d;
            }
        }
        (dz, dc_prev)
    }

    fn visit(&self, f: &mut dyn FnMut(&ParamBlock<T>)) {
        self.wx.visit(f);
        self.wh.visit(f);
        if let Some(p) = &self.peep {
            f(p);
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut ParamBlock<T>)) {
        self.wx.visit_mut(f);
        self.wh.visit_mut(f);
        if let Some(p) = &mut self.peep {
            f(p);
        }
    }

    fn clear_cache(&mut self) {
        self.wx.clear_cache();
        self.wh.clear_cache();
    }
}

fn sigmoid<T: Real>(v: T) -> T {
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

struct Step<T: Real> {
    act: Tensor<T>,
    c: Tensor<T>,
    tanh_c: Tensor<T>,
    h: Tensor<T>,
}

/// One stateless cell update, without caching. Zero states are handled
/// like any other state.
pub fn convlstm_step<T: Real>(cell: &mut ConvLstmCell<T>, x: &Tensor<T>, state: &LstmState<T>) -> Result<LstmState<T>> {
    if x.shape().c != cell.in_c {
        return Err(Error::dim("convlstm_step", "channel", cell.in_c, x.shape().c));
    }
    let want = Shape::new(x.shape().n, cell.hidden, x.shape().h, x.shape().w);
    Tensor::zeros(want).expect_same_shape(&state.c, "convlstm_step")?;
    Tensor::zeros(want).expect_same_shape(&state.h, "convlstm_step")?;
    let mut z = cell.wx.forward(x, Mode::Infer)?;
    z.add_assign(&cell.wh.forward(&state.h, Mode::Infer)?)?;
    let st = cell.gates(&z, Some(&state.c));
    Ok(LstmState { c: st.c, h: st.h })
}

struct UnitCache<T: Real> {
    replicated: bool,
    steps: Vec<Step<T>>,
}

/// A ConvLSTM cell unrolled from zero state; the output is the final
/// hidden state.
///
/// With a replicated input the input-to-state convolution is evaluated
/// once and its gradient summed over steps. The state-to-state convolution
/// is skipped at the first step, where the hidden state is zero.
pub struct ConvLstmUnit<T: Real> {
    cell: ConvLstmCell<T>,
    t_steps: usize,
    cache: Vec<UnitCache<T>>,
}

impl<T: Real> ConvLstmUnit<T> {
    pub fn new(init: &mut Init, name: &str, in_c: usize, hidden: usize, t_steps: usize, peephole: bool) -> Result<Self> {
        Self::with_kernel(init, name, in_c, hidden, t_steps, peephole, 3)
    }

    pub fn with_kernel(
        init: &mut Init,
        name: &str,
        in_c: usize,
        hidden: usize,
        t_steps: usize,
        peephole: bool,
        kernel: usize,
    ) -> Result<Self> {
        if t_steps == 0 {
            return Err(Error::invalid("convlstm", "t_steps must be at least 1"));
        }
        Ok(ConvLstmUnit {
            cell: ConvLstmCell::new(init, name, in_c, hidden, kernel, peephole),
            t_steps,
            cache: Vec::new(),
        })
    }

    pub fn cell(&self) -> &ConvLstmCell<T> {
        &self.cell
    }

    pub fn cell_mut(&mut self) -> &mut ConvLstmCell<T> {
        &mut self.cell
    }

    pub fn t_steps(&self) -> usize {
        self.t_steps
    }

    fn run(&mut self, xs: &[Tensor<T>], replicated: bool, mode: Mode) -> Result<Tensor<T>> {
        let first = xs.first().ok_or_else(|| Error::invalid("convlstm", "empty input sequence"))?;
        for x in xs {
            if x.shape().c != self.cell.in_c {
                return Err(Error::dim("convlstm", "channel", self.cell.in_c, x.shape().c));
            }
            first.expect_same_shape(x, "convlstm")?;
        }
        let steps_n = if replicated { self.t_steps } else { xs.len() };
        let zx_rep = if replicated { Some(self.cell.wx.forward(first, mode)?) } else { None };
        let mut steps: Vec<Step<T>> = Vec::with_capacity(steps_n);
        for k in 0..steps_n {
            let mut z = match &zx_rep {
                Some(z) => z.clone(),
                None => self.cell.wx.forward(&xs[k], mode)?,
            };
            if let Some(prev) = steps.last() {
                z.add_assign(&self.cell.wh.forward(&prev.h, mode)?)?;
            }
            let st = self.cell.gates(&z, steps.last().map(|s| &s.c));
            steps.push(st);
        }
        let out = steps.last().expect("at least one step").h.clone();
        if mode == Mode::Train {
            self.cache.push(UnitCache { replicated, steps });
        }
        Ok(out)
    }

    /// Feed `x` at every one of the `t_steps` steps.
    pub fn forward_replicated(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        self.run(std::slice::from_ref(x), true, mode)
    }

    /// Feed one input per step; the step count is the sequence length.
    pub fn forward_sequence(&mut self, xs: &[Tensor<T>], mode: Mode) -> Result<Tensor<T>> {
        self.run(xs, false, mode)
    }

    /// Backpropagation through time. Returns one input gradient per step
    /// for sequence input, or a single summed gradient for replicated input.
    pub fn backward_steps(&mut self, grad: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        let UnitCache { replicated, steps } = pop(&mut self.cache, "convlstm")?;
        steps[0].h.expect_same_shape(grad, "convlstm_backward")?;
        let mut dh = grad.clone();
        let mut dc: Option<Tensor<T>> = None;
        let mut dzx_sum: Option<Tensor<T>> = None;
        let mut dxs = Vec::with_capacity(steps.len());
        for k in (0..steps.len()).rev() {
            let c_prev = if k > 0 { Some(&steps[k - 1].c) } else { None };
            let (dz, dc_prev) = self.cell.gates_backward(&steps[k], c_prev, &dh, dc.as_ref());
            if replicated {
                match &mut dzx_sum {
                    Some(acc) => acc.add_assign(&dz)?,
                    None => dzx_sum = Some(dz.clone()),
                }
            } else {
                dxs.push(self.cell.wx.backward(&dz)?);
            }
            if k > 0 {
                dh = self.cell.wh.backward(&dz)?;
                dc = Some(dc_prev);
            }
        }
        if let Some(dz) = dzx_sum {
            return Ok(vec![self.cell.wx.backward(&dz)?]);
        }
        dxs.reverse();
        Ok(dxs)
    }
}

impl<T: Real> Layer<T> for ConvLstmUnit<T> {
    fn kind(&self) -> &'static str {
        "convlstm"
    }

    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        self.forward_replicated(x, mode)
    }

    fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let mut dxs = self.backward_steps(grad)?;
        if dxs.len() == 1 {
            return Ok(dxs.pop().expect("one gradient"));
        }
        Err(Error::invalid(
            "convlstm",
            "sequence forward must be paired with backward_steps",
        ))
    }

    fn visit(&self, f: &mut dyn FnMut(&ParamBlock<T>)) {
        self.cell.visit(f)
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut ParamBlock<T>)) {
        self.cell.visit_mut(f)
    }

    fn clear_cache(&mut self) {
        self.cell.clear_cache();
        self.cache.clear();
    }
}
