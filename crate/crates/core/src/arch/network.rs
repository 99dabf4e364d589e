use crate::error::{Error, Result};
use crate::nn::{
    skip_merge, skip_merge_backward, ConvRelu, Init, Layer, MaxPool2, Mode, ParamBlock, ResidualBlock, SoftmaxHead,
    TransposeStage, Upsample2,
};
use crate::real::Real;
use crate::recurrent::{LstmInput, RclstmBlock, RclstmConfig, Rrcu, SingleConvLstmBlock};
use crate::tensor::Tensor;

use super::{ArchConfig, ArchitectureId, DecoderOrder};

type Unit<T> = Box<dyn Layer<T>>;

struct DecoderStage<T: Real> {
    up: Unit<T>,
    unit: Option<Unit<T>>,
    skip_c: usize,
    merge_first: bool,
}

/// Encoder (three unit + max-pool stages), bottleneck, decoder (three
/// upsampling stages joined to same-resolution encoder features) and a
/// softmax head.
pub struct Network<T: Real = f32> {
    id: ArchitectureId,
    in_channels: usize,
    config: ArchConfig,
    encoder: Vec<Unit<T>>,
    pools: Vec<MaxPool2>,
    bottleneck: Vec<Unit<T>>,
    decoder: Vec<DecoderStage<T>>,
    head: SoftmaxHead<T>,
}

fn encoder_unit<T: Real>(
    id: ArchitectureId,
    cfg: &ArchConfig,
    init: &mut Init,
    name: &str,
    in_c: usize,
    out_c: usize,
    first: bool,
) -> Result<Unit<T>> {
    Ok(match id {
        ArchitectureId::UNet => Box::new(ConvRelu::new(init, name, in_c, out_c)),
        ArchitectureId::ResUNet => Box::new(ResidualBlock::new(init, name, in_c, out_c, cfg.projection)),
        ArchitectureId::R2UNet | ArchitectureId::Rrcnn1 => {
            Box::new(Rrcu::new(init, name, in_c, out_c, cfg.t_steps, cfg.projection)?)
        }
        ArchitectureId::Rrcnn2 | ArchitectureId::Rrcnn3 => {
            let rc = RclstmConfig {
                sub_units: cfg.rclstm_sub_units,
                t_steps: cfg.t_steps,
                peephole: cfg.peephole,
                projection: cfg.projection,
                input: if first { cfg.lstm_input } else { LstmInput::Replicate },
                ..RclstmConfig::new(in_c, out_c)
            };
            Box::new(RclstmBlock::new(init, name, rc)?)
        }
    })
}

/// Build `id` for `in_channels` input planes with parameters drawn from
/// `seed`.
pub fn build<T: Real>(id: ArchitectureId, in_channels: usize, cfg: &ArchConfig, seed: u64) -> Result<Network<T>> {
    cfg.validate()?;
    if in_channels == 0 {
        return Err(Error::invalid("build", "in_channels must be positive"));
    }
    if id.uses_lstm() && cfg.lstm_input == LstmInput::TemporalSlice && in_channels % 2 != 0 {
        return Err(Error::invalid(
            "build",
            format!("temporal-slice input needs an even channel count, got {in_channels}"),
        ));
    }
    let mut init = Init::new(seed);
    let mut encoder = Vec::new();
    let mut prev = in_channels;
    for (s, &w) in cfg.encoder.iter().enumerate() {
        encoder.push(encoder_unit(id, cfg, &mut init, &format!("enc{}", s + 1), prev, w, s == 0)?);
        prev = w;
    }
    let b = cfg.bottleneck;
    let mut bottleneck: Vec<Unit<T>> = Vec::new();
    match id {
        ArchitectureId::UNet | ArchitectureId::ResUNet => {
            for k in 0..3 {
                let i = if k == 0 { prev } else { b };
                bottleneck.push(encoder_unit(id, cfg, &mut init, &format!("mid{}", k + 1), i, b, false)?);
            }
        }
        ArchitectureId::R2UNet | ArchitectureId::Rrcnn1 | ArchitectureId::Rrcnn2 => {
            bottleneck.push(encoder_unit(id, cfg, &mut init, "mid1", prev, b, false)?);
        }
        ArchitectureId::Rrcnn3 => {
            bottleneck.push(Box::new(SingleConvLstmBlock::new(&mut init, "mid1", prev, b, cfg.t_steps, cfg.peephole)?));
        }
    }
    prev = b;
    let mut decoder = Vec::new();
    for (s, &w) in cfg.decoder.iter().enumerate() {
        let skip_c = cfg.encoder[2 - s];
        let name = format!("dec{}", s + 1);
        let stage = match id {
            ArchitectureId::Rrcnn1 | ArchitectureId::Rrcnn2 | ArchitectureId::Rrcnn3 => {
                let st = DecoderStage {
                    up: Box::new(TransposeStage::new(&mut init, &name, prev, w)) as Unit<T>,
                    unit: None,
                    skip_c,
                    merge_first: false,
                };
                prev = cfg.skip_merge.out_channels(skip_c, w);
                st
            }
            _ => {
                let merge_first = cfg.decoder_order == DecoderOrder::MergeThenUnit;
                let unit_in = if merge_first { cfg.skip_merge.out_channels(skip_c, prev) } else { prev };
                let unit: Unit<T> = match id {
                    ArchitectureId::R2UNet => Box::new(Rrcu::new(&mut init, &name, unit_in, w, cfg.t_steps, cfg.projection)?),
                    _ => Box::new(ConvRelu::new(&mut init, &name, unit_in, w)),
                };
                prev = if merge_first { w } else { cfg.skip_merge.out_channels(skip_c, w) };
                DecoderStage {
                    up: Box::new(Upsample2::new()),
                    unit: Some(unit),
                    skip_c,
                    merge_first,
                }
            }
        };
        decoder.push(stage);
    }
    let head = SoftmaxHead::new(&mut init, "head", prev, cfg.classes);
    Ok(Network {
        id,
        in_channels,
        config: *cfg,
        encoder,
        pools: (0..3).map(|_| MaxPool2::new()).collect(),
        bottleneck,
        decoder,
        head,
    })
}

/// Total weights plus biases over all parameter blocks.
pub fn param_count<T: Real>(net: &Network<T>) -> usize {
    net.param_count()
}

impl<T: Real> Network<T> {
    pub fn id(&self) -> ArchitectureId {
        self.id
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn config(&self) -> &ArchConfig {
        &self.config
    }

    pub fn classes(&self) -> usize {
        self.head.classes()
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        let s = x.shape();
        if s.c != self.in_channels {
            return Err(Error::dim("network", "channel", self.in_channels, s.c));
        }
        if s.h % 8 != 0 {
            return Err(Error::dim("network", "row", s.h.div_ceil(8) * 8, s.h));
        }
        if s.w % 8 != 0 {
            return Err(Error::dim("network", "col", s.w.div_ceil(8) * 8, s.w));
        }
        Ok(())
    }

    /// Per-pixel class probabilities `(n, classes, h, w)`; spatial dims must
    /// be multiples of 8.
    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        self.check_input(x)?;
        let mut skips = Vec::with_capacity(3);
        let mut a = x.clone();
        for (unit, pool) in self.encoder.iter_mut().zip(&mut self.pools) {
            a = unit.forward(&a, mode)?;
            let pooled = Layer::<T>::forward(pool, &a, mode)?;
            skips.push(a);
            a = pooled;
        }
        for unit in &mut self.bottleneck {
            a = unit.forward(&a, mode)?;
        }
        let merge = self.config.skip_merge;
        for st in &mut self.decoder {
            let enc = skips.pop().expect("one skip per stage");
            a = st.up.forward(&a, mode)?;
            if st.merge_first {
                a = skip_merge(merge, &enc, &a)?;
            }
            if let Some(u) = &mut st.unit {
                a = u.forward(&a, mode)?;
            }
            if !st.merge_first {
                a = skip_merge(merge, &enc, &a)?;
            }
        }
        self.head.forward(&a, mode)
    }

    fn backward_body(&mut self, mut g: Tensor<T>) -> Result<Tensor<T>> {
        let merge = self.config.skip_merge;
        let mut skip_grads = Vec::with_capacity(3);
        for st in self.decoder.iter_mut().rev() {
            let mut g_enc = None;
            if !st.merge_first {
                let (ge, gd) = skip_merge_backward(merge, st.skip_c, &g)?;
                g_enc = Some(ge);
                g = gd;
            }
            if let Some(u) = &mut st.unit {
                g = u.backward(&g)?;
            }
            if st.merge_first {
                let (ge, gd) = skip_merge_backward(merge, st.skip_c, &g)?;
                g_enc = Some(ge);
                g = gd;
            }
            skip_grads.push(g_enc.expect("every stage merges"));
            g = st.up.backward(&g)?;
        }
        for unit in self.bottleneck.iter_mut().rev() {
            g = unit.backward(&g)?;
        }
        // the last decoder stage pairs with the first encoder stage, so
        // skip_grads runs shallow to deep; walk it reversed
        for ((unit, pool), gs) in self.encoder.iter_mut().zip(&mut self.pools).rev().zip(skip_grads.into_iter().rev()) {
            let mut ga = Layer::<T>::backward(pool, &g)?;
            ga.add_assign(&gs)?;
            g = unit.backward(&ga)?;
        }
        Ok(g)
    }

    /// Backward from the gradient with respect to the head logits.
    pub fn backward_logits(&mut self, grad_logits: &Tensor<T>) -> Result<Tensor<T>> {
        let g = self.head.backward_logits(grad_logits)?;
        self.backward_body(g)
    }

    pub fn zero_grad(&mut self) {
        self.visit_mut(&mut |b| b.zero_grad());
    }

    /// Names and sizes of all blocks in visiting order.
    pub fn block_summary(&self) -> Vec<(String, usize)> {
        let mut out = Vec::new();
        self.visit(&mut |b| out.push((b.name().to_string(), b.len())));
        out
    }

    /// Copy all parameter values from a network of identical layout.
    pub fn copy_params_from<U: Real>(&mut self, other: &Network<U>) -> Result<()> {
        let mut src: Vec<ParamBlock<U>> = Vec::new();
        other.visit(&mut |b| src.push(b.clone()));
        let mut i = 0;
        let mut err = None;
        self.visit_mut(&mut |b| {
            match src.get(i) {
                Some(s) if s.weight.shape() == b.weight.shape() && s.bias.len() == b.bias.len() => b.copy_values_from(s),
                _ => err = Some(b.name().to_string()),
            }
            i += 1;
        });
        match err {
            Some(name) => Err(Error::invalid("copy_params_from", format!("layout mismatch at block {name}"))),
            None if i != src.len() => Err(Error::invalid("copy_params_from", "block count differs")),
            None => Ok(()),
        }
    }
}

impl<T: Real> Layer<T> for Network<T> {
    fn kind(&self) -> &'static str {
        "network"
    }

    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        Network::forward(self, x, mode)
    }

    /// Backward from a gradient with respect to the output probabilities.
    fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let g = self.head.backward(grad)?;
        self.backward_body(g)
    }

    fn visit(&self, f: &mut dyn FnMut(&ParamBlock<T>)) {
        for u in &self.encoder {
            u.visit(f);
        }
        for u in &self.bottleneck {
            u.visit(f);
        }
        for st in &self.decoder {
            st.up.visit(f);
            if let Some(u) = &st.unit {
                u.visit(f);
            }
        }
        self.head.visit(f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut ParamBlock<T>)) {
        for u in &mut self.encoder {
            u.visit_mut(f);
        }
        for u in &mut self.bottleneck {
            u.visit_mut(f);
        }
        for st in &mut self.decoder {
            st.up.visit_mut(f);
            if let Some(u) = &mut st.unit {
                u.visit_mut(f);
            }
        }
        self.head.visit_mut(f);
    }

    fn clear_cache(&mut self) {
        for u in &mut self.encoder {
            u.clear_cache();
        }
        for p in &mut self.pools {
            Layer::<T>::clear_cache(p);
        }
        for u in &mut self.bottleneck {
            u.clear_cache();
        }
        for st in &mut self.decoder {
            st.up.clear_cache();
            if let Some(u) = &mut st.unit {
                u.clear_cache();
            }
        }
        self.head.clear_cache();
    }
}
