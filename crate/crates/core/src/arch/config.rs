use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::kv::KvMap;
use crate::nn::{Projection, SkipMerge};
use crate::recurrent::LstmInput;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ArchitectureId {
    UNet,
    ResUNet,
    R2UNet,
    Rrcnn1,
    Rrcnn2,
    Rrcnn3,
}

impl ArchitectureId {
    pub const ALL: [ArchitectureId; 6] = [
        ArchitectureId::UNet,
        ArchitectureId::ResUNet,
        ArchitectureId::R2UNet,
        ArchitectureId::Rrcnn1,
        ArchitectureId::Rrcnn2,
        ArchitectureId::Rrcnn3,
    ];

    /// Identifier used on the command line and in checkpoints.
    pub fn as_str(self) -> &'static str {
        match self {
            ArchitectureId::UNet => "unet",
            ArchitectureId::ResUNet => "resunet",
            ArchitectureId::R2UNet => "r2unet",
            ArchitectureId::Rrcnn1 => "rrcnn1",
            ArchitectureId::Rrcnn2 => "rrcnn2",
            ArchitectureId::Rrcnn3 => "rrcnn3",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ArchitectureId::UNet => "U-Net",
            ArchitectureId::ResUNet => "ResU-Net",
            ArchitectureId::R2UNet => "R2U-Net",
            ArchitectureId::Rrcnn1 => "RRCNN-1",
            ArchitectureId::Rrcnn2 => "RRCNN-2",
            ArchitectureId::Rrcnn3 => "RRCNN-3",
        }
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn is_recurrent(self) -> bool {
        !matches!(self, ArchitectureId::UNet | ArchitectureId::ResUNet)
    }

    pub fn uses_lstm(self) -> bool {
        matches!(self, ArchitectureId::Rrcnn2 | ArchitectureId::Rrcnn3)
    }

    /// Published parameter counts for 4- and 14-channel inputs.
    pub fn published_counts(self) -> (usize, usize) {
        match self {
            ArchitectureId::UNet => (868_483, 871_363),
            ArchitectureId::ResUNet => (2_041_283, 2_047_043),
            ArchitectureId::R2UNet => (4_530_179, 4_536_579),
            ArchitectureId::Rrcnn1 => (2_272_259, 2_278_659),
            ArchitectureId::Rrcnn2 => (7_713_827, 7_713_827),
            ArchitectureId::Rrcnn3 => (5_353_507, 5_353_507),
        }
    }
}

impl fmt::Display for ArchitectureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ArchitectureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s.chars().filter(|c| *c != '-' && *c != '_').collect::<String>().to_ascii_lowercase();
        ArchitectureId::ALL
            .into_iter()
            .find(|a| a.as_str() == norm)
            .ok_or_else(|| Error::Config(format!("unknown architecture '{s}' (expected unet, resunet, r2unet, rrcnn1, rrcnn2 or rrcnn3)")))
    }
}

/// Whether a decoder stage merges its skip before or after its unit. Only
/// meaningful for decoders whose stage has a unit after upsampling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DecoderOrder {
    /// upsample, unit, merge
    UnitThenMerge,
    /// upsample, merge, unit
    MergeThenUnit,
}

impl DecoderOrder {
    pub fn as_str(self) -> &'static str {
        match self {
            DecoderOrder::UnitThenMerge => "unit-merge",
            DecoderOrder::MergeThenUnit => "merge-unit",
        }
    }
}

/// Widths and structural choices not pinned by the layout table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ArchConfig {
    pub classes: usize,
    pub encoder: [usize; 3],
    pub bottleneck: usize,
    pub decoder: [usize; 3],
    pub skip_merge: SkipMerge,
    pub decoder_order: DecoderOrder,
    /// Skip projection of residual blocks, recurrent residual units and
    /// ConvLSTM residual blocks.
    pub projection: Projection,
    pub peephole: bool,
    pub rclstm_sub_units: usize,
    pub t_steps: usize,
    pub lstm_input: LstmInput,
}

impl Default for ArchConfig {
    /// Baseline reading: concatenating skips, 1x1 projections only where
    /// widths change, peepholes on, two ConvLSTM sub-units per block and
    /// replicated input.
    fn default() -> Self {
        ArchConfig {
            classes: 2,
            encoder: [32, 64, 128],
            bottleneck: 128,
            decoder: [128, 64, 32],
            skip_merge: SkipMerge::Concat,
            decoder_order: DecoderOrder::UnitThenMerge,
            projection: Projection::POINTWISE,
            peephole: true,
            rclstm_sub_units: 2,
            t_steps: 2,
            lstm_input: LstmInput::Replicate,
        }
    }
}

impl ArchConfig {
    /// The configuration chosen by parameter-count reconciliation for each
    /// layout; see [`super::reconcile`].
    pub fn reconciled(id: ArchitectureId) -> Self {
        let base = ArchConfig::default();
        let three_always = Projection { kernel: 3, always: true };
        match id {
            ArchitectureId::UNet => base,
            ArchitectureId::ResUNet => ArchConfig { projection: three_always, ..base },
            ArchitectureId::R2UNet => ArchConfig {
                projection: three_always,
                decoder_order: DecoderOrder::MergeThenUnit,
                ..base
            },
            ArchitectureId::Rrcnn1 => ArchConfig { projection: three_always, ..base },
            ArchitectureId::Rrcnn2 | ArchitectureId::Rrcnn3 => ArchConfig {
                skip_merge: SkipMerge::Add,
                peephole: false,
                rclstm_sub_units: 3,
                lstm_input: LstmInput::TemporalSlice,
                ..base
            },
        }
    }

    /// Same structure with every width divided by `factor` (for fast tests).
    pub fn narrowed(mut self, factor: usize) -> Self {
        let f = factor.max(1);
        for w in self.encoder.iter_mut().chain(self.decoder.iter_mut()) {
            *w = (*w / f).max(1);
        }
        self.bottleneck = (self.bottleneck / f).max(1);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let widths = self.encoder.iter().chain(&self.decoder).chain(std::iter::once(&self.bottleneck));
        if widths.copied().any(|w| w == 0) {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        if self.classes < 2 {
            return Err(Error::Config("at least two classes required".into()));
        }
        if self.t_steps == 0 || self.rclstm_sub_units == 0 {
            return Err(Error::Config("t_steps and rclstm_sub_units must be at least 1".into()));
        }
        if !matches!(self.projection.kernel, 1 | 3) {
            return Err(Error::Config(format!("projection kernel must be 1 or 3, got {}", self.projection.kernel)));
        }
        if self.skip_merge == SkipMerge::Add {
            for i in 0..3 {
                let dec = match self.decoder_order {
                    DecoderOrder::UnitThenMerge => self.decoder[i],
                    DecoderOrder::MergeThenUnit if i == 0 => self.bottleneck,
                    DecoderOrder::MergeThenUnit => self.decoder[i - 1],
                };
                if self.encoder[2 - i] != dec {
                    return Err(Error::Config(format!(
                        "additive skips need matching widths: encoder {} vs decoder {}",
                        self.encoder[2 - i], dec
                    )));
                }
            }
        }
        Ok(())
    }

    pub const KEYS: [&'static str; 12] = [
        "classes",
        "encoder",
        "bottleneck",
        "decoder",
        "skip_merge",
        "decoder_order",
        "projection_kernel",
        "projection_always",
        "peephole",
        "rclstm_sub_units",
        "t_steps",
        "lstm_input",
    ];

    pub fn to_kv(&self) -> KvMap {
        let list = |w: &[usize; 3]| format!("{},{},{}", w[0], w[1], w[2]);
        let mut m = KvMap::new();
        m.set("classes", self.classes);
        m.set("encoder", list(&self.encoder));
        m.set("bottleneck", self.bottleneck);
        m.set("decoder", list(&self.decoder));
        m.set("skip_merge", self.skip_merge.as_str());
        m.set("decoder_order", self.decoder_order.as_str());
        m.set("projection_kernel", self.projection.kernel);
        m.set("projection_always", self.projection.always);
        m.set("peephole", self.peephole);
        m.set("rclstm_sub_units", self.rclstm_sub_units);
        m.set("t_steps", self.t_steps);
        m.set("lstm_input", self.lstm_input.as_str());
        m
    }

    /// Apply the keys present in `m` on top of `self`.
    pub fn with_kv(mut self, m: &KvMap) -> Result<Self> {
        m.reject_unknown(&Self::KEYS)?;
        let triple = |key: &str| -> Result<Option<[usize; 3]>> {
            match m.get_list::<usize>(key)? {
                None => Ok(None),
                Some(v) => <[usize; 3]>::try_from(v)
                    .map(Some)
                    .map_err(|_| Error::Config(format!("{key} needs three widths"))),
            }
        };
        if let Some(v) = m.get("classes")? {
            self.classes = v;
        }
        if let Some(v) = triple("encoder")? {
            self.encoder = v;
        }
        if let Some(v) = m.get("bottleneck")? {
            self.bottleneck = v;
        }
        if let Some(v) = triple("decoder")? {
            self.decoder = v;
        }
        if let Some(v) = m.get_str("skip_merge") {
            self.skip_merge = match v {
                "concat" => SkipMerge::Concat,
                "add" => SkipMerge::Add,
                _ => return Err(Error::Config(format!("skip_merge = {v:?}"))),
            };
        }
        if let Some(v) = m.get_str("decoder_order") {
            self.decoder_order = match v {
                "unit-merge" => DecoderOrder::UnitThenMerge,
                "merge-unit" => DecoderOrder::MergeThenUnit,
                _ => return Err(Error::Config(format!("decoder_order = {v:?}"))),
            };
        }
        if let Some(v) = m.get("projection_kernel")? {
            self.projection.kernel = v;
        }
        if let Some(v) = m.get("projection_always")? {
            self.projection.always = v;
        }
        if let Some(v) = m.get("peephole")? {
            self.peephole = v;
        }
        if let Some(v) = m.get("rclstm_sub_units")? {
            self.rclstm_sub_units = v;
        }
        if let Some(v) = m.get("t_steps")? {
            self.t_steps = v;
        }
        if let Some(v) = m.get_str("lstm_input") {
            self.lstm_input = match v {
                "replicate" => LstmInput::Replicate,
                "temporal-slice" => LstmInput::TemporalSlice,
                _ => return Err(Error::Config(format!("lstm_input = {v:?}"))),
            };
        }
        self.validate()?;
        Ok(self)
    }

    /// One-line description of the tunables.
    pub fn describe(&self) -> String {
        format!(
            "merge={} order={} projection={}x{}{} peephole={} sub_units={} t_steps={} lstm_input={}",
            self.skip_merge.as_str(),
            self.decoder_order.as_str(),
            self.projection.kernel,
            self.projection.kernel,
            if self.projection.always { "/always" } else { "" },
            if self.peephole { "on" } else { "off" },
            self.rclstm_sub_units,
            self.t_steps,
            self.lstm_input.as_str(),
        )
    }
}
