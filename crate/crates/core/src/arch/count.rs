//! Closed-form parameter counts, written independently of the builders so
//! each can check the other.

use crate::nn::SkipMerge;
use crate::recurrent::LstmInput;

use super::{ArchConfig, ArchitectureId, DecoderOrder};

fn conv(k: usize, i: usize, o: usize) -> usize {
    k * k * i * o + o
}

fn projection(cfg: &ArchConfig, i: usize, o: usize) -> usize {
    if cfg.projection.always || i != o {
        conv(cfg.projection.kernel, i, o)
    } else {
        0
    }
}

/// Gates with input width `c` and hidden width `h`: input-to-state kernel
/// plus bias, state-to-state kernel, optional peepholes.
fn lstm(cfg: &ArchConfig, c: usize, h: usize) -> usize {
    4 * (9 * c * h + 9 * h * h + h) + if cfg.peephole { 3 * h } else { 0 }
}

fn unit(id: ArchitectureId, cfg: &ArchConfig, i: usize, o: usize, first: bool) -> usize {
    match id {
        ArchitectureId::UNet => conv(3, i, o),
        ArchitectureId::ResUNet => conv(3, i, o) + conv(3, o, o) + projection(cfg, i, o),
        ArchitectureId::R2UNet | ArchitectureId::Rrcnn1 => {
            let rcl = |a: usize, b: usize| conv(3, a, b) + 9 * b * b;
            rcl(i, o) + rcl(o, o) + projection(cfg, i, o)
        }
        ArchitectureId::Rrcnn2 | ArchitectureId::Rrcnn3 => {
            let c0 = if first && cfg.lstm_input == LstmInput::TemporalSlice { 2 } else { i };
            lstm(cfg, c0, o) + (cfg.rclstm_sub_units - 1) * lstm(cfg, o, o) + projection(cfg, i, o)
        }
    }
}

pub fn closed_form_count(id: ArchitectureId, in_channels: usize, cfg: &ArchConfig) -> usize {
    let mut total = 0;
    let mut prev = in_channels;
    for (s, &w) in cfg.encoder.iter().enumerate() {
        total += unit(id, cfg, prev, w, s == 0);
        prev = w;
    }
    let b = cfg.bottleneck;
    total += match id {
        ArchitectureId::UNet => conv(3, prev, b) + 2 * conv(3, b, b),
        ArchitectureId::ResUNet => unit(id, cfg, prev, b, false) + 2 * unit(id, cfg, b, b, false),
        ArchitectureId::R2UNet | ArchitectureId::Rrcnn1 | ArchitectureId::Rrcnn2 => unit(id, cfg, prev, b, false),
        ArchitectureId::Rrcnn3 => lstm(cfg, prev, b),
    };
    prev = b;
    for (s, &w) in cfg.decoder.iter().enumerate() {
        let skip = cfg.encoder[2 - s];
        let merged = |c: usize| match cfg.skip_merge {
            SkipMerge::Concat => skip + c,
            SkipMerge::Add => c,
        };
        match id {
            ArchitectureId::Rrcnn1 | ArchitectureId::Rrcnn2 | ArchitectureId::Rrcnn3 => {
                total += conv(3, prev, w);
                prev = merged(w);
            }
            _ => {
                let body = |i: usize, o: usize| match id {
                    ArchitectureId::R2UNet => unit(id, cfg, i, o, false),
                    _ => conv(3, i, o),
                };
                match cfg.decoder_order {
                    DecoderOrder::UnitThenMerge => {
                        total += body(prev, w);
                        prev = merged(w);
                    }
                    DecoderOrder::MergeThenUnit => {
                        total += body(merged(prev), w);
                        prev = w;
                    }
                }
            }
        }
    }
    total + conv(1, prev, cfg.classes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_conv_closed_form() {
        assert_eq!(conv(3, 4, 32), 1_184);
    }

    #[test]
    fn unet_first_layer_delta() {
        let cfg = ArchConfig::default();
        let d = closed_form_count(ArchitectureId::UNet, 14, &cfg) - closed_form_count(ArchitectureId::UNet, 4, &cfg);
        assert_eq!(d, 3 * 3 * 10 * 32);
    }
}
