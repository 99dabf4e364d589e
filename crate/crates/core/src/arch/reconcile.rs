//! Search over structural tunables for the configuration whose parameter
//! counts best match the published ones, and a plain-text report.

use std::fmt::Write;

use crate::nn::{Projection, SkipMerge};
use crate::recurrent::LstmInput;

use super::{closed_form_count, ArchConfig, ArchitectureId, DecoderOrder};

/// Input widths of the two scenarios: two and seven acquisitions of two
/// polarisations.
pub const BITEMPORAL_CHANNELS: usize = 4;
pub const MULTITEMPORAL_CHANNELS: usize = 14;

/// Relative tolerance on each count.
pub const TOLERANCE: f64 = 0.05;

#[derive(Clone, Debug)]
pub struct Candidate {
    pub config: ArchConfig,
    pub bitemporal: usize,
    pub multitemporal: usize,
}

impl Candidate {
    pub fn deviations(&self, id: ArchitectureId) -> (f64, f64) {
        let (b, m) = id.published_counts();
        (rel(self.bitemporal, b), rel(self.multitemporal, m))
    }

    pub fn worst(&self, id: ArchitectureId) -> f64 {
        let (a, b) = self.deviations(id);
        a.abs().max(b.abs())
    }

    pub fn delta(&self) -> i64 {
        self.multitemporal as i64 - self.bitemporal as i64
    }
}

pub fn rel(got: usize, want: usize) -> f64 {
    (got as f64 - want as f64) / want as f64
}

fn candidate(id: ArchitectureId, config: ArchConfig) -> Candidate {
    Candidate {
        config,
        bitemporal: closed_form_count(id, BITEMPORAL_CHANNELS, &config),
        multitemporal: closed_form_count(id, MULTITEMPORAL_CHANNELS, &config),
    }
}

/// Every valid combination of the tunables that affect `id`.
pub fn grid(id: ArchitectureId) -> Vec<Candidate> {
    let base = ArchConfig::default();
    let projections = [
        Projection { kernel: 1, always: false },
        Projection { kernel: 1, always: true },
        Projection { kernel: 3, always: false },
        Projection { kernel: 3, always: true },
    ];
    let merges = [SkipMerge::Concat, SkipMerge::Add];
    let orders = [DecoderOrder::UnitThenMerge, DecoderOrder::MergeThenUnit];
    let mut out = Vec::new();
    for &skip_merge in &merges {
        for &decoder_order in &orders {
            if id.is_recurrent() && id != ArchitectureId::R2UNet && decoder_order != DecoderOrder::UnitThenMerge {
                continue;
            }
            for &projection in &projections {
                if id == ArchitectureId::UNet && projection != Projection::POINTWISE {
                    continue;
                }
                let lstm_variants: Vec<(bool, usize, LstmInput)> = if id.uses_lstm() {
                    let mut v = Vec::new();
                    for peephole in [true, false] {
                        for sub in 1..=4 {
                            for input in [LstmInput::Replicate, LstmInput::TemporalSlice] {
                                v.push((peephole, sub, input));
                            }
                        }
                    }
                    v
                } else {
                    vec![(base.peephole, base.rclstm_sub_units, base.lstm_input)]
                };
                for (peephole, rclstm_sub_units, lstm_input) in lstm_variants {
                    let cfg = ArchConfig {
                        skip_merge,
                        decoder_order,
                        projection,
                        peephole,
                        rclstm_sub_units,
                        lstm_input,
                        ..base
                    };
                    if cfg.validate().is_ok() {
                        out.push(candidate(id, cfg));
                    }
                }
            }
        }
    }
    out
}

/// The grid candidate with the smallest worst-case deviation.
pub fn best(id: ArchitectureId) -> Candidate {
    grid(id)
        .into_iter()
        .min_by(|a, b| a.worst(id).total_cmp(&b.worst(id)))
        .expect("grid is never empty")
}

/// Counts of the configuration actually used for `id`.
pub fn chosen(id: ArchitectureId) -> Candidate {
    candidate(id, ArchConfig::reconciled(id))
}

/// Counts under the default configuration.
pub fn baseline(id: ArchitectureId) -> Candidate {
    candidate(id, ArchConfig::default())
}

fn pct(x: f64) -> String {
    format!("{:+.2}%", 100.0 * x)
}

/// Markdown report: chosen and baseline counts per layout, the published
/// targets and deviations, and the grid extremes.
pub fn report() -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Parameter-count reconciliation\n");
    let _ = writeln!(
        s,
        "Counts are weights plus biases for a {}-class head. Targets are the published counts for {} and {} input channels.\n",
        ArchConfig::default().classes,
        BITEMPORAL_CHANNELS,
        MULTITEMPORAL_CHANNELS
    );
    let _ = writeln!(s, "| layout | config | count (4ch) | target | dev | count (14ch) | target | dev | delta | target delta | within 5% |");
    let _ = writeln!(s, "|---|---|---:|---:|---:|---:|---:|---:|---:|---:|:---:|");
    for id in ArchitectureId::ALL {
        let (tb, tm) = id.published_counts();
        for (label, c) in [("chosen", chosen(id)), ("baseline", baseline(id))] {
            let (db, dm) = c.deviations(id);
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {} |",
                id.display_name(),
                label,
                c.bitemporal,
                tb,
                pct(db),
                c.multitemporal,
                tm,
                pct(dm),
                c.delta(),
                tm as i64 - tb as i64,
                if c.worst(id) <= TOLERANCE { "yes" } else { "no" },
            );
        }
    }
    let _ = writeln!(s, "\n## Chosen configurations\n");
    for id in ArchitectureId::ALL {
        let _ = writeln!(s, "- {}: {}", id.display_name(), ArchConfig::reconciled(id).describe());
    }
    let _ = writeln!(s, "\n## Grid search\n");
    let _ = writeln!(s, "| layout | candidates | best worst-case dev | best config | candidates within 5% |");
    let _ = writeln!(s, "|---|---:|---:|---|---:|");
    for id in ArchitectureId::ALL {
        let g = grid(id);
        let within = g.iter().filter(|c| c.worst(id) <= TOLERANCE).count();
        let b = best(id);
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} |",
            id.display_name(),
            g.len(),
            pct(b.worst(id)),
            b.config.describe(),
            within
        );
    }
    s
}
