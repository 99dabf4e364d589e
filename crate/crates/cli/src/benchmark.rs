//! Synthetic multitemporal-versus-bitemporal benchmark: for each seed, a
//! fresh scene in which fast regrowth erases early clearings from the last
//! acquisition, then every architecture trained on one fold in both modes
//! and scored on the held-out tiles.

use std::fmt::Write as _;
use std::time::Instant;

use rrcnn_core::arch::{ArchConfig, ArchitectureId};
use rrcnn_core::data::TemporalMode;
use rrcnn_core::experiment::Experiment;
use rrcnn_core::metrics::{ConfusionCounts, Scores};
use rrcnn_core::synth::{generate, SceneConfig};
use rrcnn_core::Result;

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub scene_size: usize,
    pub timesteps: usize,
    /// Regrowth per acquisition in dB; with the default 3 dB drop, 1 dB
    /// erases any clearing made three or more steps before the end.
    pub recovery_db: f64,
    pub seeds: Vec<u64>,
    pub archs: Vec<ArchitectureId>,
    pub width_divisor: usize,
    pub tile: usize,
    pub patch_size: usize,
    /// Training window stride; `None` packs windows up to the overlap cap.
    pub train_stride: Option<usize>,
    pub eval_stride: usize,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub learning_rate: f64,
    pub fold: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            scene_size: 512,
            timesteps: 7,
            recovery_db: 1.0,
            seeds: vec![1, 2, 3],
            archs: ArchitectureId::ALL.to_vec(),
            width_divisor: 4,
            tile: 128,
            patch_size: 32,
            train_stride: Some(16),
            eval_stride: 16,
            batch_size: 16,
            max_epochs: 20,
            patience: 10,
            learning_rate: 1e-3,
            fold: 0,
        }
    }
}

impl BenchConfig {
    pub fn scene(&self, seed: u64) -> SceneConfig {
        SceneConfig {
            height: self.scene_size,
            width: self.scene_size,
            timesteps: self.timesteps,
            recovery_db: self.recovery_db,
            seed,
            ..SceneConfig::default()
        }
    }

    pub fn experiment(&self, arch: ArchitectureId, mode: TemporalMode, seed: u64) -> Experiment {
        let mut e = Experiment::new(arch, mode);
        e.arch_config = ArchConfig::reconciled(arch).narrowed(self.width_divisor);
        e.tile_h = self.tile;
        e.tile_w = self.tile;
        e.patch_size = self.patch_size;
        e.train_stride = self.train_stride;
        e.eval_stride = self.eval_stride;
        e.augment = false;
        e.init_seed = seed;
        e.train.seed = seed;
        e.train.deterministic = true;
        e.train.max_epochs = self.max_epochs;
        e.train.patience = self.patience;
        e.train.optim.batch_size = self.batch_size;
        e.train.optim.learning_rate = self.learning_rate;
        e
    }
}

#[derive(Clone, Debug)]
pub struct BenchRow {
    pub arch: ArchitectureId,
    pub mode: TemporalMode,
    pub seed: u64,
    pub counts: ConfusionCounts,
    pub epochs: usize,
    pub best_epoch: usize,
    pub seconds: f64,
}

impl BenchRow {
    pub const CSV_HEADER: &'static str = "arch,mode,seed,tp,tn,fp,fn,precision,recall,f1,epochs,best_epoch,seconds";

    pub fn scores(&self) -> Scores {
        self.counts.scores()
    }

    pub fn csv_row(&self) -> String {
        let s = self.scores();
        format!(
            "{},{},{},{},{:.6},{:.6},{:.6},{},{},{:.1}",
            self.arch.as_str(),
            self.mode,
            self.seed,
            self.counts.csv_row(),
            s.precision,
            s.recall,
            s.f1,
            self.epochs,
            self.best_epoch,
            self.seconds
        )
    }
}

/// Run every (seed, architecture, mode) combination in that order.
pub fn run(cfg: &BenchConfig, mut on_row: impl FnMut(&BenchRow)) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for &seed in &cfg.seeds {
        let scene = generate(&cfg.scene(seed))?;
        for &arch in &cfg.archs {
            for mode in [TemporalMode::Bitemporal, TemporalMode::Multitemporal] {
                let start = Instant::now();
                let run = cfg.experiment(arch, mode, seed).run_fold(&scene.stack, &scene.labels, cfg.fold, |_| {})?;
                let row = BenchRow {
                    arch,
                    mode,
                    seed,
                    counts: run.counts,
                    epochs: run.trained.fit.history.len(),
                    best_epoch: run.trained.fit.best_epoch,
                    seconds: start.elapsed().as_secs_f64(),
                };
                on_row(&row);
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

/// Mean F1 over seeds for one architecture and mode.
pub fn mean_f1(rows: &[BenchRow], arch: ArchitectureId, mode: TemporalMode) -> Option<f64> {
    let f: Vec<f64> = rows
        .iter()
        .filter(|r| r.arch == arch && r.mode == mode)
        .map(|r| r.scores().f1)
        .collect();
    (!f.is_empty()).then(|| f.iter().sum::<f64>() / f.len() as f64)
}

/// Aggregates the two claims checked against the rows.
#[derive(Clone, Debug)]
pub struct BenchSummary {
    /// (arch, mean bitemporal F1, mean multitemporal F1)
    pub means: Vec<(ArchitectureId, f64, f64)>,
}

/// Required multitemporal advantage for RRCNN-1.
pub const MIN_ADVANTAGE: f64 = 0.03;

impl BenchSummary {
    pub fn from_rows(rows: &[BenchRow]) -> Self {
        let means = ArchitectureId::ALL
            .into_iter()
            .filter_map(|a| {
                let bi = mean_f1(rows, a, TemporalMode::Bitemporal)?;
                let multi = mean_f1(rows, a, TemporalMode::Multitemporal)?;
                Some((a, bi, multi))
            })
            .collect();
        BenchSummary { means }
    }

    fn get(&self, arch: ArchitectureId) -> Option<(f64, f64)> {
        self.means.iter().find(|m| m.0 == arch).map(|m| (m.1, m.2))
    }

    pub fn advantage(&self, arch: ArchitectureId) -> Option<f64> {
        self.get(arch).map(|(bi, multi)| multi - bi)
    }

    /// RRCNN-1 gains at least [`MIN_ADVANTAGE`] and every architecture
    /// gains something.
    pub fn multitemporal_advantage_holds(&self) -> bool {
        self.advantage(ArchitectureId::Rrcnn1).is_some_and(|a| a >= MIN_ADVANTAGE)
            && self.means.iter().all(|&(_, bi, multi)| multi > bi)
    }

    /// Each recurrent variant matches or beats the plain U-Net, per mode.
    pub fn recurrent_ordering_holds(&self) -> bool {
        let Some((ubi, umulti)) = self.get(ArchitectureId::UNet) else {
            return false;
        };
        self.means
            .iter()
            .filter(|m| m.0.is_recurrent())
            .all(|&(_, bi, multi)| bi >= ubi && multi >= umulti)
    }

    /// Architecture with the best mean multitemporal F1.
    pub fn leader(&self) -> Option<ArchitectureId> {
        self.means.iter().max_by(|a, b| a.2.total_cmp(&b.2)).map(|m| m.0)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<10} {:>10} {:>10} {:>10}", "arch", "bitemp F1", "multi F1", "gain");
        for &(a, bi, multi) in &self.means {
            let _ = writeln!(s, "{:<10} {:>10.4} {:>10.4} {:>+10.4}", a.display_name(), bi, multi, multi - bi);
        }
        let _ = writeln!(
            s,
            "multitemporal advantage (RRCNN-1 >= {MIN_ADVANTAGE}, all > 0): {}",
            if self.multitemporal_advantage_holds() { "holds" } else { "does not hold" }
        );
        let _ = writeln!(
            s,
            "recurrent variants >= U-Net: {}",
            if self.recurrent_ordering_holds() { "holds" } else { "does not hold" }
        );
        if let Some(l) = self.leader() {
            let _ = writeln!(s, "best multitemporal F1: {}", l.display_name());
        }
        s
    }
}
