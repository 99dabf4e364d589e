//! Gradient suites and the memorisation run, shared by the `gradcheck`
//! command and the acceptance target.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rrcnn_core::arch::{build, ArchConfig, ArchitectureId};
use rrcnn_core::arch::reconcile::{BITEMPORAL_CHANNELS, MULTITEMPORAL_CHANNELS};
use rrcnn_core::data::{make_tiles, select_epochs, ChannelStats, TemporalMode};
use rrcnn_core::experiment::tile_labels;
use rrcnn_core::metrics::{threshold, ConfusionCounts};
use rrcnn_core::nn::{
    Conv2d, ConvRelu, ConvTranspose2d, Init, Layer, MaxPool2, Projection, ResidualBlock, SoftmaxHead, TransposeStage,
    UpConvStage, Upsample2,
};
use rrcnn_core::recurrent::{ConvLstmUnit, LstmInput, Rcl, RclConfig, RclstmBlock, RclstmConfig, Rrcu, SingleConvLstmBlock};
use rrcnn_core::synth::{generate, SceneConfig};
use rrcnn_core::train::{grad_check, predict, Dataset, GradCheckConfig, OptimConfig, TrainConfig, Trainer};
use rrcnn_core::{Result, Shape, Tensor};

pub const LAYER_TOLERANCE: f64 = 1e-6;
pub const NETWORK_TOLERANCE: f64 = 1e-5;
/// Central-difference step for whole networks: large enough to keep f64
/// roundoff below the tolerance, small enough to rarely straddle a ReLU kink.
pub const NETWORK_EPS: f64 = 1e-5;
pub const NETWORK_SPATIAL: usize = 16;
/// Largest relative disagreement between the steps `eps` and `eps / 2`
/// before a coordinate counts as sitting on a kink.
pub const KINK_GUARD: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct LayerCheck {
    pub name: String,
    /// Worst relative error over parameter blocks and the input.
    pub rel_err: f64,
    pub coordinates: usize,
    /// Coordinates left out because the step straddled a kink.
    pub kinks: usize,
}

impl LayerCheck {
    pub fn passed(&self) -> bool {
        self.rel_err <= LAYER_TOLERANCE
    }
}

fn input(c: usize, hw: usize, seed: u64) -> Tensor<f64> {
    Tensor::randn(Shape::new(2, c, hw, hw), 1.0, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn check_layer<L: Layer<f64>>(name: &str, layer: &mut L, x: &Tensor<f64>) -> Result<LayerCheck> {
    let cfg = GradCheckConfig {
        tolerance: LAYER_TOLERANCE,
        kink_guard: Some(KINK_GUARD),
        ..GradCheckConfig::default()
    };
    let report = grad_check(layer, x, &cfg)?;
    let blocks = || report.blocks.iter().chain(&report.input);
    Ok(LayerCheck {
        name: name.to_string(),
        rel_err: report.max_rel_err(),
        coordinates: blocks().map(|b| b.checked).sum(),
        kinks: blocks().map(|b| b.skipped).sum(),
    })
}

/// Non-zero peepholes so their gradients take part.
fn randomise_peepholes(unit: &mut ConvLstmUnit<f64>, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if let Some(p) = unit.cell_mut().peephole_mut() {
        p.weight = Tensor::randn(p.weight.shape(), 0.5, &mut rng);
    }
}

/// Every layer type, at small widths, in 64-bit precision.
pub fn layer_suite() -> Result<Vec<LayerCheck>> {
    let mut init = Init::new(11);
    let mut out = vec![
        check_layer("conv3x3", &mut Conv2d::<f64>::new(&mut init, "c", 3, 4, 3, true), &input(3, 6, 2))?,
        check_layer("conv1x1", &mut Conv2d::<f64>::new(&mut init, "p", 3, 4, 1, false), &input(3, 6, 3))?,
        check_layer("conv_transpose", &mut ConvTranspose2d::<f64>::new(&mut init, "t", 3, 2, 3), &input(3, 4, 4))?,
        check_layer("conv_relu", &mut ConvRelu::<f64>::new(&mut init, "cr", 2, 3), &input(2, 6, 5))?,
        check_layer("upsample_conv", &mut UpConvStage::<f64>::new(&mut init, "up", 2, 3), &input(2, 4, 6))?,
        check_layer("transpose_stage", &mut TransposeStage::<f64>::new(&mut init, "ts", 2, 3), &input(2, 4, 7))?,
        check_layer("maxpool", &mut MaxPool2::new(), &input(2, 6, 8))?,
        check_layer("upsample", &mut Upsample2::new(), &input(2, 3, 9))?,
        check_layer(
            "residual_identity",
            &mut ResidualBlock::<f64>::new(&mut init, "rb", 3, 3, Projection::POINTWISE),
            &input(3, 6, 10),
        )?,
        check_layer(
            "residual_projected",
            &mut ResidualBlock::<f64>::new(&mut init, "rbp", 2, 4, Projection { kernel: 3, always: true }),
            &input(2, 6, 11),
        )?,
        check_layer("softmax_head", &mut SoftmaxHead::<f64>::new(&mut init, "head", 4, 3), &input(4, 5, 13))?,
        check_layer(
            "rcl",
            &mut Rcl::<f64>::new(&mut init, "rcl", RclConfig { in_c: 2, out_c: 3, t_steps: 3 })?,
            &input(2, 5, 14),
        )?,
        check_layer("rrcu", &mut Rrcu::<f64>::new(&mut init, "rrcu", 2, 3, 2, Projection::POINTWISE)?, &input(2, 5, 15))?,
    ];
    for peephole in [true, false] {
        let mut unit = ConvLstmUnit::<f64>::new(&mut init, "lstm", 2, 3, 3, peephole)?;
        randomise_peepholes(&mut unit, 17);
        let name = if peephole { "convlstm_peephole" } else { "convlstm" };
        out.push(check_layer(name, &mut unit, &input(2, 5, 18))?);
    }
    let mut cfg = RclstmConfig::new(4, 3);
    let mut block = RclstmBlock::<f64>::new(&mut init, "rclstm", cfg)?;
    for (k, u) in block.sub_units_mut().iter_mut().enumerate() {
        randomise_peepholes(u, 40 + k as u64);
    }
    out.push(check_layer("rclstm_replicate", &mut block, &input(4, 4, 21))?);
    cfg.input = LstmInput::TemporalSlice;
    cfg.sub_units = 3;
    cfg.peephole = false;
    out.push(check_layer(
        "rclstm_temporal_slice",
        &mut RclstmBlock::<f64>::new(&mut init, "sliced", cfg)?,
        &input(4, 4, 22),
    )?);
    let mut single = SingleConvLstmBlock::<f64>::new(&mut init, "single", 3, 3, 2, true)?;
    randomise_peepholes(single.unit_mut(), 23);
    out.push(check_layer("single_convlstm", &mut single, &input(3, 4, 24))?);
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct NetworkCheck {
    pub arch: ArchitectureId,
    pub channels: usize,
    pub width_divisor: usize,
    pub params: usize,
    /// Error over every sampled coordinate pooled into one vector.
    pub pooled: f64,
    pub worst_block: String,
    pub worst_block_err: f64,
    pub coordinates: usize,
    /// Coordinates left out because the step straddled a kink.
    pub kinks: usize,
    pub seconds: f64,
}

impl NetworkCheck {
    pub fn passed(&self) -> bool {
        self.pooled <= NETWORK_TOLERANCE
    }
}

#[derive(Clone, Debug)]
pub struct NetworkCheckConfig {
    pub width_divisor: usize,
    pub eps: f64,
    pub samples_per_block: usize,
    pub input_samples: usize,
}

impl Default for NetworkCheckConfig {
    fn default() -> Self {
        NetworkCheckConfig {
            width_divisor: 4,
            eps: NETWORK_EPS,
            samples_per_block: 50,
            input_samples: 50,
        }
    }
}

/// Check one architecture at 16x16 for a given input width.
pub fn check_network(id: ArchitectureId, channels: usize, cfg: &NetworkCheckConfig) -> Result<NetworkCheck> {
    let start = Instant::now();
    let arch = ArchConfig::reconciled(id).narrowed(cfg.width_divisor);
    let mut net = build::<f64>(id, channels, &arch, 3)?;
    let params = rrcnn_core::arch::param_count(&net);
    let x = Tensor::<f64>::randn(
        Shape::new(1, channels, NETWORK_SPATIAL, NETWORK_SPATIAL),
        1.0,
        &mut ChaCha8Rng::seed_from_u64(1),
    );
    let gc = GradCheckConfig {
        eps: cfg.eps,
        tolerance: NETWORK_TOLERANCE,
        samples_per_block: cfg.samples_per_block,
        input_samples: cfg.input_samples,
        seed: 7,
        kink_guard: Some(KINK_GUARD),
    };
    let report = grad_check(&mut net, &x, &gc)?;
    let (worst_block, worst_block_err) = report.worst().map(|(n, e)| (n.to_string(), e)).unwrap_or_default();
    Ok(NetworkCheck {
        arch: id,
        channels,
        width_divisor: cfg.width_divisor,
        params,
        pooled: report.pooled_rel_err(),
        worst_block,
        worst_block_err,
        coordinates: report.blocks.iter().chain(&report.input).map(|b| b.checked).sum(),
        kinks: report.blocks.iter().chain(&report.input).map(|b| b.skipped).sum(),
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Both input widths for each of `archs`.
pub fn network_suite(
    archs: &[ArchitectureId],
    cfg: &NetworkCheckConfig,
    mut on_result: impl FnMut(&NetworkCheck),
) -> Result<Vec<NetworkCheck>> {
    let mut out = Vec::new();
    for &id in archs {
        for channels in [BITEMPORAL_CHANNELS, MULTITEMPORAL_CHANNELS] {
            let r = check_network(id, channels, cfg)?;
            on_result(&r);
            out.push(r);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct OverfitConfig {
    pub patches: usize,
    pub patch_size: usize,
    pub max_epochs: usize,
    pub target_f1: f64,
    /// Score the training set every this many epochs.
    pub eval_every: usize,
    pub learning_rate: f64,
    pub width_divisor: usize,
    pub seed: u64,
}

impl Default for OverfitConfig {
    fn default() -> Self {
        OverfitConfig {
            patches: 8,
            patch_size: 32,
            max_epochs: 200,
            target_f1: 0.95,
            eval_every: 5,
            learning_rate: 1e-3,
            width_divisor: 1,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct OverfitResult {
    pub arch: ArchitectureId,
    pub epochs: usize,
    pub f1: f64,
    pub final_loss: f64,
    pub seconds: f64,
}

/// The fixed memorisation set: the `patches` tiles of a seeded scene with
/// the most deforestation, standardised with their own statistics.
pub fn overfit_set(cfg: &OverfitConfig) -> Result<Dataset> {
    let scene = generate(&SceneConfig {
        height: 256,
        width: 256,
        seed: cfg.seed,
        ..SceneConfig::default()
    })?;
    let stack = select_epochs(&scene.stack, TemporalMode::Multitemporal)?;
    let size = cfg.patch_size;
    let grid = make_tiles(stack.height, stack.width, size, size)?;
    let mut ranked: Vec<(usize, usize)> = grid
        .tiles()
        .map(|t| (tile_labels(&scene.labels, &grid, t.id).iter().filter(|&&c| c == 1).count(), t.id))
        .collect();
    ranked.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut chosen: Vec<usize> = ranked.iter().take(cfg.patches).map(|&(_, id)| id).collect();
    chosen.sort_unstable();
    let stats = ChannelStats::from_tiles(&stack, &grid, &chosen)?;
    let normalized = stats.apply(&stack)?;
    let channels = normalized.channels();
    let mut data = Vec::with_capacity(chosen.len() * channels * size * size);
    let mut labels = Vec::with_capacity(chosen.len() * size * size);
    for &id in &chosen {
        let t = grid.tile(id);
        for ch in 0..channels {
            let plane = normalized.channel(ch);
            for r in 0..size {
                let base = (t.row0 + r) * normalized.width + t.col0;
                data.extend_from_slice(&plane[base..base + size]);
            }
        }
        labels.extend(tile_labels(&scene.labels, &grid, id));
    }
    Dataset::plain(Tensor::from_vec(Shape::new(chosen.len(), channels, size, size), data)?, labels)
}

fn training_f1(net: &mut rrcnn_core::arch::Network<f32>, set: &Dataset) -> Result<f64> {
    let all: Vec<usize> = (0..set.len()).collect();
    let batch = set.batch(&all)?;
    let probs = predict(net, &batch.images, set.len())?;
    let plane = set.patch_shape().plane();
    let mut counts = ConfusionCounts::default();
    for k in 0..set.len() {
        let p = &probs.sample(k)[plane..2 * plane];
        counts.accumulate(&threshold(p), &batch.labels[k * plane..(k + 1) * plane])?;
    }
    Ok(counts.scores().f1)
}

/// Train `id` on the memorisation set until its training F1 reaches the
/// target or the epoch budget runs out.
pub fn overfit(id: ArchitectureId, cfg: &OverfitConfig) -> Result<OverfitResult> {
    let start = Instant::now();
    let set = overfit_set(cfg)?;
    let arch = ArchConfig::reconciled(id).narrowed(cfg.width_divisor);
    let mut net = build::<f32>(id, set.patch_shape().c, &arch, cfg.seed)?;
    let train = TrainConfig {
        optim: OptimConfig {
            learning_rate: cfg.learning_rate,
            batch_size: cfg.patches,
            ..OptimConfig::default()
        },
        seed: cfg.seed,
        deterministic: true,
        ..TrainConfig::default()
    };
    let mut trainer = Trainer::new(&mut net, train);
    let (mut f1, mut loss, mut epochs) = (0.0, f64::NAN, 0);
    for epoch in 1..=cfg.max_epochs {
        loss = trainer.train_epoch(&set)?;
        epochs = epoch;
        if epoch % cfg.eval_every.max(1) == 0 || epoch == cfg.max_epochs {
            f1 = training_f1(trainer.network(), &set)?;
            if f1 >= cfg.target_f1 {
                break;
            }
        }
    }
    Ok(OverfitResult {
        arch: id,
        epochs,
        f1,
        final_loss: loss,
        seconds: start.elapsed().as_secs_f64(),
    })
}
