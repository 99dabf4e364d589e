//! One cross-validation fold end to end: epoch selection, tiling,
//! normalisation fitted on training tiles, patch extraction, training and
//! mosaicked prediction of the held-out tiles.

use crate::arch::{build, ArchConfig, ArchitectureId, Network};
use crate::data::{
    assign_folds, extract_patches, gather_patches, inference_offsets, make_tiles, select_epochs, split_validation,
    ChannelStats, FoldPlan, LabelRaster, PatchRef, PatchRule, RasterStack, TemporalMode, TileGrid, AUGMENTATIONS,
};
use crate::error::{Error, Result};
use crate::formats::Checkpoint;
use crate::metrics::{threshold, ConfusionCounts, TileAccumulator};
use crate::tensor::{Shape, Tensor};
use crate::train::{fit, predict, Dataset, EpochRecord, FitResult, TrainConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct Experiment {
    pub arch: ArchitectureId,
    pub arch_config: ArchConfig,
    pub mode: TemporalMode,
    pub tile_h: usize,
    pub tile_w: usize,
    pub folds: usize,
    pub fold_seed: u64,
    pub patch_size: usize,
    /// Defaults to the smallest stride within the overlap cap.
    pub train_stride: Option<usize>,
    /// Stride of prediction windows; overlapping windows are averaged.
    pub eval_stride: usize,
    /// Expand each training patch into its eight dihedral transforms.
    pub augment: bool,
    pub val_fraction: f64,
    pub train: TrainConfig,
    pub init_seed: u64,
}

impl Experiment {
    pub fn new(arch: ArchitectureId, mode: TemporalMode) -> Self {
        Experiment {
            arch,
            arch_config: ArchConfig::reconciled(arch),
            mode,
            tile_h: crate::data::SCENE_TILE_H,
            tile_w: crate::data::SCENE_TILE_W,
            folds: 6,
            fold_seed: 0,
            patch_size: crate::data::PATCH_SIZE,
            train_stride: None,
            eval_stride: crate::data::PATCH_SIZE,
            augment: true,
            val_fraction: 0.2,
            train: TrainConfig::default(),
            init_seed: 0,
        }
    }

    pub fn grid(&self, stack: &RasterStack) -> Result<TileGrid> {
        make_tiles(stack.height, stack.width, self.tile_h, self.tile_w)
    }

    pub fn plan(&self, grid: &TileGrid) -> Result<FoldPlan> {
        assign_folds(grid.len(), self.folds, self.fold_seed)
    }

    fn patch_rule(&self) -> PatchRule {
        let mut rule = PatchRule::training(self.patch_size);
        if let Some(s) = self.train_stride {
            rule.stride = s;
        }
        rule
    }

    /// Training and validation patch windows drawn from `train_tiles`.
    pub fn training_patches(
        &self,
        grid: &TileGrid,
        labels: &LabelRaster,
        train_tiles: &[usize],
    ) -> (Vec<PatchRef>, Vec<PatchRef>) {
        let refs = extract_patches(grid, labels, train_tiles, &self.patch_rule());
        split_validation(&refs, self.val_fraction, self.fold_seed ^ 0x5eed)
    }

    fn dataset(&self, stack: &RasterStack, labels: &LabelRaster, grid: &TileGrid, refs: &[PatchRef], augment: bool) -> Result<Dataset> {
        let (images, lab) = gather_patches(stack, labels, grid, refs, self.patch_size)?;
        let augs = if augment { AUGMENTATIONS } else { 1 };
        let items = (0..refs.len()).flat_map(|i| (0..augs).map(move |a| (i, a))).collect();
        Dataset::new(images, lab, items)
    }

    /// Resolve the tile grid, fold plan and mode-selected stack.
    pub fn layout(&self, stack: &RasterStack) -> Result<(RasterStack, TileGrid, FoldPlan)> {
        let selected = select_epochs(stack, self.mode)?;
        let grid = self.grid(&selected)?;
        let plan = self.plan(&grid)?;
        Ok((selected, grid, plan))
    }

    /// Train on every tile outside `fold`. `stack` holds every
    /// acquisition; the mode selects from it.
    pub fn train_fold(
        &self,
        stack: &RasterStack,
        labels: &LabelRaster,
        fold: usize,
        on_epoch: impl FnMut(&EpochRecord),
    ) -> Result<TrainedFold> {
        let (selected, grid, plan) = self.layout(stack)?;
        if fold >= plan.folds {
            return Err(Error::Config(format!("fold {fold} outside 0..{}", plan.folds)));
        }
        let train_tiles = plan.train_tiles(fold);
        let stats = ChannelStats::from_tiles(&selected, &grid, &train_tiles)?;
        let normalized = stats.apply(&selected)?;
        let (train_refs, val_refs) = self.training_patches(&grid, labels, &train_tiles);
        if train_refs.is_empty() || val_refs.is_empty() {
            return Err(Error::invalid(
                "experiment",
                format!(
                    "fold {fold}: {} training and {} validation patches pass the class filter",
                    train_refs.len(),
                    val_refs.len()
                ),
            ));
        }
        let train_set = self.dataset(&normalized, labels, &grid, &train_refs, self.augment)?;
        let val_set = self.dataset(&normalized, labels, &grid, &val_refs, false)?;

        let mut net = build::<f32>(self.arch, selected.channels(), &self.arch_config, self.init_seed)?;
        let fit_result = fit(&mut net, &train_set, &val_set, &self.train, on_epoch)?;
        Ok(TrainedFold {
            fold,
            checkpoint: Checkpoint::from_network(&net, Some(stats)),
            fit: fit_result,
            train_patches: train_refs.len(),
            val_patches: val_refs.len(),
            test_tiles: plan.test_tiles(fold),
        })
    }

    /// Deforestation probabilities of the test tiles of `fold`, using the
    /// checkpoint's network and normalisation.
    pub fn predict_fold(&self, stack: &RasterStack, checkpoint: &Checkpoint, fold: usize) -> Result<Vec<(usize, Vec<f32>)>> {
        let (selected, grid, plan) = self.layout(stack)?;
        let stats = checkpoint
            .stats
            .as_ref()
            .ok_or_else(|| Error::invalid("predict", "checkpoint carries no normalisation statistics"))?;
        let normalized = stats.apply(&selected)?;
        let mut net = checkpoint.to_network()?;
        plan.test_tiles(fold)
            .into_iter()
            .map(|t| Ok((t, predict_tile(&mut net, &normalized, &grid, t, self.patch_size, self.eval_stride)?)))
            .collect()
    }

    /// Train, then predict and score the held-out tiles.
    pub fn run_fold(
        &self,
        stack: &RasterStack,
        labels: &LabelRaster,
        fold: usize,
        on_epoch: impl FnMut(&EpochRecord),
    ) -> Result<FoldRun> {
        let trained = self.train_fold(stack, labels, fold, on_epoch)?;
        let tile_probs = self.predict_fold(stack, &trained.checkpoint, fold)?;
        let grid = self.grid(stack)?;
        let mut counts = ConfusionCounts::default();
        for (t, probs) in &tile_probs {
            counts.accumulate(&threshold(probs), &tile_labels(labels, &grid, *t))?;
        }
        Ok(FoldRun {
            trained,
            tile_probs,
            counts,
        })
    }
}

#[derive(Clone, Debug)]
pub struct TrainedFold {
    pub fold: usize,
    pub checkpoint: Checkpoint,
    pub fit: FitResult,
    pub train_patches: usize,
    pub val_patches: usize,
    pub test_tiles: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct FoldRun {
    pub trained: TrainedFold,
    /// Averaged deforestation probability per test tile.
    pub tile_probs: Vec<(usize, Vec<f32>)>,
    pub counts: ConfusionCounts,
}

/// Reference codes of one tile, row-major.
pub fn tile_labels(labels: &LabelRaster, grid: &TileGrid, tile: usize) -> Vec<u8> {
    let t = grid.tile(tile);
    let mut out = Vec::with_capacity(grid.tile_h * grid.tile_w);
    for r in 0..grid.tile_h {
        let base = (t.row0 + r) * labels.width + t.col0;
        out.extend_from_slice(&labels.codes[base..base + grid.tile_w]);
    }
    out
}

/// Deforestation probability over one tile, averaging overlapping windows.
pub fn predict_tile(
    net: &mut Network<f32>,
    stack: &RasterStack,
    grid: &TileGrid,
    tile: usize,
    size: usize,
    stride: usize,
) -> Result<Vec<f32>> {
    let t = grid.tile(tile);
    let rows = inference_offsets(grid.tile_h, size, stride);
    let cols = inference_offsets(grid.tile_w, size, stride);
    if rows.is_empty() || cols.is_empty() {
        return Err(Error::invalid("predict", format!("tile {}x{} smaller than patch {size}", grid.tile_h, grid.tile_w)));
    }
    let windows: Vec<(usize, usize)> = rows.iter().flat_map(|&r| cols.iter().map(move |&c| (r, c))).collect();
    let channels = stack.channels();
    let mut acc = TileAccumulator::new(grid.tile_h, grid.tile_w);
    const BATCH: usize = 16;
    for chunk in windows.chunks(BATCH) {
        let mut data = Vec::with_capacity(chunk.len() * channels * size * size);
        for &(r, c) in chunk {
            for ch in 0..channels {
                let plane = stack.channel(ch);
                for i in 0..size {
                    let base = (t.row0 + r + i) * stack.width + t.col0 + c;
                    data.extend_from_slice(&plane[base..base + size]);
                }
            }
        }
        let x = Tensor::from_vec(Shape::new(chunk.len(), channels, size, size), data)?;
        let probs = predict(net, &x, BATCH)?;
        let plane = size * size;
        for (k, &(r, c)) in chunk.iter().enumerate() {
            let p = &probs.sample(k)[plane..2 * plane];
            acc.add_patch(r, c, size, p)?;
        }
    }
    acc.finish()
}
