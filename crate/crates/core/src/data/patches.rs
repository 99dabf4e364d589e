use super::raster::{LabelRaster, LABEL_DEFORESTATION};
use super::tiles::TileGrid;

pub const PATCH_SIZE: usize = 128;
/// Cap on the overlap of consecutive training patches.
pub const MAX_OVERLAP: f64 = 0.70;
/// Smallest stride that keeps 128-pixel patches within the overlap cap.
pub const TRAIN_STRIDE: usize = 39;
/// Share of a training patch that must be deforestation, counted over all
/// of its pixels.
pub const MIN_DEFORESTATION_FRACTION: f64 = 0.02;

/// A patch window inside one tile. `aug` selects a dihedral transform.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PatchRef {
    pub tile: usize,
    pub row: usize,
    pub col: usize,
    pub aug: u8,
}

/// Fraction of a patch shared with its neighbour `stride` pixels away.
pub fn overlap_fraction(size: usize, stride: usize) -> f64 {
    size.saturating_sub(stride) as f64 / size as f64
}

/// Smallest stride whose overlap stays within `max_overlap`.
pub fn min_stride(size: usize, max_overlap: f64) -> usize {
    (1..=size).find(|&s| overlap_fraction(size, s) <= max_overlap).unwrap_or(size)
}

/// Raster-scan offsets that never step closer than `stride`. The last
/// offset is moved to the tile edge when that keeps the spacing, or a new
/// edge offset is appended when there is room for it.
pub fn training_offsets(len: usize, size: usize, stride: usize) -> Vec<usize> {
    if len < size || stride == 0 {
        return Vec::new();
    }
    let end = len - size;
    let mut offs: Vec<usize> = (0..=end).step_by(stride).collect();
    let last = *offs.last().unwrap_or(&0);
    if last < end {
        if end - last >= stride {
            offs.push(end);
        } else if offs.len() >= 2 && end - offs[offs.len() - 2] >= stride {
            *offs.last_mut().unwrap() = end;
        }
    }
    offs
}

/// Offsets covering every pixel: a regular scan plus one patch snapped to
/// the edge if the scan falls short. Strides wider than the patch are
/// narrowed to it so no gap opens.
pub fn inference_offsets(len: usize, size: usize, stride: usize) -> Vec<usize> {
    if len < size || stride == 0 {
        return Vec::new();
    }
    let stride = stride.min(size);
    let end = len - size;
    let mut offs: Vec<usize> = (0..=end).step_by(stride).collect();
    if *offs.last().unwrap() < end {
        offs.push(end);
    }
    offs
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PatchRule {
    pub size: usize,
    pub stride: usize,
    /// Training windows respect the overlap spacing and the class filter;
    /// inference windows cover the tile.
    pub training: bool,
    pub min_deforestation: f64,
}

impl PatchRule {
    pub fn training(size: usize) -> Self {
        PatchRule {
            size,
            stride: min_stride(size, MAX_OVERLAP),
            training: true,
            min_deforestation: MIN_DEFORESTATION_FRACTION,
        }
    }

    pub fn inference(size: usize, stride: usize) -> Self {
        PatchRule {
            size,
            stride,
            training: false,
            min_deforestation: 0.0,
        }
    }
}

/// Patch windows of the given tiles, sorted by (tile, row, col).
pub fn extract_patches(grid: &TileGrid, labels: &LabelRaster, tiles: &[usize], rule: &PatchRule) -> Vec<PatchRef> {
    let offsets = |len| {
        if rule.training {
            training_offsets(len, rule.size, rule.stride)
        } else {
            inference_offsets(len, rule.size, rule.stride)
        }
    };
    let rows = offsets(grid.tile_h);
    let cols = offsets(grid.tile_w);
    let need = rule.min_deforestation * (rule.size * rule.size) as f64;
    let mut sorted = tiles.to_vec();
    sorted.sort_unstable();
    let mut out = Vec::new();
    for t in sorted {
        let tile = grid.tile(t);
        for &r in &rows {
            for &c in &cols {
                if rule.training {
                    let mut def = 0usize;
                    for i in 0..rule.size {
                        let base = (tile.row0 + r + i) * labels.width + tile.col0 + c;
                        def += labels.codes[base..base + rule.size]
                            .iter()
                            .filter(|&&y| y == LABEL_DEFORESTATION)
                            .count();
                    }
                    if (def as f64) < need {
                        continue;
                    }
                }
                out.push(PatchRef { tile: t, row: r, col: c, aug: 0 });
            }
        }
    }
    out
}
