use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::patches::PatchRef;
use super::raster::{LabelRaster, RasterStack};
use super::tiles::TileGrid;
use crate::error::{Error, Result};
use crate::tensor::{Shape, Tensor};

/// Copy the unaugmented windows into a `(n, c, size, size)` tensor and
/// `(n, size, size)` labels.
pub fn gather_patches(
    stack: &RasterStack,
    labels: &LabelRaster,
    grid: &TileGrid,
    refs: &[PatchRef],
    size: usize,
) -> Result<(Tensor<f32>, Vec<u8>)> {
    if refs.is_empty() {
        return Err(Error::invalid("gather_patches", "no patches"));
    }
    if (labels.height, labels.width) != (stack.height, stack.width) {
        return Err(Error::dim("gather_patches", "row", stack.height, labels.height));
    }
    let c = stack.channels();
    let mut data = Vec::with_capacity(refs.len() * c * size * size);
    let mut lab = Vec::with_capacity(refs.len() * size * size);
    for p in refs {
        let tile = grid.tile(p.tile);
        if p.row + size > grid.tile_h || p.col + size > grid.tile_w {
            return Err(Error::invalid("gather_patches", format!("{p:?} leaves its tile")));
        }
        let (r0, c0) = (tile.row0 + p.row, tile.col0 + p.col);
        for ch in 0..c {
            let plane = stack.channel(ch);
            for r in r0..r0 + size {
                data.extend_from_slice(&plane[r * stack.width + c0..r * stack.width + c0 + size]);
            }
        }
        for r in r0..r0 + size {
            lab.extend_from_slice(&labels.codes[r * labels.width + c0..r * labels.width + c0 + size]);
        }
    }
    Ok((Tensor::from_vec(Shape::new(refs.len(), c, size, size), data)?, lab))
}

/// Per tile, move a seeded `fraction` of the patches to validation.
pub fn split_validation(refs: &[PatchRef], fraction: f64, seed: u64) -> (Vec<PatchRef>, Vec<PatchRef>) {
    let mut by_tile: BTreeMap<usize, Vec<PatchRef>> = BTreeMap::new();
    for p in refs {
        by_tile.entry(p.tile).or_default().push(*p);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for (_, mut group) in by_tile {
        group.shuffle(&mut rng);
        let k = (group.len() as f64 * fraction).round() as usize;
        val.extend_from_slice(&group[..k]);
        train.extend_from_slice(&group[k..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}
