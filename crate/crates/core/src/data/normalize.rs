use super::raster::RasterStack;
use super::tiles::TileGrid;
use crate::error::{Error, Result};

pub const STD_FLOOR: f64 = 1e-6;

/// Per-channel mean and standard deviation from training pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Channels whose deviation was raised to the floor.
    pub floored: Vec<bool>,
}

impl ChannelStats {
    /// Statistics over the pixels of `tiles` only.
    pub fn from_tiles(stack: &RasterStack, grid: &TileGrid, tiles: &[usize]) -> Result<Self> {
        if tiles.is_empty() {
            return Err(Error::invalid("normalize", "no training tiles"));
        }
        let channels = stack.channels();
        let mut mean = Vec::with_capacity(channels);
        let mut std = Vec::with_capacity(channels);
        let mut floored = Vec::with_capacity(channels);
        let count = (tiles.len() * grid.tile_h * grid.tile_w) as f64;
        for ch in 0..channels {
            let plane = stack.channel(ch);
            let pixels = || {
                tiles.iter().flat_map(move |&t| {
                    let tile = grid.tile(t);
                    (0..grid.tile_h).flat_map(move |r| {
                        let base = (tile.row0 + r) * stack.width + tile.col0;
                        plane[base..base + grid.tile_w].iter().map(|&v| f64::from(v))
                    })
                })
            };
            let m = pixels().sum::<f64>() / count;
            let var = pixels().map(|v| (v - m) * (v - m)).sum::<f64>() / count;
            let s = var.sqrt();
            mean.push(m);
            floored.push(s < STD_FLOOR);
            std.push(s.max(STD_FLOOR));
        }
        Ok(ChannelStats { mean, std, floored })
    }

    pub fn any_floored(&self) -> bool {
        self.floored.iter().any(|&f| f)
    }

    pub fn apply(&self, stack: &RasterStack) -> Result<RasterStack> {
        if stack.channels() != self.mean.len() {
            return Err(Error::dim("normalize", "channel", self.mean.len(), stack.channels()));
        }
        let plane = stack.plane();
        let mut data = stack.data.clone();
        for (c, chunk) in data.chunks_mut(plane).enumerate() {
            let (m, s) = (self.mean[c], self.std[c]);
            chunk.iter_mut().for_each(|v| *v = ((f64::from(*v) - m) / s) as f32);
        }
        RasterStack::new(stack.height, stack.width, data, stack.tags.clone())
    }
}
