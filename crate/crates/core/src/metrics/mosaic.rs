use crate::data::{TileGrid, LABEL_DEFORESTATION, LABEL_NO_CHANGE};
use crate::error::{Error, Result};

/// Deforestation is predicted where its averaged probability exceeds this.
pub const DECISION_THRESHOLD: f32 = 0.5;

pub fn threshold(prob_deforestation: &[f32]) -> Vec<u8> {
    prob_deforestation
        .iter()
        .map(|&p| if p > DECISION_THRESHOLD { LABEL_DEFORESTATION } else { LABEL_NO_CHANGE })
        .collect()
}

/// Averages deforestation probabilities of overlapping patches in a tile.
#[derive(Clone, Debug)]
pub struct TileAccumulator {
    height: usize,
    width: usize,
    sum: Vec<f64>,
    count: Vec<u32>,
}

impl TileAccumulator {
    pub fn new(height: usize, width: usize) -> Self {
        TileAccumulator {
            height,
            width,
            sum: vec![0.0; height * width],
            count: vec![0; height * width],
        }
    }

    /// Add a square patch of probabilities with its top-left corner at
    /// `(row, col)`.
    pub fn add_patch(&mut self, row: usize, col: usize, size: usize, probs: &[f32]) -> Result<()> {
        if probs.len() != size * size {
            return Err(Error::dim("mosaic", "pixel", size * size, probs.len()));
        }
        if row + size > self.height || col + size > self.width {
            return Err(Error::invalid("mosaic", format!("patch at ({row}, {col}) leaves the tile")));
        }
        for i in 0..size {
            let base = (row + i) * self.width + col;
            for j in 0..size {
                self.sum[base + j] += f64::from(probs[i * size + j]);
                self.count[base + j] += 1;
            }
        }
        Ok(())
    }

    /// Mean probability per pixel; every pixel must have been covered.
    pub fn finish(self) -> Result<Vec<f32>> {
        if let Some(q) = self.count.iter().position(|&c| c == 0) {
            return Err(Error::invalid(
                "mosaic",
                format!("tile pixel ({}, {}) not covered by any patch", q / self.width, q % self.width),
            ));
        }
        Ok(self.sum.iter().zip(&self.count).map(|(&s, &c)| (s / f64::from(c)) as f32).collect())
    }
}

/// Scene assembled from per-tile probability rasters.
#[derive(Clone, Debug)]
pub struct Mosaic {
    grid: TileGrid,
    tiles: Vec<Option<Vec<f32>>>,
}

impl Mosaic {
    pub fn new(grid: TileGrid) -> Self {
        Mosaic {
            tiles: vec![None; grid.len()],
            grid,
        }
    }

    pub fn insert(&mut self, tile: usize, probs: Vec<f32>) -> Result<()> {
        if tile >= self.grid.len() {
            return Err(Error::invalid("mosaic", format!("tile {tile} outside grid")));
        }
        if probs.len() != self.grid.tile_h * self.grid.tile_w {
            return Err(Error::dim("mosaic", "pixel", self.grid.tile_h * self.grid.tile_w, probs.len()));
        }
        if self.tiles[tile].is_some() {
            return Err(Error::invalid("mosaic", format!("tile {tile} predicted twice")));
        }
        self.tiles[tile] = Some(probs);
        Ok(())
    }

    pub fn height(&self) -> usize {
        self.grid.rows * self.grid.tile_h
    }

    pub fn width(&self) -> usize {
        self.grid.cols * self.grid.tile_w
    }

    /// Probability raster over the tiled area (margins excluded).
    pub fn assemble(&self) -> Result<Vec<f32>> {
        let (h, w) = (self.height(), self.width());
        let mut out = vec![0f32; h * w];
        for t in self.grid.tiles() {
            let probs = self.tiles[t.id].as_ref().ok_or(Error::MissingTile {
                row: t.grid_row,
                col: t.grid_col,
            })?;
            for r in 0..self.grid.tile_h {
                let dst = (t.row0 + r) * w + t.col0;
                out[dst..dst + self.grid.tile_w].copy_from_slice(&probs[r * self.grid.tile_w..(r + 1) * self.grid.tile_w]);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::make_tiles;

    #[test]
    fn overlapping_patches_average() {
        let mut acc = TileAccumulator::new(1, 3);
        acc.add_patch(0, 0, 1, &[0.4]).unwrap();
        acc.add_patch(0, 0, 1, &[0.8]).unwrap();
        acc.add_patch(0, 1, 1, &[0.2]).unwrap();
        acc.add_patch(0, 2, 1, &[0.5]).unwrap();
        let p = acc.finish().unwrap();
        assert!((p[0] - 0.6).abs() < 1e-7);
        assert_eq!(threshold(&p), vec![1, 0, 0]);
    }

    #[test]
    fn missing_tile_is_named() {
        let g = make_tiles(4, 4, 2, 2).unwrap();
        let mut m = Mosaic::new(g);
        for t in [0, 1, 2] {
            m.insert(t, vec![t as f32; 4]).unwrap();
        }
        match m.assemble().unwrap_err() {
            Error::MissingTile { row, col } => assert_eq!((row, col), (1, 1)),
            e => panic!("{e}"),
        }
        m.insert(3, vec![3.0; 4]).unwrap();
        let out = m.assemble().unwrap();
        assert_eq!(out, vec![0., 0., 1., 1., 0., 0., 1., 1., 2., 2., 3., 3., 2., 2., 3., 3.]);
    }
}
