use crate::error::{Error, Result};

/// Tile rows of the reference scene (its 961-pixel side runs along the
/// scene height).
pub const SCENE_TILE_H: usize = 961;
pub const SCENE_TILE_W: usize = 932;

/// Non-overlapping grid of equal tiles anchored at the top-left corner.
/// Pixels beyond the last full tile are truncated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TileGrid {
    pub tile_h: usize,
    pub tile_w: usize,
    pub rows: usize,
    pub cols: usize,
    /// Truncated rows at the bottom.
    pub margin_h: usize,
    /// Truncated columns at the right.
    pub margin_w: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Tile {
    pub id: usize,
    pub grid_row: usize,
    pub grid_col: usize,
    pub row0: usize,
    pub col0: usize,
}

pub fn make_tiles(height: usize, width: usize, tile_h: usize, tile_w: usize) -> Result<TileGrid> {
    if tile_h == 0 || tile_w == 0 {
        return Err(Error::invalid("make_tiles", "tile size must be positive"));
    }
    if height < tile_h || width < tile_w {
        return Err(Error::invalid(
            "make_tiles",
            format!("raster {height}x{width} is smaller than one {tile_h}x{tile_w} tile"),
        ));
    }
    let rows = height / tile_h;
    let cols = width / tile_w;
    Ok(TileGrid {
        tile_h,
        tile_w,
        rows,
        cols,
        margin_h: height - rows * tile_h,
        margin_w: width - cols * tile_w,
    })
}

impl TileGrid {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Tiles are numbered row-major.
    pub fn tile(&self, id: usize) -> Tile {
        let (grid_row, grid_col) = (id / self.cols, id % self.cols);
        Tile {
            id,
            grid_row,
            grid_col,
            row0: grid_row * self.tile_h,
            col0: grid_col * self.tile_w,
        }
    }

    pub fn tiles(&self) -> impl Iterator<Item = Tile> + '_ {
        (0..self.len()).map(|i| self.tile(i))
    }
}
