//! Confusion counts, precision/recall/F1, mosaicking of overlapping patch
//! predictions and change-map rendering.

mod changemap;
mod confusion;
mod mosaic;

pub use changemap::{read_png_rgb, ChangeCategory, ChangeMap};
pub use confusion::{ConfusionCounts, Scores};
pub use mosaic::{threshold, Mosaic, TileAccumulator, DECISION_THRESHOLD};
