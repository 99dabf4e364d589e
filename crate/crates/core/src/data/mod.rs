//! Raster stacks, tiling, fold plans, patch extraction, augmentation and
//! normalisation.

mod augment;
mod folds;
mod gather;
mod normalize;
mod patches;
mod raster;
mod tiles;

pub use augment::{augment, augment_in_place, AUGMENTATIONS};
pub use folds::{assign_folds, FoldPlan};
pub use gather::{gather_patches, split_validation};
pub use normalize::ChannelStats;
pub use patches::{
    extract_patches, inference_offsets, overlap_fraction, training_offsets, PatchRef, PatchRule, MAX_OVERLAP,
    MIN_DEFORESTATION_FRACTION, PATCH_SIZE, TRAIN_STRIDE,
};
pub use raster::{select_epochs, LabelRaster, RasterStack, TemporalMode, LABEL_DEFORESTATION, LABEL_NO_CHANGE, LABEL_PAST};
pub use tiles::{make_tiles, Tile, TileGrid, SCENE_TILE_H, SCENE_TILE_W};
