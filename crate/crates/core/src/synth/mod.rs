//! Seeded generator of multitemporal two-polarisation backscatter scenes.
//!
//! Landcover comes from thresholded smooth noise: forest, pasture and
//! past clearings. Clearing events are contiguous forest blobs, each with
//! a single event time `t*` in `1..D`. The speckle-free level of an event
//! pixel drops by `drop_db` at `t*` and then recovers linearly towards the
//! forest level at `recovery_db` per step, so early events fade from late
//! acquisitions. Multiplicative gamma speckle with `looks` looks is applied
//! to linear intensities, and the result is stored in dB.
//!
//! All levels are parameters of this synthetic model only.

mod config;
mod generate;

pub use config::SceneConfig;
pub use generate::{describe, expected_db, generate, smooth_field, Cover, Scene};
