//! The six network layouts, their parameter accounting and the
//! reconciliation of implemented counts against published targets.

mod config;
mod count;
mod network;
pub mod reconcile;

pub use config::{ArchConfig, ArchitectureId, DecoderOrder};
pub use count::closed_form_count;
pub use network::{build, param_count, Network};
