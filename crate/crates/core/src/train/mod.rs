//! Loss, optimiser, early stopping, the training loop and gradient checks.

mod adam;
mod dataset;
mod early_stop;
pub mod gradcheck;
mod history;
mod loss;
mod trainer;

pub use adam::{Adam, OptimConfig};
pub use dataset::{Batch, Dataset};
pub use early_stop::{EarlyStopping, StopDecision};
pub use gradcheck::{grad_check, GradCheckConfig, GradCheckReport};
pub use history::{EpochRecord, History};
pub use loss::{wcce_loss, LossConfig};
pub use trainer::{fit, predict, FitResult, TrainConfig, Trainer};
