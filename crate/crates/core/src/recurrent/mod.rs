//! Recurrent building blocks unrolled over a fixed number of steps, with
//! backpropagation through time.

mod convlstm;
mod rcl;
mod rclstm;

pub use convlstm::{convlstm_step, ConvLstmCell, ConvLstmUnit, LstmState};
pub use rcl::{Rcl, RclConfig, Rrcu};
pub use rclstm::{LstmInput, RclstmBlock, RclstmConfig, SingleConvLstmBlock};
