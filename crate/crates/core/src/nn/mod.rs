//! From-scratch neural toolkit: dense layers, an LSTM cell with BPTT, Adam,
//! and a finite-difference gradient checker. Double precision throughout so
//! gradient checks are meaningful.

mod adam;
mod check;
mod lstm;
mod mlp;
mod params;

pub use adam::{adam_step, AdamHyper, AdamState};
pub use check::grad_check;
pub use lstm::{init_lstm_params, lstm_backward, lstm_forward, LstmCache, LstmConfig};
pub use mlp::{init_mlp_params, mlp_backward, mlp_forward, Activation, MlpCache, MlpConfig};
pub use params::{ParamStore, Tensor};

/// Global-norm clip applied inside both training loops.
pub const GRAD_CLIP_NORM: f64 = 10.0;
