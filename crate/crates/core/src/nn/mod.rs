//! Sequence-network numerics in double precision: LSTM layers, a dense
//! layer, inverted dropout, MAE loss, Adam and a finite-difference oracle.

pub mod adam;
pub mod dense;
pub mod dropout;
pub mod gradcheck;
pub mod loss;
pub mod lstm;
pub mod params;
pub mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use dense::{dense_forward, DenseParams};
pub use dropout::{dropout_apply, dropout_mask, Mode};
pub use gradcheck::finite_diff_grad;
pub use loss::mae_loss;
pub use lstm::{lstm_cell_forward, lstm_sequence_forward, Gate, LstmLayerParams, LstmOutput};
pub use params::ParameterSet;
pub use tensor::{Matrix, Tensor3};
