//! Unsupervised anomaly detection for beam-monitor time series.
//!
//! An LSTM autoencoder learns to reconstruct windows of normal monitor data
//! (wiresum, x and y position). Windows whose reconstruction error exceeds
//! `mean + 3σ` of the training errors are flagged, and flagged points are
//! scored against fault ground truth with a lead-window matching rule.
//!
//! ```
//! use orbitwatch::autoencoder::{init_model, reconstruction_errors, AutoencoderConfig};
//! use orbitwatch::nn::Tensor3;
//!
//! let cfg = AutoencoderConfig { window_k: 5, feature_m: 2, hidden_dim: 4, ..Default::default() };
//! let model = init_model(&cfg).unwrap();
//! let windows = Tensor3::zeros(3, 5, 2);
//! assert_eq!(reconstruction_errors(&model, &windows).unwrap().len(), 3);
//! ```

pub mod autoencoder;
pub mod data;
pub mod detect;
pub mod error;
pub mod ground_truth;
pub mod io;
pub mod nn;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};

// Compile and run the guide's code listings as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/lstm.md")]
    mod lstm {}
    #[doc = include_str!("../../../book/src/autoencoder.md")]
    mod autoencoder {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/preprocessing.md")]
    mod preprocessing {}
    #[doc = include_str!("../../../book/src/ground-truth.md")]
    mod ground_truth {}
    #[doc = include_str!("../../../book/src/detection.md")]
    mod detection {}
    #[doc = include_str!("../../../book/src/synthetic.md")]
    mod synthetic {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
