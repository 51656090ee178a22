//! Monaural singing-voice separation.
//!
//! A band-limited bi-directional GRU encoder feeds a GRU decoder that is
//! re-applied to its own output until consecutive states agree (recurrent
//! inference). A ReLU head turns the decoder states into a sparse
//! time-frequency mask that filters the mixture magnitude directly
//! (skip-filtering), and a feed-forward denoiser refines the result. Phase is
//! recovered with Griffin-Lim seeded from the mixture.
//!
//! Modules, bottom-up:
//! - [`signal`]: WAV I/O, STFT/iSTFT, segmentation, ratio masks, Griffin-Lim
//! - [`nn`]: tape-based reverse-mode autodiff, GRU, initialisers, Adam
//! - [`model`]: masker and denoiser forward pass
//! - [`training`]: objective, dataset assembly, training loop, checkpoints,
//!   end-to-end separation
//! - [`eval`]: projection-based SDR/SIR and median reports
//! - [`config`] and [`cli`]: run configuration and the command-line front end

pub mod error;
pub mod matrix;
pub mod nn;
pub mod model;
pub mod signal;
pub mod training;
pub mod eval;
pub mod config;
pub mod cli;

pub use error::{Error, Result};
pub use matrix::Matrix;
