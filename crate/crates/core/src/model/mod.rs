//! The masker (bi-GRU encoder, recurrent-inference decoder, sparse mask head,
//! skip-filtering) and the denoiser, as one differentiable forward pass.

mod forward;
mod params;

pub use forward::{
    decode, denoise, encode, forward, infer, mean_squared_difference, predict_mask, recurrent_inference,
    skip_filter, ForwardOutput, ForwardTrace, RecurrentInference,
};
pub use params::{DenoiserParams, DenoiserVars, MaskerParams, MaskerVars, ModelParams, ModelVars};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spectrogram and sequence dimensions the parameters are built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    /// Full-band bin count `N`.
    pub n_bins: usize,
    /// Encoder band count `F` (leading bins kept).
    pub bands: usize,
    /// Subsequence length `T`.
    pub seq_len: usize,
    /// Context frames `L` dropped at each end.
    pub context: usize,
}

impl ModelDims {
    pub fn paper() -> Self {
        ModelDims {
            n_bins: 2049,
            bands: 744,
            seq_len: 60,
            context: 10,
        }
    }

    pub fn desk() -> Self {
        ModelDims {
            n_bins: 513,
            bands: 186,
            seq_len: 30,
            context: 5,
        }
    }

    /// Frames surviving context removal, `T − 2L`.
    pub fn kept_frames(&self) -> usize {
        self.seq_len - 2 * self.context
    }

    pub fn validate(&self) -> Result<()> {
        if self.bands == 0 || self.bands > self.n_bins {
            return Err(Error::Parameter(format!(
                "band count {} must be in 1..={}",
                self.bands, self.n_bins
            )));
        }
        if self.seq_len <= 2 * self.context {
            return Err(Error::Parameter(format!(
                "sequence length {} must exceed twice the context {}",
                self.seq_len, self.context
            )));
        }
        if self.n_bins < 2 {
            return Err(Error::Parameter("need at least two frequency bins".into()));
        }
        Ok(())
    }
}

/// Decoder depth control.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InferenceConfig {
    pub use_recurrent_inference: bool,
    /// Maximum loop iterations.
    pub iter: usize,
    /// Mean-squared-difference threshold below which the loop stops.
    pub tau_term: f64,
}

impl InferenceConfig {
    /// Single decoder application.
    pub fn nri() -> Self {
        InferenceConfig {
            use_recurrent_inference: false,
            iter: 1,
            tau_term: 0.0,
        }
    }

    pub fn ris_s() -> Self {
        InferenceConfig {
            use_recurrent_inference: true,
            iter: 3,
            tau_term: 1e-2,
        }
    }

    pub fn ris_l() -> Self {
        InferenceConfig {
            use_recurrent_inference: true,
            iter: 10,
            tau_term: 1e-3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.use_recurrent_inference && self.iter == 0 {
            return Err(Error::Parameter(
                "recurrent inference needs at least one iteration".into(),
            ));
        }
        if self.tau_term.is_nan() || self.tau_term < 0.0 {
            return Err(Error::Parameter(format!(
                "tau_term must be non-negative, got {}",
                self.tau_term
            )));
        }
        Ok(())
    }
}
