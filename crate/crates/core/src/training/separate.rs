use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::model::{infer, ModelParams};
use crate::signal::{griffin_lim, istft, magnitude, overlap_concat, phase, segment, stft, AudioClip, SAMPLE_RATE};

/// Estimated voice and per-subsequence decoder iteration counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Separation {
    pub voice: AudioClip,
    pub ri_iterations: Vec<usize>,
}

impl Separation {
    pub fn mean_ri_iterations(&self) -> f64 {
        if self.ri_iterations.is_empty() {
            return 0.0;
        }
        self.ri_iterations.iter().sum::<usize>() as f64 / self.ri_iterations.len() as f64
    }
}

/// Mixture in, voice estimate out. The output has the input's length.
pub fn separate(mixture: &AudioClip, params: &ModelParams, cfg: &RunConfig) -> Result<Separation> {
    mixture.require_rate(SAMPLE_RATE)?;
    cfg.validate()?;
    if params.dims != cfg.model {
        return Err(Error::Dimension(format!(
            "parameters are built for {:?}, configuration says {:?}",
            params.dims, cfg.model
        )));
    }
    let dims = &cfg.model;
    let spec = stft(mixture, &cfg.stft)?;
    let mag = magnitude(&spec);
    let mix_phase = phase(&spec);
    let seq = segment(&mag, dims.seq_len, dims.context, dims.bands)?;
    let outputs = seq
        .trunc_input
        .par_iter()
        .zip(seq.full_input.par_iter())
        .map(|(tr, full)| infer(params, tr, full, &cfg.inference))
        .collect::<Result<Vec<_>>>()?;
    let ri_iterations = outputs.iter().map(|o| o.ri_iterations_used).collect();
    let blocks: Vec<_> = outputs.into_iter().map(|o| o.denoised).collect();
    let estimate = overlap_concat(&blocks, mag.frames())?;
    let voice_spec = griffin_lim(&estimate, &mix_phase, cfg.griffin_lim_iters, &cfg.stft)?;
    let mut voice = istft(&voice_spec, &cfg.stft)?;
    voice.samples.resize(mixture.len(), 0.0);
    if voice.samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("separated signal contains non-finite samples".into()));
    }
    Ok(Separation { voice, ri_iterations })
}
