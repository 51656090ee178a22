use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::ModelDims;
use crate::signal::{irm_target, magnitude, read_wav, segment, slice_context, stft, AudioClip, StftConfig, SAMPLE_RATE};

/// One song: the isolated voice and the sum of everything else.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: String,
    pub voice: AudioClip,
    pub accompaniment: AudioClip,
}

impl Track {
    /// Truncates both stems to the shorter one.
    pub fn new(id: impl Into<String>, voice: AudioClip, accompaniment: AudioClip) -> Result<Self> {
        voice.require_rate(SAMPLE_RATE)?;
        accompaniment.require_rate(SAMPLE_RATE)?;
        let n = voice.len().min(accompaniment.len());
        let cut = |c: AudioClip| AudioClip::new(c.samples[..n].to_vec(), c.sample_rate);
        Ok(Track {
            id: id.into(),
            voice: cut(voice)?,
            accompaniment: cut(accompaniment)?,
        })
    }

    pub fn mixture(&self) -> AudioClip {
        let samples = self
            .voice
            .samples
            .iter()
            .zip(&self.accompaniment.samples)
            .map(|(v, a)| v + a)
            .collect();
        AudioClip {
            samples,
            sample_rate: self.voice.sample_rate,
        }
    }
}

/// Training subsequence: encoder input, full-band input and the
/// context-free target.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    /// `T × F`.
    pub mix_tr: Matrix,
    /// `T × N`.
    pub mix_in: Matrix,
    /// `(T − 2L) × N`.
    pub target: Matrix,
}

/// Cuts a track into training subsequences.
pub fn build_examples(track: &Track, stft_cfg: &StftConfig, dims: &ModelDims) -> Result<Vec<TrainingExample>> {
    if stft_cfg.n_bins() != dims.n_bins {
        return Err(Error::Dimension(format!(
            "STFT yields {} bins, model expects {}",
            stft_cfg.n_bins(),
            dims.n_bins
        )));
    }
    let mix = magnitude(&stft(&track.mixture(), stft_cfg)?);
    let voice = magnitude(&stft(&track.voice, stft_cfg)?);
    let accomp = magnitude(&stft(&track.accompaniment, stft_cfg)?);
    let target = irm_target(&voice, &accomp, &mix)?;

    let mix_seq = segment(&mix, dims.seq_len, dims.context, dims.bands)?;
    let target_seq = segment(&target, dims.seq_len, dims.context, dims.bands)?;
    mix_seq
        .trunc_input
        .into_iter()
        .zip(mix_seq.full_input)
        .zip(target_seq.full_input)
        .map(|((mix_tr, mix_in), t)| {
            Ok(TrainingExample {
                mix_tr,
                mix_in,
                target: slice_context(&t, dims.context)?,
            })
        })
        .collect()
}

const STEM_PARTS: [&str; 3] = ["bass.wav", "drums.wav", "other.wav"];

/// Reads `vocals.wav` and either `accompaniment.wav` or the sum of
/// `bass.wav`, `drums.wav` and `other.wav` from a track directory.
pub fn load_track(dir: &Path) -> Result<Track> {
    let id = dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string());
    let voice = read_wav(dir.join("vocals.wav"))?;
    let accomp_path = dir.join("accompaniment.wav");
    let accompaniment = if accomp_path.exists() {
        read_wav(&accomp_path)?
    } else {
        let parts = STEM_PARTS
            .iter()
            .map(|name| read_wav(dir.join(name)))
            .collect::<Result<Vec<_>>>()?;
        let rate = parts[0].sample_rate;
        if let Some(p) = parts.iter().find(|p| p.sample_rate != rate) {
            return Err(Error::SampleRate {
                found: p.sample_rate,
                expected: rate,
            });
        }
        let n = parts.iter().map(AudioClip::len).min().unwrap_or(0);
        let samples = (0..n).map(|i| parts.iter().map(|p| p.samples[i]).sum()).collect();
        AudioClip::new(samples, rate)?
    };
    Track::new(id, voice, accompaniment)
}

/// Loads every track directory (one sub-directory per track, sorted by name).
pub fn load_corpus(root: impl AsRef<Path>) -> Result<Vec<Track>> {
    let root = root.as_ref();
    let entries = std::fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut dirs: Vec<PathBuf> = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        let path = entry.path();
        if path.is_dir() {
            dirs.push(path);
        }
    }
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::Usage(format!("no track directories under {}", root.display())));
    }
    dirs.iter().map(|d| load_track(d)).collect()
}
