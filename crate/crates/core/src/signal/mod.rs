//! Time-frequency front and back end: WAV ingestion, STFT analysis and
//! least-squares synthesis, band truncation, subsequence segmentation,
//! oracle ratio masks and Griffin-Lim phase reconstruction.

mod griffin_lim;
mod masks;
mod segment;
mod stft;
mod wav;

use serde::{Deserialize, Serialize};

pub use griffin_lim::{consistency_error, griffin_lim, griffin_lim_traced};
pub use masks::{irm_target, wiener_mask, RATIO_EPSILON};
pub use rustfft::num_complex::Complex64;
pub use segment::{overlap_concat, segment, slice_context, SequenceBatch};
pub use stft::{istft, magnitude, phase, stft, StftEngine};
pub use wav::{read_wav, write_wav};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// The only sample rate the separator accepts.
pub const SAMPLE_RATE: u32 = 44_100;

#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Parameter("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite sample at index {i}")));
        }
        Ok(AudioClip {
            samples,
            sample_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn require_rate(&self, expected: u32) -> Result<()> {
        if self.sample_rate != expected {
            return Err(Error::SampleRate {
                found: self.sample_rate,
                expected,
            });
        }
        Ok(())
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    /// Symmetric Hamming, `0.54 - 0.46 cos(2πn / (len - 1))`.
    Hamming,
}

impl WindowKind {
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            WindowKind::Hamming => {
                if len == 1 {
                    return vec![1.0];
                }
                let denom = (len - 1) as f64;
                (0..len)
                    .map(|n| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * n as f64 / denom).cos())
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StftConfig {
    pub win_len: usize,
    pub fft_len: usize,
    pub hop: usize,
    pub window: WindowKind,
}

impl StftConfig {
    /// 2049-sample Hamming frames, zero-padded to 4096, hop 384.
    pub fn paper() -> Self {
        StftConfig {
            win_len: 2049,
            fft_len: 4096,
            hop: 384,
            window: WindowKind::Hamming,
        }
    }

    pub fn desk() -> Self {
        StftConfig {
            win_len: 512,
            fft_len: 1024,
            hop: 128,
            window: WindowKind::Hamming,
        }
    }

    /// Number of retained non-negative frequency bins.
    pub fn n_bins(&self) -> usize {
        self.fft_len / 2 + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.win_len == 0 || self.win_len > self.fft_len {
            return Err(Error::Parameter(format!(
                "window length {} must be in 1..={}",
                self.win_len, self.fft_len
            )));
        }
        if self.hop == 0 || self.hop > self.win_len {
            return Err(Error::Parameter(format!(
                "hop {} must be in 1..={}",
                self.hop, self.win_len
            )));
        }
        Ok(())
    }

    /// Frame count for a signal of `len` samples after tail padding.
    pub fn frame_count(&self, len: usize) -> usize {
        if len <= self.win_len {
            1
        } else {
            1 + (len - self.win_len).div_ceil(self.hop)
        }
    }

    /// Signal length spanned by `frames` frames.
    pub fn padded_len(&self, frames: usize) -> usize {
        (frames.max(1) - 1) * self.hop + self.win_len
    }

    /// Centre frequency in Hz of `bin` at `sample_rate`.
    pub fn bin_frequency(&self, bin: usize, sample_rate: u32) -> f64 {
        bin as f64 * sample_rate as f64 / self.fft_len as f64
    }
}

/// Complex STFT, `frames × n_bins`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    data: Vec<Complex64>,
    frames: usize,
    config: StftConfig,
}

impl ComplexSpectrogram {
    pub fn new(data: Vec<Complex64>, frames: usize, config: StftConfig) -> Result<Self> {
        if data.len() != frames * config.n_bins() {
            return Err(Error::Dimension(format!(
                "{frames} frames of {} bins need {} values, got {}",
                config.n_bins(),
                frames * config.n_bins(),
                data.len()
            )));
        }
        if data.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Domain("non-finite spectrogram entry".into()));
        }
        Ok(ComplexSpectrogram {
            data,
            frames,
            config,
        })
    }

    /// Combines a magnitude and a phase matrix of equal shape.
    pub fn from_polar(mag: &MagnitudeSpectrogram, phase: &Matrix, config: StftConfig) -> Result<Self> {
        if mag.shape() != phase.shape() {
            return Err(Error::Dimension(format!(
                "magnitude {:?} vs phase {:?}",
                mag.shape(),
                phase.shape()
            )));
        }
        let data = mag
            .as_matrix()
            .as_slice()
            .iter()
            .zip(phase.as_slice())
            .map(|(&m, &p)| Complex64::from_polar(m, p))
            .collect();
        Self::new(data, mag.frames(), config)
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.config.n_bins()
    }

    pub fn config(&self) -> &StftConfig {
        &self.config
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn frame(&self, m: usize) -> &[Complex64] {
        let n = self.bins();
        &self.data[m * n..(m + 1) * n]
    }

    pub fn get(&self, m: usize, k: usize) -> Complex64 {
        self.data[m * self.bins() + k]
    }

    pub fn scaled(&self, c: Complex64) -> ComplexSpectrogram {
        ComplexSpectrogram {
            data: self.data.iter().map(|v| v * c).collect(),
            frames: self.frames,
            config: self.config,
        }
    }
}

/// Non-negative magnitude spectrogram, `frames × bins`.
#[derive(Debug, Clone, PartialEq)]
pub struct MagnitudeSpectrogram(Matrix);

impl MagnitudeSpectrogram {
    pub fn new(data: Matrix) -> Result<Self> {
        if let Some(v) = data.as_slice().iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::Domain(format!(
                "magnitude entries must be finite and non-negative, found {v}"
            )));
        }
        Ok(MagnitudeSpectrogram(data))
    }

    pub fn frames(&self) -> usize {
        self.0.rows()
    }

    pub fn bins(&self) -> usize {
        self.0.cols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }
}

/// Keeps the first `bands` frequency bins of every frame.
pub fn truncate_bands(mag: &MagnitudeSpectrogram, bands: usize) -> Result<MagnitudeSpectrogram> {
    if bands > mag.bins() {
        return Err(Error::Dimension(format!(
            "cannot keep {bands} bands of a {}-bin spectrogram",
            mag.bins()
        )));
    }
    Ok(MagnitudeSpectrogram(mag.0.leading_cols(bands)))
}
