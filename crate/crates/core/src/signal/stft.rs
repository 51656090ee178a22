use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use super::{AudioClip, Complex64, ComplexSpectrogram, MagnitudeSpectrogram, StftConfig, SAMPLE_RATE};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Squared-window envelope values below this are left undivided in synthesis.
const ENVELOPE_FLOOR: f64 = 1e-10;

/// Planned forward/inverse transforms for one [`StftConfig`].
///
/// Reuse an engine when running many transforms with the same configuration
/// (Griffin-Lim does); the free functions [`stft`] and [`istft`] plan afresh.
#[derive(Clone)]
pub struct StftEngine {
    config: StftConfig,
    window: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl StftEngine {
    pub fn new(config: StftConfig) -> Result<Self> {
        config.validate()?;
        let mut planner = FftPlanner::new();
        Ok(StftEngine {
            window: config.window.coefficients(config.win_len),
            forward: planner.plan_fft_forward(config.fft_len),
            inverse: planner.plan_fft_inverse(config.fft_len),
            config,
        })
    }

    pub fn config(&self) -> &StftConfig {
        &self.config
    }

    pub fn analyze(&self, samples: &[f64]) -> Result<ComplexSpectrogram> {
        let cfg = &self.config;
        if samples.len() < cfg.hop {
            return Err(Error::Parameter(format!(
                "signal of {} samples is shorter than one hop ({})",
                samples.len(),
                cfg.hop
            )));
        }
        let frames = cfg.frame_count(samples.len());
        let bins = cfg.n_bins();
        let mut out = Vec::with_capacity(frames * bins);
        let mut buf = vec![Complex64::new(0.0, 0.0); cfg.fft_len];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.forward.get_inplace_scratch_len()];
        for m in 0..frames {
            let start = m * cfg.hop;
            buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
            for (n, w) in self.window.iter().enumerate() {
                let x = samples.get(start + n).copied().unwrap_or(0.0);
                buf[n] = Complex64::new(w * x, 0.0);
            }
            self.forward.process_with_scratch(&mut buf, &mut scratch);
            out.extend_from_slice(&buf[..bins]);
        }
        ComplexSpectrogram::new(out, frames, *cfg)
    }

    /// Least-squares overlap-add synthesis. The output spans every frame:
    /// `(frames - 1) * hop + win_len` samples.
    pub fn synthesize(&self, spec: &ComplexSpectrogram) -> Result<Vec<f64>> {
        let cfg = &self.config;
        if spec.config() != cfg {
            return Err(Error::Dimension(format!(
                "spectrogram config {:?} does not match engine config {:?}",
                spec.config(),
                cfg
            )));
        }
        let frames = spec.frames();
        let len = cfg.padded_len(frames);
        let mut out = vec![0.0; len];
        let mut envelope = vec![0.0; len];
        let n_fft = cfg.fft_len;
        let half = n_fft / 2;
        let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.inverse.get_inplace_scratch_len()];
        let norm = 1.0 / n_fft as f64;
        for m in 0..frames {
            let frame = spec.frame(m);
            buf[..=half].copy_from_slice(&frame[..=half]);
            for k in 1..half {
                buf[n_fft - k] = frame[k].conj();
            }
            self.inverse.process_with_scratch(&mut buf, &mut scratch);
            let start = m * cfg.hop;
            for (n, w) in self.window.iter().enumerate() {
                out[start + n] += w * buf[n].re * norm;
                envelope[start + n] += w * w;
            }
        }
        for (x, e) in out.iter_mut().zip(&envelope) {
            if *e >= ENVELOPE_FLOOR {
                *x /= e;
            }
        }
        Ok(out)
    }
}

/// Hamming-windowed, zero-padded STFT keeping the non-negative frequencies.
/// The signal tail is zero-padded so every sample lies in at least one frame.
pub fn stft(clip: &AudioClip, cfg: &StftConfig) -> Result<ComplexSpectrogram> {
    StftEngine::new(*cfg)?.analyze(&clip.samples)
}

pub fn istft(spec: &ComplexSpectrogram, cfg: &StftConfig) -> Result<AudioClip> {
    let samples = StftEngine::new(*cfg)?.synthesize(spec)?;
    AudioClip::new(samples, SAMPLE_RATE)
}

pub fn magnitude(spec: &ComplexSpectrogram) -> MagnitudeSpectrogram {
    let data = spec.as_slice().iter().map(|c| c.norm()).collect();
    MagnitudeSpectrogram::new(
        Matrix::from_vec(spec.frames(), spec.bins(), data).expect("shape from spectrogram"),
    )
    .expect("moduli are non-negative")
}

/// Per-entry phase angle in radians.
pub fn phase(spec: &ComplexSpectrogram) -> Matrix {
    let data = spec.as_slice().iter().map(|c| c.arg()).collect();
    Matrix::from_vec(spec.frames(), spec.bins(), data).expect("shape from spectrogram")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise(len: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    fn clip(samples: Vec<f64>) -> AudioClip {
        AudioClip::new(samples, SAMPLE_RATE).unwrap()
    }

    #[test]
    fn zeros_in_zeros_out() {
        let cfg = StftConfig::desk();
        let spec = stft(&clip(vec![0.0; 3000]), &cfg).unwrap();
        assert!(spec.as_slice().iter().all(|c| c.norm() == 0.0));
        let back = istft(&spec, &cfg).unwrap();
        assert!(back.samples.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn one_window_gives_one_frame() {
        let cfg = StftConfig::paper();
        let spec = stft(&clip(noise(2049, 3)), &cfg).unwrap();
        assert_eq!(spec.frames(), 1);
        assert_eq!(spec.bins(), 2049);
    }

    #[test]
    fn shorter_than_hop_is_rejected() {
        let cfg = StftConfig::paper();
        assert!(stft(&clip(noise(383, 3)), &cfg).is_err());
        // between one hop and one window: padded to a single frame
        assert_eq!(stft(&clip(noise(384, 3)), &cfg).unwrap().frames(), 1);
    }

    #[test]
    fn sine_peaks_at_expected_bin() {
        let cfg = StftConfig::paper();
        let x: Vec<f64> = (0..44_100)
            .map(|n| (2.0 * std::f64::consts::PI * 1000.0 * n as f64 / 44_100.0).sin())
            .collect();
        let mag = magnitude(&stft(&clip(x), &cfg).unwrap());
        // (1000 * 4096 / 44100).round() == 93
        let full_frames = (44_100 - 2049) / 384;
        for m in 0..full_frames {
            let row = mag.as_matrix().row(m);
            let argmax = (0..row.len())
                .max_by(|&a, &b| row[a].total_cmp(&row[b]))
                .unwrap();
            assert_eq!(argmax, 93, "frame {m}");
        }
    }

    #[test]
    fn round_trip_is_exact_up_to_rounding() {
        for cfg in [StftConfig::paper(), StftConfig::desk()] {
            let x = noise(3 * cfg.win_len + 777, 11);
            let spec = stft(&clip(x.clone()), &cfg).unwrap();
            let y = istft(&spec, &cfg).unwrap().samples;
            assert!(y.len() >= x.len());
            let (num, den) = x
                .iter()
                .zip(&y)
                .fold((0.0, 0.0), |(n, d), (a, b)| (n + (a - b).powi(2), d + a * a));
            assert!((num / den).sqrt() < 1e-6);
            // tail padding reconstructs as silence
            assert!(y[x.len()..].iter().all(|v| v.abs() < 1e-9));
        }
    }

    #[test]
    fn magnitude_ignores_global_phase() {
        let cfg = StftConfig::desk();
        let spec = stft(&clip(noise(4000, 5)), &cfg).unwrap();
        let rotated = spec.scaled(Complex64::from_polar(1.0, 0.7));
        let a = magnitude(&spec);
        let b = magnitude(&rotated);
        let diff = a
            .as_matrix()
            .as_slice()
            .iter()
            .zip(b.as_matrix().as_slice())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-9);
    }

    #[test]
    fn modulus_of_3_4i_is_5() {
        let cfg = StftConfig {
            win_len: 2,
            fft_len: 2,
            hop: 1,
            window: super::super::WindowKind::Hamming,
        };
        let spec = ComplexSpectrogram::new(
            vec![Complex64::new(3.0, 4.0), Complex64::new(0.0, 0.0)],
            1,
            cfg,
        )
        .unwrap();
        assert_eq!(magnitude(&spec).as_matrix().as_slice(), &[5.0, 0.0]);
    }

    #[test]
    fn mismatched_config_is_rejected() {
        let spec = stft(&clip(noise(3000, 1)), &StftConfig::desk()).unwrap();
        assert!(istft(&spec, &StftConfig::paper()).is_err());
    }
}
