#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use voxsep::signal::{AudioClip, SAMPLE_RATE};
use voxsep::training::Track;

pub const SECONDS: f64 = 3.0;

pub fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

/// Amplitude-modulated linear chirp sweeping 400 Hz to 800 Hz.
pub fn synth_voice(seconds: f64) -> Vec<f64> {
    let sr = SAMPLE_RATE as f64;
    let n = (seconds * sr) as usize;
    (0..n)
        .map(|i| {
            let t = i as f64 / sr;
            let phase = 2.0 * PI * (400.0 * t + 400.0 * t * t / (2.0 * seconds));
            let env = 0.6 + 0.4 * (2.0 * PI * 3.0 * t).sin();
            0.3 * env * phase.sin()
        })
        .collect()
}

/// High-passed white noise plus a 100 Hz tone.
pub fn synth_accompaniment(seconds: f64, seed: u64) -> Vec<f64> {
    let sr = SAMPLE_RATE as f64;
    let n = (seconds * sr) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let white: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    // Second-order Butterworth high-pass at 2 kHz (bilinear transform).
    let w0 = 2.0 * PI * 2000.0 / sr;
    let alpha = w0.sin() / (2.0 * std::f64::consts::FRAC_1_SQRT_2);
    let cos = w0.cos();
    let a0 = 1.0 + alpha;
    let b = [(1.0 + cos) / 2.0 / a0, -(1.0 + cos) / a0, (1.0 + cos) / 2.0 / a0];
    let a = [-2.0 * cos / a0, (1.0 - alpha) / a0];
    let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
    let mut noise = Vec::with_capacity(n);
    for &x in &white {
        let y = b[0] * x + b[1] * x1 + b[2] * x2 - a[0] * y1 - a[1] * y2;
        x2 = x1;
        x1 = x;
        y2 = y1;
        y1 = y;
        noise.push(y);
    }
    let g = 0.15 / rms(&noise);
    (0..n)
        .map(|i| g * noise[i] + 0.15 * (2.0 * PI * 100.0 * i as f64 / sr).sin())
        .collect()
}

pub fn synth_track(id: &str, seed: u64) -> Track {
    let v = AudioClip::new(synth_voice(SECONDS), SAMPLE_RATE).unwrap();
    let a = AudioClip::new(synth_accompaniment(SECONDS, seed), SAMPLE_RATE).unwrap();
    Track::new(id, v, a).unwrap()
}
