use super::{magnitude, phase, ComplexSpectrogram, MagnitudeSpectrogram, StftConfig, StftEngine};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Projects `spec` onto the set of consistent spectrograms (analysis of its
/// least-squares resynthesis).
fn project(engine: &StftEngine, spec: &ComplexSpectrogram) -> Result<ComplexSpectrogram> {
    let signal = engine.synthesize(spec)?;
    let out = engine.analyze(&signal)?;
    debug_assert_eq!(out.frames(), spec.frames());
    Ok(out)
}

fn frobenius_gap(a: &MagnitudeSpectrogram, b: &MagnitudeSpectrogram) -> f64 {
    a.as_matrix()
        .as_slice()
        .iter()
        .zip(b.as_matrix().as_slice())
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// `‖ |stft(istft(spec))| − mag ‖_F`.
pub fn consistency_error(spec: &ComplexSpectrogram, mag: &MagnitudeSpectrogram) -> Result<f64> {
    let engine = StftEngine::new(*spec.config())?;
    let projected = project(&engine, spec)?;
    Ok(frobenius_gap(&magnitude(&projected), mag))
}

/// Griffin-Lim phase reconstruction seeded with `init_phase`.
///
/// Returns `mag ⊙ e^{iφ}` after `iters` phase updates; `iters == 0` returns
/// the seed spectrogram unchanged.
pub fn griffin_lim(
    mag: &MagnitudeSpectrogram,
    init_phase: &Matrix,
    iters: usize,
    cfg: &StftConfig,
) -> Result<ComplexSpectrogram> {
    run(mag, init_phase, iters, cfg, false).map(|(spec, _)| spec)
}

/// Like [`griffin_lim`], also returning the consistency error before each
/// phase update and after the last one (`iters + 1` values).
pub fn griffin_lim_traced(
    mag: &MagnitudeSpectrogram,
    init_phase: &Matrix,
    iters: usize,
    cfg: &StftConfig,
) -> Result<(ComplexSpectrogram, Vec<f64>)> {
    run(mag, init_phase, iters, cfg, true)
}

fn run(
    mag: &MagnitudeSpectrogram,
    init_phase: &Matrix,
    iters: usize,
    cfg: &StftConfig,
    trace: bool,
) -> Result<(ComplexSpectrogram, Vec<f64>)> {
    if mag.bins() != cfg.n_bins() {
        return Err(Error::Dimension(format!(
            "magnitude has {} bins, config expects {}",
            mag.bins(),
            cfg.n_bins()
        )));
    }
    let engine = StftEngine::new(*cfg)?;
    let mut spec = ComplexSpectrogram::from_polar(mag, init_phase, *cfg)?;
    let mut errors = Vec::new();
    for k in 0..=iters {
        if k == iters && !trace {
            break;
        }
        let projected = project(&engine, &spec)?;
        if trace {
            errors.push(frobenius_gap(&magnitude(&projected), mag));
        }
        if k < iters {
            spec = ComplexSpectrogram::from_polar(mag, &phase(&projected), *cfg)?;
        }
    }
    Ok((spec, errors))
}
