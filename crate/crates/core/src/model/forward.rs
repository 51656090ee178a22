use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{gru_sequence, GruVars, Tape, Var};

use super::{DenoiserVars, InferenceConfig, MaskerVars, ModelDims, ModelParams, ModelVars};

/// Residual bi-GRU encoding followed by context removal.
///
/// Row `t` of the encoding is `[h_t + y_t, h̄_t + y_t]`, where `h̄_t` is the
/// backward GRU's state after consuming frames `T−1 … t`. The first and last
/// `context` rows are then dropped.
pub fn encode(tape: &mut Tape, y_tr: Var, p: &MaskerVars, context: usize) -> Result<Var> {
    let frames = tape.value(y_tr).rows();
    if frames <= 2 * context {
        return Err(Error::Dimension(format!(
            "{frames} frames cannot lose {context} context frames at each end"
        )));
    }
    let fwd = gru_sequence(tape, y_tr, &p.enc_fwd, false)?;
    let bwd = gru_sequence(tape, y_tr, &p.enc_bwd, true)?;
    let fwd_res = tape.add(fwd, y_tr)?;
    let bwd_res = tape.add(bwd, y_tr)?;
    let both = tape.concat_cols(fwd_res, bwd_res)?;
    tape.slice_rows(both, context, frames - context)
}

/// Mean over all entries of the squared difference.
pub fn mean_squared_difference(a: &Matrix, b: &Matrix) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    let n = a.len().max(1) as f64;
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        / n
}

#[derive(Debug, Clone, Copy)]
pub struct RecurrentInference {
    /// Final decoder states.
    pub output: Var,
    /// First decoder application on the encoding.
    pub initial: Var,
    /// Loop iterations executed (0 for a single decoder application).
    pub iterations: usize,
}

/// Re-applies the decoder to its own output until consecutive estimates
/// differ by less than `tau_term` in mean squared difference, or `iter`
/// iterations have run. Every application starts from a zero state.
///
/// The stopping test is control flow only; gradients flow through the
/// realised chain of applications.
pub fn recurrent_inference(tape: &mut Tape, h_enc: Var, dec: &GruVars, cfg: &InferenceConfig) -> Result<RecurrentInference> {
    cfg.validate()?;
    let initial = gru_sequence(tape, h_enc, dec, false)?;
    let mut previous = initial;
    let mut output = initial;
    let mut iterations = 0;
    for _ in 0..cfg.iter {
        iterations += 1;
        output = gru_sequence(tape, previous, dec, false)?;
        if mean_squared_difference(tape.value(previous), tape.value(output)) < cfg.tau_term {
            break;
        }
        previous = output;
    }
    Ok(RecurrentInference {
        output,
        initial,
        iterations,
    })
}

/// Decoder stage: recurrent inference when enabled, otherwise one
/// application.
pub fn decode(tape: &mut Tape, h_enc: Var, dec: &GruVars, cfg: &InferenceConfig) -> Result<RecurrentInference> {
    if cfg.use_recurrent_inference {
        recurrent_inference(tape, h_enc, dec, cfg)
    } else {
        let initial = gru_sequence(tape, h_enc, dec, false)?;
        Ok(RecurrentInference {
            output: initial,
            initial,
            iterations: 0,
        })
    }
}

/// `ReLU(h_dec W_mask + b_mask)`.
pub fn predict_mask(tape: &mut Tape, h_dec: Var, p: &MaskerVars) -> Result<Var> {
    let lin = tape.matmul(h_dec, p.w_mask)?;
    let biased = tape.add_bias(lin, p.b_mask)?;
    Ok(tape.relu(biased))
}

pub fn skip_filter(tape: &mut Tape, y_in_sliced: Var, mask: Var) -> Result<Var> {
    tape.hadamard(y_in_sliced, mask)
}

/// `ReLU(ReLU(y W_enc + b_enc) W_dec + b_dec) ⊙ y`.
pub fn denoise(tape: &mut Tape, y_filt: Var, p: &DenoiserVars) -> Result<Var> {
    let e = tape.matmul(y_filt, p.w_enc)?;
    let e = tape.add_bias(e, p.b_enc)?;
    let e = tape.relu(e);
    let d = tape.matmul(e, p.w_dec)?;
    let d = tape.add_bias(d, p.b_dec)?;
    let gain = tape.relu(d);
    tape.hadamard(gain, y_filt)
}

/// Tape handles of one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct ForwardTrace {
    pub mask: Var,
    pub filtered: Var,
    pub denoised: Var,
    pub decoder: RecurrentInference,
    pub ri_iterations_used: usize,
}

/// Encoder → decoder → mask → skip-filter → denoiser on one subsequence.
pub fn forward(
    tape: &mut Tape,
    y_tr: &Matrix,
    y_in: &Matrix,
    vars: &ModelVars,
    dims: &ModelDims,
    cfg: &InferenceConfig,
) -> Result<ForwardTrace> {
    if y_tr.rows() != y_in.rows() {
        return Err(Error::Dimension(format!(
            "band-limited input has {} frames, full-band input {}",
            y_tr.rows(),
            y_in.rows()
        )));
    }
    if y_tr.cols() != dims.bands || y_in.cols() != dims.n_bins {
        return Err(Error::Dimension(format!(
            "inputs {}x{} / {}x{} do not match model bands {} / bins {}",
            y_tr.rows(),
            y_tr.cols(),
            y_in.rows(),
            y_in.cols(),
            dims.bands,
            dims.n_bins
        )));
    }
    let context = dims.context;
    let y_tr = tape.constant(y_tr.clone());
    let h_enc = encode(tape, y_tr, &vars.masker, context)?;
    let decoder = decode(tape, h_enc, &vars.masker.dec, cfg)?;
    let mask = predict_mask(tape, decoder.output, &vars.masker)?;
    let rows = y_in.rows();
    let y_in_sliced = tape.constant(y_in.slice_rows(context, rows - context));
    let filtered = skip_filter(tape, y_in_sliced, mask)?;
    let denoised = denoise(tape, filtered, &vars.denoiser)?;
    Ok(ForwardTrace {
        mask,
        filtered,
        denoised,
        decoder,
        ri_iterations_used: decoder.iterations,
    })
}

/// Forward pass values, detached from any tape.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub mask: Matrix,
    pub filtered: Matrix,
    pub denoised: Matrix,
    pub ri_iterations_used: usize,
}

/// Inference-only forward pass.
pub fn infer(params: &ModelParams, y_tr: &Matrix, y_in: &Matrix, cfg: &InferenceConfig) -> Result<ForwardOutput> {
    let mut tape = Tape::new();
    let vars = params.bind(&mut tape);
    let trace = forward(&mut tape, y_tr, y_in, &vars, &params.dims, cfg)?;
    Ok(ForwardOutput {
        mask: tape.value(trace.mask).clone(),
        filtered: tape.value(trace.filtered).clone(),
        denoised: tape.value(trace.denoised).clone(),
        ri_iterations_used: trace.ri_iterations_used,
    })
}
