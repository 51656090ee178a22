use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{ForwardTrace, ModelVars};
use crate::nn::{Tape, Var};

/// Weights and thresholds of the training objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    /// Filtered-output divergence at or above which the reconstruction term
    /// is switched on.
    pub tau_rec: f64,
    /// Denoised-output divergence below which the reconstruction term stays
    /// off regardless.
    pub tau_min: f64,
    /// L1 weight on the diagonal of the mask-head weights.
    pub lambda_mask: f64,
    /// Squared L2 weight on the denoiser's output weights.
    pub lambda_dec: f64,
    /// Added inside the logarithm of the divergence.
    pub epsilon: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            tau_rec: 1.5,
            tau_min: 0.25,
            lambda_mask: 1e-2,
            lambda_dec: 1e-4,
            epsilon: 1e-12,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("tau_rec", self.tau_rec),
            ("tau_min", self.tau_min),
            ("lambda_mask", self.lambda_mask),
            ("lambda_dec", self.lambda_dec),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Parameter(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::Parameter(format!("loss epsilon must be positive, got {}", self.epsilon)));
        }
        Ok(())
    }
}

/// Reconstruction-term gate: 1 when the filtered output is still far from the
/// target while the denoised output is not yet close, else 0.
pub fn lambda_rec(kl_filtered: f64, kl_denoised: f64, cfg: &LossConfig) -> f64 {
    if kl_filtered >= cfg.tau_rec && kl_denoised >= cfg.tau_min {
        1.0
    } else {
        0.0
    }
}

/// Loss handle plus the values of its parts.
#[derive(Debug, Clone, Copy)]
pub struct LossTerms {
    pub total: Var,
    pub value: f64,
    pub kl_denoised: f64,
    pub kl_filtered: f64,
    pub lambda_rec: f64,
    pub mask_l1: f64,
    pub dec_l2: f64,
}

/// Records the objective for one example on `tape`.
///
/// The gate is evaluated on the current values and enters as a constant.
pub fn compute_loss(
    tape: &mut Tape,
    target: &Matrix,
    trace: &ForwardTrace,
    vars: &ModelVars,
    cfg: &LossConfig,
) -> Result<LossTerms> {
    for (what, v) in [("denoised", trace.denoised), ("filtered", trace.filtered)] {
        if !tape.value(v).is_finite() {
            return Err(Error::Numeric(format!("{what} estimate is not finite")));
        }
    }
    let kl_den = tape.gen_kl(target, trace.denoised, cfg.epsilon)?;
    let kl_filt = tape.gen_kl(target, trace.filtered, cfg.epsilon)?;
    let kl_denoised = tape.scalar(kl_den);
    let kl_filtered = tape.scalar(kl_filt);
    let gate = lambda_rec(kl_filtered, kl_denoised, cfg);

    let diag = tape.diag(vars.masker.w_mask);
    let diag = tape.abs(diag);
    let l1 = tape.sum_all(diag);
    let sq = tape.hadamard(vars.denoiser.w_dec, vars.denoiser.w_dec)?;
    let l2 = tape.sum_all(sq);
    let mask_l1 = tape.scalar(l1);
    let dec_l2 = tape.scalar(l2);

    let mut total = kl_den;
    if gate != 0.0 {
        let rec = tape.scale(kl_filt, gate);
        total = tape.add(total, rec)?;
    }
    let l1 = tape.scale(l1, cfg.lambda_mask);
    total = tape.add(total, l1)?;
    let l2 = tape.scale(l2, cfg.lambda_dec);
    total = tape.add(total, l2)?;
    let value = tape.scalar(total);
    if !value.is_finite() {
        return Err(Error::Numeric(format!("loss evaluated to {value}")));
    }
    Ok(LossTerms {
        total,
        value,
        kl_denoised,
        kl_filtered,
        lambda_rec: gate,
        mask_l1,
        dec_l2,
    })
}
