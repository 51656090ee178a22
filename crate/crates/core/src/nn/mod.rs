//! Minimal reverse-mode autodiff plus the layers and optimiser the separator
//! is trained with.

pub mod gradcheck;
pub(crate) mod gru;
mod init;
mod optim;
mod tape;

pub use gru::{gru_sequence, gru_step, GruParams, GruVars};
pub use init::{init_glorot_normal, init_orthogonal};
pub use optim::{clip_grad_norm, global_grad_norm, Adam, AdamConfig};
pub use tape::{Gradients, Tape, Var};

#[cfg(test)]
pub(crate) mod testing;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// A trainable matrix with its gradient accumulator and Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub value: Matrix,
    pub grad: Matrix,
    pub adam_m: Matrix,
    pub adam_v: Matrix,
    pub step_count: u64,
}

impl Parameter {
    pub fn new(value: Matrix) -> Self {
        let (r, c) = value.shape();
        Parameter {
            value,
            grad: Matrix::zeros(r, c),
            adam_m: Matrix::zeros(r, c),
            adam_v: Matrix::zeros(r, c),
            step_count: 0,
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::new(Matrix::zeros(rows, cols))
    }

    pub fn shape(&self) -> (usize, usize) {
        self.value.shape()
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    pub fn accumulate_grad(&mut self, g: &Matrix) {
        self.grad.add_assign(g);
    }

    /// Records the value as a differentiable tape leaf.
    pub fn bind(&self, tape: &mut Tape) -> Var {
        tape.variable(self.value.clone())
    }
}

/// Generalized Kullback-Leibler divergence `Σ a·ln((a+ε)/(b+ε)) − a + b`
/// between a non-negative target `a` and estimate `b`.
pub fn gkl(target: &Matrix, estimate: &Matrix, eps: f64) -> Result<f64> {
    if target.shape() != estimate.shape() {
        return Err(Error::Dimension(format!(
            "gkl: target {:?} vs estimate {:?}",
            target.shape(),
            estimate.shape()
        )));
    }
    let mut total = 0.0;
    for (&a, &b) in target.as_slice().iter().zip(estimate.as_slice()) {
        if a < 0.0 || b < 0.0 || !a.is_finite() || !b.is_finite() {
            return Err(Error::Domain(format!(
                "gkl needs finite non-negative entries, got target {a}, estimate {b}"
            )));
        }
        let log_ratio = if a == 0.0 { 0.0 } else { a * ((a + eps) / (b + eps)).ln() };
        total += log_ratio - a + b;
    }
    Ok(total)
}
