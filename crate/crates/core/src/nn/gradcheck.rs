//! Central finite-difference oracle for tape gradients.

use super::{Tape, Var};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Denominator floor for relative errors of near-zero gradients.
pub const REL_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    /// `(input index, flat entry index)` of the worst entry.
    pub worst: (usize, usize),
    pub analytic: f64,
    pub numeric: f64,
    pub entries_checked: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compares reverse-mode gradients of the scalar built by `f` against
/// central differences with step `h`, over every entry of every input.
///
/// `f` receives a fresh tape and the inputs bound as differentiable leaves.
pub fn check<F>(inputs: &[Matrix], h: f64, f: F) -> Result<GradCheck>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let eval = |values: &[Matrix]| -> Result<(Tape, Vec<Var>, Var)> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|m| tape.variable(m.clone())).collect();
        let root = f(&mut tape, &vars)?;
        Ok((tape, vars, root))
    };

    let (tape, vars, root) = eval(inputs)?;
    let grads = tape.backward(root)?;
    let mut report = GradCheck {
        max_rel_error: 0.0,
        worst: (0, 0),
        analytic: 0.0,
        numeric: 0.0,
        entries_checked: 0,
    };

    let mut work: Vec<Matrix> = inputs.to_vec();
    for (i, var) in vars.iter().enumerate() {
        let (r, c) = inputs[i].shape();
        let analytic = grads.get(*var).cloned().unwrap_or_else(|| Matrix::zeros(r, c));
        for e in 0..inputs[i].len() {
            let orig = inputs[i].as_slice()[e];
            work[i].as_mut_slice()[e] = orig + h;
            let (tp, _, rp) = eval(&work)?;
            work[i].as_mut_slice()[e] = orig - h;
            let (tm, _, rm) = eval(&work)?;
            work[i].as_mut_slice()[e] = orig;
            let numeric = (tp.scalar(rp) - tm.scalar(rm)) / (2.0 * h);
            if !numeric.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite finite difference at input {i} entry {e}"
                )));
            }
            let a = analytic.as_slice()[e];
            let rel = relative_error(a, numeric);
            report.entries_checked += 1;
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = (i, e);
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}
