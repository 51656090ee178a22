use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rustfft::{Fft, FftPlanner};

use super::EvalConfig;
use crate::error::{Error, Result};
use crate::signal::Complex64;

/// Orthogonal split of an estimate, each part `len + proj_filter_len − 1`
/// samples long.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    /// Projection onto the delayed copies of the target reference.
    pub s_target: Vec<f64>,
    /// Projection onto all references' delays, minus `s_target`.
    pub e_interf: Vec<f64>,
    /// Remainder.
    pub e_artif: Vec<f64>,
}

pub(super) fn check_inputs(estimate: &[f64], references: &[&[f64]], j: usize) -> Result<()> {
    if references.is_empty() {
        return Err(Error::Usage("at least one reference is required".into()));
    }
    if j >= references.len() {
        return Err(Error::Parameter(format!(
            "target index {j} out of range for {} references",
            references.len()
        )));
    }
    if estimate.is_empty() {
        return Err(Error::Dimension("empty estimate".into()));
    }
    for (k, r) in references.iter().enumerate() {
        if r.len() != estimate.len() {
            return Err(Error::Dimension(format!(
                "reference {k} has {} samples, estimate {}",
                r.len(),
                estimate.len()
            )));
        }
    }
    if let Some(bad) = estimate
        .iter()
        .chain(references.iter().flat_map(|r| r.iter()))
        .find(|v| !v.is_finite())
    {
        return Err(Error::Domain(format!("non-finite sample {bad}")));
    }
    Ok(())
}

struct Transforms {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Transforms {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Transforms {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    fn spectrum(&self, x: &[f64]) -> Vec<Complex64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.n];
        for (b, v) in buf.iter_mut().zip(x) {
            b.re = *v;
        }
        self.forward.process(&mut buf);
        buf
    }

    fn real_inverse(&self, mut buf: Vec<Complex64>) -> Vec<f64> {
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.n as f64;
        buf.into_iter().map(|c| c.re * scale).collect()
    }

    /// `c[τ] = Σ_u a[u]·b[u+τ]` for `τ = −max_lag ..= max_lag`.
    fn correlation(&self, a: &[Complex64], b: &[Complex64], max_lag: usize) -> Vec<f64> {
        let prod = a.iter().zip(b).map(|(x, y)| x.conj() * y).collect();
        let circ = self.real_inverse(prod);
        (0..=2 * max_lag)
            .map(|k| circ[(k + self.n - max_lag) % self.n])
            .collect()
    }

    /// First `len` samples of the linear convolution of a signal (given by
    /// its spectrum) with a short filter.
    fn convolve(&self, spectrum: &[Complex64], filter: &[f64], len: usize) -> Vec<f64> {
        let h = self.spectrum(filter);
        let prod = spectrum.iter().zip(&h).map(|(x, y)| x * y).collect();
        let mut out = self.real_inverse(prod);
        out.truncate(len);
        out
    }
}

/// Cholesky solve of the normal equations, retrying with a small ridge when
/// the system is numerically singular.
fn solve_normal(gram: DMatrix<f64>, rhs: DVector<f64>) -> DVector<f64> {
    if let Some(ch) = gram.clone().cholesky() {
        return ch.solve(&rhs);
    }
    let dim = gram.nrows();
    let mean_diag = gram.trace() / dim as f64;
    let ridge = 1e-10 * if mean_diag > 0.0 { mean_diag } else { 1.0 };
    log::warn!("projection system is singular; solving with ridge {ridge:e}");
    let regularized = gram + DMatrix::identity(dim, dim) * ridge;
    match regularized.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => regularized
            .lu()
            .solve(&rhs)
            .unwrap_or_else(|| DVector::zeros(dim)),
    }
}

/// Splits `estimate` into target, interference and artifact parts with
/// respect to source `j`, using `proj_filter_len` delays of each reference.
pub fn decompose(estimate: &[f64], references: &[&[f64]], j: usize, cfg: &EvalConfig) -> Result<Decomposition> {
    cfg.validate()?;
    check_inputs(estimate, references, j)?;
    let taps = cfg.proj_filter_len;
    let n = estimate.len();
    let out_len = n + taps - 1;
    let fft = Transforms::new((n + taps).next_power_of_two());
    let refs: Vec<Vec<Complex64>> = references.iter().map(|r| fft.spectrum(r)).collect();
    let est = fft.spectrum(estimate);
    let count = references.len();
    let max_lag = taps - 1;

    // Gram entry (a,i; b,k) = Σ_t r_a[t−i]·r_b[t−k] = corr_ab[i−k].
    let mut gram = DMatrix::zeros(count * taps, count * taps);
    for a in 0..count {
        for b in a..count {
            let c = fft.correlation(&refs[a], &refs[b], max_lag);
            for i in 0..taps {
                for k in 0..taps {
                    let v = c[i + max_lag - k];
                    gram[(a * taps + i, b * taps + k)] = v;
                    gram[(b * taps + k, a * taps + i)] = v;
                }
            }
        }
    }
    let mut rhs = DVector::zeros(count * taps);
    for (a, spec) in refs.iter().enumerate() {
        let c = fft.correlation(spec, &est, max_lag);
        for i in 0..taps {
            rhs[a * taps + i] = c[max_lag + i];
        }
    }

    let block = gram.view((j * taps, j * taps), (taps, taps)).into_owned();
    let coeff_target = solve_normal(block, rhs.rows(j * taps, taps).into_owned());
    let s_target = fft.convolve(&refs[j], coeff_target.as_slice(), out_len);

    let coeff_all = solve_normal(gram, rhs);
    let mut p_all = vec![0.0; out_len];
    for (a, spec) in refs.iter().enumerate() {
        let part = fft.convolve(spec, &coeff_all.as_slice()[a * taps..(a + 1) * taps], out_len);
        for (p, v) in p_all.iter_mut().zip(part) {
            *p += v;
        }
    }
    let e_interf = p_all.iter().zip(&s_target).map(|(p, s)| p - s).collect();
    let e_artif = (0..out_len)
        .map(|t| estimate.get(t).copied().unwrap_or(0.0) - p_all[t])
        .collect();
    Ok(Decomposition {
        s_target,
        e_interf,
        e_artif,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise(n: usize, rng: &mut impl Rng) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn correlation_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = noise(37, &mut rng);
        let b = noise(37, &mut rng);
        let fft = Transforms::new(64);
        let c = fft.correlation(&fft.spectrum(&a), &fft.spectrum(&b), 9);
        for (k, got) in c.iter().enumerate() {
            let tau = k as i64 - 9;
            let direct: f64 = (0..37i64)
                .filter(|u| (0..37).contains(&(u + tau)))
                .map(|u| a[u as usize] * b[(u + tau) as usize])
                .sum();
            assert!((got - direct).abs() < 1e-12, "lag {tau}");
        }
    }

    #[test]
    fn parts_sum_to_the_estimate_and_are_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r1 = noise(400, &mut rng);
        let r2 = noise(400, &mut rng);
        let est = noise(400, &mut rng);
        let cfg = EvalConfig { proj_filter_len: 8 };
        let d = decompose(&est, &[&r1, &r2], 0, &cfg).unwrap();
        let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
        let total = dot(&est, &est);
        for t in 0..407 {
            let sum = d.s_target[t] + d.e_interf[t] + d.e_artif[t];
            let e = est.get(t).copied().unwrap_or(0.0);
            assert!((sum - e).abs() < 1e-10);
        }
        assert!(dot(&d.s_target, &d.e_interf).abs() < 1e-8 * total);
        assert!(dot(&d.s_target, &d.e_artif).abs() < 1e-8 * total);
        assert!(dot(&d.e_interf, &d.e_artif).abs() < 1e-8 * total);
    }

    #[test]
    fn rejects_bad_inputs() {
        let cfg = EvalConfig::default();
        let r = vec![1.0; 10];
        assert!(decompose(&r, &[], 0, &cfg).is_err());
        assert!(decompose(&r, &[&r], 1, &cfg).is_err());
        assert!(decompose(&r, &[&r[..5]], 0, &cfg).is_err());
        assert!(decompose(&r, &[&r], 0, &EvalConfig { proj_filter_len: 0 }).is_err());
    }

    #[test]
    fn singular_system_falls_back_to_ridge() {
        let r = vec![1.0; 50];
        let d = decompose(&r, &[&r, &r], 0, &EvalConfig { proj_filter_len: 4 }).unwrap();
        let err: f64 = (0..50).map(|t| (d.s_target[t] + d.e_interf[t] - r[t]).powi(2)).sum();
        assert!(err < 1e-6, "{err}");
    }
}
