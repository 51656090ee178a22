use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{init_glorot_normal, GruParams, GruVars, Parameter, Tape, Var};

use super::ModelDims;

#[derive(Debug, Clone, PartialEq)]
pub struct MaskerParams {
    /// F → F
    pub enc_fwd: GruParams,
    /// F → F
    pub enc_bwd: GruParams,
    /// 2F → 2F
    pub dec: GruParams,
    /// 2F × N
    pub w_mask: Parameter,
    /// 1 × N
    pub b_mask: Parameter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserParams {
    /// N × ⌊N/2⌋
    pub w_enc: Parameter,
    pub b_enc: Parameter,
    /// ⌊N/2⌋ × N
    pub w_dec: Parameter,
    pub b_dec: Parameter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub dims: ModelDims,
    pub masker: MaskerParams,
    pub denoiser: DenoiserParams,
}

#[derive(Debug, Clone, Copy)]
pub struct MaskerVars {
    pub enc_fwd: GruVars,
    pub enc_bwd: GruVars,
    pub dec: GruVars,
    pub w_mask: Var,
    pub b_mask: Var,
}

#[derive(Debug, Clone, Copy)]
pub struct DenoiserVars {
    pub w_enc: Var,
    pub b_enc: Var,
    pub w_dec: Var,
    pub b_dec: Var,
}

#[derive(Debug, Clone, Copy)]
pub struct ModelVars {
    pub masker: MaskerVars,
    pub denoiser: DenoiserVars,
}

impl ModelVars {
    /// Leaves in [`ModelParams::named`] order.
    pub fn in_order(&self) -> Vec<Var> {
        let m = &self.masker;
        let d = &self.denoiser;
        let mut out = Vec::with_capacity(33);
        for g in [&m.enc_fwd, &m.enc_bwd, &m.dec] {
            out.extend(GruParams::vars_in_order(g));
        }
        out.extend([m.w_mask, m.b_mask, d.w_enc, d.b_enc, d.w_dec, d.b_dec]);
        out
    }

    /// Inverse of [`ModelVars::in_order`], for leaves recorded elsewhere
    /// (e.g. by a gradient checker).
    pub fn from_leaves(dims: &ModelDims, leaves: &[Var]) -> Result<Self> {
        if leaves.len() != 33 {
            return Err(Error::Dimension(format!("expected 33 parameter leaves, got {}", leaves.len())));
        }
        let f = dims.bands;
        let gru = |k: usize, input: usize, hidden: usize| {
            let v: [Var; 9] = leaves[9 * k..9 * k + 9].try_into().expect("nine leaves");
            GruVars::from_leaves(input, hidden, v)
        };
        Ok(ModelVars {
            masker: MaskerVars {
                enc_fwd: gru(0, f, f),
                enc_bwd: gru(1, f, f),
                dec: gru(2, 2 * f, 2 * f),
                w_mask: leaves[27],
                b_mask: leaves[28],
            },
            denoiser: DenoiserVars {
                w_enc: leaves[29],
                b_enc: leaves[30],
                w_dec: leaves[31],
                b_dec: leaves[32],
            },
        })
    }
}

impl ModelParams {
    /// All weights and biases zero.
    pub fn zeros(dims: ModelDims) -> Self {
        let (f, n) = (dims.bands, dims.n_bins);
        let half = n / 2;
        ModelParams {
            dims,
            masker: MaskerParams {
                enc_fwd: GruParams::zeros(f, f),
                enc_bwd: GruParams::zeros(f, f),
                dec: GruParams::zeros(2 * f, 2 * f),
                w_mask: Parameter::zeros(2 * f, n),
                b_mask: Parameter::zeros(1, n),
            },
            denoiser: DenoiserParams {
                w_enc: Parameter::zeros(n, half),
                b_enc: Parameter::zeros(1, half),
                w_dec: Parameter::zeros(half, n),
                b_dec: Parameter::zeros(1, n),
            },
        }
    }

    /// Orthogonal recurrent matrices, Glorot-normal everything else, zero
    /// biases.
    pub fn init(dims: ModelDims, rng: &mut impl Rng) -> Self {
        let (f, n) = (dims.bands, dims.n_bins);
        let half = n / 2;
        let enc_fwd = GruParams::init(f, f, rng);
        let enc_bwd = GruParams::init(f, f, rng);
        let dec = GruParams::init(2 * f, 2 * f, rng);
        let w_mask = Parameter::new(init_glorot_normal(2 * f, n, rng));
        let w_enc = Parameter::new(init_glorot_normal(n, half, rng));
        let w_dec = Parameter::new(init_glorot_normal(half, n, rng));
        ModelParams {
            dims,
            masker: MaskerParams {
                enc_fwd,
                enc_bwd,
                dec,
                w_mask,
                b_mask: Parameter::zeros(1, n),
            },
            denoiser: DenoiserParams {
                w_enc,
                b_enc: Parameter::zeros(1, half),
                w_dec,
                b_dec: Parameter::zeros(1, n),
            },
        }
    }

    pub fn names() -> Vec<String> {
        let mut out = Vec::with_capacity(33);
        for gru in ["enc_fwd", "enc_bwd", "dec"] {
            for p in crate::nn::gru::GRU_PARAM_NAMES {
                out.push(format!("masker.{gru}.{p}"));
            }
        }
        for n in ["masker.w_mask", "masker.b_mask"] {
            out.push(n.to_string());
        }
        for n in ["w_enc", "b_enc", "w_dec", "b_dec"] {
            out.push(format!("denoiser.{n}"));
        }
        out
    }

    pub fn parameters(&self) -> Vec<&Parameter> {
        let m = &self.masker;
        let d = &self.denoiser;
        let mut out: Vec<&Parameter> = Vec::with_capacity(33);
        for g in [&m.enc_fwd, &m.enc_bwd, &m.dec] {
            out.extend(g.parameters());
        }
        out.extend([&m.w_mask, &m.b_mask, &d.w_enc, &d.b_enc, &d.w_dec, &d.b_dec]);
        out
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        let m = &mut self.masker;
        let d = &mut self.denoiser;
        let mut out: Vec<&mut Parameter> = Vec::with_capacity(33);
        out.extend(m.enc_fwd.parameters_mut());
        out.extend(m.enc_bwd.parameters_mut());
        out.extend(m.dec.parameters_mut());
        out.extend([&mut m.w_mask, &mut m.b_mask]);
        out.extend([&mut d.w_enc, &mut d.b_enc, &mut d.w_dec, &mut d.b_dec]);
        out
    }

    /// `(name, parameter)` pairs in a fixed order.
    pub fn named(&self) -> Vec<(String, &Parameter)> {
        Self::names().into_iter().zip(self.parameters()).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|p| p.value.len()).sum()
    }

    pub fn bind(&self, tape: &mut Tape) -> ModelVars {
        let m = &self.masker;
        let d = &self.denoiser;
        ModelVars {
            masker: MaskerVars {
                enc_fwd: m.enc_fwd.bind(tape),
                enc_bwd: m.enc_bwd.bind(tape),
                dec: m.dec.bind(tape),
                w_mask: m.w_mask.bind(tape),
                b_mask: m.b_mask.bind(tape),
            },
            denoiser: DenoiserVars {
                w_enc: d.w_enc.bind(tape),
                b_enc: d.b_enc.bind(tape),
                w_dec: d.w_dec.bind(tape),
                b_dec: d.b_dec.bind(tape),
            },
        }
    }

    pub fn zero_grad(&mut self) {
        for p in self.parameters_mut() {
            p.zero_grad();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn paper_shapes() {
        let p = ModelParams::zeros(ModelDims::paper());
        assert_eq!(p.masker.enc_fwd.u_z.shape(), (744, 744));
        assert_eq!(p.masker.dec.w_h.shape(), (1488, 1488));
        assert_eq!(p.masker.w_mask.shape(), (1488, 2049));
        assert_eq!(p.denoiser.w_enc.shape(), (2049, 1024));
        assert_eq!(p.denoiser.w_dec.shape(), (1024, 2049));
        assert_eq!(p.denoiser.b_dec.shape(), (1, 2049));
    }

    #[test]
    fn names_align_with_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let dims = ModelDims {
            n_bins: 10,
            bands: 6,
            seq_len: 8,
            context: 2,
        };
        let p = ModelParams::init(dims, &mut rng);
        let named = p.named();
        assert_eq!(named.len(), 33);
        assert_eq!(named[0].0, "masker.enc_fwd.w_z");
        assert_eq!(named[27].0, "masker.w_mask");
        assert_eq!(named[27].1.shape(), (12, 10));
        assert_eq!(named[32].0, "denoiser.b_dec");
        let mut t = Tape::new();
        assert_eq!(p.bind(&mut t).in_order().len(), 33);
        // biases start at zero, recurrent matrices are orthogonal
        assert_eq!(p.masker.b_mask.value.max_abs(), 0.0);
        let u = &p.masker.dec.u_r.value;
        let gram = u.transpose().matmul(u).unwrap();
        let err = gram.zip_map(&crate::Matrix::identity(12), |a, b| (a - b).abs()).max_abs();
        assert!(err < 1e-8);
    }
}
