//! Gated recurrent unit over row-vector frames.
//!
//! ```text
//! z  = σ(x W_z + h U_z + b_z)
//! r  = σ(x W_r + h U_r + b_r)
//! h~ = tanh(x W_h + (r ⊙ h) U_h + b_h)
//! h' = (1 − z) ⊙ h + z ⊙ h~
//! ```

use rand::Rng;

use super::{init_glorot_normal, init_orthogonal, Parameter, Tape, Var};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct GruParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub w_z: Parameter,
    pub w_r: Parameter,
    pub w_h: Parameter,
    pub u_z: Parameter,
    pub u_r: Parameter,
    pub u_h: Parameter,
    pub b_z: Parameter,
    pub b_r: Parameter,
    pub b_h: Parameter,
}

/// Tape leaves for one [`GruParams`].
#[derive(Debug, Clone, Copy)]
pub struct GruVars {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub w_z: Var,
    pub w_r: Var,
    pub w_h: Var,
    pub u_z: Var,
    pub u_r: Var,
    pub u_h: Var,
    pub b_z: Var,
    pub b_r: Var,
    pub b_h: Var,
}

pub(crate) const GRU_PARAM_NAMES: [&str; 9] = ["w_z", "w_r", "w_h", "u_z", "u_r", "u_h", "b_z", "b_r", "b_h"];

impl GruParams {
    /// All-zero weights and biases.
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        let w = || Parameter::zeros(input_dim, hidden_dim);
        let u = || Parameter::zeros(hidden_dim, hidden_dim);
        let b = || Parameter::zeros(1, hidden_dim);
        GruParams {
            input_dim,
            hidden_dim,
            w_z: w(),
            w_r: w(),
            w_h: w(),
            u_z: u(),
            u_r: u(),
            u_h: u(),
            b_z: b(),
            b_r: b(),
            b_h: b(),
        }
    }

    /// Glorot-normal input weights, orthogonal recurrent weights, zero biases.
    pub fn init(input_dim: usize, hidden_dim: usize, rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(input_dim, hidden_dim);
        for w in [&mut p.w_z, &mut p.w_r, &mut p.w_h] {
            *w = Parameter::new(init_glorot_normal(input_dim, hidden_dim, rng));
        }
        for u in [&mut p.u_z, &mut p.u_r, &mut p.u_h] {
            *u = Parameter::new(init_orthogonal(hidden_dim, hidden_dim, rng));
        }
        p
    }

    /// Parameters in [`GRU_PARAM_NAMES`] order.
    pub fn parameters(&self) -> [&Parameter; 9] {
        [
            &self.w_z, &self.w_r, &self.w_h, &self.u_z, &self.u_r, &self.u_h, &self.b_z, &self.b_r,
            &self.b_h,
        ]
    }

    pub fn parameters_mut(&mut self) -> [&mut Parameter; 9] {
        [
            &mut self.w_z,
            &mut self.w_r,
            &mut self.w_h,
            &mut self.u_z,
            &mut self.u_r,
            &mut self.u_h,
            &mut self.b_z,
            &mut self.b_r,
            &mut self.b_h,
        ]
    }

    pub fn bind(&self, tape: &mut Tape) -> GruVars {
        let [w_z, w_r, w_h, u_z, u_r, u_h, b_z, b_r, b_h] = self.parameters().map(|p| p.bind(tape));
        GruVars {
            input_dim: self.input_dim,
            hidden_dim: self.hidden_dim,
            w_z,
            w_r,
            w_h,
            u_z,
            u_r,
            u_h,
            b_z,
            b_r,
            b_h,
        }
    }

    pub fn vars_in_order(v: &GruVars) -> [Var; 9] {
        [v.w_z, v.w_r, v.w_h, v.u_z, v.u_r, v.u_h, v.b_z, v.b_r, v.b_h]
    }
}

impl GruVars {
    /// Handles given in [`GruParams::vars_in_order`] order.
    pub fn from_leaves(input_dim: usize, hidden_dim: usize, v: [Var; 9]) -> Self {
        let [w_z, w_r, w_h, u_z, u_r, u_h, b_z, b_r, b_h] = v;
        GruVars {
            input_dim,
            hidden_dim,
            w_z,
            w_r,
            w_h,
            u_z,
            u_r,
            u_h,
            b_z,
            b_r,
            b_h,
        }
    }
}

/// One recurrence given the input projections `x W_* + b_*` of a frame.
fn step_projected(tape: &mut Tape, xz: Var, xr: Var, xh: Var, h_prev: Var, p: &GruVars) -> Result<Var> {
    let hz = tape.matmul(h_prev, p.u_z)?;
    let z_pre = tape.add(xz, hz)?;
    let z = tape.sigmoid(z_pre);

    let hr = tape.matmul(h_prev, p.u_r)?;
    let r_pre = tape.add(xr, hr)?;
    let r = tape.sigmoid(r_pre);

    let gated = tape.hadamard(r, h_prev)?;
    let hh = tape.matmul(gated, p.u_h)?;
    let c_pre = tape.add(xh, hh)?;
    let candidate = tape.tanh(c_pre);

    // h + z ⊙ (h~ − h)
    let delta = tape.sub(candidate, h_prev)?;
    let moved = tape.hadamard(z, delta)?;
    tape.add(h_prev, moved)
}

fn project(tape: &mut Tape, x: Var, w: Var, b: Var) -> Result<Var> {
    let xw = tape.matmul(x, w)?;
    tape.add_bias(xw, b)
}

fn check_input(tape: &Tape, x: Var, p: &GruVars) -> Result<()> {
    let cols = tape.value(x).cols();
    if cols != p.input_dim {
        return Err(Error::Dimension(format!(
            "GRU expects {}-dimensional input, got {cols}",
            p.input_dim
        )));
    }
    Ok(())
}

/// Single GRU step on the 1×input row `x` and 1×hidden state `h_prev`.
pub fn gru_step(tape: &mut Tape, x: Var, h_prev: Var, p: &GruVars) -> Result<Var> {
    check_input(tape, x, p)?;
    if tape.value(h_prev).shape() != (1, p.hidden_dim) || tape.value(x).rows() != 1 {
        return Err(Error::Dimension(format!(
            "gru_step expects single rows, got x {:?} and h {:?}",
            tape.value(x).shape(),
            tape.value(h_prev).shape()
        )));
    }
    let xz = project(tape, x, p.w_z, p.b_z)?;
    let xr = project(tape, x, p.w_r, p.b_r)?;
    let xh = project(tape, x, p.w_h, p.b_h)?;
    step_projected(tape, xz, xr, xh, h_prev, p)
}

/// Runs the GRU over the rows of `x` from a zero initial state.
///
/// With `reversed` the rows are consumed last-to-first; row `t` of the output
/// is always the state produced when frame `t` was consumed.
pub fn gru_sequence(tape: &mut Tape, x: Var, p: &GruVars, reversed: bool) -> Result<Var> {
    check_input(tape, x, p)?;
    let frames = tape.value(x).rows();
    if frames == 0 {
        return Err(Error::Dimension("GRU over an empty sequence".into()));
    }
    let xz_all = project(tape, x, p.w_z, p.b_z)?;
    let xr_all = project(tape, x, p.w_r, p.b_r)?;
    let xh_all = project(tape, x, p.w_h, p.b_h)?;

    let mut h = tape.constant(Matrix::zeros(1, p.hidden_dim));
    let mut states = vec![h; frames];
    let order: Box<dyn Iterator<Item = usize>> = if reversed {
        Box::new((0..frames).rev())
    } else {
        Box::new(0..frames)
    };
    for t in order {
        let xz = tape.slice_rows(xz_all, t, t + 1)?;
        let xr = tape.slice_rows(xr_all, t, t + 1)?;
        let xh = tape.slice_rows(xh_all, t, t + 1)?;
        h = step_projected(tape, xz, xr, xh, h, p)?;
        states[t] = h;
    }
    tape.concat_rows(&states)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::testing::{check_gradients, random_matrix};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sigmoid(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    #[test]
    fn zero_weights_halve_the_state() {
        let p = GruParams::zeros(3, 4);
        let mut t = Tape::new();
        let v = p.bind(&mut t);
        let x = t.constant(Matrix::row_vector(vec![1.0, -2.0, 0.5]));
        let h = t.constant(Matrix::row_vector(vec![0.4, -0.8, 0.2, 0.0]));
        let out = gru_step(&mut t, x, h, &v).unwrap();
        assert_eq!(t.value(out).as_slice(), &[0.2, -0.4, 0.1, 0.0]);
    }

    #[test]
    fn zero_state_and_recurrence_gives_gated_candidate() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut p = GruParams::zeros(3, 2);
        p.w_z = Parameter::new(random_matrix(&mut rng, 3, 2, 1.0));
        p.w_h = Parameter::new(random_matrix(&mut rng, 3, 2, 1.0));
        p.w_r = Parameter::new(random_matrix(&mut rng, 3, 2, 1.0));
        let xv = Matrix::row_vector(vec![0.3, -1.1, 0.7]);
        let mut t = Tape::new();
        let v = p.bind(&mut t);
        let x = t.constant(xv.clone());
        let h = t.constant(Matrix::zeros(1, 2));
        let out = gru_step(&mut t, x, h, &v).unwrap();
        let xz = xv.matmul(&p.w_z.value).unwrap();
        let xh = xv.matmul(&p.w_h.value).unwrap();
        for j in 0..2 {
            let expected = sigmoid(xz[(0, j)]) * xh[(0, j)].tanh();
            assert!((t.value(out)[(0, j)] - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn state_stays_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = GruParams::init(4, 5, &mut rng);
        let mut t = Tape::new();
        let v = p.bind(&mut t);
        let x = t.constant(random_matrix(&mut rng, 12, 4, 10.0));
        let out = gru_sequence(&mut t, x, &v, false).unwrap();
        assert!(t.value(out).max_abs() < 1.0);
    }

    #[test]
    fn single_frame_sequence_is_one_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = GruParams::init(3, 3, &mut rng);
        let xv = random_matrix(&mut rng, 1, 3, 1.0);
        let mut t = Tape::new();
        let v = p.bind(&mut t);
        let x = t.constant(xv);
        let h0 = t.constant(Matrix::zeros(1, 3));
        let a = gru_step(&mut t, x, h0, &v).unwrap();
        let b = gru_sequence(&mut t, x, &v, false).unwrap();
        let c = gru_sequence(&mut t, x, &v, true).unwrap();
        assert!(t.value(a).zip_map(t.value(b), |x, y| (x - y).abs()).max_abs() < 1e-15);
        assert_eq!(t.value(b), t.value(c));
    }

    #[test]
    fn palindrome_reversed_matches_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = GruParams::init(2, 3, &mut rng);
        let rows = [[0.1, 0.5], [0.9, -0.2], [0.3, 0.3], [0.9, -0.2], [0.1, 0.5]];
        let xv = Matrix::from_fn(5, 2, |r, c| rows[r][c]);
        let mut t = Tape::new();
        let v = p.bind(&mut t);
        let x = t.constant(xv);
        let f = gru_sequence(&mut t, x, &v, false).unwrap();
        let b = gru_sequence(&mut t, x, &v, true).unwrap();
        let (fwd, bwd) = (t.value(f), t.value(b));
        // frame t of the forward pass sees the same history as frame T-1-t backwards
        for r in 0..5 {
            assert_eq!(fwd.row(r), bwd.row(4 - r));
        }
    }

    #[test]
    fn zero_everything_gives_zero_states() {
        let p = GruParams::zeros(3, 3);
        let mut t = Tape::new();
        let v = p.bind(&mut t);
        let x = t.constant(Matrix::zeros(4, 3));
        let out = gru_sequence(&mut t, x, &v, false).unwrap();
        assert_eq!(t.value(out), &Matrix::zeros(4, 3));
    }

    #[test]
    fn dimension_mismatch() {
        let p = GruParams::zeros(3, 2);
        let mut t = Tape::new();
        let v = p.bind(&mut t);
        let x = t.constant(Matrix::zeros(4, 2));
        assert!(gru_sequence(&mut t, x, &v, false).is_err());
    }

    #[test]
    fn step_and_sequence_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (inp, hid, frames) = (4, 3, 5);
        let p = GruParams::init(inp, hid, &mut rng);
        let mut inputs: Vec<Matrix> = p.parameters().iter().map(|q| q.value.clone()).collect();
        // nonzero biases so their gradients are exercised away from zero
        for b in &mut inputs[6..9] {
            *b = random_matrix(&mut rng, 1, hid, 0.5);
        }
        inputs.push(random_matrix(&mut rng, frames, inp, 1.0));
        inputs.push(random_matrix(&mut rng, 1, hid, 0.5));
        let bind = |v: &[Var]| GruVars {
            input_dim: inp,
            hidden_dim: hid,
            w_z: v[0],
            w_r: v[1],
            w_h: v[2],
            u_z: v[3],
            u_r: v[4],
            u_h: v[5],
            b_z: v[6],
            b_r: v[7],
            b_h: v[8],
        };
        check_gradients(&inputs, 1e-4, |t, v| {
            let g = bind(v);
            let x0 = t.slice_rows(v[9], 0, 1)?;
            let h = gru_step(t, x0, v[10], &g)?;
            let hs = t.sum_all(h);
            let f = gru_sequence(t, v[9], &g, false)?;
            let b = gru_sequence(t, v[9], &g, true)?;
            let fb = t.hadamard(f, b)?;
            let s = t.sum_all(fb);
            t.add(s, hs)
        });
    }
}
