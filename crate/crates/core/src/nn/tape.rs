//! Reverse-mode differentiation over dense matrices.
//!
//! Every operation appends a node holding its forward value; [`Tape::backward`]
//! walks the nodes in reverse recording order and accumulates vector-Jacobian
//! products. Leaves created with [`Tape::constant`] and everything computed
//! only from constants are skipped on the way back.

use crate::error::{Error, Result};
use crate::matrix::{gemm, Matrix};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Hadamard(Var, Var),
    AddBias(Var, Var),
    Scale(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Abs(Var),
    LogEps(Var, f64),
    ConcatCols(Var, Var),
    ConcatRows(Vec<Var>),
    SliceRows(Var, usize),
    Diag(Var),
    SumAll(Var),
    GenKl { target: Matrix, estimate: Var, eps: f64 },
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar root with respect to every recorded node that
/// depends on a differentiable leaf.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Matrix> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

fn shape_err(op: &str, a: (usize, usize), b: (usize, usize)) -> Error {
    Error::Dimension(format!("{op}: {}x{} vs {}x{}", a.0, a.1, b.0, b.1))
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    /// Scalar value of a 1×1 node.
    pub fn scalar(&self, v: Var) -> f64 {
        let m = self.value(v);
        debug_assert_eq!(m.shape(), (1, 1));
        m.as_slice()[0]
    }

    fn push(&mut self, value: Matrix, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn grad_of(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    /// Differentiable leaf.
    pub fn variable(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Leaf excluded from differentiation.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.1 != sb.0 {
            return Err(shape_err("matmul", sa, sb));
        }
        let mut out = Matrix::zeros(sa.0, sb.1);
        gemm(self.value(a), false, self.value(b), false, &mut out, 0.0);
        let g = self.grad_of(&[a, b]);
        Ok(self.push(out, Op::MatMul(a, b), g))
    }

    fn same_shape(&self, op: &str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(shape_err(op, sa, sb));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x + y);
        let g = self.grad_of(&[a, b]);
        Ok(self.push(out, Op::Add(a, b), g))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x - y);
        let g = self.grad_of(&[a, b]);
        Ok(self.push(out, Op::Sub(a, b), g))
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("hadamard", a, b)?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x * y);
        let g = self.grad_of(&[a, b]);
        Ok(self.push(out, Op::Hadamard(a, b), g))
    }

    /// Adds the 1×cols row `bias` to every row of `a`.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(bias));
        if sb != (1, sa.1) {
            return Err(shape_err("add_bias", sa, sb));
        }
        let mut out = self.value(a).clone();
        let b = self.value(bias).as_slice();
        for r in 0..sa.0 {
            for (o, bv) in out.row_mut(r).iter_mut().zip(b) {
                *o += bv;
            }
        }
        let g = self.grad_of(&[a, bias]);
        Ok(self.push(out, Op::AddBias(a, bias), g))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a).map(|x| c * x);
        let g = self.grad_of(&[a]);
        self.push(out, Op::Scale(a, c), g)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(sigmoid);
        let g = self.grad_of(&[a]);
        self.push(out, Op::Sigmoid(a), g)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::tanh);
        let g = self.grad_of(&[a]);
        self.push(out, Op::Tanh(a), g)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x.max(0.0));
        let g = self.grad_of(&[a]);
        self.push(out, Op::Relu(a), g)
    }

    pub fn abs(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::abs);
        let g = self.grad_of(&[a]);
        self.push(out, Op::Abs(a), g)
    }

    /// `ln(a + eps)`; entries of `a + eps` must be positive.
    pub fn log_eps(&mut self, a: Var, eps: f64) -> Result<Var> {
        if let Some(v) = self.value(a).as_slice().iter().find(|&&v| v + eps <= 0.0) {
            return Err(Error::Domain(format!("log of non-positive value {}", v + eps)));
        }
        let out = self.value(a).map(|x| (x + eps).ln());
        let g = self.grad_of(&[a]);
        Ok(self.push(out, Op::LogEps(a, eps), g))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = Matrix::hstack(self.value(a), self.value(b))?;
        let g = self.grad_of(&[a, b]);
        Ok(self.push(out, Op::ConcatCols(a, b), g))
    }

    /// Stacks the given nodes vertically, in order.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::Dimension("concat_rows of nothing".into()));
        }
        let values: Vec<&Matrix> = parts.iter().map(|&v| self.value(v)).collect();
        let out = Matrix::vstack(&values)?;
        let g = self.grad_of(parts);
        Ok(self.push(out, Op::ConcatRows(parts.to_vec()), g))
    }

    /// Rows `from..to`.
    pub fn slice_rows(&mut self, a: Var, from: usize, to: usize) -> Result<Var> {
        let rows = self.shape(a).0;
        if from > to || to > rows {
            return Err(Error::Dimension(format!(
                "slice_rows {from}..{to} of {rows} rows"
            )));
        }
        let out = self.value(a).slice_rows(from, to);
        let g = self.grad_of(&[a]);
        Ok(self.push(out, Op::SliceRows(a, from), g))
    }

    /// Main diagonal `a[i, i]` for `i < min(rows, cols)` as a row vector.
    pub fn diag(&mut self, a: Var) -> Var {
        let m = self.value(a);
        let n = m.rows().min(m.cols());
        let out = Matrix::row_vector((0..n).map(|i| m[(i, i)]).collect());
        let g = self.grad_of(&[a]);
        self.push(out, Op::Diag(a), g)
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let out = Matrix::filled(1, 1, self.value(a).sum());
        let g = self.grad_of(&[a]);
        self.push(out, Op::SumAll(a), g)
    }

    /// Generalized Kullback-Leibler divergence of `estimate` from the constant
    /// `target`, summed over all entries:
    /// `Σ a·ln((a+ε)/(b+ε)) − a + b`.
    pub fn gen_kl(&mut self, target: &Matrix, estimate: Var, eps: f64) -> Result<Var> {
        let est = self.value(estimate);
        if target.shape() != est.shape() {
            return Err(shape_err("gen_kl", target.shape(), est.shape()));
        }
        let value = super::gkl(target, est, eps)?;
        let g = self.grad_of(&[estimate]);
        Ok(self.push(
            Matrix::filled(1, 1, value),
            Op::GenKl {
                target: target.clone(),
                estimate,
                eps,
            },
            g,
        ))
    }

    /// Reverse pass from the 1×1 node `root`.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        if self.shape(root) != (1, 1) {
            let (r, c) = self.shape(root);
            return Err(Error::Usage(format!(
                "backward needs a scalar root, got {r}x{c}"
            )));
        }
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Matrix::filled(1, 1, 1.0));

        for idx in (0..=root.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node, g: &Matrix, grads: &mut [Option<Matrix>]) {
        let wants = |v: Var| self.nodes[v.0].requires_grad;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if wants(*a) {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let slot = slot(grads, *a, av.shape());
                    gemm(g, false, bv, true, slot, 1.0);
                }
                if wants(*b) {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let slot = slot(grads, *b, bv.shape());
                    gemm(av, true, g, false, slot, 1.0);
                }
            }
            Op::Add(a, b) => {
                if wants(*a) {
                    accumulate(grads, *a, g);
                }
                if wants(*b) {
                    accumulate(grads, *b, g);
                }
            }
            Op::Sub(a, b) => {
                if wants(*a) {
                    accumulate(grads, *a, g);
                }
                if wants(*b) {
                    accumulate(grads, *b, &g.map(|x| -x));
                }
            }
            Op::Hadamard(a, b) => {
                if wants(*a) {
                    accumulate(grads, *a, &g.zip_map(self.value(*b), |x, y| x * y));
                }
                if wants(*b) {
                    accumulate(grads, *b, &g.zip_map(self.value(*a), |x, y| x * y));
                }
            }
            Op::AddBias(a, bias) => {
                if wants(*a) {
                    accumulate(grads, *a, g);
                }
                if wants(*bias) {
                    let mut col_sums = Matrix::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (s, v) in col_sums.as_mut_slice().iter_mut().zip(g.row(r)) {
                            *s += v;
                        }
                    }
                    accumulate(grads, *bias, &col_sums);
                }
            }
            Op::Scale(a, c) => {
                if wants(*a) {
                    accumulate(grads, *a, &g.map(|x| c * x));
                }
            }
            Op::Sigmoid(a) => {
                if wants(*a) {
                    accumulate(grads, *a, &g.zip_map(&node.value, |x, y| x * y * (1.0 - y)));
                }
            }
            Op::Tanh(a) => {
                if wants(*a) {
                    accumulate(grads, *a, &g.zip_map(&node.value, |x, y| x * (1.0 - y * y)));
                }
            }
            Op::Relu(a) => {
                if wants(*a) {
                    let gx = g.zip_map(self.value(*a), |x, v| if v > 0.0 { x } else { 0.0 });
                    accumulate(grads, *a, &gx);
                }
            }
            Op::Abs(a) => {
                if wants(*a) {
                    let gx = g.zip_map(self.value(*a), |x, v| {
                        if v > 0.0 {
                            x
                        } else if v < 0.0 {
                            -x
                        } else {
                            0.0
                        }
                    });
                    accumulate(grads, *a, &gx);
                }
            }
            Op::LogEps(a, eps) => {
                if wants(*a) {
                    accumulate(grads, *a, &g.zip_map(self.value(*a), |x, v| x / (v + eps)));
                }
            }
            Op::ConcatCols(a, b) => {
                let ca = self.shape(*a).1;
                if wants(*a) {
                    accumulate(grads, *a, &g.leading_cols(ca));
                }
                if wants(*b) {
                    let cb = self.shape(*b).1;
                    let right = Matrix::from_fn(g.rows(), cb, |r, c| g[(r, ca + c)]);
                    accumulate(grads, *b, &right);
                }
            }
            Op::ConcatRows(parts) => {
                let mut start = 0;
                for &p in parts {
                    let rows = self.shape(p).0;
                    if wants(p) {
                        accumulate(grads, p, &g.slice_rows(start, start + rows));
                    }
                    start += rows;
                }
            }
            Op::SliceRows(a, from) => {
                if wants(*a) {
                    let shape = self.shape(*a);
                    let slot = slot(grads, *a, shape);
                    for r in 0..g.rows() {
                        for (s, v) in slot.row_mut(from + r).iter_mut().zip(g.row(r)) {
                            *s += v;
                        }
                    }
                }
            }
            Op::Diag(a) => {
                if wants(*a) {
                    let shape = self.shape(*a);
                    let slot = slot(grads, *a, shape);
                    for (i, v) in g.as_slice().iter().enumerate() {
                        slot[(i, i)] += v;
                    }
                }
            }
            Op::SumAll(a) => {
                if wants(*a) {
                    let (r, c) = self.shape(*a);
                    accumulate(grads, *a, &Matrix::filled(r, c, g.as_slice()[0]));
                }
            }
            Op::GenKl {
                target,
                estimate,
                eps,
            } => {
                if wants(*estimate) {
                    let scale = g.as_slice()[0];
                    let gx = target.zip_map(self.value(*estimate), |a, b| scale * (1.0 - a / (b + eps)));
                    accumulate(grads, *estimate, &gx);
                }
            }
        }
    }
}

fn slot(grads: &mut [Option<Matrix>], v: Var, shape: (usize, usize)) -> &mut Matrix {
    grads[v.0].get_or_insert_with(|| Matrix::zeros(shape.0, shape.1))
}

fn accumulate(grads: &mut [Option<Matrix>], v: Var, g: &Matrix) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(g),
        slot @ None => *slot = Some(g.clone()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::testing::{check_gradients, random_matrix};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn primitive_values() {
        let mut t = Tape::new();
        let x = t.constant(Matrix::row_vector(vec![-1.0, 2.0]));
        let r = t.relu(x);
        assert_eq!(t.value(r).as_slice(), &[0.0, 2.0]);
        let z = t.constant(Matrix::zeros(1, 1));
        let s = t.sigmoid(z);
        assert_eq!(t.scalar(s), 0.5);
        let a = t.constant(Matrix::from_fn(3, 2, |r, c| (r * 2 + c) as f64));
        let i = t.constant(Matrix::identity(3));
        let p = t.matmul(i, a).unwrap();
        assert_eq!(t.value(p), t.value(a));
    }

    #[test]
    fn shape_errors() {
        let mut t = Tape::new();
        let a = t.constant(Matrix::zeros(2, 3));
        let b = t.constant(Matrix::zeros(2, 2));
        assert!(matches!(t.matmul(a, a), Err(Error::Dimension(_))));
        assert!(t.add(a, b).is_err());
        assert!(t.hadamard(a, b).is_err());
        assert!(t.add_bias(a, b).is_err());
        assert!(t.slice_rows(a, 1, 3).is_err());
        assert!(t.gen_kl(&Matrix::zeros(2, 2), a, 1e-12).is_err());
    }

    #[test]
    fn backward_requires_scalar_root() {
        let mut t = Tape::new();
        let a = t.variable(Matrix::zeros(2, 2));
        assert!(matches!(t.backward(a), Err(Error::Usage(_))));
    }

    #[test]
    fn sum_gradient_is_ones() {
        let mut t = Tape::new();
        let w = t.variable(Matrix::from_fn(2, 3, |r, c| (r + c) as f64));
        let s = t.sum_all(w);
        let g = t.backward(s).unwrap();
        assert_eq!(g.get(w).unwrap(), &Matrix::filled(2, 3, 1.0));
    }

    #[test]
    fn square_gradient_is_twice_value() {
        let mut t = Tape::new();
        let wv = Matrix::from_fn(2, 3, |r, c| r as f64 - c as f64 * 0.5);
        let w = t.variable(wv.clone());
        let sq = t.hadamard(w, w).unwrap();
        let s = t.sum_all(sq);
        let g = t.backward(s).unwrap();
        assert_eq!(g.get(w).unwrap(), &wv.map(|x| 2.0 * x));
    }

    #[test]
    fn unreachable_and_constant_leaves_get_nothing() {
        let mut t = Tape::new();
        let w = t.variable(Matrix::filled(1, 1, 2.0));
        let unused = t.variable(Matrix::filled(1, 1, 3.0));
        let c = t.constant(Matrix::filled(1, 1, 4.0));
        let p = t.hadamard(w, c).unwrap();
        let g = t.backward(p).unwrap();
        assert_eq!(g.get(w).unwrap().as_slice(), &[4.0]);
        assert!(g.get(unused).is_none());
        assert!(g.get(c).is_none());
    }

    #[test]
    fn primitives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a0 = random_matrix(&mut rng, 4, 5, 1.0);
        let b0 = random_matrix(&mut rng, 5, 3, 1.0);
        let c0 = random_matrix(&mut rng, 4, 5, 1.0);
        let bias0 = random_matrix(&mut rng, 1, 3, 1.0);
        let pos0 = random_matrix(&mut rng, 4, 5, 1.0).map(|x| x.abs() + 0.1);
        let target = random_matrix(&mut rng, 4, 3, 1.0).map(|x| x.abs());

        check_gradients(&[a0, b0, c0, bias0, pos0], 1e-4, |t, v| {
            let (a, b, c, bias, pos) = (v[0], v[1], v[2], v[3], v[4]);
            let mm = t.matmul(a, b)?;
            let biased = t.add_bias(mm, bias)?;
            let sg = t.sigmoid(biased);
            let th = t.tanh(biased);
            let sum = t.add(sg, th)?;
            let diff = t.sub(a, c)?;
            let had = t.hadamard(diff, pos)?;
            let lg = t.log_eps(pos, 1e-12)?;
            let mixed = t.hadamard(had, lg)?;
            let ab = t.abs(mixed);
            let rl = t.relu(diff);
            let cat = t.concat_cols(ab, rl)?;
            let top = t.slice_rows(cat, 1, 3)?;
            let stacked = t.concat_rows(&[top, cat])?;
            let scaled = t.scale(stacked, 0.7);
            let d = t.diag(scaled);
            let sq = t.hadamard(sum, sum)?;
            let s1 = t.sum_all(sq);
            let s2 = t.sum_all(d);
            let s3 = t.sum_all(scaled);
            let est = t.relu(sum);
            let small = t.scale(est, 0.5);
            let eps_est = t.add_bias(small, bias)?;
            let pos_est = t.abs(eps_est);
            let kl = t.gen_kl(&target, pos_est, 1e-12)?;
            let t1 = t.add(s1, s2)?;
            let t2 = t.add(t1, s3)?;
            t.add(t2, kl)
        });
    }

    #[test]
    fn backward_is_deterministic() {
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let mut t = Tape::new();
            let a = t.variable(random_matrix(&mut rng, 6, 6, 1.0));
            let b = t.variable(random_matrix(&mut rng, 6, 6, 1.0));
            let m = t.matmul(a, b).unwrap();
            let s = t.tanh(m);
            let r = t.sum_all(s);
            let g = t.backward(r).unwrap();
            (g.get(a).unwrap().clone(), g.get(b).unwrap().clone())
        };
        let (a1, b1) = run();
        let (a2, b2) = run();
        assert_eq!(a1.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                   a2.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        assert_eq!(b1, b2);
    }
}
