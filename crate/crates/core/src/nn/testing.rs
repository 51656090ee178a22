use rand::Rng;
use rand_distr::StandardNormal;

use super::gradcheck;
use super::{Tape, Var};
use crate::error::Result;
use crate::matrix::Matrix;

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

pub fn check_gradients<F>(inputs: &[Matrix], tol: f64, f: F)
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let report = gradcheck::check(inputs, 1e-5, f).unwrap();
    assert!(
        report.max_rel_error < tol,
        "gradient mismatch: {report:?}"
    );
}
