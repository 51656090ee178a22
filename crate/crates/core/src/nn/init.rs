use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::matrix::Matrix;

/// Random matrix with orthonormal columns (or rows, when wider than tall),
/// from the QR factorisation of a Gaussian matrix with the sign of `R`'s
/// diagonal folded into `Q`.
pub fn init_orthogonal(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    assert!(rows > 0 && cols > 0, "orthogonal init needs a non-empty shape");
    let (tall_r, tall_c) = if rows >= cols { (rows, cols) } else { (cols, rows) };
    let gaussian = DMatrix::<f64>::from_fn(tall_r, tall_c, |_, _| rng.sample(StandardNormal));
    let qr = gaussian.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..tall_c {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    if rows >= cols {
        Matrix::from_fn(rows, cols, |i, j| q[(i, j)])
    } else {
        Matrix::from_fn(rows, cols, |i, j| q[(j, i)])
    }
}

/// I.i.d. normal entries with standard deviation `sqrt(2 / (rows + cols))`.
pub fn init_glorot_normal(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    assert!(rows > 0 && cols > 0, "glorot init needs a non-empty shape");
    let std = (2.0 / (rows + cols) as f64).sqrt();
    let normal = Normal::new(0.0, std).expect("positive std");
    Matrix::from_fn(rows, cols, |_, _| normal.sample(rng))
}
