//! Dense complex matrix aliases and the handful of helpers shared across modules.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// `exp(j 2 pi k / n)`, exact at multiples of a quarter turn.
pub fn root_of_unity(k: usize, n: usize) -> Complex64 {
    let k = k % n;
    match (4 * k) % n {
        0 => match 4 * k / n {
            0 => ONE,
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        },
        _ => Complex64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64),
    }
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Largest entrywise modulus of `a - b`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// Frobenius norm of `a - b`.
pub fn frobenius_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// `Tr(A* B)`.
pub fn trace_inner(a: &CMatrix, b: &CMatrix) -> Complex64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Deviation of `U* U` from the identity.
pub fn isometry_defect(u: &CMatrix) -> f64 {
    max_abs_diff(&(u.adjoint() * u), &identity(u.ncols()))
}

/// Integer power by repeated multiplication; exponents here never exceed 16.
pub fn matrix_power(a: &CMatrix, k: usize) -> CMatrix {
    let mut out = identity(a.nrows());
    for _ in 0..k {
        out = &out * a;
    }
    out
}
