//! Dense complex matrix helpers shared by every module.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

pub fn zeros(n: usize) -> ComplexMatrix {
    ComplexMatrix::zeros(n, n)
}

pub fn scalar(v: Complex64) -> ComplexMatrix {
    ComplexMatrix::from_element(1, 1, v)
}

/// Max row-sum norm, used for every certificate in the crate.
pub fn norm(m: &ComplexMatrix) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn inverse(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!("{}x{} is not square", m.nrows(), m.ncols())));
    }
    let inv = m
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("matrix has no inverse".into()))?;
    if inv.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Singular("inverse is not finite".into()));
    }
    Ok(inv)
}

pub fn singular_values(m: &ComplexMatrix) -> Vec<f64> {
    m.clone().svd(false, false).singular_values.iter().copied().collect()
}

/// Spectral condition number.
pub fn condition(m: &ComplexMatrix) -> f64 {
    let sv = singular_values(m);
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn spectral_norm(m: &ComplexMatrix) -> f64 {
    singular_values(m).into_iter().fold(0.0, f64::max)
}

/// Kronecker product a ⊗ b.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Column-major vectorisation.
pub fn vec_of(m: &ComplexMatrix) -> nalgebra::DVector<Complex64> {
    nalgebra::DVector::from_iterator(m.len(), m.iter().copied())
}

pub fn unvec(v: &nalgebra::DVector<Complex64>, n: usize) -> ComplexMatrix {
    ComplexMatrix::from_iterator(n, n, v.iter().copied())
}

/// Matrix of the map U ↦ (A+sI)U − UA on column-major vectorisations.
pub fn sylvester_operator(a0: &ComplexMatrix, s: f64) -> ComplexMatrix {
    let n = a0.nrows();
    let id = identity(n);
    let shifted = a0 + &id * Complex64::from(s);
    kron(&id, &shifted) - kron(&a0.transpose(), &id)
}

pub fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn is_finite(m: &ComplexMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Matrix exponential by scaling and squaring with a Taylor kernel.
/// Complex Schur form `(Q, T)` with `M = Q T Qᴴ`; retries under a fixed unitary similarity when QR stalls.
pub fn schur(m: &ComplexMatrix) -> (ComplexMatrix, ComplexMatrix) {
    let n = m.nrows();
    if (0..n).all(|j| (j + 1..n).all(|i| m[(i, j)] == ZERO)) {
        return (identity(n), m.clone());
    }
    if let Some(s) = nalgebra::linalg::Schur::try_new(m.clone(), f64::EPSILON, 2000) {
        return s.unpack();
    }
    for attempt in 1..=8 {
        let seed = ComplexMatrix::from_fn(n, n, |i, j| {
            let t = (attempt * 7 + i * 13 + j * 29) as f64;
            c(t.sin(), (1.7 * t).cos())
        });
        let u = seed.qr().q();
        let rotated = u.adjoint() * m * &u;
        if let Some(s) = nalgebra::linalg::Schur::try_new(rotated, f64::EPSILON, 2000) {
            let (q, t) = s.unpack();
            return (u * q, t);
        }
    }
    panic!("Schur iteration failed to converge");
}

pub fn expm(m: &ComplexMatrix) -> ComplexMatrix {
    let n = m.nrows();
    let nrm = norm(m);
    let mut k = 0;
    while nrm / 2f64.powi(k) > 0.5 {
        k += 1;
    }
    let a = m / Complex64::from(2f64.powi(k));
    let mut term = identity(n);
    let mut sum = identity(n);
    for j in 1..30 {
        term = &term * &a / Complex64::from(j as f64);
        sum += &term;
    }
    for _ in 0..k {
        sum = &sum * &sum;
    }
    sum
}
