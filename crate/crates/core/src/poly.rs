//! Dense univariate polynomials with complex coefficients, ascending order.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::linalg::{ComplexMatrix, ONE, ZERO};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polynomial {
    coeffs: Vec<Complex64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<Complex64>) -> Self {
        while coeffs.len() > 1 && coeffs.last() == Some(&ZERO) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(ZERO);
        }
        Polynomial { coeffs }
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&r| Complex64::from(r)).collect())
    }

    pub fn constant(v: Complex64) -> Self {
        Self::new(vec![v])
    }

    pub fn zero() -> Self {
        Self::constant(ZERO)
    }

    pub fn one() -> Self {
        Self::constant(ONE)
    }

    /// x − a
    pub fn linear_root(a: Complex64) -> Self {
        Self::new(vec![-a, ONE])
    }

    pub fn from_roots(roots: &[Complex64]) -> Self {
        roots
            .iter()
            .fold(Self::one(), |acc, &r| &acc * &Self::linear_root(r))
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|z| *z == ZERO)
    }

    pub fn leading(&self) -> Complex64 {
        *self.coeffs.last().unwrap()
    }

    pub fn eval(&self, x: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(ZERO, |acc, &a| acc * x + a)
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() == 1 {
            return Self::zero();
        }
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &a)| a * k as f64)
                .collect(),
        )
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::new(self.coeffs.iter().map(|&a| a * s).collect())
    }

    /// p(a·x + b)
    pub fn compose_affine(&self, a: Complex64, b: Complex64) -> Self {
        let lin = Self::new(vec![b, a]);
        self.coeffs
            .iter()
            .rev()
            .fold(Self::zero(), |acc, &coef| &(&acc * &lin) + &Self::constant(coef))
    }

    /// Roots by companion-matrix eigenvalues, polished with Newton steps.
    pub fn roots(&self) -> Vec<Complex64> {
        let zeros = self.coeffs.iter().take_while(|z| **z == ZERO).count();
        if zeros > 0 && !self.is_zero() {
            let mut roots = vec![ZERO; zeros];
            roots.extend(Polynomial::new(self.coeffs[zeros..].to_vec()).roots());
            return roots;
        }
        let d = self.degree();
        if d == 0 {
            return Vec::new();
        }
        let lead = self.leading();
        let mut comp = ComplexMatrix::zeros(d, d);
        for i in 1..d {
            comp[(i, i - 1)] = ONE;
        }
        for i in 0..d {
            comp[(i, d - 1)] = -self.coeffs[i] / lead;
        }
        let (_, t) = crate::linalg::schur(&comp);
        let dp = self.derivative();
        (0..d)
            .map(|i| {
                let mut z = t[(i, i)];
                for _ in 0..3 {
                    let der = dp.eval(z);
                    if der.norm() == 0.0 {
                        break;
                    }
                    let step = self.eval(z) / der;
                    if !step.re.is_finite() || !step.im.is_finite() || step.norm() > 1e-3 * (1.0 + z.norm()) {
                        break;
                    }
                    z -= step;
                }
                z
            })
            .collect()
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, o: &Polynomial) -> Polynomial {
        let len = self.coeffs.len().max(o.coeffs.len());
        Polynomial::new(
            (0..len)
                .map(|k| {
                    self.coeffs.get(k).copied().unwrap_or(ZERO) + o.coeffs.get(k).copied().unwrap_or(ZERO)
                })
                .collect(),
        )
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, o: &Polynomial) -> Polynomial {
        self + &(-o)
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-ONE)
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, o: &Polynomial) -> Polynomial {
        let mut out = vec![ZERO; self.coeffs.len() + o.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in o.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(out)
    }
}

/// Groups nearby roots and returns (centroid, multiplicity) pairs.
pub fn cluster_roots(roots: &[Complex64], rel_tol: f64) -> Vec<(Complex64, usize)> {
    let mut out: Vec<(Complex64, usize)> = Vec::new();
    for &r in roots {
        match out
            .iter_mut()
            .find(|(p, _)| (*p - r).norm() <= rel_tol * (1.0 + p.norm()))
        {
            Some((p, m)) => {
                *p = (*p * *m as f64 + r) / (*m as f64 + 1.0);
                *m += 1;
            }
            None => out.push((r, 1)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    #[test]
    fn roots_of_monomials() {
        for n in 1..=8 {
            let mut coeffs = vec![ZERO; n + 1];
            coeffs[n] = ONE;
            let r = Polynomial::new(coeffs).roots();
            assert_eq!(r, vec![ZERO; n]);
        }
        let shifted = Polynomial::from_roots(&[ZERO, ZERO, c(2.0, 1.0)]).roots();
        assert_eq!(&shifted[..2], &[ZERO, ZERO]);
        assert!((shifted[2] - c(2.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn roots_of_product() {
        let p = Polynomial::from_roots(&[c(1.0, 0.0), c(0.0, 1.0), c(-2.0, 0.5)]);
        let mut r = p.roots();
        r.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        assert!((r[0] - c(-2.0, 0.5)).norm() < 1e-12);
        assert!((r[1] - c(0.0, 1.0)).norm() < 1e-12);
        assert!((r[2] - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn affine_composition() {
        let p = Polynomial::from_real(&[1.0, 2.0, 3.0]);
        let q = p.compose_affine(c(-1.0, 0.0), c(0.5, 0.0));
        for x in [0.0, 1.3, -2.0] {
            let x = c(x, 0.2);
            assert!((q.eval(x) - p.eval(c(0.5, 0.0) - x)).norm() < 1e-13);
        }
    }

    #[test]
    fn clustering_merges_double_root() {
        let p = Polynomial::from_roots(&[c(2.0, 0.0), c(2.0, 0.0), c(-1.0, 0.0)]);
        let cl = cluster_roots(&p.roots(), 1e-6);
        assert_eq!(cl.len(), 2);
        assert!(cl.iter().any(|&(r, m)| m == 2 && (r - c(2.0, 0.0)).norm() < 1e-7));
    }
}
