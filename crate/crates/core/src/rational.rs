//! Matrices of rational functions with complex coefficients.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix, ONE, ZERO};
use crate::poly::{cluster_roots, Polynomial};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RationalEntry {
    pub num: Polynomial,
    pub den: Polynomial,
}

impl RationalEntry {
    pub fn new(num: Polynomial, den: Polynomial) -> Self {
        RationalEntry { num, den }
    }

    pub fn constant(v: Complex64) -> Self {
        Self::new(Polynomial::constant(v), Polynomial::one())
    }

    /// residue / (x − pole)
    pub fn simple_pole(residue: Complex64, pole: Complex64) -> Self {
        Self::new(Polynomial::constant(residue), Polynomial::linear_root(pole))
    }

    pub fn eval(&self, x: Complex64) -> Complex64 {
        self.num.eval(x) / self.den.eval(x)
    }

    pub fn is_proper(&self) -> bool {
        self.num.is_zero() || self.num.degree() <= self.den.degree()
    }
}

/// n×n grid of rational entries with cached poles.
#[derive(Clone, Debug)]
pub struct RationalMatrix {
    n: usize,
    entries: Vec<RationalEntry>,
    poles: Vec<(Complex64, usize)>,
}

impl PartialEq for RationalMatrix {
    fn eq(&self, o: &Self) -> bool {
        self.n == o.n && self.entries == o.entries
    }
}

impl RationalMatrix {
    /// `entries` in row-major order.
    pub fn new(n: usize, entries: Vec<RationalEntry>) -> Result<Self> {
        if n == 0 || entries.len() != n * n {
            return Err(Error::Dimension(format!("{} entries for dimension {n}", entries.len())));
        }
        if let Some(k) = entries.iter().position(|e| e.den.is_zero()) {
            return Err(Error::Invalid(format!("zero denominator at ({},{})", k / n, k % n)));
        }
        let mut poles: Vec<(Complex64, usize)> = Vec::new();
        for e in &entries {
            if e.num.is_zero() {
                continue;
            }
            for (p, m) in cluster_roots(&e.den.roots(), 1e-6) {
                match poles.iter_mut().find(|(q, _)| (*q - p).norm() <= 1e-8 * (1.0 + q.norm())) {
                    Some((_, mm)) => *mm = (*mm).max(m),
                    None => poles.push((p, m)),
                }
            }
        }
        Ok(RationalMatrix { n, entries, poles })
    }

    pub fn from_constant(m: &ComplexMatrix) -> Self {
        let n = m.nrows();
        let entries = (0..n * n).map(|k| RationalEntry::constant(m[(k / n, k % n)])).collect();
        Self::new(n, entries).expect("constant entries are valid")
    }

    /// A₀ + Σ Rᵢ/(x − pᵢ)
    pub fn from_partial_fractions(a0: &ComplexMatrix, terms: &[(Complex64, ComplexMatrix)]) -> Result<Self> {
        let n = a0.nrows();
        let q = Polynomial::from_roots(&terms.iter().map(|t| t.0).collect::<Vec<_>>());
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let mut num = q.scale(a0[(i, j)]);
                for (k, (_, r)) in terms.iter().enumerate() {
                    let others: Vec<Complex64> = terms.iter().enumerate().filter(|&(l, _)| l != k).map(|(_, t)| t.0).collect();
                    num = &num + &Polynomial::from_roots(&others).scale(r[(i, j)]);
                }
                entries.push(RationalEntry::new(num, q.clone()));
            }
        }
        Self::new(n, entries)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[RationalEntry] {
        &self.entries
    }

    pub fn entry(&self, i: usize, j: usize) -> &RationalEntry {
        &self.entries[i * self.n + j]
    }

    /// Distinct poles with multiplicities.
    pub fn poles(&self) -> &[(Complex64, usize)] {
        &self.poles
    }

    pub fn max_pole_modulus(&self) -> f64 {
        self.poles.iter().map(|p| p.0.norm()).fold(0.0, f64::max)
    }

    pub fn check_proper(&self) -> Result<()> {
        match self.entries.iter().position(|e| !e.is_proper()) {
            Some(k) => Err(Error::NonProper(k / self.n, k % self.n)),
            None => Ok(()),
        }
    }

    pub fn value_at_infinity(&self) -> Result<ComplexMatrix> {
        self.check_proper()?;
        Ok(ComplexMatrix::from_fn(self.n, self.n, |i, j| {
            let e = self.entry(i, j);
            if e.num.is_zero() || e.num.degree() < e.den.degree() {
                ZERO
            } else {
                e.num.leading() / e.den.leading()
            }
        }))
    }

    pub fn near_pole(&self, x: Complex64, rel: f64) -> Option<Complex64> {
        self.poles
            .iter()
            .map(|p| p.0)
            .find(|p| (x - p).norm() < rel * p.norm().max(1.0))
    }

    pub fn eval(&self, x: Complex64) -> Result<ComplexMatrix> {
        if let Some(p) = self.near_pole(x, 1e-12) {
            return Err(Error::Pole(p));
        }
        let m = ComplexMatrix::from_fn(self.n, self.n, |i, j| self.entry(i, j).eval(x));
        if !linalg::is_finite(&m) {
            return Err(Error::Pole(x));
        }
        Ok(m)
    }

    /// R₀..R_order with R(x) = Σ R_k x^{−k} at ∞.
    pub fn power_coefficients(&self, order: usize) -> Result<Vec<ComplexMatrix>> {
        self.check_proper()?;
        let mut out = vec![ComplexMatrix::zeros(self.n, self.n); order + 1];
        for (idx, e) in self.entries.iter().enumerate() {
            let (i, j) = (idx / self.n, idx % self.n);
            let d = e.den.degree();
            let rev = |p: &Polynomial| -> Vec<Complex64> {
                (0..=d).map(|k| p.coeffs().get(d - k).copied().unwrap_or(ZERO)).collect()
            };
            let (a, b) = (rev(&e.num), rev(&e.den));
            let mut s = vec![ZERO; order + 1];
            for k in 0..=order {
                let mut acc = a.get(k).copied().unwrap_or(ZERO);
                for m in 1..=k.min(d) {
                    acc -= b[m] * s[k - m];
                }
                s[k] = acc / b[0];
            }
            for k in 0..=order {
                out[k][(i, j)] = s[k];
            }
        }
        Ok(out)
    }

    /// Entries composed with x ↦ a·x + b.
    pub fn compose_affine(&self, a: Complex64, b: Complex64) -> Self {
        let entries = self
            .entries
            .iter()
            .map(|e| RationalEntry::new(e.num.compose_affine(a, b), e.den.compose_affine(a, b)))
            .collect();
        Self::new(self.n, entries).expect("composition keeps denominators nonzero")
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let entries = self
            .entries
            .iter()
            .map(|e| RationalEntry::new(e.num.scale(s), e.den.clone()))
            .collect();
        Self::new(self.n, entries).expect("scaling keeps denominators nonzero")
    }

    /// Largest row sum of entrywise sup over the circle |x| = r, by sampling.
    pub fn sup_norm_on_circle(&self, r: f64, samples: usize) -> f64 {
        let mut sup = vec![0.0f64; self.n * self.n];
        for k in 0..samples {
            let th = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / samples as f64;
            let x = Complex64::from_polar(r, th);
            for (idx, e) in self.entries.iter().enumerate() {
                sup[idx] = sup[idx].max(e.eval(x).norm());
            }
        }
        (0..self.n)
            .map(|i| sup[i * self.n..(i + 1) * self.n].iter().sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// (q, P) with R = P/q and q the product of the distinct denominators.
    pub fn common_denominator(&self) -> (Polynomial, Vec<Polynomial>) {
        let mut dens: Vec<Polynomial> = Vec::new();
        let monic = |p: &Polynomial| p.scale(ONE / p.leading());
        for e in &self.entries {
            let m = monic(&e.den);
            if !dens.iter().any(|d| same_poly(d, &m)) {
                dens.push(m);
            }
        }
        let q = dens.iter().fold(Polynomial::one(), |acc, d| &acc * d);
        let nums = self
            .entries
            .iter()
            .map(|e| {
                let m = monic(&e.den);
                let scale = ONE / e.den.leading();
                dens.iter()
                    .filter(|d| !same_poly(d, &m))
                    .fold(e.num.scale(scale), |acc, d| &acc * d)
            })
            .collect();
        (q, nums)
    }

    /// B(t) = (t − h)(tI + hA(h − t))⁻¹A(h − t): the coefficient matrix of Z(t) = Y(−t).
    pub fn minus_transform(&self, h: f64) -> Result<Self> {
        let n = self.n;
        if n > 6 {
            return Err(Error::Invalid(format!("mirror transform supports n <= 6, got {n}")));
        }
        let (q, nums) = self.common_denominator();
        let hh = Complex64::from(h);
        let qm = q.compose_affine(-ONE, hh);
        let pm: Vec<Polynomial> = nums.iter().map(|p| p.compose_affine(-ONE, hh)).collect();
        let t = Polynomial::new(vec![ZERO, ONE]);
        let tq = &t * &qm;
        let m: Vec<Polynomial> = (0..n * n)
            .map(|k| {
                let hp = pm[k].scale(hh);
                if k / n == k % n {
                    &hp + &tq
                } else {
                    hp
                }
            })
            .collect();
        let det = poly_det(&m, n);
        if det.is_zero() {
            return Err(Error::Singular("tI + hA(h−t) is identically singular".into()));
        }
        let norm = ONE / det.leading();
        let den = det.scale(norm);
        let adj = poly_adjugate(&m, n);
        let factor = Polynomial::new(vec![-hh * norm, norm]);
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = Polynomial::zero();
                for k in 0..n {
                    acc = &acc + &(&adj[i * n + k] * &pm[k * n + j]);
                }
                entries.push(RationalEntry::new(&factor * &acc, den.clone()));
            }
        }
        Self::new(n, entries)
    }
}

fn same_poly(a: &Polynomial, b: &Polynomial) -> bool {
    a.degree() == b.degree()
        && a.coeffs()
            .iter()
            .zip(b.coeffs())
            .all(|(x, y)| (x - y).norm() <= 1e-14 * (1.0 + x.norm()))
}

fn minor(m: &[Polynomial], n: usize, row: usize, col: usize) -> Vec<Polynomial> {
    let mut out = Vec::with_capacity((n - 1) * (n - 1));
    for i in (0..n).filter(|&i| i != row) {
        for j in (0..n).filter(|&j| j != col) {
            out.push(m[i * n + j].clone());
        }
    }
    out
}

fn poly_det(m: &[Polynomial], n: usize) -> Polynomial {
    match n {
        0 => Polynomial::one(),
        1 => m[0].clone(),
        _ => {
            let mut acc = Polynomial::zero();
            for j in 0..n {
                if m[j].is_zero() {
                    continue;
                }
                let term = &m[j] * &poly_det(&minor(m, n, 0, j), n - 1);
                acc = if j % 2 == 0 { &acc + &term } else { &acc - &term };
            }
            acc
        }
    }
}

fn poly_adjugate(m: &[Polynomial], n: usize) -> Vec<Polynomial> {
    if n == 1 {
        return vec![Polynomial::one()];
    }
    let mut out = vec![Polynomial::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            let d = poly_det(&minor(m, n, j, i), n - 1);
            out[i * n + j] = if (i + j) % 2 == 0 { d } else { -&d };
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    #[test]
    fn power_coefficients_of_simple_pole() {
        let a = c(0.5, -1.0);
        let r = RationalMatrix::new(1, vec![RationalEntry::simple_pole(ONE, a)]).unwrap();
        let pc = r.power_coefficients(6).unwrap();
        assert_eq!(pc[0][(0, 0)], ZERO);
        for k in 1..=6 {
            assert!((pc[k][(0, 0)] - a.powi(k as i32 - 1)).norm() < 1e-14);
        }
    }

    #[test]
    fn non_proper_rejected() {
        let e = RationalEntry::new(Polynomial::from_real(&[0.0, 0.0, 1.0]), Polynomial::from_real(&[1.0, 1.0]));
        let r = RationalMatrix::new(1, vec![e]).unwrap();
        assert!(matches!(r.value_at_infinity(), Err(Error::NonProper(0, 0))));
    }

    #[test]
    fn minus_transform_matches_definition() {
        let a0 = ComplexMatrix::from_row_slice(2, 2, &[c(0.2, 0.0), c(0.1, 0.0), ZERO, c(-0.3, 0.1)]);
        let r1 = ComplexMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), ZERO, c(0.2, 0.3), c(-0.1, 0.0)]);
        let a = RationalMatrix::from_partial_fractions(&a0, &[(c(0.3, 1.0), r1)]).unwrap();
        let h = 0.3;
        let b = a.minus_transform(h).unwrap();
        let t = c(1.7, -0.4);
        let ah = a.eval(c(h, 0.0) - t).unwrap();
        let m = linalg::identity(2) * t + &ah * c(h, 0.0);
        let want = linalg::inverse(&m).unwrap() * &ah * (t - h);
        assert!(linalg::max_abs_diff(&b.eval(t).unwrap(), &want) < 1e-12);
        assert!(linalg::max_abs_diff(&b.value_at_infinity().unwrap(), &a0) < 1e-12);
    }
}
