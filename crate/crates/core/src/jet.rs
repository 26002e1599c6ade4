//! Truncated Taylor expansions in one complex parameter.

use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::linalg::{ONE, ZERO};

/// `coeffs[j]` is the coefficient of ε^j; everything beyond `order` is dropped.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    coeffs: Vec<Complex64>,
}

impl Jet {
    pub fn from_coeffs(coeffs: Vec<Complex64>) -> Self {
        assert!(!coeffs.is_empty(), "a jet needs at least one coefficient");
        Jet { coeffs }
    }

    pub fn constant(v: Complex64, order: usize) -> Self {
        let mut coeffs = vec![ZERO; order + 1];
        coeffs[0] = v;
        Jet { coeffs }
    }

    /// The jet of v + ε.
    pub fn variable(v: Complex64, order: usize) -> Self {
        let mut j = Self::constant(v, order);
        if order > 0 {
            j.coeffs[1] = ONE;
        }
        j
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn value(&self) -> Complex64 {
        self.coeffs[0]
    }

    /// Same jet with its constant term replaced.
    pub fn with_value(mut self, v: Complex64) -> Self {
        self.coeffs[0] = v;
        self
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Jet::from_coeffs(self.coeffs.iter().map(|&a| a * s).collect())
    }

    pub fn add_scalar(&self, s: Complex64) -> Self {
        let mut j = self.clone();
        j.coeffs[0] += s;
        j
    }

    /// f(self) given the Taylor coefficients of f at self.value().
    pub fn compose(&self, taylor: &[Complex64]) -> Self {
        let order = self.order();
        let mut d = self.clone();
        d.coeffs[0] = ZERO;
        let mut acc = Jet::constant(taylor.get(order).copied().unwrap_or(ZERO), order);
        for k in (0..order).rev() {
            acc = (&acc * &d).add_scalar(taylor.get(k).copied().unwrap_or(ZERO));
        }
        acc
    }

    pub fn exp(&self) -> Self {
        let e = self.value().exp();
        let mut t = Vec::with_capacity(self.order() + 1);
        let mut fact = 1.0;
        for k in 0..=self.order() {
            if k > 0 {
                fact *= k as f64;
            }
            t.push(e / fact);
        }
        self.compose(&t)
    }

    pub fn ln(&self) -> Self {
        let v = self.value();
        self.ln_with(v.ln(), v)
    }

    /// ln(1 + self), accurate when self.value() is small.
    pub fn ln_1p(&self) -> Self {
        let v = self.value();
        self.ln_with(crate::specfun::ln_1p(v), v + ONE)
    }

    fn ln_with(&self, base: Complex64, arg: Complex64) -> Self {
        let mut t = vec![base];
        let mut p = ONE;
        for k in 1..=self.order() {
            p *= arg;
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            t.push(Complex64::from(sign) / (p * k as f64));
        }
        self.compose(&t)
    }

    pub fn recip(&self) -> Self {
        let v = self.value();
        let mut t = Vec::with_capacity(self.order() + 1);
        let mut p = ONE / v;
        for k in 0..=self.order() {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            t.push(p * sign);
            p /= v;
        }
        self.compose(&t)
    }

    /// Integer power, negative exponents allowed.
    pub fn powi(&self, p: i32) -> Self {
        let v = self.value();
        let mut t = Vec::with_capacity(self.order() + 1);
        let mut binom = ONE;
        for k in 0..=self.order() {
            if k > 0 {
                binom *= Complex64::from((p as f64 - (k as f64 - 1.0)) / k as f64);
            }
            t.push(binom * v.powi(p - k as i32));
        }
        self.compose(&t)
    }

    /// sin(π·self)
    pub fn sin_pi(&self) -> Self {
        let z = self.value() * std::f64::consts::PI;
        let derivs = [z.sin(), z.cos(), -z.sin(), -z.cos()];
        let mut t = Vec::with_capacity(self.order() + 1);
        let mut f = 1.0;
        for k in 0..=self.order() {
            if k > 0 {
                f *= std::f64::consts::PI / k as f64;
            }
            t.push(derivs[k % 4] * f);
        }
        self.compose(&t)
    }

    fn zip(&self, o: &Jet, f: impl Fn(Complex64, Complex64) -> Complex64) -> Jet {
        let order = self.order().min(o.order());
        Jet::from_coeffs((0..=order).map(|k| f(self.coeffs[k], o.coeffs[k])).collect())
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, o: &Jet) -> Jet {
        self.zip(o, |a, b| a + b)
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, o: &Jet) -> Jet {
        self.zip(o, |a, b| a - b)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-ONE)
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, o: &Jet) -> Jet {
        let order = self.order().min(o.order());
        let mut out = vec![ZERO; order + 1];
        for i in 0..=order {
            for j in 0..=order - i {
                out[i + j] += self.coeffs[i] * o.coeffs[j];
            }
        }
        Jet::from_coeffs(out)
    }
}

impl Div for &Jet {
    type Output = Jet;
    fn div(self, o: &Jet) -> Jet {
        self * &o.recip()
    }
}

macro_rules! forward_owned {
    ($($tr:ident $m:ident),*) => {$(
        impl $tr for Jet {
            type Output = Jet;
            fn $m(self, o: Jet) -> Jet { (&self).$m(&o) }
        }
        impl $tr<&Jet> for Jet {
            type Output = Jet;
            fn $m(self, o: &Jet) -> Jet { (&self).$m(o) }
        }
    )*};
}
forward_owned!(Add add, Sub sub, Mul mul, Div div);

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        -&self
    }
}
