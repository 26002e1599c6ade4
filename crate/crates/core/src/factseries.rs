//! Matrix factorial series Σ A_s x^{−[s]_h} with (C, λ) growth certificates.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix, ZERO};
use crate::rational::RationalMatrix;

pub const DEFAULT_ORDER: usize = 64;

/// ‖A_s‖ ≤ c·λ^{[s−1]_h} for every s ≥ 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub c: f64,
    pub lambda: f64,
}

#[derive(Clone, Debug)]
pub struct FactorialSeries {
    h: f64,
    coeffs: Vec<ComplexMatrix>,
    cert: Option<Certificate>,
}

/// λ^{[k]_h} = λ(λ+h)…(λ+(k−1)h)
pub fn rising(lambda: f64, k: usize, h: f64) -> f64 {
    (0..k).map(|i| lambda + i as f64 * h).product()
}

/// c^{(k)}_{j,l} = binom(j+k−1, k)·l^{[k]}.
pub fn product_coefficient(j: usize, k: usize, l: usize) -> f64 {
    let mut v = 1.0;
    for i in 1..=k {
        v *= (j + i - 1) as f64 / i as f64 * (l + i - 1) as f64;
    }
    v
}

/// Unsigned Stirling numbers of the first kind c(n, k), n ≤ max.
pub fn stirling_first(max: usize) -> Vec<Vec<f64>> {
    let mut t = vec![vec![0.0; max + 1]; max + 1];
    t[0][0] = 1.0;
    for n in 0..max {
        for k in 1..=n + 1 {
            t[n + 1][k] = n as f64 * t[n][k] + t[n][k - 1];
        }
    }
    t
}

/// Π_{k<count} (mu + k h)/(lambda + k h)
fn rising_ratio(mu: f64, lambda: f64, count: usize, h: f64) -> f64 {
    (0..count).map(|k| (mu + k as f64 * h) / (lambda + k as f64 * h)).product()
}

impl FactorialSeries {
    pub fn new(h: f64, coeffs: Vec<ComplexMatrix>, cert: Option<Certificate>) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Invalid(format!("step h = {h} must be positive")));
        }
        let Some(first) = coeffs.first() else {
            return Err(Error::Invalid("a factorial series needs a constant term".into()));
        };
        let n = first.nrows();
        if n == 0 || coeffs.iter().any(|m| m.nrows() != n || m.ncols() != n) {
            return Err(Error::Dimension("coefficients must share one square dimension".into()));
        }
        Ok(FactorialSeries { h, coeffs, cert })
    }

    pub fn constant(h: f64, m: ComplexMatrix, order: usize) -> Result<Self> {
        let n = m.nrows();
        let mut coeffs = vec![ComplexMatrix::zeros(n, n); order + 1];
        coeffs[0] = m;
        Self::new(h, coeffs, Some(Certificate { c: 0.0, lambda: 0.0 }))
    }

    pub fn identity(h: f64, n: usize, order: usize) -> Self {
        Self::constant(h, linalg::identity(n), order).expect("identity is valid")
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn dim(&self) -> usize {
        self.coeffs[0].nrows()
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[ComplexMatrix] {
        &self.coeffs
    }

    pub fn coeff(&self, s: usize) -> &ComplexMatrix {
        &self.coeffs[s]
    }

    pub fn cert(&self) -> Option<Certificate> {
        self.cert
    }

    pub fn with_cert(mut self, cert: Option<Certificate>) -> Self {
        self.cert = cert;
        self
    }

    pub fn truncate(&self, order: usize) -> Self {
        let mut s = self.clone();
        s.coeffs.truncate(order.min(self.order()) + 1);
        s
    }

    fn is_constant(&self) -> bool {
        self.coeffs[1..].iter().all(|m| m.iter().all(|z| *z == ZERO))
    }

    /// Largest s whose coefficient violates the certificate, if any.
    pub fn cert_violation(&self) -> Option<usize> {
        let cert = self.cert?;
        (1..self.coeffs.len()).find(|&s| {
            let bound = cert.c * rising(cert.lambda, s - 1, self.h);
            linalg::norm(&self.coeffs[s]) > bound * (1.0 + 1e-12)
        })
    }

    /// Raises c until every stored coefficient satisfies the certificate.
    pub fn ensure_cert(mut self) -> Self {
        if let Some(mut cert) = self.cert {
            for s in 1..self.coeffs.len() {
                let r = rising(cert.lambda, s - 1, self.h);
                let nrm = linalg::norm(&self.coeffs[s]);
                if nrm > cert.c * r {
                    cert.c = if r > 0.0 { nrm / r * (1.0 + 1e-9) } else { f64::INFINITY };
                }
            }
            self.cert = Some(cert);
        }
        self
    }

    /// C·λ^{[N]}/((X−λ)·X^{[N]}) at X = re_x, the exact tail of the majorant.
    pub fn tail_bound(&self, re_x: f64) -> Option<f64> {
        let cert = self.cert?;
        if self.is_constant() {
            return Some(0.0);
        }
        let n = self.order();
        if cert.c == 0.0 {
            return Some(0.0);
        }
        Some(cert.c * rising_ratio(cert.lambda, re_x, n, self.h) / (re_x - cert.lambda))
    }

    /// Σ_{s≤N} A_s x^{−[s]_h} and a bound on the neglected tail.
    pub fn evaluate(&self, x: Complex64) -> Result<(ComplexMatrix, f64)> {
        if self.is_constant() {
            return Ok((self.coeffs[0].clone(), 0.0));
        }
        if let Some(cert) = self.cert {
            if x.re <= cert.lambda + 1.0 {
                return Err(Error::OutOfHalfPlane { re: x.re, bound: cert.lambda + 1.0 });
            }
        }
        let n = self.order();
        for k in 0..n {
            let d = x + k as f64 * self.h;
            if d.norm() < 1e-300 {
                return Err(Error::Pole(x));
            }
        }
        let mut acc = self.coeffs[n].clone();
        for s in (1..n).rev() {
            acc = &self.coeffs[s] + acc / (x + s as f64 * self.h);
        }
        let value = &self.coeffs[0] + acc / x;
        let tail = match self.tail_bound(x.re) {
            Some(t) => t,
            None => {
                let mut p = Complex64::from(1.0);
                for k in 0..n {
                    p /= x + k as f64 * self.h;
                }
                linalg::norm(&self.coeffs[n]) * p.norm()
            }
        };
        Ok((value, tail))
    }

    /// Coefficients Ā_s = A_s/h^s of the same function in the variable x/h.
    pub fn rescaled(&self) -> Self {
        let h = self.h;
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(s, m)| m / Complex64::from(h.powi(s as i32)))
            .collect();
        let cert = self.cert.map(|c| Certificate { c: c.c / h, lambda: c.lambda / h });
        FactorialSeries { h: 1.0, coeffs, cert }
    }

    /// Inverse of `rescaled`: turns unit-step coefficients into step-h ones.
    pub fn from_rescaled(bar: &FactorialSeries, h: f64) -> Self {
        let coeffs = bar
            .coeffs
            .iter()
            .enumerate()
            .map(|(s, m)| m * Complex64::from(h.powi(s as i32)))
            .collect();
        let cert = bar.cert.map(|c| Certificate { c: c.c * h, lambda: c.lambda * h });
        FactorialSeries { h, coeffs, cert }
    }
}

fn check_compatible(a: &FactorialSeries, b: &FactorialSeries) -> Result<()> {
    if (a.h - b.h).abs() > 1e-15 * a.h.max(b.h) {
        return Err(Error::StepMismatch(a.h, b.h));
    }
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!("{} vs {}", a.dim(), b.dim())));
    }
    Ok(())
}

/// Σ_{(j,k,l) ∈ J_s} c^{(k)}_{j,l} h^k A_j B_l
pub(crate) fn convolution(a: &[ComplexMatrix], b: &[ComplexMatrix], s: usize, h: f64) -> ComplexMatrix {
    let n = a[0].nrows();
    let mut acc = ComplexMatrix::zeros(n, n);
    for j in 1..s {
        for l in 1..=s - j {
            let k = s - j - l;
            let w = product_coefficient(j, k, l) * h.powi(k as i32);
            acc += &a[j] * &b[l] * Complex64::from(w);
        }
    }
    acc
}

/// Coefficient bound for a product of majorant series, normalised by λ^{[s−1]}.
fn product_certificate(a: &FactorialSeries, b: &FactorialSeries, upto: usize) -> Option<Certificate> {
    let (ca, cb) = (a.cert?, b.cert?);
    let h = a.h;
    let (na, nb) = (linalg::norm(&a.coeffs[0]), linalg::norm(&b.coeffs[0]));
    let lambda = ca.lambda + cb.lambda + na.max(nb) + h;
    let mu = ca.lambda.max(cb.lambda);
    let mut c: f64 = 0.0;
    for s in 1..=upto {
        let lin = na * cb.c * rising_ratio(cb.lambda, lambda, s - 1, h) + ca.c * nb * rising_ratio(ca.lambda, lambda, s - 1, h);
        // derivative of μ ↦ μ^{[s−1]} at the larger abscissa bounds the convolution
        let mut conv = 0.0;
        if s >= 2 {
            for i in 0..s - 1 {
                let mut p = 1.0 / (lambda + i as f64 * h);
                for k in (0..s - 1).filter(|&k| k != i) {
                    p *= (mu + k as f64 * h) / (lambda + k as f64 * h);
                }
                conv += p;
            }
        }
        c = c.max(lin + ca.c * cb.c * conv);
    }
    Some(Certificate { c, lambda })
}

/// Product series, truncated at the shorter operand.
pub fn multiply(a: &FactorialSeries, b: &FactorialSeries) -> Result<FactorialSeries> {
    check_compatible(a, b)?;
    let order = a.order().min(b.order());
    let h = a.h;
    let mut coeffs = Vec::with_capacity(order + 1);
    coeffs.push(&a.coeffs[0] * &b.coeffs[0]);
    for s in 1..=order {
        let c = &a.coeffs[0] * &b.coeffs[s] + &a.coeffs[s] * &b.coeffs[0] + convolution(&a.coeffs, &b.coeffs, s, h);
        coeffs.push(c);
    }
    let cert = product_certificate(a, b, 4 * order + 16);
    Ok(FactorialSeries::new(h, coeffs, cert)?.ensure_cert())
}

/// Coefficients of x ↦ A(x − h).
pub fn translate(a: &FactorialSeries) -> FactorialSeries {
    let h = a.h;
    let n = a.dim();
    let mut coeffs = vec![a.coeffs[0].clone()];
    for s in 1..=a.order() {
        let mut acc = ComplexMatrix::zeros(n, n);
        // (s−1)!/(k−1)! h^{s−k}
        let mut w = 1.0;
        for k in (1..s).rev() {
            w *= k as f64 * h;
            acc += &a.coeffs[k] * Complex64::from(w);
        }
        coeffs.push(&a.coeffs[s] + acc);
    }
    let cert = a.cert.map(|c| Certificate { c: c.c, lambda: c.lambda + h });
    FactorialSeries { h, coeffs, cert }
}

/// Fits (C, λ) to a majorant sequence y_1..y_N in the step-h frame.
pub(crate) fn fit_certificate(y: &[f64], h: f64) -> Certificate {
    let n = y.len() - 1;
    let mut lambda: f64 = 0.0;
    for s in (n / 2).max(2)..=n {
        if y[s - 1] > 0.0 && y[s].is_finite() {
            lambda = lambda.max(y[s] / y[s - 1] - (s as f64 - 2.0) * h);
        }
    }
    let mut c: f64 = 0.0;
    for s in 1..=n {
        let r = rising(lambda, s - 1, h);
        if y[s] > 0.0 {
            c = c.max(if r > 0.0 { y[s] / r } else { f64::INFINITY });
        }
    }
    Certificate { c, lambda }
}

/// Multiplicative inverse, defined when A₀ is invertible.
pub fn invert(a: &FactorialSeries) -> Result<FactorialSeries> {
    let inv0 = linalg::inverse(&a.coeffs[0]).map_err(|_| Error::Singular("constant term is not invertible".into()))?;
    let h = a.h;
    let order = a.order();
    let mut coeffs = vec![inv0.clone()];
    for s in 1..=order {
        let rhs = &a.coeffs[s] * &inv0 + convolution(&a.coeffs, &coeffs_padded(&coeffs, s), s, h);
        coeffs.push(-(&inv0 * rhs));
    }
    let cert = a.cert.map(|cert| {
        let m0 = linalg::norm(&inv0);
        let bound = |j: usize| cert.c * rising(cert.lambda, j - 1, h);
        let mut y = vec![m0];
        for s in 1..=order {
            let mut acc = bound(s) * m0;
            for j in 1..s {
                for l in 1..=s - j {
                    let k = s - j - l;
                    acc += product_coefficient(j, k, l) * h.powi(k as i32) * bound(j) * y[l];
                }
            }
            y.push(m0 * acc);
        }
        fit_certificate(&y, h)
    });
    Ok(FactorialSeries::new(h, coeffs, cert)?.ensure_cert())
}

fn coeffs_padded(c: &[ComplexMatrix], s: usize) -> Vec<ComplexMatrix> {
    let n = c[0].nrows();
    let mut v = c.to_vec();
    v.resize(s + 1, ComplexMatrix::zeros(n, n));
    v
}

/// First order+1 factorial coefficients of a proper rational matrix.
pub fn expand_rational(r: &RationalMatrix, h: f64, order: usize) -> Result<FactorialSeries> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Invalid(format!("step h = {h} must be positive")));
    }
    let pc = r.power_coefficients(order)?;
    let st = stirling_first(order);
    let n = r.dim();
    let mut coeffs = vec![pc[0].clone()];
    for s in 1..=order {
        let mut acc = ComplexMatrix::zeros(n, n);
        for k in 1..=s {
            let w = h.powi((s - k) as i32) * st[s - 1][k - 1];
            acc += &pc[k] * Complex64::from(w);
        }
        coeffs.push(acc);
    }
    let radius = 1.25 * r.max_pole_modulus() + 0.25;
    let sup = 1.1 * r.sup_norm_on_circle(radius, 512);
    let cert = Certificate { c: sup * radius, lambda: radius };
    Ok(FactorialSeries::new(h, coeffs, Some(cert))?.ensure_cert())
}

/// Extrapolated h → 0 limit of one coefficient over a family.
#[derive(Clone, Debug)]
pub struct CoefficientLimit {
    pub limit: ComplexMatrix,
    pub samples: Vec<(f64, ComplexMatrix)>,
    pub diverging: bool,
}

/// Linear Richardson on the last two samples; `family` ordered by decreasing h.
pub fn coefficient_limits(family: &[FactorialSeries], s: usize) -> Result<CoefficientLimit> {
    if family.len() < 2 {
        return Err(Error::Invalid("need at least two h samples".into()));
    }
    if family.windows(2).any(|w| w[1].h >= w[0].h) {
        return Err(Error::Invalid("h samples must decrease".into()));
    }
    if family.iter().any(|f| f.order() < s) {
        return Err(Error::Invalid(format!("coefficient {s} is beyond a sample's order")));
    }
    let samples: Vec<(f64, ComplexMatrix)> = family.iter().map(|f| (f.h, f.coeffs[s].clone())).collect();
    let k = samples.len();
    let (h1, a1) = &samples[k - 2];
    let (h2, a2) = &samples[k - 1];
    let limit = a2 + (a2 - a1) * Complex64::from(h2 / (h1 - h2));
    let diffs: Vec<f64> = samples.windows(2).map(|w| linalg::max_abs_diff(&w[0].1, &w[1].1)).collect();
    let scale = samples.iter().map(|s| linalg::norm(&s.1)).fold(1.0, f64::max);
    let diverging = diffs.windows(2).any(|d| d[1] > d[0] * (1.0 + 1e-9) && d[1] > 1e-13 * scale);
    Ok(CoefficientLimit { limit, samples, diverging })
}
