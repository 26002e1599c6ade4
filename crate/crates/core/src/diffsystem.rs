//! Difference systems δ₋ₕY = A(x)Y, their gauge series and canonical solutions.

use log::warn;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factseries::{self, Certificate, FactorialSeries};
use crate::linalg::{self, ComplexMatrix};
use crate::rational::RationalMatrix;
use crate::specfun::{self, CharacterKind};
use crate::spectral::{self, SpectralData};

/// Which infinity the canonical solution is normalised at.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Plus,
    Minus,
}

impl Orientation {
    fn sign(self) -> f64 {
        match self {
            Orientation::Plus => 1.0,
            Orientation::Minus => -1.0,
        }
    }
}

#[derive(Clone, Debug)]
pub enum SystemData {
    Rational(RationalMatrix),
    Factorial(FactorialSeries),
}

impl SystemData {
    fn eval(&self, x: Complex64) -> Result<ComplexMatrix> {
        match self {
            SystemData::Rational(r) => r.eval(x),
            SystemData::Factorial(f) => f.evaluate(x).map(|v| v.0),
        }
    }

    fn poles(&self) -> Vec<Complex64> {
        match self {
            SystemData::Rational(r) => r.poles().iter().map(|p| p.0).collect(),
            SystemData::Factorial(_) => Vec::new(),
        }
    }
}

/// δ₋ₕY = A(x)Y. With `Minus` orientation the canonical solution is built in t = −x.
#[derive(Clone, Debug)]
pub struct DifferenceSystem {
    h: f64,
    orientation: Orientation,
    source: SystemData,
    working: SystemData,
    a0: ComplexMatrix,
    spectral_override: Option<SpectralData>,
}

impl DifferenceSystem {
    pub fn rational(r: RationalMatrix, h: f64) -> Result<Self> {
        check_h(h)?;
        let a0 = r.value_at_infinity()?;
        Ok(DifferenceSystem {
            h,
            orientation: Orientation::Plus,
            source: SystemData::Rational(r.clone()),
            working: SystemData::Rational(r),
            a0,
            spectral_override: None,
        })
    }

    pub fn factorial(f: FactorialSeries) -> Result<Self> {
        let h = f.h();
        check_h(h)?;
        let a0 = f.coeff(0).clone();
        Ok(DifferenceSystem {
            h,
            orientation: Orientation::Plus,
            source: SystemData::Factorial(f.clone()),
            working: SystemData::Factorial(f),
            a0,
            spectral_override: None,
        })
    }

    pub fn constant(a0: &ComplexMatrix, h: f64) -> Result<Self> {
        Self::rational(RationalMatrix::from_constant(a0), h)
    }

    pub fn with_orientation(self, o: Orientation) -> Result<Self> {
        if o == self.orientation {
            Ok(self)
        } else {
            minus_transform(&self)
        }
    }

    /// Explicit Jordan data for A(∞), bypassing the numerical reduction.
    pub fn with_spectral(mut self, spec: SpectralData) -> Result<Self> {
        if spec.dim() != self.dim() {
            return Err(Error::Dimension("spectral data dimension".into()));
        }
        self.spectral_override = Some(spec);
        Ok(self)
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn dim(&self) -> usize {
        self.a0.nrows()
    }

    pub fn a0(&self) -> &ComplexMatrix {
        &self.a0
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn source(&self) -> &SystemData {
        &self.source
    }

    pub fn working(&self) -> &SystemData {
        &self.working
    }

    pub fn spectral_override(&self) -> Option<&SpectralData> {
        self.spectral_override.as_ref()
    }

    /// A(x) in the user variable.
    pub fn coefficient(&self, x: Complex64) -> Result<ComplexMatrix> {
        self.source.eval(x)
    }

    /// Poles of the coefficient matrix in the working variable.
    pub fn working_poles(&self) -> Vec<Complex64> {
        self.working.poles()
    }

    /// S(w) with Y(w − h) = S(w)·Y(w), in the working variable.
    pub fn step_down(&self, w: Complex64) -> Result<ComplexMatrix> {
        for p in self.working_poles() {
            if (w - p).norm() < 1e-6 * p.norm().max(1.0) {
                return Err(Error::Pole(p));
            }
        }
        let shifted = w - self.h;
        if shifted.norm() < 1e-6 * self.h.max(1.0) {
            return Err(Error::Pole(Complex64::from(self.h)));
        }
        let a = self.working.eval(w)?;
        let s = linalg::identity(self.dim()) - a * (Complex64::from(self.h) / shifted);
        if s.determinant().norm() < 1e-12 {
            return Err(Error::SingularStep(w));
        }
        Ok(s)
    }

    /// Factorial expansion of the working coefficient matrix.
    pub fn expansion(&self, order: usize) -> Result<FactorialSeries> {
        match &self.working {
            SystemData::Rational(r) => factseries::expand_rational(r, self.h, order),
            SystemData::Factorial(f) => {
                if f.order() < order {
                    warn!("factorial coefficients stop at order {}; padding with zeros", f.order());
                    let mut c = f.coeffs().to_vec();
                    c.resize(order + 1, linalg::zeros(self.dim()));
                    FactorialSeries::new(f.h(), c, f.cert())
                } else {
                    Ok(f.truncate(order))
                }
            }
        }
    }

    pub fn spectral(&self, tol: f64) -> Result<SpectralData> {
        match &self.spectral_override {
            Some(s) => Ok(s.clone()),
            None => spectral::decompose(&self.a0, tol),
        }
    }
}

fn check_h(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::Invalid(format!("step h = {h} must be positive")))
    }
}

/// Switches orientation; applying it twice restores the original system.
pub fn minus_transform(sys: &DifferenceSystem) -> Result<DifferenceSystem> {
    let mut out = sys.clone();
    match sys.orientation {
        Orientation::Minus => {
            out.orientation = Orientation::Plus;
            out.working = sys.source.clone();
        }
        Orientation::Plus => {
            let SystemData::Rational(r) = &sys.source else {
                return Err(Error::Invalid("the mirrored solution needs rational coefficients".into()));
            };
            out.orientation = Orientation::Minus;
            out.working = SystemData::Rational(r.minus_transform(sys.h)?);
        }
    }
    Ok(out)
}

/// n·‖Φ_s⁻¹‖_∞ for Φ_s(U) = (A₀ + s)U − UA₀.
fn sylvester_inverse_bound(a0: &ComplexMatrix, s: usize) -> Result<f64> {
    let op = linalg::sylvester_operator(a0, s as f64);
    let inv = linalg::inverse(&op).map_err(|_| Error::Resonant(format!("Sylvester operator singular at s = {s}")))?;
    Ok(a0.nrows() as f64 * linalg::norm(&inv))
}

/// Gauge series F (F₀ = I) with A·F − δ₋ₕF − τ₋ₕF·A₀ = 0, in the working variable.
pub fn gauge_series(sys: &DifferenceSystem, order: usize) -> Result<FactorialSeries> {
    let spec = sys.spectral(spectral::DEFAULT_CLUSTER_TOL)?;
    if !spectral::check_nonresonant(&spec, spectral::DEFAULT_RESONANCE_TOL) {
        return Err(Error::Resonant(format!("eigenvalues {:?}", spec.eigenvalues())));
    }
    let h = sys.h;
    let a = sys.expansion(order)?.rescaled();
    let a0 = a.coeff(0).clone();
    let n = sys.dim();
    let mut f: Vec<ComplexMatrix> = vec![linalg::identity(n)];
    for s in 1..=order {
        let mut hist = linalg::zeros(n);
        // (s−1)!/(k−1)!
        let mut w = 1.0;
        for k in (1..s).rev() {
            w *= k as f64;
            hist += &f[k] * Complex64::from(w);
        }
        let mut padded = f.clone();
        padded.push(linalg::zeros(n));
        let rhs = -a.coeff(s) + hist * &a0 - factseries::convolution(a.coeffs(), &padded, s, 1.0);
        f.push(spectral::sylvester_solve(&a0, s as f64, &rhs)?);
    }
    let cert = gauge_certificate(&a, &a0, order)?;
    let bar = FactorialSeries::new(1.0, f, cert)?;
    let out = FactorialSeries::from_rescaled(&bar, h).ensure_cert();
    if let Some(c) = out.cert() {
        if c.lambda > 1e4 {
            warn!("gauge certificate abscissa {:.3e} is impractically far right", c.lambda);
        }
    }
    Ok(out)
}

// Majorant y_s of ‖F̄_s‖ in the unit-step frame.
fn gauge_certificate(a: &FactorialSeries, a0: &ComplexMatrix, order: usize) -> Result<Option<Certificate>> {
    let bound = |j: usize| -> f64 {
        let actual = linalg::norm(a.coeff(j));
        match a.cert() {
            Some(c) => (c.c * factseries::rising(c.lambda, j - 1, 1.0)).max(actual),
            None => actual,
        }
    };
    let ab: Vec<f64> = (0..=order).map(|j| if j == 0 { 0.0 } else { bound(j) }).collect();
    let n0 = linalg::norm(a0);
    let mut y = vec![1.0];
    for s in 1..=order {
        let mut hist = 0.0;
        let mut w = 1.0;
        for k in (1..s).rev() {
            w *= k as f64;
            hist += w * y[k];
        }
        let mut conv = 0.0;
        for j in 1..s {
            for l in 1..=s - j {
                conv += factseries::product_coefficient(j, s - j - l, l) * ab[j] * y[l];
            }
        }
        let b = sylvester_inverse_bound(a0, s)?;
        y.push(b * (ab[s] + hist * n0 + conv));
    }
    if y.iter().any(|v| !v.is_finite()) {
        warn!("gauge majorant overflowed; no certificate attached");
        return Ok(None);
    }
    Ok(Some(factseries::fit_certificate(&y, 1.0)))
}

/// Gauge series times the matrix character, normalised at one infinity.
#[derive(Clone, Debug)]
pub struct CanonicalSolution {
    system: DifferenceSystem,
    gauge: FactorialSeries,
    spectral: SpectralData,
    kind: CharacterKind,
    halfplane: f64,
    seed: f64,
}

const SEED_TAIL: f64 = 1e-15;

pub fn canonical_solution(sys: &DifferenceSystem, order: usize) -> Result<CanonicalSolution> {
    let gauge = gauge_series(sys, order)?;
    let spectral = sys.spectral(spectral::DEFAULT_CLUSTER_TOL)?;
    let kind = match sys.orientation {
        Orientation::Plus => CharacterKind::PlusInfinity,
        Orientation::Minus => CharacterKind::MinusInfinity,
    };
    let mut halfplane = match gauge.cert() {
        Some(c) => c.lambda + 1.0,
        None => 1.0 + 2.0 * sys.working_poles().iter().map(|p| p.norm()).fold(0.0, f64::max),
    };
    if let SystemData::Factorial(f) = &sys.working {
        if let Some(c) = f.cert() {
            halfplane = halfplane.max(c.lambda + 1.0);
        }
    }
    halfplane = halfplane.max(sys.h);
    let lam = halfplane - 1.0;
    let mut seed = halfplane + 1.0;
    for _ in 0..200 {
        match gauge.tail_bound(seed) {
            Some(t) if t > SEED_TAIL => seed = lam + (seed - lam) * 1.25,
            _ => break,
        }
    }
    Ok(CanonicalSolution { system: sys.clone(), gauge, spectral, kind, halfplane, seed })
}

impl CanonicalSolution {
    pub fn system(&self) -> &DifferenceSystem {
        &self.system
    }

    pub fn gauge(&self) -> &FactorialSeries {
        &self.gauge
    }

    pub fn spectral(&self) -> &SpectralData {
        &self.spectral
    }

    pub fn kind(&self) -> CharacterKind {
        self.kind
    }

    /// Abscissa of certified convergence in the working variable.
    pub fn halfplane(&self) -> f64 {
        self.halfplane
    }

    /// Abscissa where continuation paths are seeded, in the working variable.
    pub fn seed_abscissa(&self) -> f64 {
        self.seed
    }

    fn to_working(&self, x: Complex64) -> Complex64 {
        x * self.system.orientation.sign()
    }

    pub fn is_certified(&self, x: Complex64) -> bool {
        self.to_working(x).re > self.halfplane
    }

    /// F(w)·e(w) at a certified working-variable point, with the gauge tail bound.
    fn direct(&self, w: Complex64) -> Result<(ComplexMatrix, f64)> {
        let (f, tail) = self.gauge.evaluate(w)?;
        let e = specfun::matrix_character(&self.spectral, CharacterKind::PlusInfinity, self.system.h, w)?;
        Ok((f * e, tail))
    }

    /// Direct evaluation inside the certified half-plane.
    pub fn evaluate_certified(&self, x: Complex64) -> Result<(ComplexMatrix, f64)> {
        let w = self.to_working(x);
        if w.re <= self.halfplane {
            return Err(Error::OutOfHalfPlane { re: w.re, bound: self.halfplane });
        }
        self.direct(w)
    }

    /// Seed on the horizontal line through x, then unit steps of h down to x.
    pub fn default_path(&self, x: Complex64) -> Vec<Complex64> {
        let w = self.to_working(x);
        let h = self.system.h;
        let m = if w.re >= self.seed { 0 } else { ((self.seed - w.re) / h).ceil() as usize };
        let sign = self.system.orientation.sign();
        (0..=m).rev().map(|k| (w + k as f64 * h) * sign).collect()
    }

    /// Value of the meromorphic continuation at x along the default path.
    pub fn evaluate(&self, x: Complex64) -> Result<ComplexMatrix> {
        self.continue_along(&self.default_path(x))
    }

    /// Continuation along `path` (user variable): a certified start, then ±h steps or jumps between certified points.
    pub fn continue_along(&self, path: &[Complex64]) -> Result<ComplexMatrix> {
        let Some(&start) = path.first() else {
            return Err(Error::Path("empty path".into()));
        };
        if !self.is_certified(start) {
            return Err(Error::Path(format!("start {start} is outside the certified half-plane")));
        }
        let h = self.system.h;
        let mut w = self.to_working(start);
        let mut y = self.direct(w)?.0;
        for &next in &path[1..] {
            let v = self.to_working(next);
            let d = v - w;
            if (d + h).norm() <= 1e-9 * h {
                y = self.system.step_down(w)? * y;
            } else if (d - h).norm() <= 1e-9 * h {
                let s = self.system.step_down(v)?;
                y = linalg::inverse(&s).map_err(|_| Error::SingularStep(v))? * y;
            } else if d.norm() == 0.0 {
                continue;
            } else if v.re > self.halfplane {
                y = self.direct(v)?.0;
            } else {
                return Err(Error::Path(format!("jump from {w} to {v} leaves the certified half-plane")));
            }
            w = v;
        }
        Ok(y)
    }
}

/// Continuation of `sol` to x along `path`, which must end at x.
pub fn continue_solution(sol: &CanonicalSolution, x: Complex64, path: &[Complex64]) -> Result<ComplexMatrix> {
    match path.last() {
        Some(&last) if (last - x).norm() <= 1e-9 * x.norm().max(1.0) => sol.continue_along(path),
        _ => Err(Error::Path("path does not end at the target".into())),
    }
}

/// ‖(x−h)(Y(x) − Y(x−h))/h − A(x)Y(x)‖ / max(1, ‖Y(x)‖)
pub fn residual<F>(sys: &DifferenceSystem, y: F, x: Complex64) -> Result<f64>
where
    F: Fn(Complex64) -> Result<ComplexMatrix>,
{
    let h = Complex64::from(sys.h);
    let yx = y(x)?;
    let ym = y(x - h)?;
    let a = sys.coefficient(x)?;
    let lhs = (&yx - ym) * ((x - h) / h);
    let r = lhs - a * &yx;
    Ok(linalg::norm(&r) / linalg::norm(&yx).max(1.0))
}
