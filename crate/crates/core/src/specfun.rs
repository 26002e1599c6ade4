//! Complex log-Gamma and the Gamma-ratio characters solving constant difference systems.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::linalg::{ComplexMatrix, I, ONE};
use crate::spectral::SpectralData;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

// B_{2m} / (2m (2m-1)) for m = 1..10
const STIRLING: [f64; 10] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
    -3617.0 / 122_400.0,
    43_867.0 / 244_188.0,
    -174_611.0 / 125_400.0,
];

/// Which of the two constant-system solutions a character belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CharacterKind {
    /// h^c Γ(x/h)/Γ(x/h − c), tangent to x^c at +∞.
    PlusInfinity,
    /// h^c Γ(1 + c − x/h)/Γ(1 − x/h), tangent to (−x)^c at −∞.
    MinusInfinity,
}

/// ln(1+z) without cancellation for small z.
pub fn ln_1p(z: Complex64) -> Complex64 {
    if z.norm() > 0.5 {
        return (ONE + z).ln();
    }
    let re = 0.5 * (z.re * (2.0 + z.re) + z.im * z.im).ln_1p();
    Complex64::new(re, z.im.atan2(1.0 + z.re))
}

/// e^z − 1 without cancellation for small z.
pub fn exp_m1(z: Complex64) -> Complex64 {
    let (s, cth) = z.im.sin_cos();
    let half = (0.5 * z.im).sin();
    Complex64::new(z.re.exp_m1() * cth - 2.0 * half * half, z.re.exp() * s)
}

fn pole_index(z: Complex64) -> Option<f64> {
    let r = z.re.round();
    if r <= 0.0 && (z - Complex64::from(r)).norm() <= 1e-14 * r.abs().max(1.0) {
        Some(r)
    } else {
        None
    }
}

/// ln Γ(z), continuous on ℂ∖(−∞,0] and real on the positive axis.
pub fn log_gamma(z: Complex64) -> Result<Complex64> {
    Ok(log_gamma_jet(&Jet::constant(z, 0))?.value())
}

/// ln Γ applied to a jet.
pub fn log_gamma_jet(z: &Jet) -> Result<Jet> {
    let z0 = z.value();
    if !z0.re.is_finite() || !z0.im.is_finite() {
        return Err(Error::Invalid(format!("log_gamma of non-finite {z0}")));
    }
    if pole_index(z0).is_some() {
        return Err(Error::Pole(z0));
    }
    if z0.re < 0.5 {
        let reflected = log_gamma_jet(&(-z).add_scalar(ONE))?;
        let out = -&(&ln_sin_pi_jet(z) + &reflected);
        return Ok(out.add_scalar(Complex64::from(PI.ln())));
    }
    Ok(lanczos_jet(z))
}

/// A logarithm of sin(πz), stable for large |Im z|; real on (0, 1).
pub fn ln_sin_pi_jet(z: &Jet) -> Jet {
    let sign = if z.value().im >= 0.0 { 1.0 } else { -1.0 };
    let arg = z.scale(I * (2.0 * PI * sign));
    let s = &z.scale(I * (-PI * sign)) + &ln_one_minus_exp(&arg);
    s.add_scalar(Complex64::new(-(2f64.ln()), sign * PI / 2.0))
}

// ln(1 − e^{arg}) with an accurate constant term.
fn ln_one_minus_exp(arg: &Jet) -> Jet {
    let one_minus = (-&arg.exp()).add_scalar(ONE);
    one_minus.with_value(-exp_m1(arg.value())).ln()
}

fn lanczos_jet(z: &Jet) -> Jet {
    let order = z.order();
    let zz = z.add_scalar(-ONE);
    let t = zz.add_scalar(Complex64::from(LANCZOS_G + 0.5));
    let mut a = Jet::constant(Complex64::from(LANCZOS[0]), order);
    for (i, &p) in LANCZOS.iter().enumerate().skip(1) {
        a = &a + &zz.add_scalar(Complex64::from(i as f64)).recip().scale(Complex64::from(p));
    }
    let head = &zz.add_scalar(Complex64::from(0.5)) * &t.ln();
    let out = &(&head - &t) + &a.ln();
    out.add_scalar(Complex64::from(0.5 * (2.0 * PI).ln()))
}

/// ln Γ(num) − ln Γ(den) by the Stirling difference, for large arguments in the right half-plane.
fn stirling_log_ratio(num: &Jet, den: &Jet) -> Jet {
    let c = num - den;
    let ln_a = num.ln();
    let l = (&c / num).scale(-ONE).ln_1p();
    let mut out = &(&c * &ln_a) - &(&den.add_scalar(Complex64::from(-0.5)) * &l);
    out = &out - &c;
    for (m, &b) in STIRLING.iter().enumerate() {
        let p = -(2 * m as i32 + 1);
        let diff = &num.powi(p) - &den.powi(p);
        out = &out + &diff.scale(Complex64::from(b));
    }
    out
}

fn stirling_applies(n0: Complex64, d0: Complex64) -> bool {
    n0.norm() >= 20.0
        && d0.norm() >= 20.0
        && n0.re > 0.0
        && d0.re > 0.0
        && (n0 - d0).norm() <= 0.25 * n0.norm().min(d0.norm())
}

fn near_gamma_pole(z: Complex64) -> bool {
    z.re < 0.5 && (z - Complex64::from(z.re.round())).norm() < 0.25
}

/// Γ(num)/Γ(den) as exp(log)·factor; factor carries zeros of 1/Γ(den) exactly.
fn gamma_ratio(num: &Jet, den: &Jet) -> Result<(Jet, Option<Jet>)> {
    let (n0, d0) = (num.value(), den.value());
    if stirling_applies(n0, d0) {
        return Ok((stirling_log_ratio(num, den), None));
    }
    let (rn, rd) = (ONE - d0, ONE - n0);
    if n0.re < 0.0 && d0.re < 0.0 && stirling_applies(rn, rd) {
        if pole_index(n0).is_some() {
            return Err(Error::Pole(n0));
        }
        // Γ(n)/Γ(d) = Γ(1−d)/Γ(1−n) · sin(πd)/sin(πn)
        let base = stirling_log_ratio(&(-den).add_scalar(ONE), &(-num).add_scalar(ONE));
        let log = &base - &ln_sin_pi_jet(num);
        if near_gamma_pole(d0) {
            return Ok((log, Some(den.sin_pi())));
        }
        return Ok((&log + &ln_sin_pi_jet(den), None));
    }
    let log_num = log_gamma_jet(num)?;
    if near_gamma_pole(d0) {
        let reflected = log_gamma_jet(&(-den).add_scalar(ONE))?;
        let log = (&log_num + &reflected).add_scalar(Complex64::from(-PI.ln()));
        return Ok((log, Some(den.sin_pi())));
    }
    Ok((&log_num - &log_gamma_jet(den)?, None))
}

fn check_step(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::Invalid(format!("step h = {h} must be positive")))
    }
}

/// Jet in c of the character: entry j is (1/j!) ∂_c^j e_c^{(h)}(x).
pub fn log_char_jet(kind: CharacterKind, c: Complex64, h: f64, x: Complex64, k: usize) -> Result<Jet> {
    check_step(h)?;
    let cj = Jet::variable(c, k);
    let u = x / h;
    let (num, den) = match kind {
        CharacterKind::PlusInfinity => (Jet::constant(u, k), (-&cj).add_scalar(u)),
        CharacterKind::MinusInfinity => (cj.add_scalar(ONE - u), Jet::constant(ONE - u, k)),
    };
    let (log, factor) = gamma_ratio(&num, &den)?;
    let total = &log + &cj.scale(Complex64::from(h.ln()));
    let mut e = total.exp();
    if let Some(f) = factor {
        e = &e * &f;
    }
    Ok(e)
}

/// e_c^{(h)}(x) for the chosen orientation.
pub fn character(kind: CharacterKind, c: Complex64, h: f64, x: Complex64) -> Result<Complex64> {
    Ok(log_char_jet(kind, c, h, x, 0)?.value())
}

/// P·diag(Toeplitz blocks of character jets)·P⁻¹.
pub fn matrix_character(spec: &SpectralData, kind: CharacterKind, h: f64, x: Complex64) -> Result<ComplexMatrix> {
    let n = spec.dim();
    let mut d = ComplexMatrix::zeros(n, n);
    let mut off = 0;
    for &(c, size) in spec.blocks() {
        let jet = log_char_jet(kind, c, h, x, size - 1)?;
        for i in 0..size {
            for j in i..size {
                d[(off + i, off + j)] = jet.coeffs()[j - i];
            }
        }
        off += size;
    }
    Ok(spec.basis() * d * spec.basis_inverse())
}

/// Principal-branch x^c.
pub fn principal_pow(x: Complex64, c: Complex64) -> Complex64 {
    (c * x.ln()).exp()
}
