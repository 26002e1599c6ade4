use conflux_core::diffsystem::DifferenceSystem;
use conflux_core::io::{complex_from_json, ComplexJson, RationalJson, SystemConfig};
use conflux_core::poly::Polynomial;
use conflux_core::rational::{RationalEntry, RationalMatrix};
use conflux_core::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// An h-indexed family of systems.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "template", rename_all = "lowercase", deny_unknown_fields)]
pub enum FamilyTemplate {
    /// A^{(h)}(x) = A(x/h)
    Scaled { rational: RationalJson },
    /// A^{(h)}(x) = A(x)
    Fixed { rational: RationalJson },
    /// One configuration per step, plus the limit system.
    Explicit { members: Vec<ExplicitMember>, limit: RationalJson },
    /// Polynomial coefficients that are themselves polynomials in h.
    Parametric { entries: Vec<Vec<ParametricEntry>> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitMember {
    pub h: f64,
    pub system: SystemConfig,
}

/// `num[k]` and `den[k]` list the ascending h-coefficients of the x^k coefficient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParametricEntry {
    pub num: Vec<Vec<ComplexJson>>,
    pub den: Vec<Vec<ComplexJson>>,
}

fn eval_in_h(coeffs: &[ComplexJson], h: f64) -> Complex64 {
    coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * h + complex_from_json(c))
}

fn parametric_poly(coeffs: &[Vec<ComplexJson>], h: f64) -> Polynomial {
    Polynomial::new(coeffs.iter().map(|c| eval_in_h(c, h)).collect())
}

fn parametric_matrix(entries: &[Vec<ParametricEntry>], h: f64) -> Result<RationalMatrix> {
    let n = entries.len();
    if entries.iter().any(|row| row.len() != n) {
        return Err(Error::Dimension("parametric entries must form a square matrix".into()));
    }
    let flat = entries
        .iter()
        .flatten()
        .map(|e| RationalEntry::new(parametric_poly(&e.num, h), parametric_poly(&e.den, h)))
        .collect();
    RationalMatrix::new(n, flat)
}

fn matching_member(members: &[ExplicitMember], h: f64) -> Option<&ExplicitMember> {
    members.iter().find(|m| (m.h - h).abs() <= 1e-12 * h.max(1.0))
}

/// Concrete system of the family at step h.
pub fn family_instantiate(template: &FamilyTemplate, h: f64) -> Result<DifferenceSystem> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Invalid(format!("step h = {h} must be positive")));
    }
    match template {
        FamilyTemplate::Scaled { rational } => {
            let r = rational.to_matrix()?.compose_affine(Complex64::new(1.0 / h, 0.0), Complex64::new(0.0, 0.0));
            DifferenceSystem::rational(r, h)
        }
        FamilyTemplate::Fixed { rational } => DifferenceSystem::rational(rational.to_matrix()?, h),
        FamilyTemplate::Explicit { members, .. } => {
            let m = matching_member(members, h)
                .ok_or_else(|| Error::Invalid(format!("the explicit family has no member for h = {h}")))?;
            let sys = m.system.to_system()?;
            if (sys.h() - h).abs() > 1e-12 * h.max(1.0) {
                return Err(Error::StepMismatch(h, sys.h()));
            }
            Ok(sys)
        }
        FamilyTemplate::Parametric { entries } => DifferenceSystem::rational(parametric_matrix(entries, h)?, h),
    }
}

/// The h → 0 limit system used for strips and the differential oracle.
pub fn limit_system(template: &FamilyTemplate) -> Result<RationalMatrix> {
    match template {
        FamilyTemplate::Scaled { rational } => {
            let r = rational.to_matrix()?;
            r.check_proper()?;
            Ok(RationalMatrix::from_constant(&r.value_at_infinity()?))
        }
        FamilyTemplate::Fixed { rational } => rational.to_matrix(),
        FamilyTemplate::Explicit { limit, .. } => limit.to_matrix(),
        FamilyTemplate::Parametric { entries } => parametric_matrix(entries, 0.0),
    }
}
