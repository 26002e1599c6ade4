//! JSON wire formats. Complex numbers are `[re, im]`, matrices are lists of rows.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::connection::MonodromyReport;
use crate::diffsystem::{DifferenceSystem, Orientation, SystemData};
use crate::error::{Error, Result};
use crate::factseries::{Certificate, FactorialSeries};
use crate::linalg::ComplexMatrix;
use crate::rational::{RationalEntry, RationalMatrix};
use crate::spectral::{SpectralData, DEFAULT_CLUSTER_TOL};

pub type ComplexJson = [f64; 2];
pub type MatrixJson = Vec<Vec<ComplexJson>>;

pub fn complex_to_json(z: Complex64) -> ComplexJson {
    [z.re, z.im]
}

pub fn complex_from_json(z: ComplexJson) -> Complex64 {
    Complex64::new(z[0], z[1])
}

pub fn matrix_to_json(m: &ComplexMatrix) -> MatrixJson {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| complex_to_json(m[(i, j)])).collect())
        .collect()
}

pub fn matrix_from_json(rows: &MatrixJson) -> Result<ComplexMatrix> {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != m) {
        return Err(Error::Dimension("ragged matrix rows".into()));
    }
    Ok(ComplexMatrix::from_fn(n, m, |i, j| complex_from_json(rows[i][j])))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorialSeriesJson {
    pub h: f64,
    pub n: usize,
    /// One entry per coefficient, flattened row-major.
    pub coeffs: Vec<Vec<ComplexJson>>,
    pub cert: Option<[f64; 2]>,
}

impl FactorialSeriesJson {
    pub fn from_series(f: &FactorialSeries) -> Self {
        let n = f.dim();
        let coeffs = f
            .coeffs()
            .iter()
            .map(|m| {
                let mut flat = Vec::with_capacity(n * n);
                for i in 0..n {
                    for j in 0..n {
                        flat.push(complex_to_json(m[(i, j)]));
                    }
                }
                flat
            })
            .collect();
        FactorialSeriesJson { h: f.h(), n, coeffs, cert: f.cert().map(|c| [c.c, c.lambda]) }
    }

    pub fn to_series(&self) -> Result<FactorialSeries> {
        let n = self.n;
        let mut coeffs = Vec::with_capacity(self.coeffs.len());
        for (s, flat) in self.coeffs.iter().enumerate() {
            if flat.len() != n * n {
                return Err(Error::Dimension(format!("coefficient {s} has {} entries, expected {}", flat.len(), n * n)));
            }
            coeffs.push(ComplexMatrix::from_fn(n, n, |i, j| complex_from_json(flat[i * n + j])));
        }
        let cert = self.cert.map(|[c, lambda]| Certificate { c, lambda });
        FactorialSeries::new(self.h, coeffs, cert)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralJson {
    #[serde(rename = "P")]
    pub p: MatrixJson,
    pub blocks: Vec<(ComplexJson, usize)>,
}

impl SpectralJson {
    pub fn from_spectral(s: &SpectralData) -> Self {
        SpectralJson {
            p: matrix_to_json(s.basis()),
            blocks: s.blocks().iter().map(|&(c, m)| (complex_to_json(c), m)).collect(),
        }
    }

    pub fn to_spectral(&self) -> Result<SpectralData> {
        let blocks = self.blocks.iter().map(|&(c, m)| (complex_from_json(c), m)).collect();
        SpectralData::new(matrix_from_json(&self.p)?, blocks, DEFAULT_CLUSTER_TOL)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RationalJson {
    pub entries: Vec<Vec<RationalEntry>>,
}

impl RationalJson {
    pub fn from_matrix(r: &RationalMatrix) -> Self {
        let n = r.dim();
        RationalJson { entries: (0..n).map(|i| (0..n).map(|j| r.entry(i, j).clone()).collect()).collect() }
    }

    pub fn to_matrix(&self) -> Result<RationalMatrix> {
        let n = self.entries.len();
        if self.entries.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("rational entries must form a square matrix".into()));
        }
        RationalMatrix::new(n, self.entries.iter().flatten().cloned().collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoefficientJson {
    Rational(RationalJson),
    Factorial(FactorialSeriesJson),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub n: usize,
    pub h: f64,
    #[serde(default = "default_orientation")]
    pub orientation: Orientation,
    #[serde(rename = "A")]
    pub a: CoefficientJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectral_override: Option<SpectralJson>,
}

fn default_orientation() -> Orientation {
    Orientation::Plus
}

impl SystemConfig {
    pub fn from_system(sys: &DifferenceSystem) -> Self {
        let a = match sys.source() {
            SystemData::Rational(r) => CoefficientJson::Rational(RationalJson::from_matrix(r)),
            SystemData::Factorial(f) => CoefficientJson::Factorial(FactorialSeriesJson::from_series(f)),
        };
        SystemConfig {
            n: sys.dim(),
            h: sys.h(),
            orientation: sys.orientation(),
            a,
            spectral_override: sys.spectral_override().map(SpectralJson::from_spectral),
        }
    }

    pub fn to_system(&self) -> Result<DifferenceSystem> {
        let sys = match &self.a {
            CoefficientJson::Rational(r) => DifferenceSystem::rational(r.to_matrix()?, self.h)?,
            CoefficientJson::Factorial(f) => {
                if (f.h - self.h).abs() > 1e-15 * self.h.abs().max(1.0) {
                    return Err(Error::StepMismatch(self.h, f.h));
                }
                DifferenceSystem::factorial(f.to_series()?)?
            }
        };
        if sys.dim() != self.n {
            return Err(Error::Dimension(format!("n = {} but coefficients have dimension {}", self.n, sys.dim())));
        }
        let sys = sys.with_orientation(self.orientation)?;
        match &self.spectral_override {
            Some(s) => sys.with_spectral(s.to_spectral()?),
            None => Ok(sys),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonodromyDiagnostics {
    pub orders: Vec<Option<f64>>,
    pub converged: Vec<bool>,
    pub constancy: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<Vec<MatrixJson>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_difference: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonodromyReportJson {
    pub poles: Vec<ComplexJson>,
    pub strip_limits: Vec<MatrixJson>,
    pub monodromies: Vec<MatrixJson>,
    pub h_sequence: Vec<f64>,
    pub diagnostics: MonodromyDiagnostics,
}

impl MonodromyReportJson {
    pub fn from_report(r: &MonodromyReport) -> Self {
        MonodromyReportJson {
            poles: r.poles.iter().map(|&z| complex_to_json(z)).collect(),
            strip_limits: r.strip_limits.iter().map(matrix_to_json).collect(),
            monodromies: r.monodromies.iter().map(matrix_to_json).collect(),
            h_sequence: r.h_sequence.clone(),
            diagnostics: MonodromyDiagnostics {
                orders: r.orders.clone(),
                converged: r.converged.clone(),
                constancy: r.constancy.clone(),
                oracle: None,
                oracle_difference: None,
            },
        }
    }

    pub fn to_report(&self) -> Result<MonodromyReport> {
        Ok(MonodromyReport {
            poles: self.poles.iter().map(|&z| complex_from_json(z)).collect(),
            monodromies: self.monodromies.iter().map(matrix_from_json).collect::<Result<_>>()?,
            strip_limits: self.strip_limits.iter().map(matrix_from_json).collect::<Result<_>>()?,
            h_sequence: self.h_sequence.clone(),
            orders: self.diagnostics.orders.clone(),
            converged: self.diagnostics.converged.clone(),
            constancy: self.diagnostics.constancy.clone(),
        })
    }
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Invalid(e.to_string()))
}

pub fn from_json_str<'a, T: Deserialize<'a>>(text: &'a str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Invalid(e.to_string()))
}
