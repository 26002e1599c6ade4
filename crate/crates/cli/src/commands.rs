use conflux_core::connection::{
    monodromy, ode_monodromy_oracle, strip_limits_with, strip_partition, ConnectionSolver, StripDecomposition, StripLimit,
};
use conflux_core::diffsystem::{canonical_solution, residual, DifferenceSystem};
use conflux_core::io::{complex_from_json, complex_to_json, matrix_to_json, ComplexJson, MatrixJson, MonodromyReportJson};
use conflux_core::linalg;
use conflux_core::rational::RationalMatrix;
use conflux_core::{ComplexMatrix, Error, Result};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, Tolerances};
use crate::error::CliError;
use crate::family::{family_instantiate, limit_system};

const NUDGE_ATTEMPTS: usize = 5;
const ORACLE_STEPS: usize = 64;

/// Report status: `ok` when every gate holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Failed,
    Partial,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn gate_max(name: &str, value: f64, tolerance: f64) -> Gate {
    Gate { name: name.into(), value, tolerance, pass: value <= tolerance }
}

fn gate_min(name: &str, value: f64, tolerance: f64) -> Gate {
    Gate { name: name.into(), value, tolerance, pass: value >= tolerance }
}

fn status_of(gates: &[Gate], partial: bool) -> Status {
    if partial {
        Status::Partial
    } else if gates.iter().all(|g| g.pass) {
        Status::Ok
    } else {
        Status::Failed
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolvePoint {
    pub x: ComplexJson,
    #[serde(default)]
    pub nudge: Option<ComplexJson>,
    #[serde(default)]
    pub value: Option<MatrixJson>,
    #[serde(default)]
    pub residual: Option<f64>,
    #[serde(default)]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveRun {
    pub h: f64,
    pub points: Vec<SolvePoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub command: String,
    pub status: Status,
    pub runs: Vec<SolveRun>,
    pub gates: Vec<Gate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConnectPoint {
    pub x: ComplexJson,
    #[serde(default)]
    pub nudge: Option<ComplexJson>,
    #[serde(default, rename = "P")]
    pub p: Option<MatrixJson>,
    #[serde(default)]
    pub periodicity: Option<f64>,
    #[serde(default)]
    pub det: Option<f64>,
    #[serde(default)]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConnectRun {
    pub h: f64,
    pub points: Vec<ConnectPoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConnectReport {
    pub command: String,
    pub status: Status,
    pub runs: Vec<ConnectRun>,
    pub gates: Vec<Gate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleJson {
    pub h: f64,
    pub x: ComplexJson,
    #[serde(rename = "P")]
    pub p: MatrixJson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StripJson {
    pub index: usize,
    /// Imaginary bounds; null marks an unbounded side.
    pub band: [Option<f64>; 2],
    pub midpoint: ComplexJson,
    pub probe: ComplexJson,
    pub limit: MatrixJson,
    pub probe_limit: MatrixJson,
    pub samples: Vec<SampleJson>,
    pub probe_samples: Vec<SampleJson>,
    pub order: Option<f64>,
    pub converged: bool,
    pub constancy: f64,
    pub last_difference: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConflueReport {
    pub command: String,
    pub status: Status,
    pub poles: Vec<ComplexJson>,
    pub h_sequence: Vec<f64>,
    pub richardson_levels: usize,
    pub strips: Vec<StripJson>,
    pub gates: Vec<Gate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonodromyOutput {
    pub command: String,
    pub status: Status,
    #[serde(flatten)]
    pub report: MonodromyReportJson,
    pub gates: Vec<Gate>,
}

/// Systems a grid command runs over, with their steps.
fn grid_systems(cfg: &RunConfig) -> Result<Vec<(f64, DifferenceSystem)>> {
    if let Some(system) = &cfg.system {
        let sys = system.to_system()?;
        return Ok(vec![(sys.h(), sys)]);
    }
    let family = cfg.family.as_ref().ok_or_else(|| Error::Invalid("no system or family".into()))?;
    cfg.h_sequence.iter().map(|&h| Ok((h, family_instantiate(family, h)?))).collect()
}

fn retryable(e: &Error) -> bool {
    matches!(e, Error::Pole(_) | Error::SingularStep(_) | Error::Singular(_) | Error::Path(_))
}

/// Evaluates `f` at x, retrying at x + δ with |δ| ≤ h/10 drawn from a per-point seeded stream.
fn with_nudge<T>(
    x: Complex64,
    h: f64,
    seed: u64,
    index: usize,
    f: impl Fn(Complex64) -> Result<T>,
) -> (Complex64, Option<Complex64>, Result<T>) {
    let mut result = f(x);
    if result.as_ref().err().is_none_or(|e| !retryable(e)) {
        return (x, None, result);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(index as u64));
    for _ in 0..NUDGE_ATTEMPTS {
        let r = rng.gen_range(0.0..h / 10.0);
        let t = rng.gen_range(0.0..std::f64::consts::TAU);
        let delta = Complex64::from_polar(r, t);
        let y = x + delta;
        result = f(y);
        match &result {
            Ok(_) => return (y, Some(delta), result),
            Err(e) if !retryable(e) => return (y, Some(delta), result),
            Err(_) => {}
        }
    }
    (x, None, result)
}

fn grid_points(cfg: &RunConfig) -> Vec<Complex64> {
    cfg.grid.iter().map(|&z| complex_from_json(z)).collect()
}

pub fn solve(cfg: &RunConfig, tol: &Tolerances) -> std::result::Result<SolveReport, CliError> {
    let grid = grid_points(cfg);
    let mut runs = Vec::new();
    for (h, sys) in grid_systems(cfg)? {
        let sol = canonical_solution(&sys, cfg.truncation)?;
        let points = grid
            .par_iter()
            .enumerate()
            .map(|(i, &x)| {
                let (_, nudge, r) = with_nudge(x, h, cfg.seed, i, |z| {
                    let y = sol.evaluate(z)?;
                    let res = residual(&sys, |w| sol.evaluate(w), z)?;
                    Ok((y, res))
                });
                let mut p = SolvePoint { x: complex_to_json(x), nudge: nudge.map(complex_to_json), value: None, residual: None, error: None };
                match r {
                    Ok((y, res)) => {
                        p.value = Some(matrix_to_json(&y));
                        p.residual = Some(res);
                    }
                    Err(e) => p.error = Some(e.to_string()),
                }
                p
            })
            .collect();
        runs.push(SolveRun { h, points });
    }
    let all: Vec<&SolvePoint> = runs.iter().flat_map(|r| &r.points).collect();
    let partial = all.iter().any(|p| p.error.is_some());
    if all.iter().all(|p| p.error.is_some()) {
        return Err(Error::NonConvergence("no grid point could be evaluated".into()).into());
    }
    let worst = all.iter().filter_map(|p| p.residual).fold(0.0, f64::max);
    let gates = vec![gate_max("residual", worst, tol.residual)];
    Ok(SolveReport { command: "solve".into(), status: status_of(&gates, partial), runs, gates })
}

pub fn connect(cfg: &RunConfig, tol: &Tolerances) -> std::result::Result<ConnectReport, CliError> {
    let grid = grid_points(cfg);
    let mut runs = Vec::new();
    for (h, sys) in grid_systems(cfg)? {
        let solver = ConnectionSolver::new(&sys, cfg.truncation)?;
        let points = grid
            .par_iter()
            .enumerate()
            .map(|(i, &x)| {
                let (_, nudge, r) = with_nudge(x, h, cfg.seed, i, |z| {
                    let p = solver.at(z)?;
                    let q = solver.at(z + h)?;
                    Ok((linalg::max_abs_diff(&p, &q), p))
                });
                let mut point =
                    ConnectPoint { x: complex_to_json(x), nudge: nudge.map(complex_to_json), p: None, periodicity: None, det: None, error: None };
                match r {
                    Ok((period, p)) => {
                        point.det = Some(p.determinant().norm());
                        point.periodicity = Some(period);
                        point.p = Some(matrix_to_json(&p));
                    }
                    Err(e) => point.error = Some(e.to_string()),
                }
                point
            })
            .collect();
        runs.push(ConnectRun { h, points });
    }
    let all: Vec<&ConnectPoint> = runs.iter().flat_map(|r| &r.points).collect();
    let partial = all.iter().any(|p| p.error.is_some());
    if all.iter().all(|p| p.error.is_some()) {
        return Err(Error::NonConvergence("no grid point could be evaluated".into()).into());
    }
    let period = all.iter().filter_map(|p| p.periodicity).fold(0.0, f64::max);
    let det = all.iter().filter_map(|p| p.det).fold(f64::INFINITY, f64::min);
    let gates = vec![gate_max("periodicity", period, tol.periodicity), gate_min("determinant", det, tol.determinant)];
    Ok(ConnectReport { command: "connect".into(), status: status_of(&gates, partial), runs, gates })
}

fn limit_matrix(cfg: &RunConfig) -> Result<RationalMatrix> {
    match (&cfg.limit_system, &cfg.family) {
        (Some(r), _) => r.to_matrix(),
        (None, Some(f)) => limit_system(f),
        (None, None) => Err(Error::Invalid("no family".into())),
    }
}

/// Strip decomposition of the limit system and the extrapolated strip limits.
pub fn strip_data(cfg: &RunConfig) -> Result<(RationalMatrix, StripDecomposition, Vec<StripLimit>)> {
    let family = cfg.family.as_ref().ok_or_else(|| Error::Invalid("no family".into()))?;
    let atilde = limit_matrix(cfg)?;
    let strips = strip_partition(&atilde)?;
    let limits = strip_limits_with(|h| family_instantiate(family, h), &strips, cfg.truncation, &cfg.h_sequence, cfg.richardson_levels)?;
    Ok((atilde, strips, limits))
}

fn sample_json(s: &conflux_core::connection::StripSample) -> SampleJson {
    SampleJson { h: s.h, x: complex_to_json(s.x), p: matrix_to_json(&s.p) }
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn strip_gates(limits: &[StripLimit], tol: &Tolerances) -> Vec<Gate> {
    let mut gates = Vec::new();
    for (j, l) in limits.iter().enumerate() {
        let k = j + 1;
        let order = if l.converged { l.order.unwrap_or(f64::INFINITY) } else { 0.0 };
        gates.push(gate_min(&format!("order[{k}]"), order, tol.order));
        gates.push(gate_max(&format!("constancy[{k}]"), l.constancy, tol.constancy));
    }
    gates
}

pub fn conflue(cfg: &RunConfig, tol: &Tolerances) -> std::result::Result<ConflueReport, CliError> {
    let (_, strips, limits) = strip_data(cfg)?;
    let strips_json = limits
        .iter()
        .enumerate()
        .map(|(j, l)| StripJson {
            index: j + 1,
            band: [finite(strips.bands[j].0), finite(strips.bands[j].1)],
            midpoint: complex_to_json(strips.midpoints[j]),
            probe: complex_to_json(strips.probes[j]),
            limit: matrix_to_json(&l.limit),
            probe_limit: matrix_to_json(&l.probe_limit),
            samples: l.samples.iter().map(sample_json).collect(),
            probe_samples: l.probe_samples.iter().map(sample_json).collect(),
            order: l.order,
            converged: l.converged,
            constancy: l.constancy,
            last_difference: l.last_difference,
        })
        .collect();
    let gates = strip_gates(&limits, tol);
    Ok(ConflueReport {
        command: "conflue".into(),
        status: status_of(&gates, false),
        poles: strips.poles.iter().map(|&z| complex_to_json(z)).collect(),
        h_sequence: cfg.h_sequence.clone(),
        richardson_levels: cfg.richardson_levels,
        strips: strips_json,
        gates,
    })
}

/// Loop radius for the differential oracle around the j-th strip pole.
pub fn oracle_radius(strips: &StripDecomposition, j: usize) -> f64 {
    let z = strips.poles[j];
    let d = strips.poles.iter().filter(|&&p| p != z).map(|p| (p - z).norm()).fold(f64::INFINITY, f64::min);
    (0.4 * d).min(0.5)
}

/// Oracle monodromies around every strip pole.
pub fn oracle_monodromies(atilde: &RationalMatrix, strips: &StripDecomposition) -> Result<Vec<ComplexMatrix>> {
    (0..strips.poles.len())
        .into_par_iter()
        .map(|j| {
            let r = oracle_radius(strips, j);
            ode_monodromy_oracle(atilde, j, strips.poles[j] + r, r, ORACLE_STEPS)
        })
        .collect()
}

pub fn monodromy_command(cfg: &RunConfig, tol: &Tolerances) -> std::result::Result<MonodromyOutput, CliError> {
    let (atilde, strips, limits) = strip_data(cfg)?;
    let report = monodromy(&limits, &strips)?;
    let oracle = oracle_monodromies(&atilde, &strips)?;
    let diffs: Vec<f64> = report.monodromies.iter().zip(&oracle).map(|(m, o)| linalg::max_abs_diff(m, o)).collect();
    let mut json = MonodromyReportJson::from_report(&report);
    json.diagnostics.oracle = Some(oracle.iter().map(matrix_to_json).collect());
    json.diagnostics.oracle_difference = Some(diffs.clone());
    let mut gates = strip_gates(&limits, tol);
    gates.push(gate_max("oracle", diffs.iter().copied().fold(0.0, f64::max), tol.oracle));
    Ok(MonodromyOutput { command: "monodromy".into(), status: status_of(&gates, false), report: json, gates })
}
