use std::f64::consts::PI;
use std::time::Instant;

use conflux_core::connection::ConnectionSolver;
use conflux_core::io::{complex_from_json, complex_to_json, matrix_from_json};
use conflux_core::linalg;
use conflux_core::specfun::log_gamma;
use conflux_core::Result;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::commands::{conflue, connect, monodromy_command, Status};
use crate::config::{Command, RunConfig, Tolerances};
use crate::error::CliError;
use crate::family::{family_instantiate, FamilyTemplate, ParametricEntry};

const LAMBDA: Complex64 = Complex64::new(0.0, 1.0);
const MU: f64 = 0.1;
const ORDER: usize = 64;
const H_SEQ: [f64; 4] = [0.2, 0.1, 0.05, 0.025];
const LONG_H_SEQ: [f64; 7] = [0.2, 0.1, 0.05, 0.025, 0.0125, 0.00625, 0.003125];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub criterion: u32,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelftestReport {
    pub command: String,
    pub status: Status,
    pub criteria: Vec<CriterionResult>,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!("criterion {}: {} ({})", self.criterion, if self.pass { "PASS" } else { "FAIL" }, self.detail)
    }
}

/// A(x) = −μ/(x − λ − h), a single pole that moves with h.
pub fn scalar_template() -> FamilyTemplate {
    let r = |re: f64, im: f64| [re, im];
    FamilyTemplate::Parametric {
        entries: vec![vec![ParametricEntry {
            num: vec![vec![r(-MU, 0.0)]],
            den: vec![vec![r(-LAMBDA.re, -LAMBDA.im), r(-1.0, 0.0)], vec![r(1.0, 0.0)]],
        }]],
    }
}

fn alphas(h: f64) -> (Complex64, Complex64) {
    let one = Complex64::new(1.0, 0.0);
    let disc = (one - 4.0 * MU * h / (LAMBDA * LAMBDA)).sqrt();
    (LAMBDA / (2.0 * h) * (one - disc), LAMBDA / (2.0 * h) * (one + disc))
}

/// Connection coefficient of the scalar family as a ratio of sines.
pub fn scalar_closed_form(h: f64, x: Complex64) -> Result<Complex64> {
    let one = Complex64::new(1.0, 0.0);
    let lsin = |z: Complex64| -> Result<Complex64> { Ok(PI.ln() - log_gamma(z)? - log_gamma(one - z)?) };
    let (a1, a2) = alphas(h);
    let u = x / h;
    Ok((lsin(u)? + lsin(u - LAMBDA / h)? - lsin(u - a1)? - lsin(u - a2)?).exp())
}

fn base_config(command: Command) -> RunConfig {
    RunConfig { command: Some(command), family: Some(scalar_template()), truncation: ORDER, ..RunConfig::default() }
}

fn grid() -> Vec<Complex64> {
    let mut out = Vec::new();
    for re in [-2.3, -1.1, 0.2, 1.4, 2.6] {
        for im in [-2.1, -1.3, -0.45, 0.35, 0.65, 1.2, 1.7, 2.5, 3.1, 4.0] {
            out.push(Complex64::new(re, im));
        }
    }
    out
}

fn criterion_1(tol: &Tolerances, samples: &mut Vec<(f64, Complex64)>) -> std::result::Result<CriterionResult, CliError> {
    let t = Instant::now();
    let mut cfg = base_config(Command::Connect);
    cfg.h_sequence = vec![1.0];
    cfg.grid = grid().into_iter().map(complex_to_json).collect();
    let report = connect(&cfg, tol)?;
    let secs = t.elapsed().as_secs_f64();
    let mut worst: f64 = 0.0;
    let mut failed = 0;
    for p in &report.runs[0].points {
        let x = complex_from_json(p.x);
        match &p.p {
            Some(m) => {
                let got = matrix_from_json(m)?[(0, 0)];
                let want = scalar_closed_form(1.0, x)?;
                worst = worst.max(((got - want) / want).norm());
                samples.push((1.0, x));
            }
            None => failed += 1,
        }
    }
    Ok(CriterionResult {
        criterion: 1,
        pass: failed == 0 && worst <= 1e-8 && secs < 5.0,
        detail: format!("{} points, max rel err {worst:.2e}, {secs:.2}s", cfg.grid.len()),
    })
}

fn criterion_2(tol: &Tolerances, samples: &mut Vec<(f64, Complex64)>) -> std::result::Result<CriterionResult, CliError> {
    let t = Instant::now();
    let mut cfg = base_config(Command::Conflue);
    cfg.h_sequence = H_SEQ.to_vec();
    let report = conflue(&cfg, tol)?;
    let secs = t.elapsed().as_secs_f64();
    let expected = [Complex64::new(1.0, 0.0), (Complex64::new(0.0, -2.0 * PI) * MU / LAMBDA).exp(), Complex64::new(1.0, 0.0)];
    let mut pass = secs < 60.0 && report.strips.len() == expected.len() && report.status == Status::Ok;
    let mut parts = Vec::new();
    for (s, want) in report.strips.iter().zip(expected) {
        let err = (matrix_from_json(&s.limit)?[(0, 0)] - want).norm();
        pass &= err <= 1e-3;
        let order = s.order.map_or("below noise floor".to_string(), |o| format!("{o:.3}"));
        parts.push(format!("P{} err {err:.1e} order {order}", s.index));
        for sample in s.samples.iter().chain(&s.probe_samples) {
            samples.push((sample.h, complex_from_json(sample.x)));
        }
    }
    parts.push(format!("{secs:.2}s"));
    Ok(CriterionResult { criterion: 2, pass, detail: parts.join(", ") })
}

fn criterion_3(tol: &Tolerances) -> std::result::Result<CriterionResult, CliError> {
    let mut cfg = base_config(Command::Monodromy);
    cfg.h_sequence = LONG_H_SEQ.to_vec();
    cfg.richardson_levels = 2;
    let out = monodromy_command(&cfg, tol)?;
    let worst = out.report.diagnostics.oracle_difference.as_deref().unwrap_or(&[]).iter().copied().fold(0.0, f64::max);
    let around_zero = matrix_from_json(&out.report.monodromies[0])?[(0, 0)];
    Ok(CriterionResult {
        criterion: 3,
        pass: worst <= 1e-4 && out.report.monodromies.len() == 2,
        detail: format!("max oracle difference {worst:.1e}, monodromy around 0 {:.6}", around_zero.re),
    })
}

fn criterion_8(samples: &[(f64, Complex64)], tol: &Tolerances) -> std::result::Result<CriterionResult, CliError> {
    let template = scalar_template();
    let mut solvers: Vec<(f64, ConnectionSolver)> = Vec::new();
    let mut worst: f64 = 0.0;
    let mut min_det = f64::INFINITY;
    for &(h, x) in samples {
        let idx = match solvers.iter().position(|s| s.0 == h) {
            Some(i) => i,
            None => {
                solvers.push((h, ConnectionSolver::new(&family_instantiate(&template, h)?, ORDER)?));
                solvers.len() - 1
            }
        };
        let solver = &solvers[idx].1;
        let p = solver.at(x)?;
        worst = worst.max(linalg::max_abs_diff(&p, &solver.at(x + h)?));
        min_det = min_det.min(p.determinant().norm());
    }
    Ok(CriterionResult {
        criterion: 8,
        pass: worst <= tol.periodicity && min_det > tol.determinant,
        detail: format!("{} samples, max |P(x+h)-P(x)| {worst:.1e}, min |det P| {min_det:.2e}", samples.len()),
    })
}

/// End-to-end run of the scalar scenario through the command layer.
pub fn selftest() -> std::result::Result<SelftestReport, CliError> {
    let tol = Tolerances::default();
    let mut samples = Vec::new();
    let criteria = vec![
        criterion_1(&tol, &mut samples)?,
        criterion_2(&tol, &mut samples)?,
        criterion_3(&tol)?,
        criterion_8(&samples, &tol)?,
    ];
    let status = if criteria.iter().all(|c| c.pass) { Status::Ok } else { Status::Failed };
    Ok(SelftestReport { command: "selftest".into(), status, criteria })
}
