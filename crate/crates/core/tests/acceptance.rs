//! Acceptance criteria, one PASS/FAIL line each.

use std::f64::consts::PI;
use std::time::Instant;

use conflux_core::connection::{
    monodromy, ode_monodromy_oracle, strip_limits, strip_limits_with, strip_partition, ConnectionSolver, StripDecomposition, StripLimit,
};
use conflux_core::diffsystem::{canonical_solution, gauge_series, residual, DifferenceSystem};
use conflux_core::factseries::{self, expand_rational, multiply, translate, Certificate, FactorialSeries};
use conflux_core::linalg::{self, c, ComplexMatrix, ONE, ZERO};
use conflux_core::poly::Polynomial;
use conflux_core::rational::{RationalEntry, RationalMatrix};
use conflux_core::specfun::{character, log_gamma, principal_pow, CharacterKind};
use conflux_core::spectral::{check_nonresonant, decompose};
use conflux_core::Result;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LAMBDA: Complex64 = Complex64::new(0.0, 1.0);
const MU: f64 = 0.1;
const H_SEQ: [f64; 4] = [0.2, 0.1, 0.05, 0.025];
const ORDER: usize = 64;
const LONG_H_SEQ: [f64; 7] = [0.2, 0.1, 0.05, 0.025, 0.0125, 0.00625, 0.003125];
const LEVELS: usize = 2;
/// Truncation order for the series-evaluation suites.
const DEEP_ORDER: usize = 128;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Samples (family tag, h, x) where a connection matrix was evaluated.
type SampleLog = Vec<(usize, f64, Complex64)>;

fn scalar_family(h: f64) -> Result<DifferenceSystem> {
    let r = RationalMatrix::new(1, vec![RationalEntry::simple_pole(c(-MU, 0.0), LAMBDA + h)])?;
    DifferenceSystem::rational(r, h)
}

fn scalar_limit_system() -> RationalMatrix {
    RationalMatrix::new(1, vec![RationalEntry::simple_pole(c(-MU, 0.0), LAMBDA)]).unwrap()
}

fn constant_a0() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[c(0.3, 0.0), c(0.5, 0.0), c(0.1, 0.0), c(-0.2, 0.0)])
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, n, |_, _| c(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale)))
}

fn two_pole_system() -> RationalMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    loop {
        let a0 = random_matrix(&mut rng, 2, 0.3);
        let Ok(spec) = decompose(&a0, 1e-8) else { continue };
        let ev = spec.eigenvalues();
        if spec.blocks().len() != 2 || (ev[0] - ev[1]).norm() < 0.1 || !check_nonresonant(&spec, 1e-2) {
            continue;
        }
        let p1 = c(rng.gen_range(-1.0..1.0), rng.gen_range(0.6..1.4));
        let p2 = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.4..-0.6));
        let r1 = random_matrix(&mut rng, 2, 0.3);
        let r2 = random_matrix(&mut rng, 2, 0.3);
        return RationalMatrix::from_partial_fractions(&a0, &[(p1, r1), (p2, r2)]).unwrap();
    }
}

fn alphas(h: f64) -> (Complex64, Complex64) {
    let disc = (ONE - 4.0 * MU * h / (LAMBDA * LAMBDA)).sqrt();
    (LAMBDA / (2.0 * h) * (ONE - disc), LAMBDA / (2.0 * h) * (ONE + disc))
}

/// sin(πx/h)sin(π(x−λ)/h) / (sin π(x/h−α₁) sin π(x/h−α₂)), with sines from log_gamma.
fn scalar_closed_form(h: f64, x: Complex64) -> Complex64 {
    let (a1, a2) = alphas(h);
    // π/sin(πz) = Γ(z)Γ(1−z)
    let lsin = |z: Complex64| PI.ln() - log_gamma(z).unwrap() - log_gamma(ONE - z).unwrap();
    let u = x / h;
    (lsin(u) + lsin(u - LAMBDA / h) - lsin(u - a1) - lsin(u - a2)).exp()
}

fn criterion_1(log: &mut SampleLog) -> Outcome {
    let t = Instant::now();
    let solver = ConnectionSolver::new(&scalar_family(1.0).unwrap(), ORDER).unwrap();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for re in [-2.3, -1.1, 0.2, 1.4, 2.6] {
        for im in [-2.1, -1.3, -0.45, 0.35, 0.65, 1.2, 1.7, 2.5, 3.1, 4.0] {
            let x = c(re, im);
            let want = scalar_closed_form(1.0, x);
            let got = solver.at(x).unwrap()[(0, 0)];
            worst = worst.max(((got - want) / want).norm());
            log.push((0, 1.0, x));
            count += 1;
        }
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(worst <= 1e-8 && secs < 5.0, format!("{count} points, max rel err {worst:.2e}, {secs:.2}s"))
}

fn criterion_2(log: &mut SampleLog) -> Outcome {
    let t = Instant::now();
    let strips = strip_partition(&scalar_limit_system()).unwrap();
    let limits = strip_limits(scalar_family, &strips, ORDER, &H_SEQ).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let expected = [ONE, (c(0.0, -2.0 * PI) * MU / LAMBDA).exp(), ONE];
    let mut pass = secs < 60.0;
    let mut parts = Vec::new();
    for (j, l) in limits.iter().enumerate() {
        let err = (l.limit[(0, 0)] - expected[j]).norm();
        let order_ok = l.converged && l.order.map_or(true, |o| o >= 0.8);
        pass &= err <= 1e-3 && order_ok;
        let order = l.order.map_or("below noise floor".to_string(), |o| format!("{o:.3}"));
        parts.push(format!("P{} err {err:.1e} order {order}", j + 1));
        for s in l.samples.iter().chain(&l.probe_samples) {
            log.push((0, s.h, s.x));
        }
    }
    parts.push(format!("{secs:.2}s"));
    outcome(pass, parts.join(", "))
}

fn oracle_radius(strips: &StripDecomposition, j: usize) -> f64 {
    let z = strips.poles[j];
    let d = strips
        .poles
        .iter()
        .filter(|&&p| p != z)
        .map(|p| (p - z).norm())
        .fold(f64::INFINITY, f64::min);
    (0.4 * d).min(0.5)
}

fn compare_with_oracle(atilde: &RationalMatrix, strips: &StripDecomposition, limits: &[StripLimit]) -> f64 {
    let report = monodromy(limits, strips).unwrap();
    let mut worst: f64 = 0.0;
    for (j, m) in report.monodromies.iter().enumerate() {
        let r = oracle_radius(strips, j);
        let oracle = ode_monodromy_oracle(atilde, j, strips.poles[j] + r, r, 64).unwrap();
        worst = worst.max(linalg::max_abs_diff(m, &oracle));
    }
    worst
}

fn criterion_3(log: &mut SampleLog) -> Outcome {
    let scalar = scalar_limit_system();
    let strips_a = strip_partition(&scalar).unwrap();
    let limits_a = strip_limits_with(scalar_family, &strips_a, ORDER, &LONG_H_SEQ, LEVELS).unwrap();
    let a = compare_with_oracle(&scalar, &strips_a, &limits_a);

    let a0 = constant_a0();
    let constant = RationalMatrix::from_constant(&a0);
    let strips_b = strip_partition(&constant).unwrap();
    let fam_b = |h: f64| DifferenceSystem::constant(&a0, h);
    let limits_b = strip_limits_with(fam_b, &strips_b, ORDER, &LONG_H_SEQ, LEVELS).unwrap();
    let b = compare_with_oracle(&constant, &strips_b, &limits_b);
    let closed = linalg::expm(&(&a0 * c(0.0, 2.0 * PI)));
    let b_closed = linalg::max_abs_diff(&monodromy(&limits_b, &strips_b).unwrap().monodromies[0], &closed);

    let atilde = two_pole_system();
    let strips_c = strip_partition(&atilde).unwrap();
    let fam_c = |h: f64| DifferenceSystem::rational(atilde.clone(), h);
    let limits_c = strip_limits_with(fam_c, &strips_c, ORDER, &LONG_H_SEQ, LEVELS).unwrap();
    let cc = compare_with_oracle(&atilde, &strips_c, &limits_c);

    for (tag, limits) in [(0usize, &limits_a), (1, &limits_b), (2, &limits_c)] {
        for l in limits.iter() {
            for s in l.samples.iter().chain(&l.probe_samples) {
                log.push((tag, s.h, s.x));
            }
        }
    }
    let pass = a <= 1e-4 && b <= 1e-4 && b_closed <= 1e-4 && cc <= 1e-4;
    outcome(
        pass,
        format!("scalar {a:.1e}, constant {b:.1e} (closed form {b_closed:.1e}), two-pole {cc:.1e}"),
    )
}

fn random_rational(rng: &mut ChaCha8Rng, n: usize) -> RationalMatrix {
    let a0 = random_matrix(rng, n, 1.0);
    let terms: Vec<(Complex64, ComplexMatrix)> = (0..2)
        .map(|_| {
            let p = Complex64::from_polar(rng.gen_range(0.0..1.0), rng.gen_range(-PI..PI));
            (p, random_matrix(rng, n, 1.0))
        })
        .collect();
    RationalMatrix::from_partial_fractions(&a0, &terms).unwrap()
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut prod_worst: f64 = 0.0;
    for _ in 0..100 {
        let a = expand_rational(&random_rational(&mut rng, 2), 1.0, DEEP_ORDER).unwrap();
        let b = expand_rational(&random_rational(&mut rng, 2), 1.0, DEEP_ORDER).unwrap();
        let p = multiply(&a, &b).unwrap();
        let (la, lb) = (a.cert().unwrap().lambda, b.cert().unwrap().lambda);
        let x = c(la + lb + 5.0, rng.gen_range(-5.0..5.0));
        let lhs = p.evaluate(x).unwrap().0;
        let rhs = a.evaluate(x).unwrap().0 * b.evaluate(x).unwrap().0;
        prod_worst = prod_worst.max(linalg::max_abs_diff(&lhs, &rhs));
    }

    let inv_sq = RationalMatrix::new(1, vec![RationalEntry::new(Polynomial::one(), Polynomial::from_real(&[0.0, 0.0, 1.0]))]).unwrap();
    let sq = expand_rational(&inv_sq, 1.0, 20).unwrap();
    let mut fact = 1.0;
    let mut exact = sq.coeff(0)[(0, 0)] == ZERO && sq.coeff(1)[(0, 0)] == ZERO;
    for s in 2..=20 {
        if s > 2 {
            fact *= (s - 2) as f64;
        }
        exact &= sq.coeff(s)[(0, 0)] == c(fact, 0.0);
    }

    let mut positive = true;
    for n in 1..=8usize {
        let mut den = vec![0.0; n + 1];
        den[n] = 1.0;
        let r = RationalMatrix::new(1, vec![RationalEntry::new(Polynomial::one(), Polynomial::from_real(&den))]).unwrap();
        let e = expand_rational(&r, 1.0, 40).unwrap();
        positive &= e.coeffs().iter().all(|m| m[(0, 0)].im == 0.0 && m[(0, 0)].re >= 0.0);
    }

    let mut trans_worst: f64 = 0.0;
    for _ in 0..20 {
        let a = expand_rational(&random_rational(&mut rng, 2), 1.0, DEEP_ORDER).unwrap();
        let x = c(12.0, rng.gen_range(-3.0..3.0));
        let lhs = translate(&a).evaluate(x).unwrap().0;
        let rhs = a.evaluate(x - 1.0).unwrap().0;
        trans_worst = trans_worst.max(linalg::max_abs_diff(&lhs, &rhs));
    }
    let pass = prod_worst <= 1e-10 && exact && positive && trans_worst <= 1e-9;
    outcome(
        pass,
        format!("product {prod_worst:.1e}, 1/x^2 exact {exact}, psi >= 0 {positive}, translate {trans_worst:.1e}"),
    )
}

fn random_type_system(rng: &mut ChaCha8Rng, n: usize) -> DifferenceSystem {
    loop {
        let a0 = random_matrix(rng, n, 0.5);
        let Ok(spec) = decompose(&a0, 1e-8) else { continue };
        if !check_nonresonant(&spec, 1e-2) {
            continue;
        }
        let cc = rng.gen_range(0.1..2.0);
        let lam = rng.gen_range(0.1..2.0);
        let mut coeffs = vec![a0];
        for s in 1..=DEEP_ORDER {
            let u = random_matrix(rng, n, 1.0);
            let bound = cc * factseries::rising(lam, s - 1, 1.0);
            let scale = rng.gen_range(0.0..1.0) * bound / linalg::norm(&u);
            coeffs.push(u * c(scale, 0.0));
        }
        let f = FactorialSeries::new(1.0, coeffs, Some(Certificate { c: cc, lambda: lam })).unwrap();
        return DifferenceSystem::factorial(f).unwrap();
    }
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let mut unique = true;
    let mut max_lambda: f64 = 0.0;
    for k in 0..50 {
        let n = if k % 2 == 0 { 2 } else { 3 };
        let sys = random_type_system(&mut rng, n);
        let sol = canonical_solution(&sys, DEEP_ORDER).unwrap();
        let lam = sol.gauge().cert().unwrap().lambda;
        max_lambda = max_lambda.max(lam);
        for _ in 0..10 {
            let x = c(lam + 5.0 + rng.gen_range(0.0..10.0), rng.gen_range(-10.0..10.0));
            let r = residual(&sys, |z| sol.evaluate_certified(z).map(|v| v.0), x).unwrap();
            worst = worst.max(r);
        }
        let low = gauge_series(&sys, 32).unwrap();
        let high = gauge_series(&sys, 64).unwrap();
        for s in 0..=32 {
            unique &= low.coeff(s) == high.coeff(s);
        }
    }
    outcome(
        worst <= 1e-9 && unique,
        format!("max residual {worst:.1e} (max lambda' {max_lambda:.2}), orders 32/64 identical {unique}"),
    )
}

/// Power series of e_c(x)·x^{−c} in 1/x from the Stirling expansion of ln Γ.
fn asymptotic_coefficients(cc: Complex64, count: usize) -> Vec<Complex64> {
    const B: [f64; 6] = [1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0, 5.0 / 66.0, -691.0 / 2730.0];
    let len = count + 2;
    let mut l = vec![ZERO; len];
    // −(x − c − ½)·ln(1 − c/x) − c
    for k in 1..len + 1 {
        let ck = cc.powi(k as i32) / k as f64;
        if k >= 2 && k - 1 < len {
            l[k - 1] += ck;
        }
        if k < len {
            l[k] -= (cc + 0.5) * ck;
        }
    }
    // Σ B_{2m}/(2m(2m−1)) (x^{1−2m} − (x−c)^{1−2m})
    for (mi, &b) in B.iter().enumerate() {
        let m = mi + 1;
        let w = b / ((2 * m * (2 * m - 1)) as f64);
        let p = 2 * m - 1;
        let mut binom = 1.0;
        for j in 0..len {
            if p + j >= len {
                break;
            }
            if j > 0 {
                binom *= (p - 1 + j) as f64 / j as f64;
            }
            let term = cc.powi(j as i32) * binom;
            if j == 0 {
                l[p] += w * (ONE - term);
            } else {
                l[p + j] -= w * term;
            }
        }
    }
    // exponentiate: y' = l' y
    let mut y = vec![ZERO; len];
    y[0] = ONE;
    for s in 1..len {
        let mut acc = ZERO;
        for k in 1..=s {
            acc += l[k] * y[s - k] * k as f64;
        }
        y[s] = acc / s as f64;
    }
    y.truncate(count);
    y
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let num: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}

fn criterion_6() -> Outcome {
    let cc = c(0.3, 0.2);
    let coeffs = asymptotic_coefficients(cc, 4);
    let mut pass = true;
    let mut parts = Vec::new();
    for n in 1..=3usize {
        let mut lx = Vec::new();
        let mut ly = Vec::new();
        for k in 0..=40 {
            let x = 20.0 * 100f64.powf(k as f64 / 40.0);
            let xc = c(x, 0.0);
            let e = character(CharacterKind::PlusInfinity, cc, 1.0, xc).unwrap() * principal_pow(xc, -cc);
            let partial: Complex64 = (0..n).map(|s| coeffs[s] * x.powi(-(s as i32))).sum();
            lx.push(x.ln());
            ly.push((e - partial).norm().ln());
        }
        let sl = slope(&lx, &ly);
        pass &= sl <= -(n as f64) + 0.1;
        parts.push(format!("N={n} slope {sl:.3}"));
    }
    outcome(pass, parts.join(", "))
}

fn criterion_7() -> Outcome {
    let hs = [0.2, 0.1, 0.05, 0.025];
    let compact: Vec<Complex64> = (0..5)
        .flat_map(|i| (0..9).map(move |j| Complex64::from_polar(1.0 + 0.5 * i as f64, -2.4 + 0.6 * j as f64)))
        .collect();
    let mut pass = true;
    let mut parts = Vec::new();
    for cc in [c(0.5, 0.0), c(-0.3, 1.0)] {
        let errs: Vec<f64> = hs
            .iter()
            .map(|&h| {
                compact
                    .iter()
                    .map(|&x| (character(CharacterKind::PlusInfinity, cc, h, x).unwrap() - principal_pow(x, cc)).norm())
                    .fold(0.0, f64::max)
            })
            .collect();
        let ratios: Vec<f64> = errs.windows(2).map(|w| w[0] / w[1]).collect();
        pass &= ratios.iter().all(|r| (1.6..=2.4).contains(r));
        parts.push(format!(
            "c={cc}: ratios {}",
            ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join("/")
        ));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_8(log: &SampleLog) -> Outcome {
    let a0 = constant_a0();
    let two = two_pole_system();
    let mut solvers: Vec<(usize, f64, ConnectionSolver)> = Vec::new();
    let mut worst_period: f64 = 0.0;
    let mut min_det = f64::INFINITY;
    for &(tag, h, x) in log {
        let idx = match solvers.iter().position(|s| s.0 == tag && s.1 == h) {
            Some(i) => i,
            None => {
                let sys = match tag {
                    0 => scalar_family(h).unwrap(),
                    1 => DifferenceSystem::constant(&a0, h).unwrap(),
                    _ => DifferenceSystem::rational(two.clone(), h).unwrap(),
                };
                solvers.push((tag, h, ConnectionSolver::new(&sys, ORDER).unwrap()));
                solvers.len() - 1
            }
        };
        let solver = &solvers[idx].2;
        let p = solver.at(x).unwrap();
        let q = solver.at(x + h).unwrap();
        worst_period = worst_period.max(linalg::max_abs_diff(&p, &q));
        min_det = min_det.min(p.determinant().norm());
    }
    outcome(
        worst_period <= 1e-9 && min_det > 1e-12,
        format!("{} samples, max |P(x+h)-P(x)| {worst_period:.1e}, min |det P| {min_det:.2e}", log.len()),
    )
}

fn main() {
    let mut log = SampleLog::new();
    let mut results = vec![criterion_1(&mut log), criterion_2(&mut log), criterion_3(&mut log)];
    results.push(criterion_4());
    results.push(criterion_5());
    results.push(criterion_6());
    results.push(criterion_7());
    results.push(criterion_8(&log));
    let mut failed = 0;
    for (i, r) in results.iter().enumerate() {
        let tag = if r.pass { "PASS" } else { "FAIL" };
        println!("criterion {}: {tag} ({})", i + 1, r.detail);
        if !r.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
