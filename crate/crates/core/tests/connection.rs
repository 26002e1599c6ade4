use std::f64::consts::PI;

use conflux_core::connection::{
    connection_matrix, frobenius_solution, monodromy, ode_monodromy_oracle, strip_limits, strip_limits_with,
    strip_partition, ConnectionSolver, StripLimit,
};
use conflux_core::diffsystem::{canonical_solution, DifferenceSystem};
use conflux_core::linalg::{self, c, ComplexMatrix, ONE};
use conflux_core::rational::{RationalEntry, RationalMatrix};
use conflux_core::specfun::principal_pow;
use conflux_core::Error;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LAMBDA: Complex64 = Complex64::new(0.0, 1.0);
const MU: f64 = 0.1;

fn scalar_family(h: f64) -> conflux_core::Result<DifferenceSystem> {
    let r = RationalMatrix::new(1, vec![RationalEntry::simple_pole(c(-MU, 0.0), LAMBDA + h)])?;
    DifferenceSystem::rational(r, h)
}

fn scalar_limit() -> RationalMatrix {
    RationalMatrix::new(1, vec![RationalEntry::simple_pole(c(-MU, 0.0), LAMBDA)]).unwrap()
}

fn a0_2x2() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[c(0.3, 0.0), c(0.5, 0.0), c(0.1, 0.0), c(-0.2, 0.0)])
}

fn limit_system_solution(x: Complex64) -> Complex64 {
    principal_pow((x - LAMBDA) / x, c(-MU, 0.0) / LAMBDA)
}

#[test]
fn zero_system_connection_is_identity() {
    let sys = DifferenceSystem::constant(&linalg::zeros(1), 0.5).unwrap();
    for x in [c(0.3, 0.2), c(-4.0, -1.5), c(2.2, 3.0)] {
        let p = connection_matrix(&sys, x, 16).unwrap();
        assert!((p[(0, 0)] - ONE).norm() < 1e-14);
    }
}

#[test]
fn connection_is_periodic_and_invertible() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let r = RationalMatrix::from_partial_fractions(
        &a0_2x2(),
        &[(c(0.4, 0.8), ComplexMatrix::from_row_slice(2, 2, &[c(0.2, 0.0), c(0.1, 0.1), c(0.0, 0.3), c(-0.1, 0.0)]))],
    )
    .unwrap();
    let sys = DifferenceSystem::rational(r, 0.5).unwrap();
    let solver = ConnectionSolver::new(&sys, 64).unwrap();
    for _ in 0..10 {
        let x = c(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        let (Ok(p), Ok(q)) = (solver.at(x), solver.at(x + 0.5)) else { continue };
        assert!(linalg::max_abs_diff(&p, &q) <= 1e-9, "period defect at {x}");
        assert!(p.determinant().norm() > 1e-12);
    }
}

#[test]
fn scalar_connection_observed_limits_at_imaginary_infinity() {
    let cc = c(0.3, 0.15);
    let sys = DifferenceSystem::constant(&ComplexMatrix::from_element(1, 1, cc), 1.0).unwrap();
    let solver = ConnectionSolver::new(&sys, 16).unwrap();
    let up = solver.at(c(0.25, 9.0)).unwrap()[(0, 0)];
    let down = solver.at(c(0.25, -9.0)).unwrap()[(0, 0)];
    let up_want = (c(0.0, -PI) * cc).exp();
    let down_want = (c(0.0, PI) * cc).exp();
    assert!((up - up_want).norm() < 1e-10, "{up} vs {up_want}");
    assert!((down - down_want).norm() < 1e-10, "{down} vs {down_want}");
    assert!((up * down - ONE).norm() < 1e-10);
}

#[test]
fn strip_partition_single_pole() {
    let strips = strip_partition(&scalar_limit()).unwrap();
    assert_eq!(strips.poles.len(), 2);
    assert_eq!(strips.strip_count(), 3);
    assert_eq!(strips.bands[1], (0.0, 1.0));
    assert!(strips.bands[0].0.is_infinite() && strips.bands[2].1.is_infinite());
    assert!(strips.midpoints.iter().all(|m| m.re == 0.0));
    assert_eq!(strips.midpoints[1], c(0.0, 0.5));
}

#[test]
fn strip_partition_constant_system() {
    let strips = strip_partition(&RationalMatrix::from_constant(&a0_2x2())).unwrap();
    assert_eq!(strips.poles, vec![c(0.0, 0.0)]);
    assert_eq!(strips.strip_count(), 2);
}

#[test]
fn strip_partition_rejects_equal_heights() {
    let r = RationalMatrix::new(1, vec![RationalEntry::simple_pole(ONE, c(1.0, 1.0))]).unwrap();
    let two = RationalMatrix::from_partial_fractions(
        &linalg::zeros(1),
        &[
            (c(1.0, 1.0), ComplexMatrix::from_element(1, 1, ONE)),
            (c(-2.0, 1.0), ComplexMatrix::from_element(1, 1, ONE)),
        ],
    )
    .unwrap();
    assert!(strip_partition(&r).is_ok());
    assert!(matches!(strip_partition(&two), Err(Error::StripHypothesis(..))));
    let real = RationalMatrix::new(1, vec![RationalEntry::simple_pole(ONE, c(2.0, 0.0))]).unwrap();
    assert!(matches!(strip_partition(&real), Err(Error::StripHypothesis(..))));
}

#[test]
fn scalar_family_limits_and_monodromy() {
    let strips = strip_partition(&scalar_limit()).unwrap();
    let limits = strip_limits(scalar_family, &strips, 64, &[0.2, 0.1, 0.05, 0.025]).unwrap();
    let p2 = (c(0.0, -2.0 * PI) * MU / LAMBDA).exp();
    assert!((limits[0].limit[(0, 0)] - ONE).norm() < 1e-3);
    assert!((limits[1].limit[(0, 0)] - p2).norm() < 1e-3);
    assert!((limits[2].limit[(0, 0)] - ONE).norm() < 1e-3);
    assert!(limits.iter().all(|l| l.converged && l.constancy < 1e-3));
    let report = monodromy(&limits, &strips).unwrap();
    let around_zero = (c(0.0, 2.0 * PI) * MU / LAMBDA).exp();
    assert!((report.monodromies[0][(0, 0)] - around_zero).norm() < 1e-3);
    assert!((report.monodromies[1][(0, 0)] - p2).norm() < 1e-3);
}

#[test]
fn fixed_and_shifted_families_share_limits() {
    let strips = strip_partition(&scalar_limit()).unwrap();
    let hs = [0.2, 0.1, 0.05, 0.025, 0.0125];
    let fixed = |h: f64| DifferenceSystem::rational(scalar_limit(), h);
    let a = strip_limits_with(scalar_family, &strips, 64, &hs, 2).unwrap();
    let b = strip_limits_with(fixed, &strips, 64, &hs, 2).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!(linalg::max_abs_diff(&x.limit, &y.limit) < 1e-4);
    }
}

#[test]
fn constant_family_monodromy_is_exponential() {
    let a0 = a0_2x2();
    let strips = strip_partition(&RationalMatrix::from_constant(&a0)).unwrap();
    let fam = |h: f64| DifferenceSystem::constant(&a0, h);
    let limits = strip_limits(fam, &strips, 32, &[0.2, 0.1, 0.05]).unwrap();
    let report = monodromy(&limits, &strips).unwrap();
    let want = linalg::expm(&(&a0 * c(0.0, 2.0 * PI)));
    assert!(linalg::max_abs_diff(&report.monodromies[0], &want) < 1e-9);
}

fn fake_limits(ms: &[ComplexMatrix]) -> Vec<StripLimit> {
    ms.iter()
        .map(|m| StripLimit {
            limit: m.clone(),
            samples: Vec::new(),
            probe_limit: m.clone(),
            probe_samples: Vec::new(),
            order: None,
            converged: true,
            constancy: 0.0,
            last_difference: 0.0,
        })
        .collect()
}

#[test]
fn equal_limits_give_trivial_monodromy() {
    let strips = strip_partition(&scalar_limit()).unwrap();
    let p = ComplexMatrix::from_element(1, 1, c(0.6, -0.2));
    let report = monodromy(&fake_limits(&[p.clone(), p.clone(), p]), &strips).unwrap();
    for m in &report.monodromies {
        assert!((m[(0, 0)] - ONE).norm() < 1e-15);
    }
}

#[test]
fn monodromies_telescope() {
    let two = RationalMatrix::from_partial_fractions(
        &linalg::zeros(2),
        &[
            (c(0.2, 1.0), linalg::identity(2)),
            (c(0.1, -1.0), linalg::identity(2)),
        ],
    )
    .unwrap();
    let strips = strip_partition(&two).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let ps: Vec<ComplexMatrix> = (0..strips.strip_count())
        .map(|_| linalg::identity(2) + ComplexMatrix::from_fn(2, 2, |_, _| c(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3))))
        .collect();
    let report = monodromy(&fake_limits(&ps), &strips).unwrap();
    let mut prod = linalg::identity(2);
    for m in &report.monodromies {
        prod *= m;
    }
    let want = &ps[0] * linalg::inverse(ps.last().unwrap()).unwrap();
    assert!(linalg::max_abs_diff(&prod, &want) < 1e-12);
}

#[test]
fn frobenius_constant_is_matrix_power() {
    let a0 = a0_2x2();
    let sol = frobenius_solution(&RationalMatrix::from_constant(&a0), 20).unwrap();
    let x = c(3.0, 2.0);
    let want = linalg::expm(&(&a0 * x.ln()));
    assert!(linalg::max_abs_diff(&sol.evaluate(x).unwrap(), &want) < 1e-12);
}

#[test]
fn frobenius_scalar_closed_form() {
    let sol = frobenius_solution(&scalar_limit(), 80).unwrap();
    for x in [c(5.0, 5.0), c(0.7, 0.4), c(-1.5, 2.5), c(-3.0, -0.5)] {
        let got = sol.evaluate(x).unwrap()[(0, 0)];
        let want = limit_system_solution(x);
        assert!(((got - want) / want).norm() <= 1e-10, "{x}: {got} vs {want}");
    }
}

#[test]
fn frobenius_satisfies_differential_equation() {
    let atilde = RationalMatrix::from_partial_fractions(
        &a0_2x2(),
        &[(c(0.3, 0.9), ComplexMatrix::from_row_slice(2, 2, &[c(0.1, 0.0), c(0.2, 0.0), c(0.0, 0.1), c(0.3, 0.0)]))],
    )
    .unwrap();
    let sol = frobenius_solution(&atilde, 80).unwrap();
    let d = 1e-3;
    for x in [c(6.0, 1.0), c(1.2, 2.0), c(-2.0, 0.4)] {
        let y = |z: Complex64| sol.evaluate(z).unwrap();
        let deriv = (y(x - 2.0 * d) - y(x - d) * c(8.0, 0.0) + y(x + d) * c(8.0, 0.0) - y(x + 2.0 * d)) / c(12.0 * d, 0.0);
        let r = deriv * x - atilde.eval(x).unwrap() * y(x);
        assert!(linalg::norm(&r) <= 1e-9 * linalg::norm(&y(x)).max(1.0), "{x}: {}", linalg::norm(&r));
    }
}

#[test]
fn oracle_constant_system() {
    let a0 = a0_2x2();
    let m = ode_monodromy_oracle(&RationalMatrix::from_constant(&a0), 0, c(0.7, 0.0), 0.7, 64).unwrap();
    let want = linalg::expm(&(&a0 * c(0.0, 2.0 * PI)));
    assert!(linalg::max_abs_diff(&m, &want) < 1e-7);
}

#[test]
fn oracle_scalar_limit_system() {
    let r = scalar_limit();
    let around_zero = ode_monodromy_oracle(&r, 0, c(0.4, 0.0), 0.4, 64).unwrap()[(0, 0)];
    let around_pole = ode_monodromy_oracle(&r, 1, LAMBDA + 0.4, 0.4, 64).unwrap()[(0, 0)];
    assert!((around_zero - c((0.2 * PI).exp(), 0.0)).norm() < 1e-7);
    assert!((around_pole - c((-0.2 * PI).exp(), 0.0)).norm() < 1e-7);
}

#[test]
fn oracle_rejects_bad_loops() {
    let r = scalar_limit();
    assert!(matches!(ode_monodromy_oracle(&r, 0, c(0.5, 0.0), 0.4, 64), Err(Error::Invalid(_))));
    assert!(matches!(ode_monodromy_oracle(&r, 0, c(1.2, 0.0), 1.2, 64), Err(Error::Pole(_))));
}

#[test]
fn scalar_solutions_converge_linearly() {
    let x = c(1.0, 0.5);
    let want = limit_system_solution(x);
    let errs: Vec<f64> = [0.2, 0.1, 0.05, 0.025]
        .iter()
        .map(|&h| {
            let sol = canonical_solution(&scalar_family(h).unwrap(), 64).unwrap();
            (sol.evaluate(x).unwrap()[(0, 0)] - want).norm()
        })
        .collect();
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((0.8..=1.2).contains(&order), "order {order} from {errs:?}");
    }
}
