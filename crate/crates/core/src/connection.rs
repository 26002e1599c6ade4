//! Connection matrices, strip limits under confluence, monodromy and the ODE oracle.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::diffsystem::{canonical_solution, minus_transform, CanonicalSolution, DifferenceSystem, Orientation};
use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix, I};
use crate::rational::RationalMatrix;
use crate::specfun;
use crate::spectral;

/// Both canonical solutions of one system, ready to produce P(x) = e⁺(x)⁻¹e⁻(x).
#[derive(Clone, Debug)]
pub struct ConnectionSolver {
    plus: CanonicalSolution,
    minus: CanonicalSolution,
}

impl ConnectionSolver {
    pub fn new(sys: &DifferenceSystem, order: usize) -> Result<Self> {
        let plus_sys = sys.clone().with_orientation(Orientation::Plus)?;
        let minus_sys = minus_transform(&plus_sys)?;
        Ok(ConnectionSolver {
            plus: canonical_solution(&plus_sys, order)?,
            minus: canonical_solution(&minus_sys, order)?,
        })
    }

    pub fn plus(&self) -> &CanonicalSolution {
        &self.plus
    }

    pub fn minus(&self) -> &CanonicalSolution {
        &self.minus
    }

    pub fn h(&self) -> f64 {
        self.plus.system().h()
    }

    pub fn at(&self, x: Complex64) -> Result<ComplexMatrix> {
        let ep = self.plus.evaluate(x)?;
        let em = self.minus.evaluate(x)?;
        let inv = linalg::inverse(&ep).map_err(|_| Error::Singular(format!("e⁺ is singular at {x}")))?;
        Ok(inv * em)
    }
}

/// P(x) = e⁺(x)⁻¹·e⁻(x).
pub fn connection_matrix(sys: &DifferenceSystem, x: Complex64, order: usize) -> Result<ComplexMatrix> {
    ConnectionSolver::new(sys, order)?.at(x)
}

/// Horizontal bands cut out by the lines z̃ⱼ + ℝ.
#[derive(Clone, Debug)]
pub struct StripDecomposition {
    /// Poles of the limit system together with 0, by increasing imaginary part.
    pub poles: Vec<Complex64>,
    /// (lower, upper) imaginary bounds; infinite for the outer bands.
    pub bands: Vec<(f64, f64)>,
    pub midpoints: Vec<Complex64>,
    /// Second sample per band for the constancy check.
    pub probes: Vec<Complex64>,
}

impl StripDecomposition {
    pub fn strip_count(&self) -> usize {
        self.bands.len()
    }
}

/// Sorts the poles of Ã plus 0 and checks pairwise distinct imaginary parts.
pub fn strip_partition(atilde: &RationalMatrix) -> Result<StripDecomposition> {
    let mut poles: Vec<Complex64> = atilde.poles().iter().map(|p| p.0).collect();
    let scale = |z: Complex64| 1e-9 * z.norm().max(1.0);
    for &p in &poles {
        if p.im.abs() <= scale(p) {
            return Err(Error::StripHypothesis(p, Complex64::from(0.0)));
        }
    }
    poles.push(Complex64::from(0.0));
    poles.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap());
    for w in poles.windows(2) {
        if (w[1].im - w[0].im).abs() <= scale(w[0]).max(scale(w[1])) {
            return Err(Error::StripHypothesis(w[0], w[1]));
        }
    }
    let r = poles.len();
    let mut bands = Vec::with_capacity(r + 1);
    let mut midpoints = Vec::with_capacity(r + 1);
    let mut probes = Vec::with_capacity(r + 1);
    bands.push((f64::NEG_INFINITY, poles[0].im));
    midpoints.push(Complex64::new(0.0, poles[0].im - 1.0));
    probes.push(Complex64::new(0.5, poles[0].im - 0.5));
    for w in poles.windows(2) {
        let (lo, hi) = (w[0].im, w[1].im);
        bands.push((lo, hi));
        midpoints.push(Complex64::new(0.0, 0.5 * (lo + hi)));
        probes.push(Complex64::new(0.5, lo + 0.25 * (hi - lo)));
    }
    let top = poles[r - 1].im;
    bands.push((top, f64::INFINITY));
    midpoints.push(Complex64::new(0.0, top + 1.0));
    probes.push(Complex64::new(0.5, top + 0.5));
    Ok(StripDecomposition { poles, bands, midpoints, probes })
}

/// One evaluated P^{(h)} sample.
#[derive(Clone, Debug)]
pub struct StripSample {
    pub h: f64,
    pub x: Complex64,
    pub p: ComplexMatrix,
}

/// Limit of P^{(h)} on one strip with its diagnostics.
#[derive(Clone, Debug)]
pub struct StripLimit {
    pub limit: ComplexMatrix,
    pub samples: Vec<StripSample>,
    pub probe_limit: ComplexMatrix,
    pub probe_samples: Vec<StripSample>,
    /// Empirical order in h from the last three samples; None below the noise floor.
    pub order: Option<f64>,
    pub converged: bool,
    /// |limit − probe_limit|
    pub constancy: f64,
    pub last_difference: f64,
}

/// Differences below this (relative to ‖P‖) are treated as already converged.
pub const NOISE_FLOOR: f64 = 1e-10;

/// Polynomial extrapolation to h = 0 through the last `levels + 1` samples; one level is linear Richardson.
fn richardson(samples: &[StripSample], levels: usize) -> ComplexMatrix {
    let m = levels.min(samples.len() - 1) + 1;
    let pts = &samples[samples.len() - m..];
    let mut table: Vec<ComplexMatrix> = pts.iter().map(|s| s.p.clone()).collect();
    for k in 1..m {
        for i in 0..m - k {
            let (hi, hk) = (pts[i].h, pts[i + k].h);
            table[i] = &table[i + 1] + (&table[i + 1] - &table[i]) * Complex64::from(hk / (hi - hk));
        }
    }
    table.swap_remove(0)
}

fn order_estimate(samples: &[StripSample]) -> (Option<f64>, bool, f64) {
    let k = samples.len();
    let scale = samples.iter().map(|s| linalg::norm(&s.p)).fold(1.0, f64::max);
    let diffs: Vec<f64> = samples.windows(2).map(|w| linalg::norm(&(&w[1].p - &w[0].p))).collect();
    let last = diffs.last().copied().unwrap_or(0.0);
    if k < 3 {
        return (None, true, last);
    }
    let (d1, d2) = (diffs[k - 3], diffs[k - 2]);
    if d2 <= NOISE_FLOOR * scale {
        return (None, true, last);
    }
    let ratio = samples[k - 3].h / samples[k - 2].h;
    let order = (d1 / d2).ln() / ratio.ln();
    (Some(order), d2 < d1, last)
}

/// Evaluates P at x, shifting right by h/3 steps if the point is obstructed.
fn sample(solver: &ConnectionSolver, x: Complex64) -> Result<StripSample> {
    let h = solver.h();
    let mut last_err = None;
    for k in 0..6 {
        let xs = x + k as f64 * h / 3.0;
        match solver.at(xs) {
            Ok(p) => return Ok(StripSample { h, x: xs, p }),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.expect("at least one attempt"))
}

/// P̃ⱼ on every strip from P^{(h)} along a decreasing h-sequence, by linear Richardson.
pub fn strip_limits<F>(family: F, strips: &StripDecomposition, order: usize, h_seq: &[f64]) -> Result<Vec<StripLimit>>
where
    F: Fn(f64) -> Result<DifferenceSystem> + Sync,
{
    strip_limits_with(family, strips, order, h_seq, 1)
}

/// As [`strip_limits`] with `levels` Richardson levels.
pub fn strip_limits_with<F>(
    family: F,
    strips: &StripDecomposition,
    order: usize,
    h_seq: &[f64],
    levels: usize,
) -> Result<Vec<StripLimit>>
where
    F: Fn(f64) -> Result<DifferenceSystem> + Sync,
{
    if levels == 0 {
        return Err(Error::Invalid("at least one Richardson level is required".into()));
    }
    if h_seq.is_empty() || h_seq.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Invalid("h-sequence must be nonempty and strictly decreasing".into()));
    }
    let per_h: Vec<Result<(Vec<StripSample>, Vec<StripSample>)>> = h_seq
        .par_iter()
        .map(|&h| {
            let solver = ConnectionSolver::new(&family(h)?, order)?;
            let mids = strips.midpoints.iter().map(|&x| sample(&solver, x)).collect::<Result<Vec<_>>>()?;
            let probes = strips.probes.iter().map(|&x| sample(&solver, x)).collect::<Result<Vec<_>>>()?;
            Ok((mids, probes))
        })
        .collect();
    let per_h = per_h.into_iter().collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(strips.strip_count());
    for j in 0..strips.strip_count() {
        let samples: Vec<StripSample> = per_h.iter().map(|(m, _)| m[j].clone()).collect();
        let probe_samples: Vec<StripSample> = per_h.iter().map(|(_, p)| p[j].clone()).collect();
        let limit = richardson(&samples, levels);
        let probe_limit = richardson(&probe_samples, levels);
        let (order_est, converged, last_difference) = order_estimate(&samples);
        let constancy = linalg::norm(&(&limit - &probe_limit));
        out.push(StripLimit {
            limit,
            samples,
            probe_limit,
            probe_samples,
            order: order_est,
            converged,
            constancy,
            last_difference,
        });
    }
    Ok(out)
}

/// Local monodromies Mⱼ = P̃ⱼ·P̃ⱼ₊₁⁻¹ in the e⁺ basis of the limit system.
#[derive(Clone, Debug)]
pub struct MonodromyReport {
    pub poles: Vec<Complex64>,
    pub monodromies: Vec<ComplexMatrix>,
    pub strip_limits: Vec<ComplexMatrix>,
    pub h_sequence: Vec<f64>,
    pub orders: Vec<Option<f64>>,
    pub converged: Vec<bool>,
    pub constancy: Vec<f64>,
}

pub fn monodromy(limits: &[StripLimit], strips: &StripDecomposition) -> Result<MonodromyReport> {
    if limits.len() != strips.strip_count() {
        return Err(Error::Dimension(format!("{} limits for {} strips", limits.len(), strips.strip_count())));
    }
    let mut monodromies = Vec::with_capacity(strips.poles.len());
    for j in 0..strips.poles.len() {
        let next = linalg::inverse(&limits[j + 1].limit)
            .map_err(|_| Error::Singular(format!("strip limit {} is singular", j + 2)))?;
        let m = &limits[j].limit * next;
        if m.determinant().norm() < 1e-12 {
            return Err(Error::Singular(format!("monodromy around {} is singular", strips.poles[j])));
        }
        monodromies.push(m);
    }
    Ok(MonodromyReport {
        poles: strips.poles.clone(),
        monodromies,
        strip_limits: limits.iter().map(|l| l.limit.clone()).collect(),
        h_sequence: limits.first().map(|l| l.samples.iter().map(|s| s.h).collect()).unwrap_or_default(),
        orders: limits.iter().map(|l| l.order).collect(),
        converged: limits.iter().map(|l| l.converged).collect(),
        constancy: limits.iter().map(|l| l.constancy).collect(),
    })
}

/// Fundamental solution G(x)·x^{Ã₀} of x·Y′ = Ã(x)·Y normalised at ∞.
#[derive(Clone, Debug)]
pub struct FrobeniusSolution {
    atilde: RationalMatrix,
    a0: ComplexMatrix,
    gauge: Vec<ComplexMatrix>,
    radius: f64,
}

pub fn frobenius_solution(atilde: &RationalMatrix, order: usize) -> Result<FrobeniusSolution> {
    let a = atilde.power_coefficients(order)?;
    let a0 = a[0].clone();
    let spec = spectral::decompose(&a0, spectral::DEFAULT_CLUSTER_TOL)?;
    if !spectral::check_nonresonant(&spec, spectral::DEFAULT_RESONANCE_TOL) {
        return Err(Error::Resonant(format!("eigenvalues {:?}", spec.eigenvalues())));
    }
    let n = atilde.dim();
    let mut g = vec![linalg::identity(n)];
    for s in 1..=order {
        let mut rhs = linalg::zeros(n);
        for k in 1..=s {
            rhs -= &a[k] * &g[s - k];
        }
        g.push(spectral::sylvester_solve(&a0, s as f64, &rhs)?);
    }
    Ok(FrobeniusSolution { atilde: atilde.clone(), a0, gauge: g, radius: atilde.max_pole_modulus() })
}

/// Principal-branch x^{M} through the Jordan reduction of M.
pub fn principal_matrix_power(spec: &spectral::SpectralData, x: Complex64) -> Result<ComplexMatrix> {
    if x.im == 0.0 && x.re <= 0.0 {
        return Err(Error::Invalid(format!("{x} lies on the branch cut")));
    }
    let n = spec.dim();
    let lx = x.ln();
    let mut d = ComplexMatrix::zeros(n, n);
    let mut off = 0;
    for &(c, m) in spec.blocks() {
        let base = specfun::principal_pow(x, c);
        let mut term = base;
        for k in 0..m {
            if k > 0 {
                term *= lx / k as f64;
            }
            for i in 0..m - k {
                d[(off + i, off + i + k)] = term;
            }
        }
        off += m;
    }
    Ok(spec.basis() * d * spec.basis_inverse())
}

impl FrobeniusSolution {
    pub fn a0(&self) -> &ComplexMatrix {
        &self.a0
    }

    fn series_radius(&self) -> f64 {
        2.0 * self.radius + 2.0
    }

    fn series(&self, x: Complex64) -> Result<ComplexMatrix> {
        let n = self.a0.nrows();
        let w = 1.0 / x;
        let mut g = linalg::zeros(n);
        for c in self.gauge.iter().rev() {
            g = g * w + c;
        }
        let spec = spectral::decompose(&self.a0, spectral::DEFAULT_CLUSTER_TOL)?;
        Ok(g * principal_matrix_power(&spec, x)?)
    }

    fn rhs(&self, x: Complex64, y: &ComplexMatrix) -> Result<ComplexMatrix> {
        Ok(self.atilde.eval(x)? * y / x)
    }

    fn rk4(&self, from: Complex64, to: Complex64, y0: &ComplexMatrix, steps: usize) -> Result<ComplexMatrix> {
        let dx = (to - from) / steps as f64;
        let mut y = y0.clone();
        let mut x = from;
        for _ in 0..steps {
            let k1 = self.rhs(x, &y)?;
            let k2 = self.rhs(x + dx / 2.0, &(&y + &k1 * (dx / 2.0)))?;
            let k3 = self.rhs(x + dx / 2.0, &(&y + &k2 * (dx / 2.0)))?;
            let k4 = self.rhs(x + dx, &(&y + &k3 * dx))?;
            y += (k1 + k2 * Complex64::from(2.0) + k3 * Complex64::from(2.0) + k4) * (dx / 6.0);
            x += dx;
        }
        Ok(y)
    }

    /// Value on ℂ minus the leftward cuts from the poles and 0, continued horizontally from the right.
    pub fn evaluate(&self, x: Complex64) -> Result<ComplexMatrix> {
        let big = self.series_radius();
        if x.norm() >= big && x.re >= 0.0 {
            return self.series(x);
        }
        let mut cuts: Vec<Complex64> = self.atilde.poles().iter().map(|p| p.0).collect();
        cuts.push(Complex64::from(0.0));
        for p in cuts {
            if (x.im - p.im).abs() <= 1e-12 * p.norm().max(1.0) && x.re <= p.re {
                return Err(Error::Invalid(format!("{x} lies on the cut from {p}")));
            }
        }
        let start = Complex64::new(big, x.im);
        let y0 = self.series(start)?;
        let length = (start - x).norm();
        let mut steps = (64.0 * length.max(1.0)).ceil() as usize;
        let mut prev = self.rk4(start, x, &y0, steps)?;
        let mut last_diff = f64::INFINITY;
        for _ in 0..12 {
            steps *= 2;
            let next = self.rk4(start, x, &y0, steps)?;
            let scale = linalg::norm(&next).max(1.0);
            let diff = linalg::norm(&(&next - &prev)) / scale;
            prev = next;
            if diff <= 1e-11 || (diff <= 1e-8 && diff > 0.5 * last_diff) {
                return Ok(prev);
            }
            last_diff = diff;
        }
        Err(Error::NonConvergence(format!("horizontal integration to {x}")))
    }
}

/// Loop resolvent of x·Y′ = Ã(x)·Y around the j-th strip pole, expressed in the e⁺ basis.
pub fn ode_monodromy_oracle(
    atilde: &RationalMatrix,
    pole_index: usize,
    base: Complex64,
    radius: f64,
    steps: usize,
) -> Result<ComplexMatrix> {
    let strips = strip_partition(atilde)?;
    let Some(&center) = strips.poles.get(pole_index) else {
        return Err(Error::Invalid(format!("pole index {pole_index} out of range")));
    };
    if ((base - center).norm() - radius).abs() > 1e-9 * radius.max(1.0) {
        return Err(Error::Invalid("base point is not on the loop".into()));
    }
    for &p in &strips.poles {
        if p != center && (p - center).norm() <= radius * 1.05 {
            return Err(Error::Pole(p));
        }
    }
    let n = atilde.dim();
    let theta0 = (base - center).arg();
    let m = |theta: f64| -> Result<ComplexMatrix> {
        let e = Complex64::from_polar(radius, theta);
        let x = center + e;
        Ok(atilde.eval(x)? * (I * e / x))
    };
    let resolvent = |count: usize| -> Result<ComplexMatrix> {
        let dt = 2.0 * std::f64::consts::PI / count as f64;
        let mut y = linalg::identity(n);
        for k in 0..count {
            let step = linalg::identity(n) + m(theta0 + k as f64 * dt)? * Complex64::from(dt);
            y = step * y;
        }
        Ok(y)
    };
    let mut table: Vec<Vec<ComplexMatrix>> = Vec::new();
    let mut count = steps.max(8);
    for level in 0..16 {
        let mut row = vec![resolvent(count)?];
        for k in 1..=level {
            let f = Complex64::from(2f64.powi(k as i32) - 1.0);
            let r = &row[k - 1] + (&row[k - 1] - &table[level - 1][k - 1]) / f;
            row.push(r);
        }
        if level > 0 {
            let diff = linalg::norm(&(&row[level] - &table[level - 1][level - 1]));
            if diff < 1e-8 * linalg::norm(&row[level]).max(1.0) {
                let c = row[level].clone();
                let e = frobenius_solution(atilde, 80)?.evaluate(base)?;
                let inv = linalg::inverse(&e)?;
                return Ok(inv * c * e);
            }
        }
        table.push(row);
        count *= 2;
    }
    Err(Error::NonConvergence("loop resolvent did not stabilise".into()))
}
