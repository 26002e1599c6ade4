//! Clustered Jordan reduction of constant matrices and Sylvester-type solves.

use std::cmp::Ordering;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix, ONE, ZERO};

pub const DEFAULT_CLUSTER_TOL: f64 = 1e-8;
pub const DEFAULT_RESONANCE_TOL: f64 = 1e-8;

/// A₀ = P·J·P⁻¹ with J assembled from `(eigenvalue, size)` Jordan blocks.
#[derive(Clone, Debug)]
pub struct SpectralData {
    p: ComplexMatrix,
    p_inv: ComplexMatrix,
    blocks: Vec<(Complex64, usize)>,
    tol: f64,
    cond: f64,
}

impl SpectralData {
    /// Wraps explicit Jordan data; blocks must fill the dimension of `p`.
    pub fn new(p: ComplexMatrix, blocks: Vec<(Complex64, usize)>, tol: f64) -> Result<Self> {
        let n = p.nrows();
        if p.ncols() != n || n == 0 {
            return Err(Error::Dimension(format!("basis is {}x{}", p.nrows(), p.ncols())));
        }
        let total: usize = blocks.iter().map(|b| b.1).sum();
        if total != n || blocks.iter().any(|b| b.1 == 0) {
            return Err(Error::Dimension(format!("block sizes sum to {total}, expected {n}")));
        }
        let cond = linalg::condition(&p);
        let p_inv = linalg::inverse(&p)?;
        Ok(SpectralData { p, p_inv, blocks, tol, cond })
    }

    pub fn dim(&self) -> usize {
        self.p.nrows()
    }

    pub fn basis(&self) -> &ComplexMatrix {
        &self.p
    }

    pub fn basis_inverse(&self) -> &ComplexMatrix {
        &self.p_inv
    }

    pub fn blocks(&self) -> &[(Complex64, usize)] {
        &self.blocks
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn condition(&self) -> f64 {
        self.cond
    }

    /// Eigenvalues repeated by algebraic multiplicity.
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        self.blocks
            .iter()
            .flat_map(|&(c, m)| std::iter::repeat_n(c, m))
            .collect()
    }

    pub fn jordan_matrix(&self) -> ComplexMatrix {
        let n = self.dim();
        let mut j = ComplexMatrix::zeros(n, n);
        let mut off = 0;
        for &(c, m) in &self.blocks {
            for i in 0..m {
                j[(off + i, off + i)] = c;
                if i + 1 < m {
                    j[(off + i, off + i + 1)] = ONE;
                }
            }
            off += m;
        }
        j
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        &self.p * self.jordan_matrix() * &self.p_inv
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.1).collect()
    }
}

fn order_key(a: &(Complex64, usize), b: &(Complex64, usize), tol: f64) -> Ordering {
    if (a.0.re - b.0.re).abs() > tol {
        return a.0.re.partial_cmp(&b.0.re).unwrap_or(Ordering::Equal);
    }
    if (a.0.im - b.0.im).abs() > tol {
        return a.0.im.partial_cmp(&b.0.im).unwrap_or(Ordering::Equal);
    }
    a.1.cmp(&b.1)
}

// Right singular vectors for the `k` smallest singular values, as orthonormal columns.
fn smallest_right_vectors(m: &ComplexMatrix, k: usize) -> ComplexMatrix {
    let svd = m.clone().svd(false, true);
    let vt = svd.v_t.expect("requested V");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&a, &b| svd.singular_values[a].partial_cmp(&svd.singular_values[b]).unwrap());
    let n = m.ncols();
    let mut out = ComplexMatrix::zeros(n, k);
    for (col, &i) in idx.iter().take(k).enumerate() {
        for r in 0..n {
            out[(r, col)] = vt[(i, r)].conj();
        }
    }
    out
}

fn numerical_rank(m: &ComplexMatrix, thr: f64) -> usize {
    linalg::singular_values(m).into_iter().filter(|&s| s > thr).count()
}

// Orthonormal basis of the column span, dropping directions below thr.
fn orth(cols: &ComplexMatrix, thr: f64) -> ComplexMatrix {
    if cols.ncols() == 0 {
        return cols.clone();
    }
    let svd = cols.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > thr)
        .collect();
    ComplexMatrix::from_fn(cols.nrows(), keep.len(), |r, c| u[(r, keep[c])])
}

fn hstack(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

/// Jordan chains of a nilpotent matrix; each chain is [N^{k−1}v, …, v].
fn nilpotent_chains(nil: &ComplexMatrix, thr: f64) -> Vec<Vec<nalgebra::DVector<Complex64>>> {
    let m = nil.nrows();
    let mut powers = vec![linalg::identity(m)];
    for k in 1..=m {
        powers.push(&powers[k - 1] * nil);
    }
    let nullity: Vec<usize> = powers.iter().map(|p| m - numerical_rank(p, thr)).collect();
    let top = (1..=m).find(|&k| nullity[k] == m).unwrap_or(m);
    let at_least = |k: usize| nullity[k] - nullity[k - 1];
    let mut chains: Vec<Vec<nalgebra::DVector<Complex64>>> = Vec::new();
    for k in (1..=top).rev() {
        let exactly = at_least(k) - if k < top { at_least(k + 1) } else { 0 };
        if exactly == 0 {
            continue;
        }
        let kernel_k = smallest_right_vectors(&powers[k], nullity[k]);
        let mut span = smallest_right_vectors(&powers[k - 1], nullity[k - 1]);
        for ch in &chains {
            let len = ch.len();
            for v in ch.iter().take(k.min(len)) {
                span = hstack(&span, &ComplexMatrix::from_column_slice(m, 1, v.as_slice()));
            }
        }
        let span = orth(&span, 1e-10);
        let proj = &kernel_k - &span * (span.adjoint() * &kernel_k);
        let svd = proj.clone().svd(true, false);
        let u = svd.u.expect("requested U");
        let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
        idx.sort_by(|&a, &b| svd.singular_values[b].partial_cmp(&svd.singular_values[a]).unwrap());
        for &i in idx.iter().take(exactly) {
            let v = u.column(i).into_owned();
            let mut chain = Vec::with_capacity(k);
            for j in (0..k).rev() {
                chain.push(&powers[j] * &v);
            }
            chains.push(chain);
        }
    }
    chains
}

/// Clustered Jordan reduction of `a0`.
pub fn decompose(a0: &ComplexMatrix, tol: f64) -> Result<SpectralData> {
    let n = a0.nrows();
    if n == 0 || a0.ncols() != n {
        return Err(Error::Dimension(format!("{}x{} is not a nonempty square matrix", a0.nrows(), a0.ncols())));
    }
    if !linalg::is_finite(a0) {
        return Err(Error::Invalid("matrix has non-finite entries".into()));
    }
    let (_, t) = linalg::schur(a0);
    let mut clusters: Vec<(Complex64, usize)> = Vec::new();
    for i in 0..n {
        let z = t[(i, i)];
        match clusters.iter_mut().find(|(c, _)| (*c - z).norm() <= tol) {
            Some((c, m)) => {
                *c = (*c * *m as f64 + z) / (*m as f64 + 1.0);
                *m += 1;
            }
            None => clusters.push((z, 1)),
        }
    }
    let scale = linalg::norm(a0).max(1.0);
    let thr = tol.sqrt() * scale;
    let mut blocks: Vec<(Complex64, usize, Vec<nalgebra::DVector<Complex64>>)> = Vec::new();
    for &(c, m) in &clusters {
        let shifted = a0 - linalg::identity(n) * c;
        let mut pow = linalg::identity(n);
        for _ in 0..m {
            pow = &pow * &shifted;
        }
        let q = smallest_right_vectors(&pow, m);
        let nil = q.adjoint() * &shifted * &q;
        for chain in nilpotent_chains(&nil, thr) {
            let lifted: Vec<_> = chain.iter().map(|v| &q * v).collect();
            let lead = &lifted[0];
            let nrm = lead.norm();
            let big = lead.iter().copied().fold(ZERO, |a, z| if z.norm() > a.norm() { z } else { a });
            let phase = if big.norm() > 0.0 { big.conj() / big.norm() } else { ONE };
            let s = phase / nrm;
            blocks.push((c, chain.len(), lifted.iter().map(|v| v * s).collect()));
        }
    }
    blocks.sort_by(|a, b| order_key(&(a.0, a.1), &(b.0, b.1), tol));
    let mut p = ComplexMatrix::zeros(n, n);
    let mut col = 0;
    for (_, _, vecs) in &blocks {
        for v in vecs {
            p.set_column(col, v);
            col += 1;
        }
    }
    let cond = linalg::condition(&p);
    if !(cond <= 1.0 / tol) {
        return Err(Error::IllConditioned(cond));
    }
    SpectralData::new(p, blocks.into_iter().map(|(c, m, _)| (c, m)).collect(), tol)
}

/// Distance from z to the nearest nonzero integer.
fn distance_to_nonzero_integer(z: Complex64) -> f64 {
    let r = z.re.round();
    let candidates = if r == 0.0 { [1.0, -1.0] } else { [r, r] };
    candidates
        .iter()
        .map(|&k| (z - Complex64::from(k)).norm())
        .fold(f64::INFINITY, f64::min)
}

/// True iff no two eigenvalues differ by a nonzero integer (within tol).
pub fn check_nonresonant(spec: &SpectralData, tol: f64) -> bool {
    let ev: Vec<Complex64> = spec.blocks().iter().map(|b| b.0).collect();
    ev.iter()
        .all(|&a| ev.iter().all(|&b| distance_to_nonzero_integer(a - b) > tol))
}

/// Solves (A₀ + sI)U − U·A₀ = R by Bartels–Stewart on the complex Schur form.
pub fn sylvester_solve(a0: &ComplexMatrix, s: f64, r: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = a0.nrows();
    if a0.ncols() != n || r.nrows() != n || r.ncols() != n {
        return Err(Error::Dimension("sylvester operands".into()));
    }
    let (q, t) = linalg::schur(a0);
    let rt = q.adjoint() * r * &q;
    let thr = 1e-12 * (1.0 + s.abs() + linalg::norm(a0));
    let mut v = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        let mut rhs = rt.column(j).into_owned();
        for k in 0..j {
            let tkj = t[(k, j)];
            rhs += v.column(k) * tkj;
        }
        let shift = Complex64::from(s) - t[(j, j)];
        for i in (0..n).rev() {
            let mut acc = rhs[i];
            for k in i + 1..n {
                acc -= t[(i, k)] * v[(k, j)];
            }
            let d = t[(i, i)] + shift;
            if d.norm() < thr {
                return Err(Error::NearSingular(d.norm()));
            }
            v[(i, j)] = acc / d;
        }
    }
    Ok(&q * v * q.adjoint())
}

/// Bounds on ‖K_s⁻¹‖ for K_s(M) = A₀M − MA₀ − sM in the Frobenius-induced norm.
#[derive(Clone, Debug)]
pub struct KBound {
    /// max over computed s of 1/σ_min(K_s).
    pub computed: f64,
    /// Largest s evaluated densely.
    pub s_max: usize,
    /// 1/(s − 2‖A₀‖₂) at s = s_max + 1, valid for all larger s.
    pub tail: f64,
}

impl KBound {
    pub fn bound(&self) -> f64 {
        self.computed.max(self.tail)
    }
}

pub fn k_operator_inverse_norm(a0: &ComplexMatrix, s: usize) -> Result<f64> {
    let op = -linalg::sylvester_operator(&(-a0), s as f64);
    let sv = linalg::singular_values(&op);
    let min = sv.into_iter().fold(f64::INFINITY, f64::min);
    if min < 1e-12 * (1.0 + s as f64) {
        return Err(Error::Resonant(format!("K_s is singular at s = {s}")));
    }
    Ok(1.0 / min)
}

/// max_{s ≤ s_max} ‖K_s⁻¹‖, extended until the analytic tail applies.
pub fn operator_k_bound(a0: &ComplexMatrix, s_max: usize) -> Result<KBound> {
    let two_norm = 2.0 * linalg::spectral_norm(a0);
    let last = s_max.max(two_norm.floor() as usize + 1).max(1);
    let mut computed: f64 = 0.0;
    for s in 1..=last {
        computed = computed.max(k_operator_inverse_norm(a0, s)?);
    }
    let tail = 1.0 / ((last + 1) as f64 - two_norm);
    Ok(KBound { computed, s_max: last, tail })
}

/// Outcome of a Jordan-deployment check.
#[derive(Clone, Debug)]
pub struct DeploymentCheck {
    pub ok: bool,
    pub distances: Vec<f64>,
    pub diagnostic: String,
}

/// Checks that an h-family of reductions converges to `target`; family ordered by decreasing h.
pub fn check_deployment(family: &[(f64, SpectralData)], target: &SpectralData, tol: f64) -> DeploymentCheck {
    let mut distances = Vec::new();
    for (h, spec) in family {
        if spec.dim() != target.dim() || spec.blocks().len() != target.blocks().len() {
            distances.push(f64::INFINITY);
            continue;
        }
        let dp = linalg::max_abs_diff(spec.basis(), target.basis());
        let dj = linalg::max_abs_diff(&spec.jordan_matrix(), &target.jordan_matrix());
        let _ = h;
        distances.push(dp.max(dj));
    }
    let fail = |msg: String, distances: Vec<f64>| DeploymentCheck { ok: false, distances, diagnostic: msg };
    let Some((h_last, last)) = family.last() else {
        return fail("empty family".into(), distances);
    };
    if last.block_sizes() != target.block_sizes() {
        return fail(
            format!("block structure {:?} at h = {h_last} differs from {:?}", last.block_sizes(), target.block_sizes()),
            distances,
        );
    }
    if let Some(i) = (1..distances.len()).find(|&i| !(distances[i] <= distances[i - 1])) {
        return fail(
            format!("distance grows from {:.3e} to {:.3e} at h = {}", distances[i - 1], distances[i], family[i].0),
            distances,
        );
    }
    let final_d = *distances.last().unwrap();
    if !(final_d <= tol) {
        return fail(format!("final distance {final_d:.3e} exceeds {tol:.1e}"), distances);
    }
    DeploymentCheck { ok: true, distances, diagnostic: "deployed".into() }
}
