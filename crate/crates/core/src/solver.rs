//! Krylov eigensolvers, dense Hermitian diagonalisation and Krylov time stepping.
//!
//! Time steps apply `exp(-i 2 pi H dt 1e-3)` with `H` in MHz and `dt` in ns.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{dot, norm};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Phase accumulated per MHz per ns.
pub const RAD_PER_MHZ_NS: f64 = TAU * 1e-3;

pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    /// `y = A x`
    fn apply(&self, x: &[C64], y: &mut [C64]);
}

impl LinearOperator for DMatrix<C64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        for (r, out) in y.iter_mut().enumerate() {
            *out = self.row(r).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigsConfig {
    pub tol: f64,
    /// Budget of operator applications per eigenpair.
    pub max_iterations: usize,
    pub restart_dim: usize,
    pub seed: u64,
}

impl Default for EigsConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iterations: 20_000,
            restart_dim: 30,
            seed: 0x5eed_0001,
        }
    }
}

impl EigsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("eigensolver tol must be > 0, got {}", self.tol)));
        }
        if self.restart_dim < 3 {
            return Err(Error::Config("eigensolver restart_dim must be >= 3".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct GroundState {
    pub energy: f64,
    pub vector: Vec<C64>,
    pub residual: f64,
    pub iterations: usize,
    /// Upper bound on the distance to the next eigenvalue, when one was seen.
    pub gap_estimate: Option<f64>,
    pub near_degenerate: bool,
}

/// Lowest eigenpair of a Hermitian operator.
///
/// `start` seeds the Krylov space (warm start); a small random admixture is
/// always added so that symmetry-orthogonal starts cannot hide the ground state.
pub fn ground_state(
    op: &dyn LinearOperator,
    cfg: &EigsConfig,
    start: Option<&[C64]>,
) -> Result<GroundState> {
    cfg.validate()?;
    let mut gs = lowest_in_complement(op, cfg, start, &[], cfg.seed)?;
    fix_gauge(&mut gs.vector);
    Ok(gs)
}

/// The `k` lowest eigenvalues in ascending order, found by successive deflation.
pub fn lowest_k(op: &dyn LinearOperator, k: usize, cfg: &EigsConfig) -> Result<Vec<f64>> {
    Ok(lowest_k_pairs(op, k, cfg)?.into_iter().map(|p| p.energy).collect())
}

pub fn lowest_k_pairs(
    op: &dyn LinearOperator,
    k: usize,
    cfg: &EigsConfig,
) -> Result<Vec<GroundState>> {
    cfg.validate()?;
    if k == 0 || k > op.dim() {
        return Err(Error::Domain(format!(
            "requested {k} eigenvalues of a {}-dimensional operator",
            op.dim()
        )));
    }
    let mut found: Vec<GroundState> = Vec::with_capacity(k);
    let mut locked: Vec<Vec<C64>> = Vec::with_capacity(k);
    for j in 0..k {
        let seed = cfg.seed.wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(j as u64 + 1));
        let mut pair = lowest_in_complement(op, cfg, None, &locked, seed)?;
        fix_gauge(&mut pair.vector);
        locked.push(pair.vector.clone());
        found.push(pair);
    }
    found.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    Ok(found)
}

/// Makes the largest-magnitude amplitude real and positive. Ties within 1e-8
/// resolve to the lowest index.
pub fn fix_gauge(v: &mut [C64]) {
    let max = v.iter().map(|a| a.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return;
    }
    let pivot = v.iter().position(|a| a.norm() >= max - 1e-8).unwrap();
    let phase = v[pivot].conj() / v[pivot].norm();
    for a in v.iter_mut() {
        *a *= phase;
    }
}

fn random_vector(n: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    (0..n)
        .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

fn axpy(a: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Two passes of classical Gram-Schmidt against `basis` and `locked`.
/// Returns the first-pass coefficients against `basis`.
fn orthogonalize(v: &mut [C64], basis: &[Vec<C64>], locked: &[Vec<C64>]) -> Vec<C64> {
    let mut first = vec![ZERO; basis.len()];
    for pass in 0..2 {
        for q in locked {
            let c = dot(q, v);
            axpy(-c, q, v);
        }
        for (i, q) in basis.iter().enumerate() {
            let c = dot(q, v);
            axpy(-c, q, v);
            if pass == 0 {
                first[i] = c;
            }
        }
    }
    first
}

fn hermitian_eig(t: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let eig = SymmetricEigen::new(t.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(t.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Thick-restart Lanczos for the lowest eigenpair of `op` restricted to the
/// orthogonal complement of `locked`.
///
/// Maintains the Krylov decomposition `A Q = Q T + f b^H`, so the residual of
/// a Ritz pair `(theta, Q y)` is `|f| |b^H y|` without extra products.
fn lowest_in_complement(
    op: &dyn LinearOperator,
    cfg: &EigsConfig,
    start: Option<&[C64]>,
    locked: &[Vec<C64>],
    seed: u64,
) -> Result<GroundState> {
    let n = op.dim();
    let room = n - locked.len();
    if room == 0 {
        return Err(Error::Domain("no eigenvalues left to find".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_basis = cfg.restart_dim.min(room).max(1);
    let keep = (max_basis / 2).max(1).min(max_basis.saturating_sub(1)).max(1);

    let mut f = random_vector(n, &mut rng);
    if let Some(s) = start {
        if s.len() != n {
            return Err(Error::Usage(format!("start vector has length {} for dimension {n}", s.len())));
        }
        let sn = norm(s);
        if sn > 0.0 {
            let fnorm = norm(&f);
            for (fi, si) in f.iter_mut().zip(s) {
                *fi = si / sn + *fi * (1e-4 / fnorm);
            }
        }
    }
    orthogonalize(&mut f, &[], locked);

    let mut q: Vec<Vec<C64>> = Vec::with_capacity(max_basis);
    let mut t = DMatrix::<C64>::zeros(0, 0);
    let mut b: Vec<C64> = Vec::new();
    let mut iterations = 0;
    let mut best = f64::INFINITY;
    let mut w = vec![ZERO; n];

    loop {
        // extend the basis with the normalised residual direction
        let beta = norm(&f);
        let scale = t.iter().map(|x| x.norm()).fold(1.0, f64::max);
        let mut coupling = b.clone();
        if beta <= 1e-13 * scale || !beta.is_finite() {
            // invariant subspace: continue with a fresh direction
            f = random_vector(n, &mut rng);
            orthogonalize(&mut f, &q, locked);
            coupling = vec![ZERO; q.len()];
            if norm(&f) <= 1e-13 {
                return Err(Error::Numerical("Krylov space exhausted".into()));
            }
        }
        let beta = norm(&f);
        let qk: Vec<C64> = f.iter().map(|x| x / beta).collect();
        let k = q.len();
        op.apply(&qk, &mut w);
        iterations += 1;
        let alpha = dot(&qk, &w).re;
        let mut t_new = DMatrix::<C64>::zeros(k + 1, k + 1);
        t_new.view_mut((0, 0), (k, k)).copy_from(&t);
        for i in 0..k {
            let c = coupling[i] * beta;
            t_new[(i, k)] = c;
            t_new[(k, i)] = c.conj();
        }
        t_new[(k, k)] = C64::new(alpha, 0.0);
        t = t_new;
        q.push(qk);
        f.copy_from_slice(&w);
        orthogonalize(&mut f, &q, locked);
        b = vec![ZERO; k + 1];
        b[k] = C64::new(1.0, 0.0);

        let (theta, y) = hermitian_eig(&t);
        let fnorm = norm(&f);
        let res = fnorm * y.column(0).iter().zip(&b).map(|(yi, bi)| bi.conj() * yi).sum::<C64>().norm();
        best = best.min(res);

        let exhausted = q.len() == room;
        if res <= cfg.tol || exhausted {
            let x = ritz_vector(&q, &y, 0);
            // confirm against an explicit product
            op.apply(&x, &mut w);
            iterations += 1;
            let mut r = w.clone();
            axpy(C64::new(-theta[0], 0.0), &x, &mut r);
            for l in locked {
                let c = dot(l, &r);
                axpy(-c, l, &mut r);
            }
            let true_res = norm(&r);
            if true_res <= cfg.tol || (exhausted && true_res <= cfg.tol.max(1e-9 * scale)) {
                let gap_estimate = theta.get(1).map(|t1| t1 - theta[0]);
                let near_degenerate = gap_estimate.is_some_and(|g| g < 10.0 * cfg.tol);
                return Ok(GroundState {
                    energy: theta[0],
                    vector: x,
                    residual: true_res,
                    iterations,
                    gap_estimate,
                    near_degenerate,
                });
            }
            // the cheap estimate drifted; restart explicitly from the Ritz vector
            best = best.max(true_res);
            f = x;
            q.clear();
            b.clear();
            t = DMatrix::zeros(0, 0);
            continue;
        }
        if iterations >= cfg.max_iterations {
            return Err(Error::NoConvergence {
                iterations,
                residual: best,
            });
        }
        if q.len() == max_basis {
            let p = keep.min(q.len());
            let mut kept = Vec::with_capacity(p);
            for j in 0..p {
                kept.push(ritz_vector(&q, &y, j));
            }
            let mut nb = vec![ZERO; p];
            for (j, slot) in nb.iter_mut().enumerate() {
                // b' = Y_p^H b
                *slot = y.column(j).iter().zip(&b).map(|(yi, bi)| yi.conj() * bi).sum();
            }
            q = kept;
            b = nb;
            t = DMatrix::from_fn(p, p, |r, c| {
                if r == c {
                    C64::new(theta[r], 0.0)
                } else {
                    ZERO
                }
            });
            // f is still the residual direction; it couples to the kept
            // vectors through b
        }
    }
}

fn ritz_vector(q: &[Vec<C64>], y: &DMatrix<C64>, j: usize) -> Vec<C64> {
    let n = q[0].len();
    let mut x = vec![ZERO; n];
    for (i, qi) in q.iter().enumerate() {
        axpy(y[(i, j)], qi, &mut x);
    }
    let nx = norm(&x);
    for a in &mut x {
        *a /= nx;
    }
    x
}

#[derive(Clone, Debug)]
pub struct DenseEigen {
    pub values: Vec<f64>,
    /// Eigenvectors as columns, in the order of `values`.
    pub vectors: Option<DMatrix<C64>>,
}

/// Full spectrum of a Hermitian matrix, ascending.
pub fn dense_hermitian_eigs(m: &DMatrix<C64>, with_vectors: bool) -> Result<DenseEigen> {
    if m.nrows() != m.ncols() {
        return Err(Error::Domain(format!("matrix is {}x{}, not square", m.nrows(), m.ncols())));
    }
    let n = m.nrows();
    for r in 0..n {
        for c in r..n {
            let d = (m[(r, c)] - m[(c, r)].conj()).norm();
            if d > 1e-10 {
                return Err(Error::Domain(format!(
                    "matrix is not Hermitian: |M[{r},{c}] - conj(M[{c},{r}])| = {d:.3e}"
                )));
            }
        }
    }
    let h = DMatrix::from_fn(n, n, |r, c| (m[(r, c)] + m[(c, r)].conj()) * 0.5);
    let (values, vectors) = hermitian_eig(&h);
    Ok(DenseEigen {
        values,
        vectors: with_vectors.then_some(vectors),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagatorConfig {
    pub dt_ns: f64,
    pub krylov_dim: usize,
    pub tol: f64,
}

impl Default for PropagatorConfig {
    fn default() -> Self {
        Self {
            dt_ns: 0.5,
            krylov_dim: 20,
            tol: 1e-10,
        }
    }
}

impl PropagatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_ns > 0.0) || !self.dt_ns.is_finite() {
            return Err(Error::Config(format!("dt_ns must be > 0, got {}", self.dt_ns)));
        }
        if self.krylov_dim < 2 {
            return Err(Error::Config(format!("krylov_dim must be >= 2, got {}", self.krylov_dim)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("propagator tol must be > 0, got {}", self.tol)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepReport {
    /// `| |psi'| - 1 |` before renormalisation.
    pub norm_drift: f64,
    pub substeps: usize,
    /// Smallest internal step actually used, ns.
    pub min_dt_ns: f64,
}

/// Applies `exp(-i 2 pi H tau 1e-3)` to `psi` in place and renormalises.
pub fn propagate(
    psi: &mut [C64],
    op: &dyn LinearOperator,
    tau_ns: f64,
    cfg: &PropagatorConfig,
) -> Result<StepReport> {
    let mut report = StepReport {
        norm_drift: 0.0,
        substeps: 0,
        min_dt_ns: tau_ns,
    };
    if tau_ns == 0.0 {
        return Ok(report);
    }
    let n0 = norm(psi);
    let mut remaining = tau_ns;
    let mut h = tau_ns;
    let mut ws = KrylovWorkspace::new(op.dim(), cfg.krylov_dim);
    while remaining > 0.0 {
        let step = h.min(remaining);
        match ws.try_step(psi, op, step, cfg)? {
            true => {
                remaining -= step;
                if remaining < 1e-12 * tau_ns {
                    remaining = 0.0;
                }
                report.substeps += 1;
                report.min_dt_ns = report.min_dt_ns.min(step);
            }
            false => {
                h = step / 2.0;
                if h < tau_ns * 1e-6 {
                    return Err(Error::Numerical(format!(
                        "Krylov step could not reach tolerance {:.1e} even at dt = {h:.3e} ns",
                        cfg.tol
                    )));
                }
            }
        }
    }
    let n1 = norm(psi);
    report.norm_drift = (n1 - n0).abs();
    for a in psi.iter_mut() {
        *a /= n1;
    }
    Ok(report)
}

struct KrylovWorkspace {
    basis: Vec<Vec<C64>>,
    w: Vec<C64>,
}

impl KrylovWorkspace {
    fn new(n: usize, m: usize) -> Self {
        Self {
            basis: (0..=m).map(|_| vec![ZERO; n]).collect(),
            w: vec![ZERO; n],
        }
    }

    /// One Lanczos-exponential step; `false` when the error bound is not met
    /// within the Krylov dimension.
    fn try_step(
        &mut self,
        psi: &mut [C64],
        op: &dyn LinearOperator,
        tau_ns: f64,
        cfg: &PropagatorConfig,
    ) -> Result<bool> {
        let m_max = cfg.krylov_dim;
        let a = RAD_PER_MHZ_NS * tau_ns;
        let beta0 = norm(psi);
        if beta0 == 0.0 {
            return Ok(true);
        }
        for (v, p) in self.basis[0].iter_mut().zip(psi.iter()) {
            *v = p / beta0;
        }
        let mut alpha = Vec::with_capacity(m_max);
        let mut beta = Vec::with_capacity(m_max);
        let mut coeffs: Option<DVector<C64>> = None;
        for j in 0..m_max {
            op.apply(&self.basis[j], &mut self.w);
            let aj = dot(&self.basis[j], &self.w).re;
            alpha.push(aj);
            // full reorthogonalisation keeps the update unitary to round-off
            for _ in 0..2 {
                for i in 0..=j {
                    let c = dot(&self.basis[i], &self.w);
                    axpy(-c, &self.basis[i], &mut self.w);
                }
            }
            let bj = norm(&self.w);
            let scale = alpha.iter().map(|x| x.abs()).fold(1.0, f64::max);
            let happy = bj <= 1e-12 * scale;
            let c = small_exponential(&alpha, &beta, a);
            let err = if happy { 0.0 } else { bj * c[j].norm() };
            if err <= cfg.tol || happy {
                coeffs = Some(c);
                break;
            }
            if j + 1 == m_max {
                return Ok(false);
            }
            beta.push(bj);
            for (v, x) in self.basis[j + 1].iter_mut().zip(&self.w) {
                *v = x / bj;
            }
        }
        let c = coeffs.ok_or_else(|| Error::Numerical("Krylov step failed".into()))?;
        for p in psi.iter_mut() {
            *p = ZERO;
        }
        for (i, ci) in c.iter().enumerate() {
            axpy(ci * beta0, &self.basis[i], psi);
        }
        Ok(true)
    }
}

/// `exp(-i a T) e_1` for the real symmetric tridiagonal `T(alpha, beta)`.
fn small_exponential(alpha: &[f64], beta: &[f64], a: f64) -> DVector<C64> {
    let m = alpha.len();
    let t = DMatrix::from_fn(m, m, |r, c| {
        if r == c {
            alpha[r]
        } else if r + 1 == c {
            beta[r]
        } else if c + 1 == r {
            beta[c]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(t);
    DVector::from_fn(m, |r, _| {
        (0..m)
            .map(|k| {
                let v = eig.eigenvectors[(r, k)] * eig.eigenvectors[(0, k)];
                C64::from_polar(v, -a * eig.eigenvalues[k])
            })
            .sum()
    })
}
