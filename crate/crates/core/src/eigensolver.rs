//! Generalized Hermitian eigensolver for Angular Embedding.
//!
//! Solves `W z = μ D z` for the largest `μ`, reported in the Laplacian
//! convention `(D - W) z = λ D z` with `λ = 1 - μ` ascending. Both solvers
//! work on the normalized operator `M = D^{-1/2} W D^{-1/2}` and
//! back-substitute `z = D^{-1/2} v`, so returned eigenvectors are
//! `D`-orthonormal.
//!
//! [`solve`] is a block thick-restart Lanczos iteration with full
//! reorthogonalization and explicit Rayleigh-Ritz projection. The start block
//! holds `D^{1/2} 1` (the constant embedding) plus seeded random vectors.
//! [`dense_oracle`]
//! is an independent cyclic Jacobi solver for small problems.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::sparse::{DegreeVector, SparseHermitianMatrix};
use crate::{Error, Result};

/// Largest problem accepted by [`dense_oracle`].
pub const DENSE_LIMIT: usize = 512;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
/// Element count per parallel work unit in vector kernels.
const CHUNK: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Number of eigenpairs.
    pub m: usize,
    /// Residual tolerance `‖(D - W) z - λ D z‖ / ‖D z‖`.
    pub tol: f64,
    /// Cap on operator applications.
    pub max_iter: usize,
    /// Seed for the starting block.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { m: 16, tol: 1e-8, max_iter: 50_000, seed: 0 }
    }
}

impl SolverConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.m == 0 || self.m >= n {
            return Err(Error::Config(format!("need 1 <= m < n, got m={} n={n}", self.m)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

/// Leading eigenpairs, `λ` ascending.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingResult {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<Complex64>>,
    pub residuals: Vec<f64>,
}

impl EmbeddingResult {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

fn inverse_sqrt_degrees(d: &DegreeVector, n: usize) -> Result<Vec<f64>> {
    if d.len() != n {
        return Err(Error::DomainMismatch(format!("degree vector has {} entries, matrix {n}", d.len())));
    }
    d.as_slice()
        .iter()
        .enumerate()
        .map(|(pixel, &x)| {
            if x > 0.0 && x.is_finite() {
                Ok(1.0 / x.sqrt())
            } else {
                Err(Error::ZeroDegree { pixel })
            }
        })
        .collect()
}

/// `a* b`, summed in four interleaved lanes so the loop vectorizes.
fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let mut re = [0.0f64; 4];
    let mut im = [0.0f64; 4];
    let (ac, bc) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: Complex64 = ac.remainder().iter().zip(bc.remainder()).map(|(x, y)| x.conj() * y).sum();
    for (xs, ys) in ac.zip(bc) {
        for l in 0..4 {
            re[l] += xs[l].re * ys[l].re + xs[l].im * ys[l].im;
            im[l] += xs[l].re * ys[l].im - xs[l].im * ys[l].re;
        }
    }
    Complex64::new((re[0] + re[1]) + (re[2] + re[3]), (im[0] + im[1]) + (im[2] + im[3])) + tail
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn scale(a: &mut [Complex64], s: f64) {
    a.iter_mut().for_each(|x| *x *= s);
}

/// Two passes of classical Gram-Schmidt of `x` against `basis`.
fn orthogonalize(x: &mut [Complex64], basis: &[&[Complex64]]) {
    if basis.is_empty() {
        return;
    }
    for _ in 0..2 {
        let coeffs: Vec<Complex64> = basis.par_iter().map(|v| dot(v, x)).collect();
        x.par_chunks_mut(CHUNK).enumerate().for_each(|(c, xs)| {
            let base = c * CHUNK;
            for (v, &k) in basis.iter().zip(&coeffs) {
                for (i, xi) in xs.iter_mut().enumerate() {
                    *xi -= v[base + i] * k;
                }
            }
        });
    }
}

/// Linear combinations `Σ_j vectors[j] * coeffs[(j, col)]` for each column.
fn combine(vectors: &[Vec<Complex64>], coeffs: &DMatrix<Complex64>, cols: usize) -> Vec<Vec<Complex64>> {
    let n = vectors.first().map_or(0, Vec::len);
    (0..cols)
        .into_par_iter()
        .map(|c| {
            let mut out = vec![ZERO; n];
            for (j, v) in vectors.iter().enumerate() {
                let k = coeffs[(j, c)];
                if k != ZERO {
                    out.iter_mut().zip(v).for_each(|(o, x)| *o += x * k);
                }
            }
            out
        })
        .collect()
}

/// Normalized operator `M = D^{-1/2} W D^{-1/2}`.
struct Normalized<'a> {
    w: &'a SparseHermitianMatrix,
    dinv_sqrt: &'a [f64],
    applications: usize,
}

impl Normalized<'_> {
    fn apply(&mut self, x: &[Complex64]) -> Vec<Complex64> {
        self.applications += 1;
        let scaled: Vec<Complex64> = x.iter().zip(self.dinv_sqrt).map(|(v, s)| v * s).collect();
        let mut y = vec![ZERO; x.len()];
        self.w.mul_vec(&scaled, &mut y);
        y.iter_mut().zip(self.dinv_sqrt).for_each(|(v, s)| *v *= s);
        y
    }
}

/// Working state of the thick-restart iteration.
struct Krylov {
    n: usize,
    real: bool,
    rng: ChaCha8Rng,
    v: Vec<Vec<Complex64>>,
    av: Vec<Vec<Complex64>>,
    /// Projection `V* M V`, maintained for the current basis.
    h: DMatrix<Complex64>,
    /// Orthonormal block to be appended next; orthogonal to `v`.
    frontier: Vec<Vec<Complex64>>,
}

impl Krylov {
    fn random_vector(&mut self) -> Vec<Complex64> {
        let real = self.real;
        (0..self.n)
            .map(|_| {
                let re = self.rng.random::<f64>() - 0.5;
                let im = if real { 0.0 } else { self.rng.random::<f64>() - 0.5 };
                Complex64::new(re, im)
            })
            .collect()
    }

    /// Orthonormalizes `x` against the basis and the accepted frontier.
    /// Returns `None` if `x` is numerically inside that span.
    fn admit(&self, mut x: Vec<Complex64>, accepted: &[Vec<Complex64>]) -> Option<Vec<Complex64>> {
        let before = norm(&x);
        if before == 0.0 {
            return None;
        }
        let refs: Vec<&[Complex64]> = self.v.iter().chain(accepted).map(Vec::as_slice).collect();
        orthogonalize(&mut x, &refs);
        let after = norm(&x);
        if after <= 1e-10 * before {
            return None;
        }
        scale(&mut x, 1.0 / after);
        Some(x)
    }

    /// Builds an orthonormal block from `candidates`, topping up with random
    /// vectors to `width` while the space has room.
    fn next_block(&mut self, candidates: Vec<Vec<Complex64>>, width: usize) -> Vec<Vec<Complex64>> {
        let mut block: Vec<Vec<Complex64>> = Vec::with_capacity(width);
        for x in candidates {
            if let Some(y) = self.admit(x, &block) {
                block.push(y);
            }
        }
        let mut attempts = 0;
        while block.len() < width && self.v.len() + block.len() < self.n && attempts < 8 * width {
            attempts += 1;
            let x = self.random_vector();
            if let Some(y) = self.admit(x, &block) {
                block.push(y);
            }
        }
        block
    }

    fn push(&mut self, x: Vec<Complex64>, ax: Vec<Complex64>) {
        let j = self.v.len();
        let column: Vec<Complex64> = self.v.par_iter().map(|vi| dot(vi, &ax)).collect();
        for (i, c) in column.into_iter().enumerate() {
            self.h[(i, j)] = c;
            self.h[(j, i)] = c.conj();
        }
        self.h[(j, j)] = Complex64::new(dot(&x, &ax).re, 0.0);
        self.v.push(x);
        self.av.push(ax);
    }

    /// Recomputes `M V` and the projection from scratch.
    fn refresh(&mut self, op: &mut Normalized) {
        let v = std::mem::take(&mut self.v);
        self.av.clear();
        for x in v {
            let ax = op.apply(&x);
            self.push(x, ax);
        }
    }
}

struct RitzPairs {
    values: Vec<f64>,
    vectors: DMatrix<Complex64>,
}

fn rayleigh_ritz(h: &DMatrix<Complex64>, k: usize) -> RitzPairs {
    let sub = h.view((0, 0), (k, k)).into_owned();
    let eig = SymmetricEigen::new(sub);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(k, k, |r, c| eig.eigenvectors[(r, order[c])]);
    RitzPairs { values, vectors }
}

/// Generalized residual `‖D^{1/2}(M y - θ y)‖ / ‖D^{1/2} y‖`.
fn normalized_residual(y: &[Complex64], ay: &[Complex64], theta: f64, dinv_sqrt: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for ((a, x), s) in ay.iter().zip(y).zip(dinv_sqrt) {
        let d = 1.0 / (s * s);
        num += (a - x * theta).norm_sqr() * d;
        den += x.norm_sqr() * d;
    }
    (num / den).sqrt()
}

/// Rotates `z` so its largest-magnitude component is real and positive.
pub fn fix_gauge(z: &mut [Complex64]) {
    let mut best = 0;
    for (i, v) in z.iter().enumerate() {
        if v.norm_sqr() > z[best].norm_sqr() {
            best = i;
        }
    }
    let pivot = z[best];
    if pivot.norm() == 0.0 {
        return;
    }
    let phase = pivot.conj() / pivot.norm();
    z.iter_mut().for_each(|v| *v *= phase);
}

/// `‖(D - W) z - λ D z‖ / ‖D z‖`.
pub fn generalized_residual(w: &SparseHermitianMatrix, d: &DegreeVector, z: &[Complex64], lambda: f64) -> f64 {
    let mut wz = vec![ZERO; z.len()];
    w.mul_vec(z, &mut wz);
    let mut num = 0.0;
    let mut den = 0.0;
    for ((zi, wzi), &di) in z.iter().zip(&wz).zip(d.as_slice()) {
        num += (zi * di - wzi - zi * (lambda * di)).norm_sqr();
        den += (zi * di).norm_sqr();
    }
    (num / den).sqrt()
}

/// Leading `cfg.m` eigenpairs of `(D - W) z = λ D z`, smallest `λ` first.
pub fn solve(w: &SparseHermitianMatrix, d: &DegreeVector, cfg: &SolverConfig) -> Result<EmbeddingResult> {
    let n = w.dim();
    cfg.validate(n)?;
    let dinv_sqrt = inverse_sqrt_degrees(d, n)?;
    let m = cfg.m;
    let block = m.min(4);
    let k_max = n.min((2 * m + 14).max(3 * m));
    let keep = m.max((m + (k_max - m) / 2).min(k_max.saturating_sub(2 * block)));

    let mut op = Normalized { w, dinv_sqrt: &dinv_sqrt, applications: 0 };
    let mut kr = Krylov {
        n,
        real: w.is_real(),
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        v: Vec::with_capacity(k_max),
        av: Vec::with_capacity(k_max),
        h: DMatrix::zeros(k_max, k_max),
        frontier: Vec::new(),
    };
    let smooth: Vec<Complex64> = dinv_sqrt.iter().map(|s| Complex64::new(1.0 / s, 0.0)).collect();
    kr.frontier = kr.next_block(vec![smooth], block);

    let mut best = vec![f64::INFINITY; m];
    loop {
        // expand
        while !kr.frontier.is_empty() && kr.v.len() + kr.frontier.len() <= k_max {
            let front = std::mem::take(&mut kr.frontier);
            let mut images = Vec::with_capacity(front.len());
            for x in front {
                let ax = op.apply(&x);
                images.push(ax.clone());
                kr.push(x, ax);
            }
            kr.frontier = kr.next_block(images, block);
        }

        let k = kr.v.len();
        let ritz = rayleigh_ritz(&kr.h, k);
        let y = combine(&kr.v, &ritz.vectors, m);
        let ay = combine(&kr.av, &ritz.vectors, m);
        let estimates: Vec<f64> = (0..m)
            .map(|i| normalized_residual(&y[i], &ay[i], ritz.values[i], &dinv_sqrt))
            .collect();
        let exhausted = k == n;

        if exhausted || estimates.iter().all(|&r| r <= cfg.tol) {
            let result = finalize(w, d, &dinv_sqrt, &ritz.values[..m], y);
            if exhausted || result.residuals.iter().all(|&r| r <= cfg.tol) {
                result.residuals.iter().zip(&mut best).for_each(|(r, b)| *b = b.min(*r));
                if result.residuals.iter().all(|&r| r <= cfg.tol) {
                    return Ok(result);
                }
                return Err(Error::NotConverged { applications: op.applications, residuals: result.residuals });
            }
            result.residuals.iter().zip(&mut best).for_each(|(r, b)| *b = b.min(*r));
            // projected and true residuals disagree: rebuild M V
            kr.refresh(&mut op);
            if op.applications >= cfg.max_iter {
                return Err(Error::NotConverged { applications: op.applications, residuals: best });
            }
            continue;
        }
        estimates.iter().zip(&mut best).for_each(|(r, b)| *b = b.min(*r));
        if op.applications >= cfg.max_iter {
            return Err(Error::NotConverged { applications: op.applications, residuals: best });
        }

        // thick restart on the leading Ritz vectors
        let kept = keep.min(k);
        kr.v = combine(&kr.v, &ritz.vectors, kept);
        kr.av = combine(&kr.av, &ritz.vectors, kept);
        kr.h.fill(ZERO);
        for (i, &theta) in ritz.values[..kept].iter().enumerate() {
            kr.h[(i, i)] = Complex64::new(theta, 0.0);
        }
        if kr.frontier.is_empty() {
            kr.frontier = kr.next_block(Vec::new(), block);
        }
    }
}

fn finalize(
    w: &SparseHermitianMatrix,
    d: &DegreeVector,
    dinv_sqrt: &[f64],
    mu: &[f64],
    vectors: Vec<Vec<Complex64>>,
) -> EmbeddingResult {
    let mut eigenvalues = Vec::with_capacity(mu.len());
    let mut eigenvectors = Vec::with_capacity(mu.len());
    let mut residuals = Vec::with_capacity(mu.len());
    for (&theta, v) in mu.iter().zip(vectors) {
        let mut z: Vec<Complex64> = v.iter().zip(dinv_sqrt).map(|(x, s)| x * s).collect();
        let dn = z
            .iter()
            .zip(d.as_slice())
            .map(|(x, di)| x.norm_sqr() * di)
            .sum::<f64>()
            .sqrt();
        scale(&mut z, 1.0 / dn);
        fix_gauge(&mut z);
        let lambda = 1.0 - theta;
        residuals.push(generalized_residual(w, d, &z, lambda));
        eigenvalues.push(lambda);
        eigenvectors.push(z);
    }
    EmbeddingResult { eigenvalues, eigenvectors, residuals }
}

/// Full spectrum of a small dense Hermitian system by cyclic Jacobi.
///
/// `w` is row-major `n x n`. Eigenpairs are returned in the same convention as
/// [`solve`].
pub fn dense_oracle(w: &[Complex64], d: &DegreeVector) -> Result<EmbeddingResult> {
    let n = d.len();
    if n > DENSE_LIMIT {
        return Err(Error::TooLargeForDense { n, limit: DENSE_LIMIT });
    }
    if w.len() != n * n {
        return Err(Error::DomainMismatch(format!("dense matrix has {} entries, expected {}", w.len(), n * n)));
    }
    let scale_w = w.iter().map(|x| x.norm()).fold(0.0, f64::max);
    for p in 0..n {
        for q in p..n {
            if (w[p * n + q] - w[q * n + p].conj()).norm() > 1e-12 * scale_w.max(1.0) {
                return Err(Error::NotHermitian { row: p, col: q });
            }
        }
    }
    let dinv_sqrt = inverse_sqrt_degrees(d, n)?;
    let mut a: Vec<Complex64> = (0..n * n)
        .map(|i| w[i] * dinv_sqrt[i / n] * dinv_sqrt[i % n])
        .collect();
    let (mu, v) = jacobi_hermitian(&mut a, n);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| mu[y].total_cmp(&mu[x]));
    let mut eigenvalues = Vec::with_capacity(n);
    let mut eigenvectors = Vec::with_capacity(n);
    let mut residuals = Vec::with_capacity(n);
    for &j in &order {
        let mut z: Vec<Complex64> = (0..n).map(|i| v[i * n + j] * dinv_sqrt[i]).collect();
        fix_gauge(&mut z);
        let lambda = 1.0 - mu[j];
        let mut num = 0.0;
        let mut den = 0.0;
        for p in 0..n {
            let dp = d.as_slice()[p];
            let wz: Complex64 = (0..n).map(|q| w[p * n + q] * z[q]).sum();
            num += (z[p] * dp - wz - z[p] * (lambda * dp)).norm_sqr();
            den += (z[p] * dp).norm_sqr();
        }
        residuals.push((num / den).sqrt());
        eigenvalues.push(lambda);
        eigenvectors.push(z);
    }
    Ok(EmbeddingResult { eigenvalues, eigenvectors, residuals })
}

/// Diagonalizes the Hermitian row-major matrix `a` in place. Returns the
/// eigenvalues and the row-major unitary whose columns are the eigenvectors.
fn jacobi_hermitian(a: &mut [Complex64], n: usize) -> (Vec<f64>, Vec<Complex64>) {
    let mut v = vec![ZERO; n * n];
    for i in 0..n {
        v[i * n + i] = Complex64::new(1.0, 0.0);
    }
    let frob: f64 = a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    let threshold = (f64::EPSILON * frob).powi(2) * 1e-2;
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|p| (p + 1..n).map(move |q| (p, q)))
            .map(|(p, q)| a[p * n + q].norm_sqr())
            .sum();
        if off <= threshold {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                let r = apq.norm();
                if r == 0.0 {
                    continue;
                }
                let app = a[p * n + p].re;
                let aqq = a[q * n + q].re;
                if r < 1e-300 || r <= f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()) {
                    a[p * n + q] = ZERO;
                    a[q * n + p] = ZERO;
                    continue;
                }
                let phase = apq / r;
                let tau = (aqq - app) / (2.0 * r);
                let t = if tau == 0.0 {
                    1.0
                } else {
                    tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // J = [[c, s], [-s e^{-iα}, c e^{-iα}]] on (p, q); A <- J* A J
                let jqp = -phase.conj() * s;
                let jqq = phase.conj() * c;
                for k in 0..n {
                    let x = a[k * n + p];
                    let y = a[k * n + q];
                    a[k * n + p] = x * c + y * jqp;
                    a[k * n + q] = x * s + y * jqq;
                    let x = v[k * n + p];
                    let y = v[k * n + q];
                    v[k * n + p] = x * c + y * jqp;
                    v[k * n + q] = x * s + y * jqq;
                }
                for k in 0..n {
                    let x = a[p * n + k];
                    let y = a[q * n + k];
                    a[p * n + k] = x * c + y * jqp.conj();
                    a[q * n + k] = x * s + y * jqq.conj();
                }
                a[p * n + q] = ZERO;
                a[q * n + p] = ZERO;
                a[p * n + p].im = 0.0;
                a[q * n + q].im = 0.0;
            }
        }
    }
    ((0..n).map(|i| a[i * n + i].re).collect(), v)
}

/// Angular Embedding error of `z`: the confidence-weighted squared distance
/// between each `z(p)` and the consensus of its neighbors.
pub fn embedding_error(w: &SparseHermitianMatrix, d: &DegreeVector, z: &[Complex64]) -> f64 {
    let total: f64 = d.as_slice().iter().sum();
    let mut wz = vec![ZERO; z.len()];
    w.mul_vec(z, &mut wz);
    z.iter()
        .zip(&wz)
        .zip(d.as_slice())
        .filter(|(_, &dp)| dp > 0.0)
        .map(|((zp, wzp), &dp)| dp / total * (zp - wzp / dp).norm_sqr())
        .sum()
}
