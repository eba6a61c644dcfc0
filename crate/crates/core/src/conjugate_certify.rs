//! Complex conjugate phase retrieval for the complex range space of a real
//! matrix `A` (rows `a_i`, full column rank).
//!
//! The space fails to be conjugate phase retrievable exactly when some real
//! `X` of rank at most 2 with `X != -X^T` satisfies `a_i^T X a_i = 0` for all
//! rows. The condition only sees `S = sym(X)`, and a symmetric `S` is the
//! symmetric part of a rank-≤2 matrix iff it has at most two positive and at
//! most two negative eigenvalues. The search therefore runs over the
//! symmetric nullspace `{S : a_i^T S a_i = 0}`:
//!
//! * nullspace `{0}`: retrievable;
//! * one-dimensional nullspace: decided by the inertia of its generator;
//! * `n <= 3`: any singular nonzero `S` qualifies, and a singular element
//!   exists in every nullspace of dimension ≥ 2 (generalized eigenvalues of a
//!   pair), so the verdict is exact;
//! * `n >= 4`: seeded random sampling of the nullspace, `Inconclusive` when
//!   the budget is exhausted.
//!
//! Proof of the inertia characterization. If `X = u v^T + w z^T` then
//! `sym(X) = (u v^T + v u^T)/2 + (w z^T + z w^T)/2` and each summand is
//! `(p p^T - q q^T)/2` with `p, q = (u ± v)/√2`, so `sym(X)` is a sum of two
//! positive and two negative rank-one terms. Conversely
//! `λ w w^T - μ z z^T = sym(u v^T)` with `u = √λ w + √μ z`,
//! `v = √λ w - √μ z`, and a lone `±λ w w^T` is `sym(±√λ w · √λ w^T)`.

use nalgebra::{Complex, DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::json;
use crate::linalg;
use crate::rng::Rng64;

pub type Complex64 = Complex<f64>;

/// Eigenvalues below this fraction of the spectral radius count as zero when
/// reading off an inertia.
pub const ZERO_EIGEN_REL: f64 = 1e-9;

/// Largest row count accepted by [`complement_property`].
pub const MAX_COMPLEMENT_ROWS: usize = 24;

const SAMPLE_BATCH: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertifyError {
    #[error("measurement matrix is empty ({rows}x{cols})")]
    Empty { rows: usize, cols: usize },
    #[error("measurement matrix contains a non-finite entry")]
    NonFinite,
    #[error("measurement matrix has rank {rank}, needs full column rank {cols}")]
    RankDeficient { rank: usize, cols: usize },
    #[error("vector has length {found}, matrix has {expected} columns")]
    LengthMismatch { expected: usize, found: usize },
    #[error("complement property enumeration supports at most {max} rows, got {rows}")]
    TooManyRows { rows: usize, max: usize },
}

/// Real `m x n` measurement matrix of full column rank.
#[derive(Clone, Debug, PartialEq)]
pub struct RealMeasurementMatrix {
    a: DMatrix<f64>,
}

impl RealMeasurementMatrix {
    /// Rank is tested with threshold `1e-10 * sigma_max`.
    pub fn new(a: DMatrix<f64>) -> Result<Self, CertifyError> {
        if a.nrows() == 0 || a.ncols() == 0 {
            return Err(CertifyError::Empty {
                rows: a.nrows(),
                cols: a.ncols(),
            });
        }
        if a.iter().any(|x| !x.is_finite()) {
            return Err(CertifyError::NonFinite);
        }
        let rank = linalg::rank(&a, 1e-10);
        if rank < a.ncols() {
            return Err(CertifyError::RankDeficient { rank, cols: a.ncols() });
        }
        Ok(Self { a })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, CertifyError> {
        let m = json::matrix_from_rows(rows).ok_or(CertifyError::Empty {
            rows: rows.len(),
            cols: 0,
        })?;
        Self::new(m)
    }

    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn cols(&self) -> usize {
        self.a.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn row(&self, i: usize) -> DVector<f64> {
        self.a.row(i).transpose()
    }

    fn unit_rows(&self) -> Vec<DVector<f64>> {
        (0..self.rows())
            .map(|i| {
                let r = self.row(i);
                let n = r.norm();
                if n > 0.0 {
                    r / n
                } else {
                    r
                }
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Status {
    ConjugatePR,
    NotConjugatePR,
    Inconclusive,
}

/// `x_f = x1 + x2` with a nontrivial trace-orthogonal `X`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Decomposition {
    #[serde(serialize_with = "json::complex_pairs")]
    pub x1: Vec<Complex64>,
    #[serde(serialize_with = "json::complex_pairs")]
    pub x2: Vec<Complex64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub status: Status,
    /// `true` when the verdict does not rest on an unsuccessful search.
    pub exact: bool,
    pub nullspace_dim: usize,
    /// Rank-≤2 matrix with `a_i^T X a_i = 0` and nonzero symmetric part.
    #[serde(serialize_with = "json::option_matrix_rows")]
    pub witness: Option<DMatrix<f64>>,
    #[serde(serialize_with = "json::option_matrix_rows")]
    pub symmetric_part: Option<DMatrix<f64>>,
    pub decomposition: Option<Decomposition>,
    /// Largest `|a_i^T X a_i| / |a_i|^2` of the witness.
    pub max_trace_residual: Option<f64>,
    /// Random samples (range space) or restarts (vector) spent.
    pub samples: usize,
}

impl Verdict {
    fn retrievable(nullspace_dim: usize, exact: bool) -> Self {
        Self {
            status: if exact { Status::ConjugatePR } else { Status::Inconclusive },
            exact,
            nullspace_dim,
            witness: None,
            symmetric_part: None,
            decomposition: None,
            max_trace_residual: None,
            samples: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CertifyOptions {
    /// Relative singular-value threshold for the nullspace, and the bound on
    /// the normalized trace residuals of a witness.
    pub tol: f64,
    pub budget: usize,
    pub seed: u64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            budget: 100_000,
            seed: 0,
        }
    }
}

fn sym_index_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            out.push((i, j));
        }
    }
    out
}

/// Coordinates w.r.t. `E_ii` and `(E_ij + E_ji)/√2`, an isometry onto the
/// symmetric matrices with the Frobenius inner product.
fn sym_from_coords(n: usize, coords: &[f64]) -> DMatrix<f64> {
    let mut s = DMatrix::zeros(n, n);
    for (&(i, j), &c) in sym_index_pairs(n).iter().zip(coords) {
        if i == j {
            s[(i, i)] = c;
        } else {
            s[(i, j)] = c / std::f64::consts::SQRT_2;
            s[(j, i)] = c / std::f64::consts::SQRT_2;
        }
    }
    s
}

/// Frobenius-orthonormal basis of `{S symmetric : a_i^T S a_i = 0 for all i}`.
/// Rows are normalized first; `tol` is the relative singular-value threshold.
pub fn quadratic_nullspace(a: &RealMeasurementMatrix, tol: f64) -> Vec<DMatrix<f64>> {
    let n = a.cols();
    let pairs = sym_index_pairs(n);
    let rows = a.unit_rows();
    let l = DMatrix::from_fn(rows.len(), pairs.len(), |k, p| {
        let (i, j) = pairs[p];
        if i == j {
            rows[k][i] * rows[k][i]
        } else {
            std::f64::consts::SQRT_2 * rows[k][i] * rows[k][j]
        }
    });
    let basis = linalg::null_space(&l, tol);
    (0..basis.ncols())
        .map(|c| {
            let coords: Vec<f64> = basis.column(c).iter().copied().collect();
            sym_from_coords(n, &coords)
        })
        .collect()
}

/// `(positive, negative)` eigenvalue counts, ignoring eigenvalues below
/// `rel * max |eigenvalue|`.
pub fn inertia(s: &DMatrix<f64>, rel: f64) -> (usize, usize) {
    let (vals, _) = linalg::sorted_symmetric_eigen(s);
    let radius = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if radius == 0.0 {
        return (0, 0);
    }
    let cut = rel * radius;
    (
        vals.iter().filter(|&&v| v > cut).count(),
        vals.iter().filter(|&&v| v < -cut).count(),
    )
}

/// Nonzero with at most two positive and two negative eigenvalues.
pub fn is_rank2_symmetric_part(s: &DMatrix<f64>) -> bool {
    let (p, q) = inertia(s, ZERO_EIGEN_REL);
    p + q > 0 && p <= 2 && q <= 2
}

/// A matrix `X` of rank at most 2 with `sym(X) = S`, or `None` if the inertia
/// of `S` rules it out. Eigenvalues below `ZERO_EIGEN_REL` of the spectral
/// radius are dropped.
pub fn split_symmetric(s: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = s.nrows();
    let (vals, vecs) = linalg::sorted_symmetric_eigen(s);
    let radius = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cut = ZERO_EIGEN_REL * radius;
    let pos: Vec<usize> = (0..n).filter(|&k| vals[k] > cut).collect();
    let neg: Vec<usize> = (0..n).rev().filter(|&k| vals[k] < -cut).collect();
    if pos.len() > 2 || neg.len() > 2 {
        return None;
    }
    let mut x = DMatrix::zeros(n, n);
    for slot in 0..pos.len().max(neg.len()) {
        match (pos.get(slot), neg.get(slot)) {
            (Some(&p), Some(&q)) => {
                let w = vecs.column(p) * vals[p].sqrt();
                let z = vecs.column(q) * (-vals[q]).sqrt();
                x += (&w + &z) * (&w - &z).transpose();
            }
            (Some(&p), None) => {
                let w = vecs.column(p);
                x += w * w.transpose() * vals[p];
            }
            (None, Some(&q)) => {
                let z = vecs.column(q);
                x += z * z.transpose() * vals[q];
            }
            (None, None) => unreachable!(),
        }
    }
    Some(x)
}

/// Largest `|a_i^T X a_i| / |a_i|^2`.
pub fn trace_residual(a: &RealMeasurementMatrix, x: &DMatrix<f64>) -> f64 {
    a.unit_rows()
        .iter()
        .map(|r| (r.transpose() * x * r)[(0, 0)].abs())
        .fold(0.0, f64::max)
}

/// Checks the witness conditions: rank at most 2, nonzero symmetric part,
/// and `|a_i^T X a_i| <= tol * |a_i|^2 * max(1, max|X_jk|)`. Returns the
/// normalized trace residual when all hold.
pub fn validate_witness(a: &RealMeasurementMatrix, x: &DMatrix<f64>, tol: f64) -> Option<f64> {
    if x.nrows() != a.cols() || x.ncols() != a.cols() {
        return None;
    }
    let scale = x.amax();
    if scale == 0.0 {
        return None;
    }
    if linalg::rank(x, 1e-9) > 2 {
        return None;
    }
    if linalg::symmetrize(x).amax() <= 1e-9 * scale {
        return None;
    }
    let res = trace_residual(a, x);
    (res <= tol * scale.max(1.0)).then_some(res)
}

/// Scale so the largest-magnitude entry of `X` equals `+1`.
fn normalize_witness(x: &DMatrix<f64>) -> f64 {
    let mut best = 0.0f64;
    for v in x.iter() {
        if v.abs() > best.abs() + 1e-12 * best.abs().max(1.0) {
            best = *v;
        }
    }
    if best == 0.0 {
        1.0
    } else {
        1.0 / best
    }
}

fn witness_from(a: &RealMeasurementMatrix, s: &DMatrix<f64>, tol: f64) -> Option<(DMatrix<f64>, DMatrix<f64>, f64)> {
    if !is_rank2_symmetric_part(s) {
        return None;
    }
    let x = split_symmetric(s)?;
    let k = normalize_witness(&x);
    let (x, s) = (x * k, s * k);
    let res = validate_witness(a, &x, tol)?;
    Some((x, s, res))
}

/// Elements `S2 - mu S1` that are singular, where `S1` is definite. Any such
/// element of a nullspace with `n <= 3` has at most two nonzero eigenvalues.
fn singular_combinations(s1: &DMatrix<f64>, s2: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
    let (p, _) = inertia(s1, ZERO_EIGEN_REL);
    let s1 = if p == 0 { -s1 } else { s1.clone() };
    let Some(chol) = s1.clone().cholesky() else {
        return Vec::new();
    };
    let l = chol.l();
    let Some(l_inv) = l.clone().try_inverse() else {
        return Vec::new();
    };
    let m = &l_inv * s2 * l_inv.transpose();
    let (mus, _) = linalg::sorted_symmetric_eigen(&m);
    mus.into_iter().map(|mu| s2 - &s1 * mu).collect()
}

/// Decides conjugate phase retrievability of `R_C(A)`.
pub fn certify_range_space(a: &RealMeasurementMatrix, opts: &CertifyOptions) -> Verdict {
    let n = a.cols();
    let basis = quadratic_nullspace(a, opts.tol);
    let dim = basis.len();
    if dim == 0 {
        return Verdict::retrievable(0, true);
    }
    let found = |x: DMatrix<f64>, s: DMatrix<f64>, res: f64, samples: usize| Verdict {
        status: Status::NotConjugatePR,
        exact: true,
        nullspace_dim: dim,
        witness: Some(x),
        symmetric_part: Some(s),
        decomposition: None,
        max_trace_residual: Some(res),
        samples,
    };

    for s in &basis {
        if let Some((x, s, res)) = witness_from(a, s, opts.tol) {
            return found(x, s, res, 0);
        }
    }
    // every basis element is definite here
    for s2 in basis.iter().skip(1) {
        for s in singular_combinations(&basis[0], s2) {
            if let Some((x, s, res)) = witness_from(a, &s, opts.tol) {
                return found(x, s, res, 0);
            }
        }
    }
    if dim == 1 {
        // only multiples of a definite generator
        return Verdict::retrievable(1, true);
    }
    if n <= 3 {
        // a singular combination always exists; reaching this point means
        // the numerics rejected every candidate
        return Verdict::retrievable(dim, false);
    }

    let mut rng = Rng64::new(opts.seed);
    let mut spent = 0;
    while spent < opts.budget {
        let batch = SAMPLE_BATCH.min(opts.budget - spent);
        let coeffs: Vec<Vec<f64>> = (0..batch).map(|_| rng.unit_vector(dim)).collect();
        let hit = coeffs.par_iter().enumerate().find_map_first(|(idx, c)| {
            let mut s = DMatrix::zeros(n, n);
            for (b, &w) in basis.iter().zip(c) {
                s += b * w;
            }
            witness_from(a, &s, opts.tol).map(|w| (idx, w))
        });
        if let Some((idx, (x, s, res))) = hit {
            return found(x, s, res, spent + idx + 1);
        }
        spent += batch;
    }
    let mut v = Verdict::retrievable(dim, false);
    v.samples = spent;
    v
}

/// Per-vector certificate for `x_f`.
///
/// A space-level certificate settles it. Otherwise decompositions
/// `x_f = x1 + x2` are searched with Levenberg-Marquardt over `x1` on the
/// residuals `a_k^T X a_k`, `X = Re(x2) Re(x1)^T + Im(x2) Im(x1)^T`, and
/// accepted when `sym(X)` is not negligible. The number of restarts is
/// `max(1, budget / 100)`.
pub fn certify_vector(
    a: &RealMeasurementMatrix,
    x_f: &[Complex64],
    opts: &CertifyOptions,
) -> Result<Verdict, CertifyError> {
    let n = a.cols();
    if x_f.len() != n {
        return Err(CertifyError::LengthMismatch {
            expected: n,
            found: x_f.len(),
        });
    }
    let xf_norm = x_f.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let space = certify_range_space(a, opts);
    if xf_norm == 0.0 {
        return Ok(Verdict::retrievable(space.nullspace_dim, true));
    }
    if space.status == Status::ConjugatePR {
        return Ok(space);
    }

    let re: Vec<f64> = x_f.iter().map(|z| z.re / xf_norm).collect();
    let im: Vec<f64> = x_f.iter().map(|z| z.im / xf_norm).collect();
    let rows = a.unit_rows();
    let problem = SplitProblem {
        n,
        rows: &rows,
        y: rows.iter().map(|r| linalg::dot(r.as_slice(), &re)).collect(),
        z: rows.iter().map(|r| linalg::dot(r.as_slice(), &im)).collect(),
        re,
        im,
    };
    let restarts = (opts.budget / 100).max(1);
    let mut rng = Rng64::new(opts.seed);
    let starts: Vec<Vec<f64>> = (0..restarts)
        .map(|_| rng.normal_vec(2 * n).into_iter().map(|v| v / (n as f64).sqrt()).collect())
        .collect();
    let hit = starts
        .par_iter()
        .enumerate()
        .find_map_first(|(idx, start)| problem.solve(start).map(|theta| (idx, theta)));

    let Some((idx, theta)) = hit else {
        let mut v = Verdict::retrievable(space.nullspace_dim, false);
        v.samples = restarts;
        return Ok(v);
    };
    let x1: Vec<Complex64> = (0..n)
        .map(|i| Complex64::new(theta[i] * xf_norm, theta[n + i] * xf_norm))
        .collect();
    let x2: Vec<Complex64> = x_f.iter().zip(&x1).map(|(f, a)| f - a).collect();
    let x = split_matrix(&x1, &x2);
    let k = normalize_witness(&x);
    let xn = &x * k;
    let res = validate_witness(a, &xn, opts.tol);
    let Some(res) = res else {
        let mut v = Verdict::retrievable(space.nullspace_dim, false);
        v.samples = restarts;
        return Ok(v);
    };
    Ok(Verdict {
        status: Status::NotConjugatePR,
        exact: true,
        nullspace_dim: space.nullspace_dim,
        symmetric_part: Some(linalg::symmetrize(&x)),
        witness: Some(x),
        decomposition: Some(Decomposition { x1, x2 }),
        max_trace_residual: Some(res / k.abs()),
        samples: idx + 1,
    })
}

/// `X = Re(x2) Re(x1)^T + Im(x2) Im(x1)^T`.
pub fn split_matrix(x1: &[Complex64], x2: &[Complex64]) -> DMatrix<f64> {
    let n = x1.len();
    DMatrix::from_fn(n, n, |i, j| x2[i].re * x1[j].re + x2[i].im * x1[j].im)
}

struct SplitProblem<'a> {
    n: usize,
    rows: &'a [DVector<f64>],
    re: Vec<f64>,
    im: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
}

impl SplitProblem<'_> {
    const MAX_ITERS: usize = 300;
    const CONVERGED: f64 = 1e-26;
    const MIN_SYM: f64 = 1e-3;

    fn residuals(&self, theta: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.n;
        let m = self.rows.len();
        let mut r = DVector::zeros(m);
        let mut jac = DMatrix::zeros(m, 2 * n);
        for k in 0..m {
            let row = self.rows[k].as_slice();
            let alpha = linalg::dot(row, &theta[..n]);
            let beta = linalg::dot(row, &theta[n..]);
            r[k] = (self.y[k] - alpha) * alpha + (self.z[k] - beta) * beta;
            let ga = self.y[k] - 2.0 * alpha;
            let gb = self.z[k] - 2.0 * beta;
            for i in 0..n {
                jac[(k, i)] = ga * row[i];
                jac[(k, n + i)] = gb * row[i];
            }
        }
        (r, jac)
    }

    fn sym_norm(&self, theta: &[f64]) -> f64 {
        let n = self.n;
        let x = DMatrix::from_fn(n, n, |i, j| {
            (self.re[i] - theta[i]) * theta[j] + (self.im[i] - theta[n + i]) * theta[n + j]
        });
        linalg::symmetrize(&x).norm()
    }

    /// Levenberg-Marquardt from `start`; returns the parameters on success.
    fn solve(&self, start: &[f64]) -> Option<Vec<f64>> {
        let mut theta = DVector::from_column_slice(start);
        let (mut r, mut jac) = self.residuals(theta.as_slice());
        let mut cost = r.norm_squared();
        let mut lambda = 1e-3;
        for _ in 0..Self::MAX_ITERS {
            if cost <= Self::CONVERGED {
                break;
            }
            let jtj = jac.transpose() * &jac;
            let g = jac.transpose() * &r;
            let mut damped = jtj.clone();
            for i in 0..damped.nrows() {
                damped[(i, i)] += lambda * (jtj[(i, i)] + 1e-12);
            }
            let Some(step) = damped.lu().solve(&(-g)) else {
                lambda *= 10.0;
                continue;
            };
            let cand = &theta + step;
            let (rc, jc) = self.residuals(cand.as_slice());
            let cc = rc.norm_squared();
            if cc < cost {
                theta = cand;
                r = rc;
                jac = jc;
                cost = cc;
                lambda = (lambda / 3.0).max(1e-15);
            } else {
                lambda *= 4.0;
                if lambda > 1e12 {
                    break;
                }
            }
        }
        (cost <= Self::CONVERGED && self.sym_norm(theta.as_slice()) >= Self::MIN_SYM)
            .then(|| theta.iter().copied().collect())
    }
}

fn subset_rank_deficient(a: &DMatrix<f64>, rows: &[usize], threshold: f64) -> bool {
    let n = a.ncols();
    if rows.len() < n {
        return true;
    }
    let sub = DMatrix::from_fn(rows.len(), n, |r, c| a[(rows[r], c)]);
    let s = linalg::singular_values(&sub);
    s.len() < n || s[n - 1] <= threshold
}

/// `true` iff for every partition of the rows, one side spans `R^n`. Ranks
/// use the threshold `1e-10 * sigma_max(A)`.
pub fn complement_property(a: &DMatrix<f64>) -> Result<bool, CertifyError> {
    let m = a.nrows();
    if m > MAX_COMPLEMENT_ROWS {
        return Err(CertifyError::TooManyRows {
            rows: m,
            max: MAX_COMPLEMENT_ROWS,
        });
    }
    if a.ncols() == 0 {
        return Ok(true);
    }
    if m == 0 {
        return Ok(false);
    }
    let smax = linalg::singular_values(a).first().copied().unwrap_or(0.0);
    let threshold = 1e-10 * smax;
    // the last row always sits in the complement, so each partition is seen once
    let half = 1u64 << (m - 1);
    let fails = (0..half).into_par_iter().any(|mask| {
        let (mut inside, mut outside) = (Vec::new(), vec![m - 1]);
        for r in 0..m - 1 {
            if mask >> r & 1 == 1 {
                inside.push(r);
            } else {
                outside.push(r);
            }
        }
        subset_rank_deficient(a, &inside, threshold) && subset_rank_deficient(a, &outside, threshold)
    });
    Ok(!fails)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn mat(rows: &[&[f64]]) -> RealMeasurementMatrix {
        RealMeasurementMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn nullspace_of_identity() {
        let ns = quadratic_nullspace(&mat(&[&[1.0, 0.0], &[0.0, 1.0]]), 1e-9);
        assert_eq!(ns.len(), 1);
        let s = &ns[0];
        assert_relative_eq!(s[(0, 0)], 0.0, epsilon = 1e-14);
        assert_relative_eq!(s[(1, 1)], 0.0, epsilon = 1e-14);
        assert_relative_eq!(s[(0, 1)].abs(), 0.5f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(s.norm(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn nullspace_trivial_cases() {
        assert!(quadratic_nullspace(&mat(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]), 1e-9).is_empty());
        assert!(quadratic_nullspace(&mat(&[&[1.0]]), 1e-9).is_empty());
    }

    #[test]
    fn rank_deficient_rejected() {
        let err = RealMeasurementMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap_err();
        assert_eq!(err, CertifyError::RankDeficient { rank: 1, cols: 2 });
    }

    #[test]
    fn identity_is_not_conjugate_pr() {
        let a = mat(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let v = certify_range_space(&a, &CertifyOptions::default());
        assert_eq!(v.status, Status::NotConjugatePR);
        let x = v.witness.unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!((x - expected).amax() < 1e-12);
    }

    #[test]
    fn three_rows_in_plane_are_conjugate_pr() {
        let v = certify_range_space(&mat(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]), &CertifyOptions::default());
        assert_eq!(v.status, Status::ConjugatePR);
        assert!(v.exact);
        let v = certify_range_space(&mat(&[&[1.0]]), &CertifyOptions::default());
        assert_eq!(v.status, Status::ConjugatePR);
    }

    #[test]
    fn definite_generator_in_three_dimensions() {
        let rows: Vec<Vec<f64>> = vec![
            vec![1.0, 1.0, 0.0],
            vec![1.0, -1.0, 0.0],
            vec![1.0, 0.0, 1.0],
            vec![1.0, 0.0, -1.0],
            vec![0.0, 1.0, 1.0],
        ];
        // five constraints on the six-dimensional symmetric space
        let a = RealMeasurementMatrix::from_rows(&rows).unwrap();
        let ns = quadratic_nullspace(&a, 1e-9);
        assert_eq!(ns.len(), 1);
        let v = certify_range_space(&a, &CertifyOptions::default());
        let (p, q) = inertia(&ns[0], ZERO_EIGEN_REL);
        let qualifies = p + q > 0 && p <= 2 && q <= 2;
        assert_eq!(v.status == Status::NotConjugatePR, qualifies);
        assert!(v.exact);
    }

    #[test]
    fn split_reproduces_symmetric_part() {
        let s = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, -1.0, 0.5, 0.0, 0.5, 0.0]);
        let x = split_symmetric(&s).unwrap();
        assert!(linalg::rank(&x, 1e-9) <= 2);
        assert!((linalg::symmetrize(&x) - s).amax() < 1e-12);
        assert!(split_symmetric(&DMatrix::identity(3, 3)).is_none());
    }

    #[test]
    fn vector_examples() {
        let a = mat(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let zero = vec![Complex64::new(0.0, 0.0); 2];
        assert_eq!(certify_vector(&a, &zero, &CertifyOptions::default()).unwrap().status, Status::ConjugatePR);

        let xf = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)];
        let v = certify_vector(&a, &xf, &CertifyOptions::default()).unwrap();
        assert_eq!(v.status, Status::NotConjugatePR);
        let d = v.decomposition.unwrap();
        for i in 0..2 {
            assert_relative_eq!((d.x1[i] + d.x2[i] - xf[i]).norm(), 0.0, epsilon = 1e-12);
        }
        let x = split_matrix(&d.x1, &d.x2);
        assert!(linalg::symmetrize(&x).norm() > 1e-6);
        assert!(trace_residual(&a, &x) < 1e-9);

        let b = mat(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]);
        assert_eq!(certify_vector(&b, &xf, &CertifyOptions::default()).unwrap().status, Status::ConjugatePR);
        assert!(matches!(
            certify_vector(&b, &xf[..1], &CertifyOptions::default()),
            Err(CertifyError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn complement_property_examples() {
        let id = DMatrix::<f64>::identity(2, 2);
        assert!(!complement_property(&id).unwrap());
        let three = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        assert!(complement_property(&three).unwrap());
        assert!(complement_property(&DMatrix::from_element(1, 1, 2.0)).unwrap());
        assert!(matches!(
            complement_property(&DMatrix::zeros(25, 2)),
            Err(CertifyError::TooManyRows { .. })
        ));
    }
}
