//! Quaternion-valued functions on a finite domain `D = {0, ..., N-1}` and
//! their conjugate phase retrieval, decided through the real 4-vector fields
//! `x -> (f1(x), f2(x), f3(x), f4(x))` for `f = f1 + f2 i + f3 j + f4 k`.
//!
//! The trivial ambiguities of `f` are `g = q1 f1 + q2 f2 + q3 f3 + q4 f4`
//! where the `q_j` are the columns of a real orthogonal `4 x 4` matrix read as
//! quaternions. On the real side this is exactly `G(x) = U F(x)`, so orbit
//! membership is the orbit test for vector fields.
//!
//! `f` fails to be retrievable in a space `W` when `f = u + v` with `u, v` in
//! `W`, `Re(u(x) v*(x)) = 0` for every `x`, and
//! `Re(u(x) v*(y) + u(y) v*(x)) != 0` for some `x, y`; then `g = u - v` has the
//! magnitudes of `f` without being in its orbit.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph_model::{self, VectorField};
use crate::linalg;
use crate::rng::Rng64;

pub type Quaternion = nalgebra::Quaternion<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuatError {
    #[error("functions have {0} and {1} values")]
    LengthMismatch(usize, usize),
    #[error("space basis function {index} has {found} values, domain has {expected}")]
    BasisLength { index: usize, expected: usize, found: usize },
    #[error("space basis is linearly dependent")]
    DependentBasis,
    #[error("the function does not lie in the given space (residual {0:.3e})")]
    NotInSpace(f64),
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
}

/// `a + b i + c j + d k`.
pub fn quat(a: f64, b: f64, c: f64, d: f64) -> Quaternion {
    Quaternion::new(a, b, c, d)
}

pub fn quat_mul(p: &Quaternion, q: &Quaternion) -> Quaternion {
    p * q
}

pub fn quat_conj(q: &Quaternion) -> Quaternion {
    q.conjugate()
}

pub fn quat_norm(q: &Quaternion) -> f64 {
    q.norm()
}

/// `[a, b, c, d]`.
pub fn components(q: &Quaternion) -> [f64; 4] {
    [q.w, q.i, q.j, q.k]
}

pub fn from_components(c: &[f64; 4]) -> Quaternion {
    quat(c[0], c[1], c[2], c[3])
}

/// Values of a quaternion function on `{0, ..., N-1}`; JSON is a list of
/// `[a, b, c, d]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<[f64; 4]>", into = "Vec<[f64; 4]>")]
pub struct QuatFunction {
    values: Vec<Quaternion>,
}

impl From<Vec<[f64; 4]>> for QuatFunction {
    fn from(v: Vec<[f64; 4]>) -> Self {
        Self {
            values: v.iter().map(from_components).collect(),
        }
    }
}

impl From<QuatFunction> for Vec<[f64; 4]> {
    fn from(f: QuatFunction) -> Self {
        f.values.iter().map(components).collect()
    }
}

impl QuatFunction {
    pub fn new(values: Vec<Quaternion>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[Quaternion] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn left_mul(&self, q: &Quaternion) -> Self {
        Self::new(self.values.iter().map(|v| q * v).collect())
    }

    /// `sum_j q_j f_j` for the real components `f_j` of `self`.
    pub fn combine(&self, q: &[Quaternion; 4]) -> Self {
        Self::new(
            self.values
                .iter()
                .map(|v| {
                    components(v)
                        .iter()
                        .zip(q)
                        .fold(quat(0.0, 0.0, 0.0, 0.0), |acc, (&fj, qj)| acc + qj * fj)
                })
                .collect(),
        )
    }

    fn check_finite(&self) -> Result<(), QuatError> {
        match self.values.iter().position(|q| components(q).iter().any(|x| !x.is_finite())) {
            Some(i) => Err(QuatError::NonFinite(i)),
            None => Ok(()),
        }
    }
}

/// The real field `x -> (f1(x), f2(x), f3(x), f4(x))`.
pub fn to_real_field(f: &QuatFunction) -> VectorField {
    VectorField::new(4, f.values.iter().map(|q| components(q).to_vec()).collect())
        .expect("four components per value")
}

pub fn from_real_field(field: &VectorField) -> QuatFunction {
    QuatFunction::new(
        field
            .vectors()
            .iter()
            .map(|v| quat(v[0], v[1], v[2], v[3]))
            .collect(),
    )
}

/// The coefficient quadruple of an orthogonal `U`: `q_j` is column `j`.
pub fn coefficients_from_orthogonal(u: &DMatrix<f64>) -> [Quaternion; 4] {
    std::array::from_fn(|j| quat(u[(0, j)], u[(1, j)], u[(2, j)], u[(3, j)]))
}

/// The orthogonal `U` with `g = sum_j q_j f_j`, if `g` is in the orbit of `f`.
pub fn quat_orbit_transform(f: &QuatFunction, g: &QuatFunction, tol: f64) -> Result<Option<DMatrix<f64>>, QuatError> {
    if f.len() != g.len() {
        return Err(QuatError::LengthMismatch(f.len(), g.len()));
    }
    graph_model::orbit_equivalent(&to_real_field(f), &to_real_field(g), tol)
        .map_err(|_| QuatError::LengthMismatch(f.len(), g.len()))
}

/// Orbit membership, decided by the Gram matrices of the real fields.
pub fn quat_orbit_equivalent(f: &QuatFunction, g: &QuatFunction, tol: f64) -> Result<bool, QuatError> {
    Ok(quat_orbit_transform(f, g, tol)?.is_some())
}

/// The function space: all quaternion functions on the domain, or
/// `W = W_R + W_R i + W_R j + W_R k` for a real space `W_R` given by a basis.
#[derive(Clone, Debug, PartialEq)]
pub enum QuatSpace {
    Full,
    Real(Vec<Vec<f64>>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QuatVerdict {
    RetrievableCertified,
    Counterexample,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CandidateReport {
    pub index: usize,
    pub magnitudes_match: bool,
    pub in_space: bool,
    pub in_orbit: bool,
    /// Coefficient quadruple `q_1..q_4` when in the orbit.
    pub coefficients: Option<[[f64; 4]; 4]>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Counterexample {
    pub u: QuatFunction,
    pub v: QuatFunction,
    /// `u - v`: same magnitudes as `f`, outside its orbit.
    pub g: QuatFunction,
    /// `(x, y)` maximizing `|Re(u(x) v*(y) + u(y) v*(x))|`.
    pub location: (usize, usize),
    pub cross_term: f64,
    pub max_pointwise: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuatReport {
    pub verdict: QuatVerdict,
    pub reason: String,
    pub candidates: Vec<CandidateReport>,
    pub counterexample: Option<Counterexample>,
    pub restarts: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuatOptions {
    pub tol: f64,
    pub budget: usize,
    pub seed: u64,
}

impl Default for QuatOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            budget: 10_000,
            seed: 0,
        }
    }
}

fn re_mul_conj(p: &Quaternion, q: &Quaternion) -> f64 {
    // Re(p q*) is the Euclidean inner product of the components
    p.coords.dot(&q.coords)
}

/// Pointwise defect `max_x |Re(u(x) v*(x))|` and the largest cross term.
pub fn pair_conditions(u: &QuatFunction, v: &QuatFunction) -> (f64, (usize, usize), f64) {
    let n = u.len();
    let pointwise = (0..n)
        .map(|x| re_mul_conj(&u.values[x], &v.values[x]).abs())
        .fold(0.0, f64::max);
    let mut best = ((0, 0), 0.0f64);
    for x in 0..n {
        for y in x + 1..n {
            let c = re_mul_conj(&u.values[x], &v.values[y]) + re_mul_conj(&u.values[y], &v.values[x]);
            if c.abs() > best.1.abs() {
                best = ((x, y), c);
            }
        }
    }
    (pointwise, best.0, best.1)
}

/// Checks `f = u + v`, pointwise orthogonality within `tol * scale^2` and a
/// cross term above `sqrt(tol) * scale^2`, `scale = 1 + max |f(x)|`.
pub fn verify_counterexample(f: &QuatFunction, u: &QuatFunction, v: &QuatFunction, tol: f64) -> Option<Counterexample> {
    if u.len() != f.len() || v.len() != f.len() {
        return None;
    }
    let scale = 1.0 + f.values.iter().map(|q| q.norm()).fold(0.0, f64::max);
    let sum_ok = (0..f.len()).all(|x| (u.values[x] + v.values[x] - f.values[x]).norm() <= tol * scale);
    let (pointwise, location, cross) = pair_conditions(u, v);
    (sum_ok && pointwise <= tol * scale * scale && cross.abs() > tol.sqrt() * scale * scale).then(|| Counterexample {
        g: QuatFunction::new((0..f.len()).map(|x| u.values[x] - v.values[x]).collect()),
        u: u.clone(),
        v: v.clone(),
        location,
        cross_term: cross,
        max_pointwise: pointwise,
    })
}

fn counterexample_from_candidate(f: &QuatFunction, g: &QuatFunction, tol: f64) -> Option<Counterexample> {
    let u = QuatFunction::new((0..f.len()).map(|x| (f.values[x] + g.values[x]) * 0.5).collect());
    let v = QuatFunction::new((0..f.len()).map(|x| (f.values[x] - g.values[x]) * 0.5).collect());
    verify_counterexample(f, &u, &v, tol)
}

/// Orthonormal basis (columns, `N x k`) of `W_R`.
fn orthonormal_basis(basis: &[Vec<f64>], n: usize) -> Result<DMatrix<f64>, QuatError> {
    for (index, b) in basis.iter().enumerate() {
        if b.len() != n {
            return Err(QuatError::BasisLength {
                index,
                expected: n,
                found: b.len(),
            });
        }
    }
    let m = DMatrix::from_fn(n, basis.len(), |i, j| basis[j][i]);
    if basis.is_empty() {
        return Ok(m);
    }
    if linalg::rank(&m, 1e-10) < basis.len() {
        return Err(QuatError::DependentBasis);
    }
    Ok(linalg::svd(&m).u.columns(0, basis.len()).into_owned())
}

/// Real coefficients (`k x 4`) of `f` in the orthonormal basis `q`, and the
/// distance from `f` to the space.
fn coefficients_in(q: &DMatrix<f64>, f: &QuatFunction) -> (DMatrix<f64>, f64) {
    let fm = to_real_field(f).to_matrix().transpose(); // N x 4
    let c = q.transpose() * &fm;
    let resid = (&fm - q * &c).amax();
    (c, resid)
}

/// Certificate, candidate screening and counterexample search.
///
/// * Full space: `f` is retrievable iff it is nonzero at no more than one
///   point; otherwise an explicit pair is built from two support points.
/// * Space with a basis: certified when the quadratic constraints
///   `b(x)^T S b(x) = 0` force `S = 0`; otherwise Levenberg-Marquardt runs
///   over `u` (real coefficients `A`, residuals `Re(u(x) v*(x))`) from
///   `max(1, budget / 100)` seeded random starts.
///
/// Any candidate with the magnitudes of `f`, inside the space, but outside the
/// orbit yields the counterexample `u = (f+g)/2`, `v = (f-g)/2`.
pub fn quat_conjugate_pr_check(
    f: &QuatFunction,
    candidates: &[QuatFunction],
    space: &QuatSpace,
    opts: &QuatOptions,
) -> Result<QuatReport, QuatError> {
    f.check_finite()?;
    let n = f.len();
    let scale = 1.0 + f.values.iter().map(|q| q.norm()).fold(0.0, f64::max);
    let basis = match space {
        QuatSpace::Full => None,
        QuatSpace::Real(b) => {
            let q = orthonormal_basis(b, n)?;
            let (_, resid) = coefficients_in(&q, f);
            if resid > opts.tol * scale {
                return Err(QuatError::NotInSpace(resid));
            }
            Some(q)
        }
    };

    let mut reports = Vec::with_capacity(candidates.len());
    let mut from_candidate = None;
    for (index, g) in candidates.iter().enumerate() {
        if g.len() != n {
            return Err(QuatError::LengthMismatch(n, g.len()));
        }
        g.check_finite()?;
        let magnitudes_match = (0..n).all(|x| (f.values[x].norm() - g.values[x].norm()).abs() <= opts.tol * scale);
        let in_space = basis.as_ref().is_none_or(|q| coefficients_in(q, g).1 <= opts.tol * scale);
        let transform = quat_orbit_transform(f, g, opts.tol)?;
        let coefficients = transform
            .as_ref()
            .map(|u| coefficients_from_orthogonal(u).map(|q| components(&q)));
        if magnitudes_match && in_space && transform.is_none() && from_candidate.is_none() {
            from_candidate = counterexample_from_candidate(f, g, opts.tol);
        }
        reports.push(CandidateReport {
            index,
            magnitudes_match,
            in_space,
            in_orbit: transform.is_some(),
            coefficients,
        });
    }
    let report = |verdict, reason: String, counterexample, restarts| QuatReport {
        verdict,
        reason,
        candidates: reports.clone(),
        counterexample,
        restarts,
    };
    if let Some(ce) = from_candidate {
        return Ok(report(
            QuatVerdict::Counterexample,
            "a candidate matches all magnitudes but is not in the orbit".into(),
            Some(ce),
            0,
        ));
    }

    let zero_cut = opts.tol * scale;
    let support: Vec<usize> = (0..n).filter(|&x| f.values[x].norm() > zero_cut).collect();
    if support.len() <= 1 {
        return Ok(report(
            QuatVerdict::RetrievableCertified,
            "f vanishes at all but at most one point".into(),
            None,
            0,
        ));
    }

    let Some(q) = basis else {
        let ce = full_space_counterexample(f, support[0], support[1], opts.tol)
            .expect("explicit construction satisfies the conditions");
        return Ok(report(
            QuatVerdict::Counterexample,
            format!("f is nonzero at {} and {}", support[0], support[1]),
            Some(ce),
            0,
        ));
    };

    let rows: Vec<Vec<f64>> = (0..n).map(|x| q.row(x).iter().copied().collect()).collect();
    if quadratic_constraints_trivial(&rows) {
        return Ok(report(
            QuatVerdict::RetrievableCertified,
            "the pointwise constraints admit only a zero symmetric form".into(),
            None,
            0,
        ));
    }
    let restarts = (opts.budget / 100).max(1);
    match search_pair(f, &q, restarts, opts) {
        Some(ce) => Ok(report(
            QuatVerdict::Counterexample,
            "search found a pointwise orthogonal split with a nonzero cross term".into(),
            Some(ce),
            restarts,
        )),
        None => Ok(report(
            QuatVerdict::Inconclusive,
            "no certificate applies and the search found no counterexample".into(),
            None,
            restarts,
        )),
    }
}

/// `u = f` except at `y`, where `u(y) = (f(y) + |f(y)| e)/2` with `e = ±f(x)/|f(x)|`
/// chosen so the cross term at `(x, y)` is `|f(x)||f(y)|(cos φ ∓ 1)/2 != 0`.
fn full_space_counterexample(f: &QuatFunction, x: usize, y: usize, tol: f64) -> Option<Counterexample> {
    let fx = f.values[x];
    let fy = f.values[y];
    let ex = fx / fx.norm();
    let cos = re_mul_conj(&fx, &fy) / (fx.norm() * fy.norm());
    let e = if cos >= 0.0 { -ex } else { ex };
    let mut u = f.values.clone();
    let mut v = vec![quat(0.0, 0.0, 0.0, 0.0); f.len()];
    u[y] = (fy + e * fy.norm()) * 0.5;
    v[y] = (fy - e * fy.norm()) * 0.5;
    verify_counterexample(f, &QuatFunction::new(u), &QuatFunction::new(v), tol)
}

fn quadratic_constraints_trivial(rows: &[Vec<f64>]) -> bool {
    let k = rows.first().map_or(0, |r| r.len());
    if k == 0 {
        return true;
    }
    let mut pairs = Vec::new();
    for i in 0..k {
        for j in i..k {
            pairs.push((i, j));
        }
    }
    let l = DMatrix::from_fn(rows.len(), pairs.len(), |x, p| {
        let (i, j) = pairs[p];
        if i == j {
            rows[x][i] * rows[x][i]
        } else {
            2.0 * rows[x][i] * rows[x][j]
        }
    });
    linalg::rank(&l, 1e-10) == pairs.len()
}

fn search_pair(f: &QuatFunction, q: &DMatrix<f64>, restarts: usize, opts: &QuatOptions) -> Option<Counterexample> {
    let (c, _) = coefficients_in(q, f);
    let norm = c.norm();
    let c = &c / norm;
    let k = q.ncols();
    let mut rng = Rng64::new(opts.seed);
    let starts: Vec<Vec<f64>> = (0..restarts).map(|_| rng.normal_vec(4 * k)).collect();
    let problem = PairProblem { q, c: &c, k };
    let theta = starts.par_iter().find_map_first(|s| problem.solve(s))?;
    let a = DMatrix::from_column_slice(k, 4, &theta) * norm;
    let um = q * &a;
    let vm = q * (&c * norm - &a);
    let to_fn = |m: &DMatrix<f64>| {
        QuatFunction::new((0..m.nrows()).map(|x| quat(m[(x, 0)], m[(x, 1)], m[(x, 2)], m[(x, 3)])).collect())
    };
    verify_counterexample(f, &to_fn(&um), &to_fn(&vm), opts.tol)
}

struct PairProblem<'a> {
    q: &'a DMatrix<f64>,
    c: &'a DMatrix<f64>,
    k: usize,
}

impl PairProblem<'_> {
    fn residuals(&self, theta: &[f64]) -> (nalgebra::DVector<f64>, DMatrix<f64>) {
        let a = DMatrix::from_column_slice(self.k, 4, theta);
        let alpha = self.q * &a; // N x 4, u values
        let fv = self.q * self.c; // N x 4, f values
        let n = self.q.nrows();
        let mut r = nalgebra::DVector::zeros(n);
        let mut jac = DMatrix::zeros(n, 4 * self.k);
        for x in 0..n {
            let mut acc = 0.0;
            for col in 0..4 {
                let u = alpha[(x, col)];
                acc += u * (fv[(x, col)] - u);
                let g = fv[(x, col)] - 2.0 * u;
                for l in 0..self.k {
                    jac[(x, col * self.k + l)] = self.q[(x, l)] * g;
                }
            }
            r[x] = acc;
        }
        (r, jac)
    }

    fn sym_norm(&self, theta: &[f64]) -> f64 {
        let a = DMatrix::from_column_slice(self.k, 4, theta);
        let x = &a * (self.c - &a).transpose();
        linalg::symmetrize(&x).norm()
    }

    fn solve(&self, start: &[f64]) -> Option<Vec<f64>> {
        let mut theta = nalgebra::DVector::from_column_slice(start);
        let (mut r, mut jac) = self.residuals(theta.as_slice());
        let mut cost = r.norm_squared();
        let mut lambda = 1e-3;
        for _ in 0..300 {
            if cost <= 1e-26 {
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
        (cost <= 1e-26 && self.sym_norm(theta.as_slice()) >= 1e-3).then(|| theta.iter().copied().collect())
    }
}

/// A uniformly random orthogonal `4 x 4` matrix (polar factor of a Gaussian).
pub fn random_orthogonal4(rng: &mut Rng64) -> DMatrix<f64> {
    let g = DMatrix::from_fn(4, 4, |_, _| rng.normal());
    linalg::polar_orthogonal(&g)
}
