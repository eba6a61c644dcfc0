//! Affine phase retrieval with reference vectors in a finite-dimensional
//! setting: functions are coefficient vectors `f` in `R^p`, each measurement
//! is a `d x p` matrix `Phi`, and the data are `|Phi f + b_i|` for `N`
//! reference vectors `b_1..b_N` per measurement.
//!
//! For `u, v` in `R^p`,
//! `|Phi(u + v/2) + b|^2 - |Phi(u - v/2) + b|^2 = 2 <Phi v, Phi u + b>`,
//! so a null vector `v` of
//! `T_u : v -> (<Phi v, Phi u + b_i>)` gives two distinct functions with equal
//! magnitudes. Injectivity of every `T_u` is the exact criterion. Injectivity
//! of `T : v -> (<Phi v, b_i - b_j>)` is sufficient, and it is necessary when
//! some reference group is itself a measurement `b_{i0} = Phi f0`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg;
use crate::rng::Rng64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AffineError {
    #[error("coefficient dimension p must be positive")]
    ZeroDimension,
    #[error("system has no measurements")]
    NoMeasurements,
    #[error("measurement {index}: {message}")]
    Shape { index: usize, message: String },
    #[error("the difference map T needs at least two references per measurement, got {0}")]
    TooFewReferences(usize),
    #[error("vector has length {found}, expected {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("non-finite entry in measurement {0}")]
    NonFinite(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementJson {
    pub phi: Vec<Vec<f64>>,
    pub refs: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineSystemJson {
    pub p: usize,
    pub measurements: Vec<MeasurementJson>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Measurement {
    pub phi: DMatrix<f64>,
    pub refs: Vec<DVector<f64>>,
}

/// Validated system: every `Phi` is `d x p`, every measurement has the same
/// number `N >= 1` of references in `R^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineSystem {
    p: usize,
    d: usize,
    n_refs: usize,
    measurements: Vec<Measurement>,
}

impl AffineSystem {
    pub fn new(p: usize, measurements: Vec<Measurement>) -> Result<Self, AffineError> {
        if p == 0 {
            return Err(AffineError::ZeroDimension);
        }
        let first = measurements.first().ok_or(AffineError::NoMeasurements)?;
        let d = first.phi.nrows();
        let n_refs = first.refs.len();
        for (index, m) in measurements.iter().enumerate() {
            let shape = |message: String| AffineError::Shape { index, message };
            if m.phi.ncols() != p || m.phi.nrows() != d {
                return Err(shape(format!(
                    "phi is {}x{}, expected {d}x{p}",
                    m.phi.nrows(),
                    m.phi.ncols()
                )));
            }
            if d == 0 {
                return Err(shape("phi has no rows".into()));
            }
            if m.refs.is_empty() || m.refs.len() != n_refs {
                return Err(shape(format!("{} references, expected {} (at least one)", m.refs.len(), n_refs.max(1))));
            }
            if let Some(r) = m.refs.iter().find(|r| r.len() != d) {
                return Err(shape(format!("reference of length {}, expected {d}", r.len())));
            }
            if m.phi.iter().chain(m.refs.iter().flat_map(|r| r.iter())).any(|x| !x.is_finite()) {
                return Err(AffineError::NonFinite(index));
            }
        }
        Ok(Self {
            p,
            d,
            n_refs,
            measurements,
        })
    }

    pub fn from_json(raw: &AffineSystemJson) -> Result<Self, AffineError> {
        let measurements = raw
            .measurements
            .iter()
            .enumerate()
            .map(|(index, m)| {
                let cols = m.phi.first().map_or(0, |r| r.len());
                if m.phi.iter().any(|r| r.len() != cols) {
                    return Err(AffineError::Shape {
                        index,
                        message: "ragged phi rows".into(),
                    });
                }
                Ok(Measurement {
                    phi: DMatrix::from_fn(m.phi.len(), cols, |i, j| m.phi[i][j]),
                    refs: m.refs.iter().map(|r| DVector::from_column_slice(r)).collect(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(raw.p, measurements)
    }

    pub fn to_json(&self) -> AffineSystemJson {
        AffineSystemJson {
            p: self.p,
            measurements: self
                .measurements
                .iter()
                .map(|m| MeasurementJson {
                    phi: (0..m.phi.nrows()).map(|i| m.phi.row(i).iter().copied().collect()).collect(),
                    refs: m.refs.iter().map(|r| r.iter().copied().collect()).collect(),
                })
                .collect(),
        }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n_refs(&self) -> usize {
        self.n_refs
    }

    pub fn measurements(&self) -> &[Measurement] {
        &self.measurements
    }

    /// All magnitudes `|Phi f + b_i|`, measurement-major.
    pub fn magnitudes(&self, f: &DVector<f64>) -> Vec<f64> {
        self.measurements
            .iter()
            .flat_map(|m| {
                let pf = &m.phi * f;
                m.refs.iter().map(move |b| (&pf + b).norm()).collect::<Vec<_>>()
            })
            .collect()
    }

    /// The stacked measurement map `f -> (Phi f)_Phi`.
    pub fn stacked(&self) -> DMatrix<f64> {
        let rows: Vec<_> = self.measurements.iter().flat_map(|m| m.phi.row_iter().map(|r| r.into_owned())).collect();
        DMatrix::from_rows(&rows)
    }

    fn check_len(&self, v: &DVector<f64>) -> Result<(), AffineError> {
        if v.len() != self.p {
            return Err(AffineError::LengthMismatch {
                expected: self.p,
                found: v.len(),
            });
        }
        Ok(())
    }
}

fn injective(m: &DMatrix<f64>, p: usize, tol: f64) -> bool {
    m.nrows() > 0 && linalg::rank(m, tol) == p
}

/// Rows `(b_i - b_j)^T Phi` over all measurements and pairs `i < j`.
pub fn build_t(sys: &AffineSystem) -> Result<DMatrix<f64>, AffineError> {
    if sys.n_refs < 2 {
        return Err(AffineError::TooFewReferences(sys.n_refs));
    }
    let mut rows = Vec::new();
    for m in &sys.measurements {
        for i in 0..m.refs.len() {
            for j in i + 1..m.refs.len() {
                rows.push(((&m.refs[i] - &m.refs[j]).transpose() * &m.phi).into_owned());
            }
        }
    }
    Ok(DMatrix::from_rows(&rows))
}

/// Rank `p` at singular-value threshold `tol * sigma_max`.
pub fn injective_t(sys: &AffineSystem, tol: f64) -> Result<bool, AffineError> {
    Ok(injective(&build_t(sys)?, sys.p, tol))
}

/// Rows `(Phi u + b_i)^T Phi` over all measurements and references.
pub fn build_tu(sys: &AffineSystem, u: &DVector<f64>) -> Result<DMatrix<f64>, AffineError> {
    sys.check_len(u)?;
    let mut rows = Vec::new();
    for m in &sys.measurements {
        let pu = &m.phi * u;
        for b in &m.refs {
            rows.push(((&pu + b).transpose() * &m.phi).into_owned());
        }
    }
    Ok(DMatrix::from_rows(&rows))
}

pub fn injective_tu(sys: &AffineSystem, u: &DVector<f64>, tol: f64) -> Result<bool, AffineError> {
    Ok(injective(&build_tu(sys, u)?, sys.p, tol))
}

/// Smallest singular value of `T_u` relative to the largest (0 for a zero map).
pub fn relative_sigma_min_tu(sys: &AffineSystem, u: &DVector<f64>) -> Result<f64, AffineError> {
    let s = linalg::singular_values(&build_tu(sys, u)?);
    let smax = s.first().copied().unwrap_or(0.0);
    if smax == 0.0 || s.len() < sys.p {
        return Ok(0.0);
    }
    Ok(s[sys.p - 1] / smax)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AffineVerdict {
    CertifiedYes,
    CertifiedNo,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AffineCounterexample {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    /// `max |(|Phi f + b| - |Phi g + b|)|` over all measurements.
    pub max_magnitude_gap: f64,
    pub origin: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AffineReport {
    pub verdict: AffineVerdict,
    pub reasons: Vec<String>,
    pub p: usize,
    pub t_rank: Option<usize>,
    pub stacked_rank: usize,
    pub counterexample: Option<AffineCounterexample>,
    pub falsifier_restarts: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffineOptions {
    /// Relative singular-value threshold for rank decisions.
    pub tol: f64,
    /// Random restarts of the falsifier.
    pub budget: usize,
    pub seed: u64,
}

impl Default for AffineOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            budget: 200,
            seed: 0,
        }
    }
}

/// Relative bound on magnitude gaps accepted for a counterexample.
pub const COUNTEREXAMPLE_TOL: f64 = 1e-10;

/// `f = u + v/2`, `g = u - v/2`, kept only when `v != 0` and every magnitude
/// agrees within `COUNTEREXAMPLE_TOL * (1 + max |Phi f + b|)`.
pub fn counterexample_pair(
    sys: &AffineSystem,
    u: &DVector<f64>,
    v: &DVector<f64>,
    origin: &str,
) -> Option<AffineCounterexample> {
    let vn = v.norm();
    if vn == 0.0 || !vn.is_finite() {
        return None;
    }
    // normalize v against u so f and g stay well separated
    let v = v * ((1.0 + u.norm()) / vn);
    let f = u + &v * 0.5;
    let g = u - &v * 0.5;
    let mf = sys.magnitudes(&f);
    let mg = sys.magnitudes(&g);
    let scale = 1.0 + mf.iter().chain(&mg).fold(0.0f64, |m, x| m.max(*x));
    let gap = mf.iter().zip(&mg).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    (gap <= COUNTEREXAMPLE_TOL * scale).then(|| AffineCounterexample {
        u: u.iter().copied().collect(),
        v: v.iter().copied().collect(),
        f: f.iter().copied().collect(),
        g: g.iter().copied().collect(),
        max_magnitude_gap: gap,
        origin: origin.to_string(),
    })
}

/// A unit null vector of `m` (smallest right singular vector) if its
/// relative singular value is within `tol`.
fn null_vector(m: &DMatrix<f64>, p: usize, tol: f64) -> Option<DVector<f64>> {
    if m.nrows() == 0 {
        let mut e = DVector::zeros(p);
        e[0] = 1.0;
        return Some(e);
    }
    let ns = linalg::null_space(m, tol);
    (ns.ncols() > 0).then(|| ns.column(0).into_owned())
}

/// Certificates, then counterexample constructions, then the randomized
/// falsifier. `CertifiedYes` only comes from a certificate.
pub fn check_affine_pr(sys: &AffineSystem, opts: &AffineOptions) -> AffineReport {
    let p = sys.p;
    let stacked = sys.stacked();
    let stacked_rank = linalg::rank(&stacked, opts.tol);
    let t = build_t(sys).ok();
    let t_rank = t.as_ref().map(|t| linalg::rank(t, opts.tol));
    let mut reasons = Vec::new();

    if t_rank == Some(p) {
        reasons.push("difference map T is injective".to_string());
    }
    let spanning = sys.n_refs >= 2
        && sys.measurements.iter().all(|m| {
            let diffs: Vec<_> = m.refs.iter().skip(1).map(|b| (b - &m.refs[0]).transpose()).collect();
            linalg::rank(&DMatrix::from_rows(&diffs), opts.tol) == sys.d
        });
    if spanning && stacked_rank == p {
        reasons.push("reference differences span every measurement space and the stacked map is injective".to_string());
    }
    if sys.d == 1 && sys.n_refs >= 2 {
        let outside_f: Vec<_> = sys
            .measurements
            .iter()
            .filter(|m| m.refs.iter().any(|b| (b - &m.refs[0]).amax() > 0.0))
            .flat_map(|m| m.phi.row_iter().map(|r| r.into_owned()))
            .collect();
        if !outside_f.is_empty() && injective(&DMatrix::from_rows(&outside_f), p, opts.tol) {
            reasons.push("scalar case: no nonzero function vanishes under all measurements with distinct references".to_string());
        }
    }
    let report = |verdict, reasons, counterexample, restarts| AffineReport {
        verdict,
        reasons,
        p,
        t_rank,
        stacked_rank,
        counterexample,
        falsifier_restarts: restarts,
    };
    if !reasons.is_empty() {
        return report(AffineVerdict::CertifiedYes, reasons, None, 0);
    }

    // a null vector of the stacked map is invisible to every measurement
    if stacked_rank < p {
        let u = DVector::zeros(p);
        if let Some(ce) = null_vector(&stacked, p, opts.tol).and_then(|v| counterexample_pair(sys, &u, &v, "stacked measurement map is not injective")) {
            return report(
                AffineVerdict::CertifiedNo,
                vec!["stacked measurement map is not injective".into()],
                Some(ce),
                0,
            );
        }
    }

    // reference group realized by a function: u = -f0 reduces T_u to T
    for i in 0..sys.n_refs {
        if let Some(u) = realize_group(sys, i, opts.tol) {
            if let Ok(tu) = build_tu(sys, &u) {
                if let Some(ce) = null_vector(&tu, p, opts.tol)
                    .and_then(|v| counterexample_pair(sys, &u, &v, &format!("reference group {i} is a measurement of a function")))
                {
                    return report(
                        AffineVerdict::CertifiedNo,
                        vec![format!("reference group {i} is the measurement of -u and T_u is singular")],
                        Some(ce),
                        0,
                    );
                }
            }
        }
    }

    let restarts = opts.budget.max(1);
    let mut rng = Rng64::new(opts.seed);
    let starts: Vec<Vec<f64>> = (0..restarts).map(|_| rng.normal_vec(2 * p)).collect();
    let hit = starts.par_iter().find_map_first(|s| {
        let (u, _) = falsify_from(sys, s)?;
        let tu = build_tu(sys, &u).ok()?;
        let v = null_vector(&tu, p, opts.tol.min(1e-9))?;
        counterexample_pair(sys, &u, &v, "falsifier found a singular T_u")
    });
    match hit {
        Some(ce) => report(
            AffineVerdict::CertifiedNo,
            vec!["falsifier found a singular T_u".into()],
            Some(ce),
            restarts,
        ),
        None => report(
            AffineVerdict::Inconclusive,
            vec!["no certificate applies and the falsifier found no singular T_u".into()],
            None,
            restarts,
        ),
    }
}

/// `u` with `Phi u = -b_i` for every measurement, when solvable.
fn realize_group(sys: &AffineSystem, i: usize, tol: f64) -> Option<DVector<f64>> {
    let a = sys.stacked();
    let rhs: Vec<f64> = sys.measurements.iter().flat_map(|m| (-&m.refs[i]).iter().copied().collect::<Vec<_>>()).collect();
    let rhs = DVector::from_vec(rhs);
    let u = linalg::lstsq(&a, &rhs, tol);
    let resid = (&a * &u - &rhs).norm();
    (resid <= 1e-10 * (1.0 + rhs.norm())).then_some(u)
}

/// Levenberg-Marquardt on `(u, v)` for the bilinear residuals
/// `<Phi v, Phi u + b_i>` with `|v|^2 = 1`. Returns `(u, v)` on convergence.
pub fn falsify_from(sys: &AffineSystem, start: &[f64]) -> Option<(DVector<f64>, DVector<f64>)> {
    let p = sys.p;
    let scale = 1.0
        + sys
            .measurements
            .iter()
            .map(|m| m.phi.norm() * (1.0 + m.refs.iter().map(|b| b.norm()).fold(0.0, f64::max)))
            .fold(0.0, f64::max);
    let residuals = |theta: &DVector<f64>| {
        let u = theta.rows(0, p);
        let v = theta.rows(p, p);
        let rows: usize = sys.measurements.iter().map(|m| m.refs.len()).sum::<usize>() + 1;
        let mut r = DVector::zeros(rows);
        let mut jac = DMatrix::zeros(rows, 2 * p);
        let mut k = 0;
        for m in &sys.measurements {
            let pv = &m.phi * v;
            let pu = &m.phi * u;
            let gu = m.phi.transpose() * &pv; // d/du <Phi v, Phi u + b>
            for b in &m.refs {
                let w = &pu + b;
                r[k] = pv.dot(&w) / scale;
                let gv = m.phi.transpose() * &w;
                for c in 0..p {
                    jac[(k, c)] = gu[c] / scale;
                    jac[(k, p + c)] = gv[c] / scale;
                }
                k += 1;
            }
        }
        r[k] = v.norm_squared() - 1.0;
        for c in 0..p {
            jac[(k, p + c)] = 2.0 * v[c];
        }
        (r, jac)
    };
    let mut theta = DVector::from_column_slice(start);
    let (mut r, mut jac) = residuals(&theta);
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    for _ in 0..200 {
        if cost <= 1e-28 {
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
        let (rc, jc) = residuals(&cand);
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
    (cost <= 1e-24).then(|| (theta.rows(0, p).into_owned(), theta.rows(p, p).into_owned()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn system(p: usize, ms: &[(&[&[f64]], &[&[f64]])]) -> AffineSystem {
        let raw = AffineSystemJson {
            p,
            measurements: ms
                .iter()
                .map(|(phi, refs)| MeasurementJson {
                    phi: phi.iter().map(|r| r.to_vec()).collect(),
                    refs: refs.iter().map(|r| r.to_vec()).collect(),
                })
                .collect(),
        };
        AffineSystem::from_json(&raw).unwrap()
    }

    fn identity_system() -> AffineSystem {
        let id: &[&[f64]] = &[&[1.0, 0.0], &[0.0, 1.0]];
        system(2, &[(id, &[&[0.0, 0.0], &[1.0, 0.0]]), (id, &[&[0.0, 0.0], &[0.0, 1.0]])])
    }

    #[test]
    fn t_examples() {
        let s = system(1, &[(&[&[1.0]], &[&[0.0], &[1.0]])]);
        assert!(injective_t(&s, 1e-9).unwrap());
        let same = system(1, &[(&[&[1.0]], &[&[2.0], &[2.0]])]);
        assert!(!injective_t(&same, 1e-9).unwrap());
        assert!(build_t(&same).unwrap().iter().all(|&x| x == 0.0));
        let t = build_t(&identity_system()).unwrap();
        assert_eq!(t.nrows(), 2);
        assert!(injective_t(&identity_system(), 1e-9).unwrap());
        let single = system(1, &[(&[&[1.0]], &[&[0.0]])]);
        assert_eq!(build_t(&single), Err(AffineError::TooFewReferences(1)));
    }

    #[test]
    fn tu_examples() {
        let s = system(1, &[(&[&[1.0]], &[&[-3.0]])]);
        let u = DVector::from_element(1, 3.0);
        assert!(build_tu(&s, &u).unwrap().iter().all(|&x| x == 0.0));
        assert!(!injective_tu(&s, &u, 1e-9).unwrap());
        let id = identity_system();
        for u in [DVector::zeros(2), DVector::from_vec(vec![0.3, -2.0])] {
            assert!(injective_tu(&id, &u, 1e-9).unwrap());
        }
        assert!(matches!(
            build_tu(&id, &DVector::zeros(3)),
            Err(AffineError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn identity_system_certified() {
        let r = check_affine_pr(&identity_system(), &AffineOptions::default());
        assert_eq!(r.verdict, AffineVerdict::CertifiedYes);
        assert_eq!(r.reasons.len(), 1);

        let id: &[&[f64]] = &[&[1.0, 0.0], &[0.0, 1.0]];
        let spanning = system(2, &[(id, &[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]])]);
        let r = check_affine_pr(&spanning, &AffineOptions::default());
        assert_eq!(r.verdict, AffineVerdict::CertifiedYes);
        assert!(r.reasons.iter().any(|x| x.contains("span every measurement space")));
    }

    #[test]
    fn single_reference_counterexample() {
        let s = system(1, &[(&[&[1.0]], &[&[5.0]])]);
        let r = check_affine_pr(&s, &AffineOptions::default());
        assert_eq!(r.verdict, AffineVerdict::CertifiedNo);
        let ce = r.counterexample.unwrap();
        assert!((ce.u[0] + 5.0).abs() < 1e-12);
        assert!(ce.f != ce.g);
        assert!(((ce.f[0] + 5.0).abs() - (ce.g[0] + 5.0).abs()).abs() < 1e-12);
    }

    #[test]
    fn scalar_certificate() {
        // second measurement has equal references, the first alone is injective
        let s = system(1, &[(&[&[2.0]], &[&[0.0], &[1.0]]), (&[&[1.0]], &[&[3.0], &[3.0]])]);
        let r = check_affine_pr(&s, &AffineOptions::default());
        assert_eq!(r.verdict, AffineVerdict::CertifiedYes);
        assert!(r.reasons.iter().any(|x| x.starts_with("scalar case")));
    }

    #[test]
    fn necessity_pair() {
        // b_0 = Phi f0 with f0 = (1, 2); T has null vector e2
        let phi: &[&[f64]] = &[&[1.0, 0.0], &[0.0, 1.0]];
        let s = system(2, &[(phi, &[&[1.0, 2.0], &[4.0, 2.0]])]);
        assert!(!injective_t(&s, 1e-9).unwrap());
        let r = check_affine_pr(&s, &AffineOptions::default());
        assert_eq!(r.verdict, AffineVerdict::CertifiedNo);
        let ce = r.counterexample.unwrap();
        let f = DVector::from_vec(ce.f.clone());
        let g = DVector::from_vec(ce.g.clone());
        for (a, b) in s.magnitudes(&f).iter().zip(s.magnitudes(&g)) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn falsifier_finds_singular_tu() {
        // N = 1 in R^2 with p = 2: T_u has one row per measurement, two
        // measurements; singular T_u exist (e.g. where Phi u + b vanish)
        let phi: &[&[f64]] = &[&[1.0, 0.5], &[0.2, 1.0]];
        let s = system(2, &[(phi, &[&[1.0, -1.0]]), (&[&[0.0, 1.0], &[1.0, 1.0]], &[&[2.0, 0.5]])]);
        let r = check_affine_pr(&s, &AffineOptions::default());
        assert_eq!(r.verdict, AffineVerdict::CertifiedNo);
        let ce = r.counterexample.unwrap();
        assert!(ce.max_magnitude_gap <= 1e-10 * 10.0);
    }
}
