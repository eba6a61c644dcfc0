//! Complex hat splines `f = sum_k c(k) h(. - k)` with `h(t) = max(1 - |t|, 0)`.
//!
//! On `[k, k+1]`, `f(k+u) = c(k)(1-u) + c(k+1)u`, so `|f|^2` is a quadratic in
//! `u` fixed by `|c(k)|`, `|c(k+1)|` and the midpoint value:
//!
//! `|f(k+1/2)|^2 = |c(k)|^2/4 + |c(k+1)|^2/4 + Re(c(k) conj(c(k+1)))/2`.
//!
//! Half-integer samples therefore carry all the magnitude information, and
//! recovery only has to choose the sign of each `Im(c(k) conj(c(k+1)))`.

use nalgebra::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Complex64 = Complex<f64>;

pub const DEFAULT_TOL: f64 = 1e-9;

/// Largest number of nonzero-Im positions accepted by [`recover`].
pub const MAX_IM_POSITIONS: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SplineError {
    #[error("inconsistent samples: {0}")]
    InconsistentSamples(String),
    #[error("sample window mismatch: {0}")]
    WindowMismatch(String),
    #[error("coefficient {0} vanishes inside the support; the phases on either side are independent")]
    SupportGap(i64),
    #[error("{found} nonzero-Im positions exceed the branch cap of {max}")]
    TooManyBranches { found: usize, max: usize },
    #[error("malformed coefficient entry at index {0}")]
    MalformedCoefficient(usize),
}

/// Coefficients `c(offset), ..., c(offset + len - 1)`, trimmed so the first
/// and last stored entries are nonzero. Empty means the zero function.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexCoeffSeq {
    offset: i64,
    coeffs: Vec<Complex64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoeffJson {
    offset: i64,
    coeffs: Vec<Vec<f64>>,
}

impl ComplexCoeffSeq {
    pub fn new(offset: i64, coeffs: Vec<Complex64>) -> Self {
        let zero = Complex64::new(0.0, 0.0);
        let Some(first) = coeffs.iter().position(|&c| c != zero) else {
            return Self::zero();
        };
        let last = coeffs.iter().rposition(|&c| c != zero).expect("nonzero entry exists");
        Self {
            offset: offset + first as i64,
            coeffs: coeffs[first..=last].to_vec(),
        }
    }

    pub fn zero() -> Self {
        Self {
            offset: 0,
            coeffs: Vec::new(),
        }
    }

    pub fn from_pairs(offset: i64, pairs: &[(f64, f64)]) -> Self {
        Self::new(offset, pairs.iter().map(|&(re, im)| Complex64::new(re, im)).collect())
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let raw: CoeffJson = serde_json::from_str(text)?;
        Self::try_from_raw(raw).map_err(serde::de::Error::custom)
    }

    fn try_from_raw(raw: CoeffJson) -> Result<Self, SplineError> {
        let coeffs = raw
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, p)| match p.as_slice() {
                [re, im] if re.is_finite() && im.is_finite() => Ok(Complex64::new(*re, *im)),
                _ => Err(SplineError::MalformedCoefficient(i)),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::new(raw.offset, coeffs))
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(CoeffJson {
            offset: self.offset,
            coeffs: self.coeffs.iter().map(|c| vec![c.re, c.im]).collect(),
        })
        .expect("plain data serializes")
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `c(k)`, zero outside the stored range.
    pub fn get(&self, k: i64) -> Complex64 {
        let idx = k - self.offset;
        if idx < 0 || idx >= self.coeffs.len() as i64 {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[idx as usize]
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        let k = t.floor();
        let u = t - k;
        let k = k as i64;
        self.get(k) * (1.0 - u) + self.get(k + 1) * u
    }

    pub fn real_part(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.re).collect()
    }

    pub fn imag_part(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.im).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriterionReport {
    pub retrievable: bool,
    pub support_gap: Option<i64>,
    pub im_positions: Vec<i64>,
}

/// `Im(c(k) conj(c(k+1)))` counts as nonzero when it exceeds
/// `sqrt(tol) |c(k)| |c(k+1)|`: the resolution at which magnitude samples
/// can see it, since recovery reads `Im^2` off a difference of squares.
pub fn im_threshold(tol: f64) -> f64 {
    tol.sqrt()
}

pub fn check_criterion(c: &ComplexCoeffSeq) -> CriterionReport {
    check_criterion_tol(c, DEFAULT_TOL)
}

/// No interior zero coefficient (`|c(k)| <= tol max|c|` counts as zero) and
/// at most one position with a nonzero `Im(c(k) conj(c(k+1)))`.
pub fn check_criterion_tol(c: &ComplexCoeffSeq, tol: f64) -> CriterionReport {
    let zero_cut = tol * c.max_abs();
    let support_gap = c
        .coeffs
        .iter()
        .position(|z| z.norm() <= zero_cut)
        .map(|i| c.offset + i as i64);
    let rel = im_threshold(tol);
    let im_positions: Vec<i64> = c
        .coeffs
        .windows(2)
        .enumerate()
        .filter(|(_, w)| (w[0] * w[1].conj()).im.abs() > rel * w[0].norm() * w[1].norm())
        .map(|(i, _)| c.offset + i as i64)
        .collect();
    CriterionReport {
        retrievable: support_gap.is_none() && im_positions.len() <= 1,
        support_gap,
        im_positions,
    }
}

/// `c' = z c` or `c' = z conj(c)` for a unimodular `z`, coefficientwise within
/// `tol * (1 + max|c|)`.
pub fn conjugate_equivalent(c: &ComplexCoeffSeq, c2: &ComplexCoeffSeq, tol: f64) -> bool {
    let scale = 1.0 + c.max_abs().max(c2.max_abs());
    let bound = tol * scale;
    if c.is_zero() || c2.is_zero() {
        let other = if c.is_zero() { c2 } else { c };
        return other.max_abs() <= bound;
    }
    let lo = c.offset.min(c2.offset);
    let hi = (c.offset + c.len() as i64).max(c2.offset + c2.len() as i64);
    let pivot = (lo..hi)
        .find(|&k| c.get(k).norm() > bound)
        .unwrap_or(c.offset);
    let anchor = c.get(pivot);
    let target = c2.get(pivot);
    if target.norm() == 0.0 {
        return false;
    }
    let close = |z: Complex64, conj: bool| {
        (lo..hi).all(|k| {
            let base = if conj { c.get(k).conj() } else { c.get(k) };
            (c2.get(k) - z * base).norm() <= bound
        })
    };
    let z = target / anchor;
    let z_conj = target / anchor.conj();
    close(z / z.norm(), false) || close(z_conj / z_conj.norm(), true)
}

/// `|f(t)|` on the half-integer grid `grid_start + j/2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MagnitudeSamples {
    pub grid_start: f64,
    pub values: Vec<f64>,
}

impl MagnitudeSamples {
    pub fn points(&self) -> Vec<f64> {
        (0..self.values.len()).map(|j| self.grid_start + 0.5 * j as f64).collect()
    }
}

/// Samples over `[K- - 1, K+ + 1]`; the zero sequence uses `[-1, 1]`.
pub fn sample_magnitudes(c: &ComplexCoeffSeq) -> MagnitudeSamples {
    let start = c.offset - 1;
    let count = 2 * (c.len() + 1) + 1;
    let values = (0..count)
        .map(|j| {
            let k = start + (j / 2) as i64;
            if j % 2 == 0 {
                c.get(k).norm()
            } else {
                (0.5 * (c.get(k) + c.get(k + 1))).norm()
            }
        })
        .collect();
    MagnitudeSamples {
        grid_start: start as f64,
        values,
    }
}

struct Link {
    re: f64,
    im_abs: f64,
}

/// Every conjugate-equivalence class of coefficient sequences reproducing the
/// samples, one gauge-fixed representative each (first coefficient real
/// positive), in a canonical order.
pub fn recover(samples: &MagnitudeSamples, tol: f64) -> Result<Vec<ComplexCoeffSeq>, SplineError> {
    let v = &samples.values;
    if !samples.grid_start.is_finite() || samples.grid_start.fract() != 0.0 {
        return Err(SplineError::WindowMismatch(format!(
            "grid must start at an integer, got {}",
            samples.grid_start
        )));
    }
    if v.len() < 3 || v.len().is_multiple_of(2) {
        return Err(SplineError::WindowMismatch(format!(
            "expected an odd number (>= 3) of half-integer samples, got {}",
            v.len()
        )));
    }
    if let Some(j) = v.iter().position(|x| !x.is_finite()) {
        return Err(SplineError::InconsistentSamples(format!("sample {j} is not finite")));
    }
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let zero_cut = tol * scale;
    if let Some(j) = v.iter().position(|&x| x < -zero_cut) {
        return Err(SplineError::InconsistentSamples(format!("sample {j} is negative")));
    }
    let start = samples.grid_start as i64;
    if scale == 0.0 || v.iter().all(|&x| x <= zero_cut) {
        return Ok(vec![ComplexCoeffSeq::zero()]);
    }
    if v[0] > zero_cut || v[v.len() - 1] > zero_cut {
        return Err(SplineError::WindowMismatch(
            "the window must start and end where f vanishes".into(),
        ));
    }

    let mags: Vec<f64> = v.iter().step_by(2).map(|&x| x.max(0.0)).collect();
    let mids: Vec<f64> = v.iter().skip(1).step_by(2).map(|&x| x.max(0.0)).collect();
    // mids[k] sits between mags[k] and mags[k+1]
    let first = mags.iter().position(|&m| m > zero_cut);
    let Some(first) = first else {
        // only midpoints nonzero: impossible for a hat spline
        return Err(SplineError::InconsistentSamples(
            "nonzero midpoint between vanishing integer samples".into(),
        ));
    };
    let last = mags.iter().rposition(|&m| m > zero_cut).expect("first exists");
    if let Some(gap) = (first..=last).find(|&k| mags[k] <= zero_cut) {
        return Err(SplineError::SupportGap(start + gap as i64));
    }
    for (k, &mid) in mids.iter().enumerate() {
        let (a, b) = (mags[k], mags[k + 1]);
        if k < first || k >= last {
            // one endpoint vanishes: |f(k+1/2)| = max(a, b)/2
            let expect = 0.5 * a.max(b);
            if (mid - expect).abs() > tol * scale.max(1.0) {
                return Err(SplineError::InconsistentSamples(format!(
                    "midpoint at t = {} should be {expect}",
                    start as f64 + k as f64 + 0.5
                )));
            }
        }
    }

    let mut links = Vec::with_capacity(last - first);
    for k in first..last {
        let (a, b) = (mags[k], mags[k + 1]);
        let mid = mids[k];
        let re = 2.0 * mid * mid - 0.5 * (a * a + b * b);
        let prod = a * a * b * b;
        let disc = prod - re * re;
        let im_abs = if disc <= tol * prod {
            if disc < -tol * prod {
                return Err(SplineError::InconsistentSamples(format!(
                    "midpoint at t = {} violates the interpolation bounds",
                    start as f64 + k as f64 + 0.5
                )));
            }
            0.0
        } else {
            disc.sqrt()
        };
        links.push(Link { re, im_abs });
    }

    let branch_positions: Vec<usize> = (0..links.len()).filter(|&i| links[i].im_abs > 0.0).collect();
    if branch_positions.len() > MAX_IM_POSITIONS {
        return Err(SplineError::TooManyBranches {
            found: branch_positions.len(),
            max: MAX_IM_POSITIONS,
        });
    }
    // the first branch is fixed: flipping every sign is complex conjugation
    let free = branch_positions.len().saturating_sub(1);
    let mut classes: Vec<ComplexCoeffSeq> = Vec::new();
    for pattern in 0..(1u64 << free) {
        let mut signs = vec![1.0; links.len()];
        for (bit, &pos) in branch_positions.iter().skip(1).enumerate() {
            if pattern >> bit & 1 == 1 {
                signs[pos] = -1.0;
            }
        }
        let mut theta = 0.0f64;
        let mut coeffs = vec![Complex64::from_polar(mags[first], 0.0)];
        for (i, link) in links.iter().enumerate() {
            // c(k) conj(c(k+1)) = R + iJ  =>  theta_{k+1} = theta_k - atan2(J, R)
            theta -= (signs[i] * link.im_abs).atan2(link.re);
            coeffs.push(Complex64::from_polar(mags[first + i + 1], theta));
        }
        let cand = ComplexCoeffSeq::new(start + first as i64, coeffs);
        if !classes.iter().any(|c| conjugate_equivalent(c, &cand, tol.sqrt())) {
            classes.push(cand);
        }
    }
    for cand in &classes {
        let resampled = sample_magnitudes(cand);
        if !samples_match(samples, &resampled, tol.sqrt() * scale.max(1.0)) {
            return Err(SplineError::InconsistentSamples(
                "no coefficient sequence reproduces the samples".into(),
            ));
        }
    }
    Ok(classes)
}

/// Largest deviation between two sample sets over the union of their grids
/// (missing points read as zero); `None` if the grids are misaligned.
pub fn sample_deviation(a: &MagnitudeSamples, b: &MagnitudeSamples) -> Option<f64> {
    let shift = (b.grid_start - a.grid_start) * 2.0;
    if shift.fract() != 0.0 {
        return None;
    }
    let shift = shift as i64;
    let lo = 0.min(shift);
    let hi = (a.values.len() as i64).max(shift + b.values.len() as i64);
    let at = |s: &MagnitudeSamples, j: i64| {
        if j < 0 || j >= s.values.len() as i64 {
            0.0
        } else {
            s.values[j as usize]
        }
    };
    Some((lo..hi).map(|j| (at(a, j) - at(b, j - shift)).abs()).fold(0.0, f64::max))
}

fn samples_match(a: &MagnitudeSamples, b: &MagnitudeSamples, tol: f64) -> bool {
    sample_deviation(a, b).is_some_and(|d| d <= tol)
}

/// Real sequences: no zero strictly between the first and last nonzero entry
/// (`|d(k)| <= tol max|d|` counts as zero).
pub fn check_real_criterion(d: &[f64], tol: f64) -> bool {
    let scale = d.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let cut = tol * scale;
    let nonzero: Vec<bool> = d.iter().map(|x| x.abs() > cut).collect();
    let (Some(first), Some(last)) = (nonzero.iter().position(|&b| b), nonzero.iter().rposition(|&b| b)) else {
        return true;
    };
    nonzero[first..=last].iter().all(|&b| b)
}
