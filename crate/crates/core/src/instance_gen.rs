//! Seeded synthetic instances. Identical specs give bit-identical output;
//! the random stream is the documented SplitMix64 of [`crate::rng`].

use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affine::{AffineSystemJson, MeasurementJson};
use crate::gram;
use crate::graph_model::{observe, GraphInstance, SimpleGraph, VectorField};
use crate::linalg;
use crate::rng::Rng64;
use crate::spline_hat::{check_criterion, Complex64, ComplexCoeffSeq};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown instance kind '{0}'")]
    UnknownKind(String),
    #[error("could not draw a well-conditioned instance after {0} attempts")]
    Exhausted(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenKind {
    RandomField,
    CirculantCounterexample,
    GluedSimplices,
    RandomRangeMatrix,
    RandomSpline,
    RandomAffineSystem,
}

impl GenKind {
    pub const ALL: [GenKind; 6] = [
        GenKind::RandomField,
        GenKind::CirculantCounterexample,
        GenKind::GluedSimplices,
        GenKind::RandomRangeMatrix,
        GenKind::RandomSpline,
        GenKind::RandomAffineSystem,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GenKind::RandomField => "random-field",
            GenKind::CirculantCounterexample => "circulant-counterexample",
            GenKind::GluedSimplices => "glued-simplices",
            GenKind::RandomRangeMatrix => "random-range-matrix",
            GenKind::RandomSpline => "random-spline",
            GenKind::RandomAffineSystem => "random-affine-system",
        }
    }
}

impl FromStr for GenKind {
    type Err = GenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.to_ascii_lowercase().replace('_', "-");
        GenKind::ALL
            .into_iter()
            .find(|k| k.name() == key || k.name().replace('-', "") == key)
            .ok_or_else(|| GenError::UnknownKind(s.to_string()))
    }
}

/// Kind-specific parameters; unset values take the documented defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenParams {
    /// Vertices (fields), rows (range matrix), or coefficient count (spline).
    pub n: Option<usize>,
    /// Vector dimension, simplex dimension, or measurement space dimension.
    pub d: Option<usize>,
    /// Columns of a range matrix, or number of affine measurements.
    pub m: Option<usize>,
    /// Number of glued simplices.
    pub length: Option<usize>,
    /// References per affine measurement.
    pub refs: Option<usize>,
    /// Coefficient dimension of an affine system.
    pub p: Option<usize>,
    /// Edge probability of a random graph; absent means complete.
    pub density: Option<f64>,
    /// Draw range-matrix rows from this many random directions.
    pub directions: Option<usize>,
    /// Exact number of nonzero-Im positions of a spline.
    pub im_positions: Option<usize>,
    /// `chain` or `tree` (glued simplices); `generic`, `realized` or
    /// `single` (affine systems).
    pub mode: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub seed: u64,
    pub kind: GenKind,
    #[serde(default)]
    pub params: GenParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeMatrixInstance {
    pub matrix: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Instance {
    Graph(GraphInstance),
    RangeMatrix(RangeMatrixInstance),
    Spline(serde_json::Value),
    Affine(AffineSystemJson),
}

fn need(cond: bool, msg: &str) -> Result<(), GenError> {
    if cond {
        Ok(())
    } else {
        Err(GenError::InvalidParameter(msg.to_string()))
    }
}

pub fn generate(spec: &GenSpec) -> Result<Instance, GenError> {
    let mut rng = Rng64::new(spec.seed);
    let p = &spec.params;
    match spec.kind {
        GenKind::RandomField => {
            let n = p.n.unwrap_or(6);
            let d = p.d.unwrap_or(2);
            let (g, f) = random_field(&mut rng, n, d, p.density)?;
            Ok(Instance::Graph(graph_instance(&g, &f)))
        }
        GenKind::CirculantCounterexample => {
            let (g, h, alt) = circulant_counterexample(p.n.unwrap_or(4))?;
            let mut inst = graph_instance(&g, &h);
            inst.realizations = Some(vec![alt.vectors().to_vec()]);
            Ok(Instance::Graph(inst))
        }
        GenKind::GluedSimplices => {
            let d = p.d.unwrap_or(2);
            let length = p.length.unwrap_or(3);
            let tree = match p.mode.as_deref() {
                None | Some("chain") => false,
                Some("tree") => true,
                Some(other) => return Err(GenError::InvalidParameter(format!("mode '{other}' (chain|tree)"))),
            };
            let (g, f) = glued_simplices(&mut rng, d, length, tree)?;
            Ok(Instance::Graph(graph_instance(&g, &f)))
        }
        GenKind::RandomRangeMatrix => {
            let rows = p.n.unwrap_or(4);
            let cols = p.m.unwrap_or(2);
            let a = random_range_matrix(&mut rng, rows, cols, p.directions)?;
            Ok(Instance::RangeMatrix(RangeMatrixInstance {
                matrix: (0..a.nrows()).map(|i| a.row(i).iter().copied().collect()).collect(),
            }))
        }
        GenKind::RandomSpline => {
            let len = p.n.or(p.length).unwrap_or(5);
            let c = random_spline(&mut rng, len, p.im_positions)?;
            Ok(Instance::Spline(c.to_json_value()))
        }
        GenKind::RandomAffineSystem => {
            let mode = AffineMode::parse(p.mode.as_deref())?;
            let sys = random_affine_system(
                &mut rng,
                p.p.unwrap_or(2),
                p.d.unwrap_or(2),
                p.m.unwrap_or(3),
                p.refs.unwrap_or(2),
                mode,
            )?;
            Ok(Instance::Affine(sys))
        }
    }
}

fn graph_instance(g: &SimpleGraph, f: &VectorField) -> GraphInstance {
    let obs = observe(g, f).expect("field matches graph");
    GraphInstance::from_parts(g, Some(f), Some(&obs), f.dim())
}

/// `n` vertices with i.i.d. standard normal coordinates in `R^d`; complete
/// graph, or each edge kept with probability `density`.
pub fn random_field(rng: &mut Rng64, n: usize, d: usize, density: Option<f64>) -> Result<(SimpleGraph, VectorField), GenError> {
    need(d >= 1, "d must be at least 1")?;
    let graph = match density {
        None => SimpleGraph::complete(n),
        Some(q) => {
            need((0.0..=1.0).contains(&q), "density must lie in [0, 1]")?;
            let mut edges = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    if rng.uniform() < q {
                        edges.push((i, j));
                    }
                }
            }
            SimpleGraph::new(n, &edges).expect("valid edges")
        }
    };
    let vectors = (0..n).map(|_| rng.normal_vec(d)).collect();
    Ok((graph, VectorField::new(d, vectors).expect("dimension checked")))
}

/// The cycle `C_n` (`n` even) with `h_i = (1,0)` for even `i` and `(0,1)`
/// for odd `i`, and the second field `h'_i = R^i (1,0)` for the quarter turn
/// `R`: `(1,0), (0,1), (-1,0), (0,-1), ...`. Both have unit norms and
/// neighbour distances `sqrt(2)`; `<h_0, h_2> = 1` but `<h'_0, h'_2> = -1`.
pub fn circulant_counterexample(n: usize) -> Result<(SimpleGraph, VectorField, VectorField), GenError> {
    need(n >= 4 && n.is_multiple_of(2), "n must be even and at least 4")?;
    let h = (0..n)
        .map(|i| if i % 2 == 0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] })
        .collect();
    let turns = [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]];
    let alt = (0..n).map(|i| turns[i % 4].to_vec()).collect();
    Ok((
        SimpleGraph::cycle(n),
        VectorField::new(2, h).expect("2-d"),
        VectorField::new(2, alt).expect("2-d"),
    ))
}

const MAX_DRAWS: usize = 1000;

/// `length` simplices of dimension `d` glued along `d`-vertex faces. A chain
/// glues each new vertex to the newest face; a tree picks a random simplex
/// and face. Vectors are redrawn until every simplex is affinely independent
/// and every glued face is linearly independent with a condition number
/// below `1e4`.
pub fn glued_simplices(rng: &mut Rng64, d: usize, length: usize, tree: bool) -> Result<(SimpleGraph, VectorField), GenError> {
    need(d >= 1, "d must be at least 1")?;
    need(length >= 1, "length must be at least 1")?;
    let n = d + length;
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut edges = Vec::new();
    let base: Vec<usize> = (0..=d).collect();
    for _ in 0..MAX_DRAWS {
        let cand: Vec<Vec<f64>> = (0..=d).map(|_| rng.normal_vec(d)).collect();
        if well_shaped_simplex(&cand) {
            vectors = cand;
            break;
        }
    }
    if vectors.is_empty() {
        return Err(GenError::Exhausted(MAX_DRAWS));
    }
    for i in 0..=d {
        for j in i + 1..=d {
            edges.push((i, j));
        }
    }
    let mut simplices = vec![base];
    for v in d + 1..n {
        let (host, skip) = if tree {
            (rng.below(simplices.len() as u64) as usize, rng.below(d as u64 + 1) as usize)
        } else {
            (simplices.len() - 1, 0)
        };
        // simplices keep insertion order, so index 0 of a chain simplex is its oldest vertex
        let face: Vec<usize> = simplices[host]
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != skip)
            .map(|(_, &x)| x)
            .collect();
        let face_vecs: Vec<Vec<f64>> = face.iter().map(|&x| vectors[x].clone()).collect();
        let mut placed = None;
        for _ in 0..MAX_DRAWS {
            let cand = rng.normal_vec(d);
            let mut pts = face_vecs.clone();
            pts.push(cand.clone());
            if well_shaped_simplex(&pts) {
                placed = Some(cand);
                break;
            }
        }
        vectors.push(placed.ok_or(GenError::Exhausted(MAX_DRAWS))?);
        for &x in &face {
            edges.push((x.min(v), x.max(v)));
        }
        let mut s = face;
        s.push(v);
        simplices.push(s);
    }
    let graph = SimpleGraph::new(n, &edges).expect("distinct edges");
    Ok((graph, VectorField::new(d, vectors).expect("dimension d")))
}

/// Affine independence with margin, and every `d`-subset (each possible
/// glued face) linearly independent with condition number below `1e4`.
fn well_shaped_simplex(pts: &[Vec<f64>]) -> bool {
    let d = pts[0].len();
    let f = VectorField::new(d, pts.to_vec()).expect("uniform dimension");
    let g = f.gram();
    if !gram::affinely_independent_block(&g, 1e-3).unwrap_or(false) {
        return false;
    }
    (0..pts.len()).all(|skip| {
        let idx: Vec<usize> = (0..pts.len()).filter(|&k| k != skip).collect();
        let m = DMatrix::from_fn(d, d, |r, c| pts[idx[c]][r]);
        linalg::condition_number(&m) < 1e4
    })
}

/// Full-column-rank `rows x cols` matrix. With `directions = k`, every row is
/// a nonzero multiple of one of `k` random unit vectors (redrawn until the
/// rank is full), which makes rank-deficient row subsets common.
pub fn random_range_matrix(rng: &mut Rng64, rows: usize, cols: usize, directions: Option<usize>) -> Result<DMatrix<f64>, GenError> {
    need(cols >= 1 && rows >= cols, "need rows >= cols >= 1")?;
    for _ in 0..MAX_DRAWS {
        let a = match directions {
            None => DMatrix::from_fn(rows, cols, |_, _| rng.normal()),
            Some(k) => {
                need(k >= 1, "directions must be at least 1")?;
                let pool: Vec<Vec<f64>> = (0..k).map(|_| rng.unit_vector(cols)).collect();
                let mut a = DMatrix::zeros(rows, cols);
                for r in 0..rows {
                    let dir = &pool[rng.below(k as u64) as usize];
                    let scale = rng.uniform_in(0.5, 2.0) * if rng.coin() { 1.0 } else { -1.0 };
                    for c in 0..cols {
                        a[(r, c)] = scale * dir[c];
                    }
                }
                a
            }
        };
        if linalg::rank(&a, 1e-8) == cols {
            return Ok(a);
        }
    }
    Err(GenError::Exhausted(MAX_DRAWS))
}

/// `len` coefficients with magnitudes in `[0.5, 2]` and no interior zeros.
/// Consecutive phases differ by `0` or `pi` except at exactly `im_positions`
/// links (default: zero or one, at random), where the jump stays at least
/// `0.2` away from `0` and `pi`.
pub fn random_spline(rng: &mut Rng64, len: usize, im_positions: Option<usize>) -> Result<ComplexCoeffSeq, GenError> {
    need(len >= 1, "length must be at least 1")?;
    let links = len - 1;
    let count = match im_positions {
        Some(p) => {
            need(p <= links, "im_positions cannot exceed length - 1")?;
            p
        }
        None => (links.min(1) as u64).min(rng.below(2)) as usize,
    };
    // choose `count` distinct link positions
    let mut chosen: Vec<usize> = (0..links).collect();
    for i in 0..count {
        let j = i + rng.below((links - i) as u64) as usize;
        chosen.swap(i, j);
    }
    let mut is_im = vec![false; links];
    for &k in &chosen[..count] {
        is_im[k] = true;
    }
    let offset = rng.range_inclusive(0, 6) as i64 - 3;
    let mut theta = rng.uniform_in(0.0, 2.0 * std::f64::consts::PI);
    let mut coeffs = Vec::with_capacity(len);
    coeffs.push(Complex64::from_polar(rng.uniform_in(0.5, 2.0), theta));
    for &im in &is_im {
        let jump = if im {
            let base = rng.uniform_in(0.2, std::f64::consts::PI - 0.2);
            if rng.coin() {
                base
            } else {
                -base
            }
        } else if rng.coin() {
            std::f64::consts::PI
        } else {
            0.0
        };
        theta += jump;
        coeffs.push(Complex64::from_polar(rng.uniform_in(0.5, 2.0), theta));
    }
    let c = ComplexCoeffSeq::new(offset, coeffs);
    debug_assert_eq!(check_criterion(&c).im_positions.len(), count);
    Ok(c)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AffineMode {
    /// Gaussian measurements and references.
    Generic,
    /// Reference group 0 is `Phi f0` and all reference differences are
    /// orthogonal to `Phi h0`, so `T` has the null vector `h0`.
    Realized,
    /// One reference per measurement.
    Single,
}

impl AffineMode {
    fn parse(s: Option<&str>) -> Result<Self, GenError> {
        match s {
            None | Some("generic") => Ok(Self::Generic),
            Some("realized") => Ok(Self::Realized),
            Some("single") => Ok(Self::Single),
            Some(other) => Err(GenError::InvalidParameter(format!("mode '{other}' (generic|realized|single)"))),
        }
    }
}

pub fn random_affine_system(
    rng: &mut Rng64,
    p: usize,
    d: usize,
    measurements: usize,
    refs: usize,
    mode: AffineMode,
) -> Result<AffineSystemJson, GenError> {
    need(p >= 1 && d >= 1 && measurements >= 1, "p, d and m must be positive")?;
    let refs = if mode == AffineMode::Single { 1 } else { refs };
    need(refs >= 1, "refs must be positive")?;
    let f0 = DVector::from_vec(rng.normal_vec(p));
    let h0 = DVector::from_vec(rng.unit_vector(p));
    let mut out = Vec::with_capacity(measurements);
    for _ in 0..measurements {
        let phi = DMatrix::from_fn(d, p, |_, _| rng.normal());
        let refs_v: Vec<DVector<f64>> = match mode {
            AffineMode::Generic | AffineMode::Single => (0..refs).map(|_| DVector::from_vec(rng.normal_vec(d))).collect(),
            AffineMode::Realized => {
                let b0 = &phi * &f0;
                let w = &phi * &h0;
                let wn = w.norm_squared();
                let mut v = vec![b0.clone()];
                for _ in 1..refs {
                    let r = DVector::from_vec(rng.normal_vec(d));
                    let r = if wn > 0.0 { &r - &w * (w.dot(&r) / wn) } else { r };
                    v.push(&b0 + r);
                }
                v
            }
        };
        out.push(MeasurementJson {
            phi: (0..d).map(|i| phi.row(i).iter().copied().collect()).collect(),
            refs: refs_v.iter().map(|r| r.iter().copied().collect()).collect(),
        });
    }
    Ok(AffineSystemJson { p, measurements: out })
}
