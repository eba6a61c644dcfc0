//! Recovery of a vector field, up to an orthogonal matrix, from its vertex
//! norms and edge relative norms.
//!
//! Two routes are provided. On a complete graph every inner product is known
//! and the whole Gram matrix is factorized at once. On a general graph the
//! field is grown simplex by simplex along the simplex graph: a root simplex is
//! embedded from its Gram block, and every neighbouring simplex contributes one
//! new vertex, found by solving a `d x d` system against the shared face.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::graph_model::{GraphError, MagnitudeObservation, SimpleGraph, VectorField};
use crate::gram::{self, PartialGram};
use crate::linalg;
use crate::simplex_graph::{self, SimplexError, SimplexGraph};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReconstructionError {
    #[error("Gram matrix is not positive semidefinite (eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("Gram matrix has rank {rank}, more than the dimension {dim}")]
    RankExceedsDim { rank: usize, dim: usize },
    #[error("norms or distances of the two simplices differ by {mismatch:e}")]
    PreconditionViolated { mismatch: f64 },
    #[error("source points are not affinely independent")]
    Degenerate,
    #[error("no nondegenerate simplex in the graph; the field is not certified unique")]
    NoSimplex,
    #[error("shared-face system has condition number {condition:e}")]
    IllConditioned { condition: f64 },
    #[error("reconstruction residual {residual:e} exceeds {threshold:e}")]
    Inconsistent { residual: f64, threshold: f64 },
    #[error("graph is not complete")]
    NotComplete,
    #[error("simplex dimension d must be at least 1")]
    ZeroDimension,
    #[error("point sets have mismatched shapes")]
    ShapeMismatch,
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Simplex(#[from] SimplexError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Method {
    CompleteGram,
    SimplexPropagation,
}

#[derive(Clone, Copy, Debug)]
pub struct ReconstructOptions {
    /// Relative eigenvalue threshold for rank and PSD decisions in embeddings,
    /// and `1 / tol` is the largest accepted condition number of a face solve.
    pub tol: f64,
    /// Relative positive-definiteness threshold for the simplex graph tests.
    pub pd_tol: f64,
    /// Maximum accepted consistency residual.
    pub residual_tol: f64,
}

impl Default for ReconstructOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            pd_tol: gram::DEFAULT_PD_TOL,
            residual_tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReconstructionResult {
    #[serde(serialize_with = "serialize_field")]
    pub field: VectorField,
    pub certified_unique: bool,
    pub residual: f64,
    pub method: Method,
    /// Vertices not reached by any simplex; their vectors are left at zero and
    /// they do not contribute to the residual.
    pub unreached: Vec<usize>,
    /// Number of simplex-graph components embedded (each in its own frame).
    pub components: usize,
}

fn serialize_field<S: serde::Serializer>(f: &VectorField, s: S) -> Result<S::Ok, S::Error> {
    f.vectors().serialize(s)
}

/// Factorizes `G ~ X^T X` with `X` of size `d x m` and returns the columns of
/// `X`. Eigenvalues within `tol * scale` of zero are clamped, where `scale` is
/// the largest eigenvalue magnitude.
pub fn embed_from_gram(g: &DMatrix<f64>, d: usize, tol: f64) -> Result<Vec<Vec<f64>>, ReconstructionError> {
    if d == 0 {
        return Err(ReconstructionError::ZeroDimension);
    }
    let m = g.nrows();
    if g.ncols() != m {
        return Err(ReconstructionError::ShapeMismatch);
    }
    let (values, vectors) = linalg::sorted_symmetric_eigen(g);
    let scale = values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok(vec![vec![0.0; d]; m]);
    }
    let threshold = tol * scale;
    if let Some(&lo) = values.last() {
        if lo < -threshold {
            return Err(ReconstructionError::NotPsd { min_eigenvalue: lo });
        }
    }
    let rank = values.iter().filter(|&&v| v > threshold).count();
    if rank > d {
        return Err(ReconstructionError::RankExceedsDim { rank, dim: d });
    }
    let mut points = vec![vec![0.0; d]; m];
    for (k, &lambda) in values.iter().take(rank).enumerate() {
        let s = lambda.sqrt();
        for (i, p) in points.iter_mut().enumerate() {
            p[k] = s * vectors[(i, k)];
        }
    }
    Ok(points)
}

/// Orthogonal `U` with `y_i = U x_i` for two congruent `d`-simplices given as
/// `d + 1` points in `R^d`. `U` solves `U (x_i - x_0) = y_i - y_0`, is checked
/// against `U x_0 = y_0`, and is re-orthogonalized by polar projection.
pub fn align_simplex(x: &[Vec<f64>], y: &[Vec<f64>], tol: f64) -> Result<DMatrix<f64>, ReconstructionError> {
    let k = x.len();
    if k == 0 || y.len() != k {
        return Err(ReconstructionError::ShapeMismatch);
    }
    let d = k - 1;
    if d == 0 || x.iter().chain(y).any(|p| p.len() != d) {
        return Err(ReconstructionError::ShapeMismatch);
    }
    let scale = 1.0
        + x.iter()
            .chain(y)
            .map(|p| linalg::norm(p))
            .fold(0.0, f64::max);
    let mut mismatch: f64 = 0.0;
    for i in 0..k {
        mismatch = mismatch.max((linalg::norm(&x[i]) - linalg::norm(&y[i])).abs());
        for j in i + 1..k {
            mismatch = mismatch.max((linalg::distance(&x[i], &x[j]) - linalg::distance(&y[i], &y[j])).abs());
        }
    }
    if mismatch > tol * scale {
        return Err(ReconstructionError::PreconditionViolated { mismatch });
    }
    let mut dx = DMatrix::zeros(d, d);
    let mut dy = DMatrix::zeros(d, d);
    for i in 1..k {
        for r in 0..d {
            dx[(r, i - 1)] = x[i][r] - x[0][r];
            dy[(r, i - 1)] = y[i][r] - y[0][r];
        }
    }
    let sv = linalg::singular_values(&dx);
    if sv.last().copied().unwrap_or(0.0) <= tol * sv[0].max(f64::MIN_POSITIVE) {
        return Err(ReconstructionError::Degenerate);
    }
    let inv = dx.clone().try_inverse().ok_or(ReconstructionError::Degenerate)?;
    let u = linalg::polar_orthogonal(&(dy * inv));
    let x0 = linalg::dvec(&x[0]);
    let y0 = linalg::dvec(&y[0]);
    let miss = (&u * x0 - y0).norm();
    if miss > tol.sqrt() * scale {
        return Err(ReconstructionError::PreconditionViolated { mismatch: miss });
    }
    Ok(u)
}

/// Residual `max |predicted - observed| / (1 + observed)` over vertex norms
/// and edge norms. Vertices where `frame` is `None` are skipped, and edges
/// whose endpoints live in different frames are skipped.
fn consistency_residual(
    graph: &SimpleGraph,
    obs: &MagnitudeObservation,
    points: &[Vec<f64>],
    frame: &[Option<usize>],
) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..graph.vertex_count() {
        if frame[i].is_some() {
            let o = obs.vertex_norm(i);
            worst = worst.max((linalg::norm(&points[i]) - o).abs() / (1.0 + o));
        }
    }
    for &(i, j) in graph.edges() {
        if frame[i].is_some() && frame[i] == frame[j] {
            let o = obs.edge_norm(i, j).unwrap_or(0.0);
            worst = worst.max((linalg::distance(&points[i], &points[j]) - o).abs() / (1.0 + o));
        }
    }
    worst
}

/// Complete-graph route: polarize all pairs and factorize the Gram matrix.
pub fn reconstruct_complete(
    obs: &MagnitudeObservation,
    graph: &SimpleGraph,
    d: usize,
    opts: &ReconstructOptions,
) -> Result<ReconstructionResult, ReconstructionError> {
    if !graph.is_complete() {
        return Err(ReconstructionError::NotComplete);
    }
    let n = graph.vertex_count();
    let pg = gram::polarize(obs, graph);
    let all: Vec<usize> = (0..n).collect();
    let g = pg.block(&all).map_err(SimplexError::from)?;
    let points = embed_from_gram(&g, d, opts.tol)?;
    let frame = vec![Some(0); n];
    let residual = consistency_residual(graph, obs, &points, &frame);
    if residual > opts.residual_tol {
        return Err(ReconstructionError::Inconsistent {
            residual,
            threshold: opts.residual_tol,
        });
    }
    Ok(ReconstructionResult {
        field: VectorField::new(d, points)?,
        certified_unique: true,
        residual,
        method: Method::CompleteGram,
        unreached: Vec::new(),
        components: 1,
    })
}

/// Simplex-graph route. Each connected component of the simplex graph is
/// embedded in its own frame, starting from its lexicographically smallest
/// simplex and proceeding breadth-first.
pub fn reconstruct_propagate(
    obs: &MagnitudeObservation,
    graph: &SimpleGraph,
    d: usize,
    opts: &ReconstructOptions,
) -> Result<ReconstructionResult, ReconstructionError> {
    let sg = simplex_graph::build_simplex_graph(graph, obs, d, opts.pd_tol)?;
    if sg.simplices.is_empty() {
        return Err(ReconstructionError::NoSimplex);
    }
    let report = simplex_graph::check_hypotheses(&sg, graph);
    let pg = gram::polarize(obs, graph);
    let n = graph.vertex_count();
    let mut points = vec![vec![0.0; d]; n];
    let mut frame: Vec<Option<usize>> = vec![None; n];
    let components = sg.components();
    for (frame_id, comp) in components.iter().enumerate() {
        let local = propagate_component(&sg, &pg, comp, d, opts)?;
        for (v, p) in local {
            if frame[v].is_none() {
                frame[v] = Some(frame_id);
                points[v] = p;
            }
        }
    }
    for frame_id in 0..components.len() {
        let members: Vec<usize> = (0..n).filter(|&v| frame[v] == Some(frame_id)).collect();
        refine_frame(graph, &pg, &members, &mut points);
    }
    let residual = consistency_residual(graph, obs, &points, &frame);
    if residual > opts.residual_tol {
        return Err(ReconstructionError::Inconsistent {
            residual,
            threshold: opts.residual_tol,
        });
    }
    let unreached: Vec<usize> = (0..n).filter(|&v| frame[v].is_none()).collect();
    Ok(ReconstructionResult {
        field: VectorField::new(d, points)?,
        certified_unique: report.certified && components.len() == 1,
        residual,
        method: Method::SimplexPropagation,
        unreached,
        components: components.len(),
    })
}

/// Largest frame (in unknowns) that gets a Gauss-Newton polish.
const MAX_REFINE_UNKNOWNS: usize = 1500;

/// Gauss-Newton polish of one frame on the equations `<x_i, x_j> = G_ij` for
/// every vertex and every edge inside the frame. Propagation solves each new
/// vertex from its face alone, so errors accumulate along long chains; a few
/// damped steps on all equations bring them back to rounding level. Steps
/// that do not reduce the largest residual are rejected.
fn refine_frame(graph: &SimpleGraph, pg: &PartialGram, members: &[usize], points: &mut [Vec<f64>]) {
    let d = points.first().map_or(0, Vec::len);
    let unknowns = d * members.len();
    if unknowns == 0 || unknowns > MAX_REFINE_UNKNOWNS {
        return;
    }
    let mut slot = vec![usize::MAX; points.len()];
    for (k, &v) in members.iter().enumerate() {
        slot[v] = k;
    }
    let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
    for &v in members {
        if let Some(g) = pg.get(v, v) {
            pairs.push((v, v, g));
        }
    }
    for &(i, j) in graph.edges() {
        if slot[i] != usize::MAX && slot[j] != usize::MAX {
            if let Some(g) = pg.get(i, j) {
                pairs.push((i, j, g));
            }
        }
    }
    let residuals = |pts: &[Vec<f64>]| -> DVector<f64> {
        DVector::from_iterator(pairs.len(), pairs.iter().map(|&(i, j, g)| linalg::dot(&pts[i], &pts[j]) - g))
    };
    let mut r = residuals(points);
    for _ in 0..5 {
        let worst = r.amax();
        if worst == 0.0 {
            break;
        }
        let mut jac = DMatrix::zeros(pairs.len(), unknowns);
        for (row, &(i, j, _)) in pairs.iter().enumerate() {
            for k in 0..d {
                jac[(row, slot[i] * d + k)] += points[j][k];
                jac[(row, slot[j] * d + k)] += points[i][k];
            }
        }
        let mut normal = jac.transpose() * &jac;
        let damping = 1e-12 * (1.0 + normal.diagonal().amax());
        for k in 0..unknowns {
            normal[(k, k)] += damping;
        }
        let Some(chol) = normal.cholesky() else {
            break;
        };
        let step = chol.solve(&(-(jac.transpose() * &r)));
        let mut trial = points.to_vec();
        for (k, &v) in members.iter().enumerate() {
            for c in 0..d {
                trial[v][c] += step[k * d + c];
            }
        }
        let rt = residuals(&trial);
        if rt.amax() >= worst {
            break;
        }
        points.clone_from_slice(&trial);
        r = rt;
    }
}

/// Embeds one component; returns `(vertex, point)` pairs in discovery order.
fn propagate_component(
    sg: &SimplexGraph,
    pg: &PartialGram,
    comp: &[usize],
    d: usize,
    opts: &ReconstructOptions,
) -> Result<Vec<(usize, Vec<f64>)>, ReconstructionError> {
    let adj = sg.adjacency();
    let root = comp[0];
    let root_vertices = &sg.simplices[root];
    let block = pg.block(root_vertices).map_err(SimplexError::from)?;
    let root_points = embed_from_gram(&block, d, opts.tol)?;

    let mut placed: std::collections::BTreeMap<usize, Vec<f64>> = std::collections::BTreeMap::new();
    let mut order = Vec::new();
    for (&v, p) in root_vertices.iter().zip(root_points) {
        placed.insert(v, p.clone());
        order.push((v, p));
    }

    let mut visited = vec![false; sg.simplices.len()];
    visited[root] = true;
    let mut queue = VecDeque::from([root]);
    while let Some(s) = queue.pop_front() {
        for &t in &adj[s] {
            if visited[t] {
                continue;
            }
            visited[t] = true;
            queue.push_back(t);
            let face: Vec<usize> = sg.simplices[t]
                .iter()
                .copied()
                .filter(|v| sg.simplices[s].contains(v))
                .collect();
            let Some(&new_vertex) = sg.simplices[t].iter().find(|v| !sg.simplices[s].contains(v)) else {
                continue;
            };
            if placed.contains_key(&new_vertex) {
                // reached along another path; the residual check covers it
                continue;
            }
            let x = solve_against_face(pg, &placed, &face, new_vertex, d, opts.tol)?;
            placed.insert(new_vertex, x.clone());
            order.push((new_vertex, x));
        }
    }
    Ok(order)
}

/// Solves `B x = c` where the rows of `B` are the placed face vectors and
/// `c_i = <f_new, f_i>` from polarization.
fn solve_against_face(
    pg: &PartialGram,
    placed: &std::collections::BTreeMap<usize, Vec<f64>>,
    face: &[usize],
    new_vertex: usize,
    d: usize,
    tol: f64,
) -> Result<Vec<f64>, ReconstructionError> {
    let mut b = DMatrix::zeros(d, d);
    let mut c = DVector::zeros(d);
    for (r, &v) in face.iter().enumerate() {
        let p = &placed[&v];
        for k in 0..d {
            b[(r, k)] = p[k];
        }
        c[r] = pg
            .get(new_vertex, v)
            .ok_or(SimplexError::Gram(gram::GramError::MissingEntry(new_vertex, v)))?;
    }
    let condition = linalg::condition_number(&b);
    if condition.is_nan() || condition > 1.0 / tol {
        return Err(ReconstructionError::IllConditioned { condition });
    }
    let x = b
        .lu()
        .solve(&c)
        .ok_or(ReconstructionError::IllConditioned { condition })?;
    Ok(x.iter().copied().collect())
}

/// Picks the complete-graph route on complete graphs and propagation otherwise.
pub fn reconstruct_auto(
    obs: &MagnitudeObservation,
    graph: &SimpleGraph,
    d: usize,
    opts: &ReconstructOptions,
) -> Result<ReconstructionResult, ReconstructionError> {
    if graph.is_complete() {
        reconstruct_complete(obs, graph, d, opts)
    } else {
        reconstruct_propagate(obs, graph, d, opts)
    }
}
