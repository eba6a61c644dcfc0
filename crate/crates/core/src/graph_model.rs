//! Simple graphs, vector fields on their vertices, and the magnitude data
//! (vertex norms and edge relative norms) observed from a field.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("edge ({0}, {1}) has an endpoint outside 0..{2}")]
    VertexOutOfRange(usize, usize, usize),
    #[error("field dimension must be positive")]
    ZeroDimension,
    #[error("vector {index} has length {found}, expected {expected}")]
    VectorLength {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("field has {found} vectors but the graph has {expected} vertices")]
    FieldLength { expected: usize, found: usize },
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("missing norm for edge ({0}, {1})")]
    MissingEdgeNorm(usize, usize),
    #[error("norm for ({0}, {1}) does not correspond to a graph edge")]
    UnknownEdge(usize, usize),
    #[error("invalid magnitude {value} at {location}")]
    InvalidMagnitude { location: String, value: f64 },
}

/// Undirected simple graph on vertices `0..vertex_count`. Edges are stored as
/// `(i, j)` with `i < j`, sorted lexicographically.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimpleGraph {
    vertex_count: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<BTreeSet<usize>>,
}

impl SimpleGraph {
    pub fn new(vertex_count: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let mut adjacency = vec![BTreeSet::new(); vertex_count];
        let mut canonical = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            if a >= vertex_count || b >= vertex_count {
                return Err(GraphError::VertexOutOfRange(a, b, vertex_count));
            }
            let (i, j) = (a.min(b), a.max(b));
            if !adjacency[i].insert(j) {
                return Err(GraphError::DuplicateEdge(i, j));
            }
            adjacency[j].insert(i);
            canonical.push((i, j));
        }
        canonical.sort_unstable();
        Ok(Self {
            vertex_count,
            edges: canonical,
            adjacency,
        })
    }

    pub fn complete(n: usize) -> Self {
        let edges: Vec<_> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect();
        Self::new(n, &edges).expect("complete graph is simple")
    }

    /// The circulant graph `C_n`: vertex `i` adjacent to `i ± 1 mod n` (`n >= 3`).
    pub fn cycle(n: usize) -> Self {
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Self::new(n, &edges).expect("cycle is simple for n >= 3")
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i < self.vertex_count && self.adjacency[i].contains(&j)
    }

    pub fn neighbors(&self, i: usize) -> &BTreeSet<usize> {
        &self.adjacency[i]
    }

    pub fn is_complete(&self) -> bool {
        let n = self.vertex_count;
        self.edges.len() == n * n.saturating_sub(1) / 2
    }
}

/// A `dim`-dimensional real vector attached to every vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    dim: usize,
    vectors: Vec<Vec<f64>>,
}

impl VectorField {
    pub fn new(dim: usize, vectors: Vec<Vec<f64>>) -> Result<Self, GraphError> {
        if dim == 0 {
            return Err(GraphError::ZeroDimension);
        }
        for (index, v) in vectors.iter().enumerate() {
            if v.len() != dim {
                return Err(GraphError::VectorLength {
                    index,
                    expected: dim,
                    found: v.len(),
                });
            }
        }
        Ok(Self { dim, vectors })
    }

    pub fn zeros(dim: usize, len: usize) -> Self {
        Self {
            dim,
            vectors: vec![vec![0.0; dim]; len],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.vectors[i]
    }

    pub fn max_norm(&self) -> f64 {
        self.vectors.iter().map(|v| linalg::norm(v)).fold(0.0, f64::max)
    }

    /// Columns of the returned `dim x len` matrix are the field vectors.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.vectors.len());
        for (j, v) in self.vectors.iter().enumerate() {
            for (i, x) in v.iter().enumerate() {
                m[(i, j)] = *x;
            }
        }
        m
    }

    /// Applies the `dim x dim` matrix `u` to every vector.
    pub fn transformed(&self, u: &DMatrix<f64>) -> Result<Self, GraphError> {
        if u.nrows() != self.dim || u.ncols() != self.dim {
            return Err(GraphError::DimensionMismatch(u.nrows(), self.dim));
        }
        let vectors = self
            .vectors
            .iter()
            .map(|v| (u * linalg::dvec(v)).iter().copied().collect())
            .collect();
        Ok(Self {
            dim: self.dim,
            vectors,
        })
    }

    /// Full Gram matrix `<f_i, f_j>`.
    pub fn gram(&self) -> DMatrix<f64> {
        let m = self.to_matrix();
        m.transpose() * m
    }
}

/// Measured magnitudes: `|f_i|` for every vertex and `|f_i - f_j|` for every edge.
#[derive(Clone, Debug, PartialEq)]
pub struct MagnitudeObservation {
    dim: usize,
    vertex_norms: Vec<f64>,
    edge_norms: BTreeMap<(usize, usize), f64>,
}

/// An edge whose three magnitudes cannot be realized by any pair of vectors.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TriangleViolation {
    pub edge: (usize, usize),
    pub excess: f64,
}

impl MagnitudeObservation {
    /// Validates coverage against `graph`: one norm per vertex, one per edge,
    /// all finite and non-negative.
    pub fn new(
        graph: &SimpleGraph,
        dim: usize,
        vertex_norms: Vec<f64>,
        edge_norms: BTreeMap<(usize, usize), f64>,
    ) -> Result<Self, GraphError> {
        if dim == 0 {
            return Err(GraphError::ZeroDimension);
        }
        if vertex_norms.len() != graph.vertex_count() {
            return Err(GraphError::FieldLength {
                expected: graph.vertex_count(),
                found: vertex_norms.len(),
            });
        }
        for (i, &v) in vertex_norms.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(GraphError::InvalidMagnitude {
                    location: format!("vertex {i}"),
                    value: v,
                });
            }
        }
        let mut canonical = BTreeMap::new();
        for (&(a, b), &v) in &edge_norms {
            let key = (a.min(b), a.max(b));
            if !graph.has_edge(key.0, key.1) {
                return Err(GraphError::UnknownEdge(a, b));
            }
            if !v.is_finite() || v < 0.0 {
                return Err(GraphError::InvalidMagnitude {
                    location: format!("edge ({a}, {b})"),
                    value: v,
                });
            }
            canonical.insert(key, v);
        }
        for &(i, j) in graph.edges() {
            if !canonical.contains_key(&(i, j)) {
                return Err(GraphError::MissingEdgeNorm(i, j));
            }
        }
        Ok(Self {
            dim,
            vertex_norms,
            edge_norms: canonical,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertex_norms(&self) -> &[f64] {
        &self.vertex_norms
    }

    pub fn vertex_norm(&self, i: usize) -> f64 {
        self.vertex_norms[i]
    }

    pub fn edge_norms(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.edge_norms
    }

    pub fn edge_norm(&self, i: usize, j: usize) -> Option<f64> {
        self.edge_norms.get(&(i.min(j), i.max(j))).copied()
    }

    pub fn max_vertex_norm(&self) -> f64 {
        self.vertex_norms.iter().copied().fold(0.0, f64::max)
    }

    /// Edges violating `| |f_i| - |f_j| | <= |f_i - f_j| <= |f_i| + |f_j|` by more than `tol`.
    pub fn triangle_violations(&self, tol: f64) -> Vec<TriangleViolation> {
        self.edge_norms
            .iter()
            .filter_map(|(&(i, j), &d)| {
                let (a, b) = (self.vertex_norms[i], self.vertex_norms[j]);
                let excess = ((a - b).abs() - d).max(d - (a + b));
                (excess > tol).then_some(TriangleViolation {
                    edge: (i, j),
                    excess,
                })
            })
            .collect()
    }
}

/// Default tolerance `1e-8 * (1 + max vertex norm)`.
pub fn default_tolerance(max_norm: f64) -> f64 {
    1e-8 * (1.0 + max_norm)
}

/// Forward model: vertex norms and edge relative norms of `field` on `graph`.
pub fn observe(graph: &SimpleGraph, field: &VectorField) -> Result<MagnitudeObservation, GraphError> {
    if field.len() != graph.vertex_count() {
        return Err(GraphError::FieldLength {
            expected: graph.vertex_count(),
            found: field.len(),
        });
    }
    let vertex_norms = field.vectors().iter().map(|v| linalg::norm(v)).collect();
    let edge_norms = graph
        .edges()
        .iter()
        .map(|&(i, j)| ((i, j), linalg::distance(field.vector(i), field.vector(j))))
        .collect();
    Ok(MagnitudeObservation {
        dim: field.dim(),
        vertex_norms,
        edge_norms,
    })
}

/// Orthonormal vectors produced by pivoted Gram-Schmidt, together with the
/// coefficient rows expressing each of them in the chosen pivot vectors.
struct PivotedBasis {
    pivots: Vec<usize>,
    /// `coeffs[m][n]` multiplies the `n`-th pivot vector in the `m`-th basis vector.
    coeffs: Vec<Vec<f64>>,
}

/// Gram-Schmidt driven only by inner products, always picking the remaining
/// vector with the largest residual norm; vectors whose residual falls below
/// `drop_tol` are treated as dependent.
fn pivoted_gram_schmidt(gram: &DMatrix<f64>, max_rank: usize, drop_tol: f64) -> PivotedBasis {
    let n = gram.nrows();
    let mut pivots: Vec<usize> = Vec::new();
    let mut coeffs: Vec<Vec<f64>> = Vec::new();
    let mut used = vec![false; n];
    while pivots.len() < max_rank {
        // residual of vector c against current orthonormal set, via inner products:
        // |f_c|^2 - sum_m <e_m, f_c>^2
        let mut best: Option<(usize, f64, Vec<f64>)> = None;
        for c in (0..n).filter(|&c| !used[c]) {
            let proj: Vec<f64> = coeffs
                .iter()
                .map(|row| row.iter().zip(&pivots).map(|(a, &p)| a * gram[(p, c)]).sum())
                .collect();
            let res2 = gram[(c, c)] - proj.iter().map(|x| x * x).sum::<f64>();
            let res = res2.max(0.0).sqrt();
            if best.as_ref().is_none_or(|(_, r, _)| res > *r) {
                best = Some((c, res, proj));
            }
        }
        let Some((c, res, proj)) = best else { break };
        if res <= drop_tol {
            break;
        }
        used[c] = true;
        // e_new = (f_c - sum_m proj_m e_m) / res, written in pivot coordinates.
        let k = pivots.len();
        let mut row = vec![0.0; k + 1];
        row[k] = 1.0 / res;
        for (m, pm) in proj.iter().enumerate() {
            for (n_idx, a) in coeffs[m].iter().enumerate() {
                row[n_idx] -= pm * a / res;
            }
        }
        for r in coeffs.iter_mut() {
            r.push(0.0);
        }
        pivots.push(c);
        coeffs.push(row);
    }
    PivotedBasis { pivots, coeffs }
}

/// Completes the orthonormal columns of `basis` (d x r) to an orthonormal basis
/// of `R^d` by orthogonalizing standard basis vectors, largest residual first.
fn complete_orthonormal(basis: &DMatrix<f64>) -> DMatrix<f64> {
    let d = basis.nrows();
    let mut cols: Vec<nalgebra::DVector<f64>> = basis.column_iter().map(|c| c.into_owned()).collect();
    while cols.len() < d {
        let mut best: Option<(f64, nalgebra::DVector<f64>)> = None;
        for k in 0..d {
            let mut v = nalgebra::DVector::zeros(d);
            v[k] = 1.0;
            for _ in 0..2 {
                for c in &cols {
                    let p = c.dot(&v);
                    v -= c * p;
                }
            }
            let nv = v.norm();
            if best.as_ref().is_none_or(|(b, _)| nv > *b + 1e-12) {
                best = Some((nv, v));
            }
        }
        let (nv, v) = best.expect("d > 0");
        cols.push(v / nv);
    }
    DMatrix::from_columns(&cols)
}

/// Returns an orthogonal `U` with `g_i = U f_i` for every vertex, or `None`
/// when the two fields are not in the same orthogonal orbit.
///
/// The fields are compared through their Gram matrices (agreement within
/// `tol * (1 + max norm)^2`). `U` maps a Gram-Schmidt basis of `span(f)` onto
/// the basis of `span(g)` obtained with the same coefficients, is extended on
/// the orthogonal complements with deterministic bases, and is finally
/// projected onto the orthogonal group. The residual `max_i |g_i - U f_i|`
/// must also be within `tol * (1 + max norm)`.
pub fn orbit_equivalent(
    f: &VectorField,
    g: &VectorField,
    tol: f64,
) -> Result<Option<DMatrix<f64>>, GraphError> {
    if f.dim() != g.dim() {
        return Err(GraphError::DimensionMismatch(f.dim(), g.dim()));
    }
    if f.len() != g.len() {
        return Err(GraphError::FieldLength {
            expected: f.len(),
            found: g.len(),
        });
    }
    let d = f.dim();
    let scale = 1.0 + f.max_norm().max(g.max_norm());
    let gram_f = f.gram();
    let gram_g = g.gram();
    if f.is_empty() {
        return Ok(Some(DMatrix::identity(d, d)));
    }
    if (&gram_f - &gram_g).amax() > tol * scale * scale {
        return Ok(None);
    }

    let basis = pivoted_gram_schmidt(&gram_f, d, tol * scale);
    let r = basis.pivots.len();
    let fm = f.to_matrix();
    let gm = g.to_matrix();
    let mut ef = DMatrix::zeros(d, r);
    let mut eg = DMatrix::zeros(d, r);
    for (m, row) in basis.coeffs.iter().enumerate() {
        for (n_idx, &a) in row.iter().enumerate() {
            let p = basis.pivots[n_idx];
            for k in 0..d {
                ef[(k, m)] += a * fm[(k, p)];
                eg[(k, m)] += a * gm[(k, p)];
            }
        }
    }
    // eg is orthonormal only up to the Gram mismatch; clean it up before
    // completing so the complement is well defined.
    let eg = if r > 0 { linalg::polar_orthogonal(&eg) } else { eg };
    let full_f = complete_orthonormal(&ef);
    let full_g = complete_orthonormal(&eg);
    let u = linalg::polar_orthogonal(&(full_g * full_f.transpose()));

    let residual = (0..f.len())
        .map(|i| (&u * fm.column(i) - gm.column(i)).norm())
        .fold(0.0, f64::max);
    if residual > tol * scale {
        return Ok(None);
    }
    Ok(Some(u))
}

/// Instance file shared by the graph commands.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GraphInstance {
    pub dim: usize,
    pub vertices: usize,
    pub edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertex_norms: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge_norms: Option<Vec<(usize, usize, f64)>>,
    /// Further fields with exactly the same observation as `field`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub realizations: Option<Vec<Vec<Vec<f64>>>>,
}

impl GraphInstance {
    pub fn from_parts(
        graph: &SimpleGraph,
        field: Option<&VectorField>,
        obs: Option<&MagnitudeObservation>,
        dim: usize,
    ) -> Self {
        Self {
            dim,
            vertices: graph.vertex_count(),
            edges: graph.edges().iter().map(|&(i, j)| [i, j]).collect(),
            field: field.map(|f| f.vectors().to_vec()),
            vertex_norms: obs.map(|o| o.vertex_norms().to_vec()),
            edge_norms: obs.map(|o| {
                o.edge_norms()
                    .iter()
                    .map(|(&(i, j), &v)| (i, j, v))
                    .collect()
            }),
            realizations: None,
        }
    }

    pub fn graph(&self) -> Result<SimpleGraph, GraphError> {
        let edges: Vec<_> = self.edges.iter().map(|e| (e[0], e[1])).collect();
        SimpleGraph::new(self.vertices, &edges)
    }

    pub fn vector_field(&self) -> Result<Option<VectorField>, GraphError> {
        self.field
            .as_ref()
            .map(|f| VectorField::new(self.dim, f.clone()))
            .transpose()
    }

    /// The observation stored in the file, or the one computed from the field
    /// when norms are absent. `None` when neither is present.
    pub fn observation(&self, graph: &SimpleGraph) -> Result<Option<MagnitudeObservation>, GraphError> {
        match (&self.vertex_norms, &self.edge_norms) {
            (Some(vn), Some(en)) => {
                let map = en.iter().map(|&(i, j, v)| ((i, j), v)).collect();
                MagnitudeObservation::new(graph, self.dim, vn.clone(), map).map(Some)
            }
            _ => match self.vector_field()? {
                Some(f) => observe(graph, &f).map(Some),
                None => Ok(None),
            },
        }
    }
}
