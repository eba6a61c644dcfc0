//! The d-simplex graph of a vector field, built from magnitudes only.
//!
//! Nodes are the (d+1)-cliques of the base graph whose field vectors are
//! affinely independent. Two nodes are adjacent when they share exactly d
//! vertices and the field vectors on the shared face are linearly independent
//! (the face's affine hull misses the origin).
//!
//! Clique enumeration is exhaustive: `O(n * Δ^d)` candidate extensions for
//! maximum degree `Δ`, which is fine for a few hundred vertices and `d <= 4`.

use std::collections::BTreeMap;

use petgraph::unionfind::UnionFind;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::graph_model::{GraphError, MagnitudeObservation, SimpleGraph};
use crate::gram::{self, GramError, PartialGram};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimplexError {
    #[error("simplex dimension d must be at least 1")]
    ZeroDimension,
    #[error("observation has dimension {found}, requested d = {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("observation covers {found} vertices, graph has {expected}")]
    CoverageMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Gram(#[from] GramError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SimplexGraph {
    pub dim: usize,
    /// Sorted vertex sets, in lexicographic order.
    pub simplices: Vec<Vec<usize>>,
    /// Pairs `(a, b)` of simplex indices, `a < b`, sorted.
    pub edges: Vec<(usize, usize)>,
}

impl SimplexGraph {
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.simplices.len()];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    /// Connected components as lists of simplex indices, each sorted, ordered by
    /// their smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.simplices.len();
        let mut uf = UnionFind::<usize>::new(n);
        for &(a, b) in &self.edges {
            uf.union(a, b);
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for s in 0..n {
            groups.entry(uf.find(s)).or_default().push(s);
        }
        let mut comps: Vec<Vec<usize>> = groups.into_values().collect();
        comps.sort_by_key(|c| c[0]);
        comps
    }
}

/// Hypothesis report for uniqueness up to an orthogonal matrix.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HypothesisReport {
    pub connected: bool,
    pub uncovered_vertices: Vec<usize>,
    pub certified: bool,
}

/// All `k`-cliques of `graph` as sorted vertex lists, in lexicographic order.
/// `k = 0` yields nothing.
pub fn enumerate_cliques(graph: &SimpleGraph, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k == 0 {
        return out;
    }
    let mut current = Vec::with_capacity(k);
    for v in 0..graph.vertex_count() {
        let candidates: Vec<usize> = graph.neighbors(v).range(v + 1..).copied().collect();
        current.push(v);
        extend_clique(graph, k, &mut current, &candidates, &mut out);
        current.pop();
    }
    out
}

// Candidates are always the common higher-numbered neighbours of `current`,
// so each clique is produced once and in lexicographic order.
fn extend_clique(
    graph: &SimpleGraph,
    k: usize,
    current: &mut Vec<usize>,
    candidates: &[usize],
    out: &mut Vec<Vec<usize>>,
) {
    if current.len() == k {
        out.push(current.clone());
        return;
    }
    if current.len() + candidates.len() < k {
        return;
    }
    for (idx, &v) in candidates.iter().enumerate() {
        let next: Vec<usize> = candidates[idx + 1..]
            .iter()
            .copied()
            .filter(|&w| graph.has_edge(v, w))
            .collect();
        current.push(v);
        extend_clique(graph, k, current, &next, out);
        current.pop();
    }
}

/// Builds the simplex graph from polarized inner products.
pub fn build_simplex_graph(
    graph: &SimpleGraph,
    obs: &MagnitudeObservation,
    d: usize,
    rel_tol: f64,
) -> Result<SimplexGraph, SimplexError> {
    if d == 0 {
        return Err(SimplexError::ZeroDimension);
    }
    if obs.dim() != d {
        return Err(SimplexError::DimensionMismatch {
            expected: d,
            found: obs.dim(),
        });
    }
    if obs.vertex_norms().len() != graph.vertex_count() {
        return Err(SimplexError::CoverageMismatch {
            expected: graph.vertex_count(),
            found: obs.vertex_norms().len(),
        });
    }
    let pg = gram::polarize(obs, graph);
    build_from_gram(graph, &pg, d, rel_tol)
}

/// Same construction from any source of inner products (e.g. the exact Gram
/// of a known field).
pub fn build_from_gram(
    graph: &SimpleGraph,
    pg: &PartialGram,
    d: usize,
    rel_tol: f64,
) -> Result<SimplexGraph, SimplexError> {
    if d == 0 {
        return Err(SimplexError::ZeroDimension);
    }
    let cliques = enumerate_cliques(graph, d + 1);
    let verdicts: Vec<Result<bool, GramError>> = cliques
        .par_iter()
        .map(|c| gram::affinely_independent(pg, c, rel_tol))
        .collect();
    let mut simplices = Vec::new();
    for (c, v) in cliques.into_iter().zip(verdicts) {
        if v? {
            simplices.push(c);
        }
    }

    // Group simplices by their d-faces; simplices sharing a face are candidates.
    let mut faces: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    for (idx, s) in simplices.iter().enumerate() {
        for skip in 0..s.len() {
            let face: Vec<usize> = s
                .iter()
                .enumerate()
                .filter(|&(p, _)| p != skip)
                .map(|(_, &v)| v)
                .collect();
            faces.entry(face).or_default().push(idx);
        }
    }
    let mut edges = Vec::new();
    for (face, members) in &faces {
        if members.len() < 2 {
            continue;
        }
        if !gram::linearly_independent(pg, face, rel_tol)? {
            continue;
        }
        for (a_pos, &a) in members.iter().enumerate() {
            for &b in &members[a_pos + 1..] {
                edges.push((a.min(b), a.max(b)));
            }
        }
    }
    edges.sort_unstable();
    edges.dedup();
    Ok(SimplexGraph {
        dim: d,
        simplices,
        edges,
    })
}

/// Connectivity of the simplex graph and coverage of every base vertex by
/// some simplex. An empty simplex graph is reported as not connected.
pub fn check_hypotheses(sg: &SimplexGraph, graph: &SimpleGraph) -> HypothesisReport {
    let connected = !sg.simplices.is_empty() && sg.components().len() == 1;
    let mut covered = vec![false; graph.vertex_count()];
    for s in &sg.simplices {
        for &v in s {
            if v < covered.len() {
                covered[v] = true;
            }
        }
    }
    let uncovered_vertices: Vec<usize> = (0..graph.vertex_count()).filter(|&v| !covered[v]).collect();
    let certified = connected && uncovered_vertices.is_empty();
    HypothesisReport {
        connected,
        uncovered_vertices,
        certified,
    }
}
