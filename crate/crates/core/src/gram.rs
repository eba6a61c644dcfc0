//! Inner products recovered from magnitudes by polarization, and the two
//! nondegeneracy tests (affine independence of a clique, linear independence
//! of a shared face) that decide membership in the simplex graph.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::graph_model::{MagnitudeObservation, SimpleGraph};
use crate::linalg;

/// Relative positive-definiteness threshold: an eigenvalue counts as positive
/// when it exceeds this fraction of the largest diagonal entry.
pub const DEFAULT_PD_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GramError {
    #[error("no inner product known for ({0}, {1}): not an edge of the graph")]
    MissingEntry(usize, usize),
    #[error("expected a square block of size {expected}, got {rows}x{cols}")]
    BlockShape {
        expected: usize,
        rows: usize,
        cols: usize,
    },
}

/// Inner products `<f_i, f_j>` known on the diagonal and on graph edges.
#[derive(Clone, Debug, PartialEq)]
pub struct PartialGram {
    dim: usize,
    entries: BTreeMap<(usize, usize), f64>,
}

/// A known entry that exceeds the Cauchy-Schwarz bound.
#[derive(Clone, Debug, PartialEq)]
pub struct CauchySchwarzViolation {
    pub pair: (usize, usize),
    pub excess: f64,
}

impl PartialGram {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.entries.get(&(i.min(j), i.max(j))).copied()
    }

    pub fn entries(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.entries
    }

    /// The square Gram block on `vertices`, failing if any pair is unknown.
    pub fn block(&self, vertices: &[usize]) -> Result<DMatrix<f64>, GramError> {
        let k = vertices.len();
        let mut m = DMatrix::zeros(k, k);
        for (a, &i) in vertices.iter().enumerate() {
            for (b, &j) in vertices.iter().enumerate().skip(a) {
                let v = self.get(i, j).ok_or(GramError::MissingEntry(i, j))?;
                m[(a, b)] = v;
                m[(b, a)] = v;
            }
        }
        Ok(m)
    }

    pub fn cauchy_schwarz_violations(&self, tol: f64) -> Vec<CauchySchwarzViolation> {
        self.entries
            .iter()
            .filter(|(&(i, j), _)| i != j)
            .filter_map(|(&(i, j), &v)| {
                let bound = (self.get(i, i)?.max(0.0) * self.get(j, j)?.max(0.0)).sqrt();
                let excess = v.abs() - bound;
                (excess > tol).then_some(CauchySchwarzViolation { pair: (i, j), excess })
            })
            .collect()
    }
}

/// `<f_i, f_j> = (|f_i|^2 + |f_j|^2 - |f_i - f_j|^2) / 2` on every edge, and
/// `|f_i|^2` on the diagonal.
pub fn polarize(obs: &MagnitudeObservation, graph: &SimpleGraph) -> PartialGram {
    let mut entries = BTreeMap::new();
    for i in 0..graph.vertex_count() {
        let a = obs.vertex_norm(i);
        entries.insert((i, i), a * a);
    }
    for &(i, j) in graph.edges() {
        if let Some(d) = obs.edge_norm(i, j) {
            let (a, b) = (obs.vertex_norm(i), obs.vertex_norm(j));
            entries.insert((i, j), 0.5 * (a * a + b * b - d * d));
        }
    }
    PartialGram {
        dim: obs.dim(),
        entries,
    }
}

/// `true` iff the `(d+1) x (d+1)` Gram block is strictly positive definite on
/// the zero-sum hyperplane, i.e. the underlying points are affinely
/// independent. The hyperplane is parameterized by the columns `e_k - e_last`.
pub fn affinely_independent_block(block: &DMatrix<f64>, rel_tol: f64) -> Result<bool, GramError> {
    let k = block.nrows();
    if k != block.ncols() || k == 0 {
        return Err(GramError::BlockShape {
            expected: k.max(1),
            rows: block.nrows(),
            cols: block.ncols(),
        });
    }
    if k == 1 {
        // a single point is affinely independent; the hyperplane is {0}
        return Ok(true);
    }
    let last = k - 1;
    // (B^T G B)_{ab} = G_ab - G_a,last - G_last,b + G_last,last
    let mut restricted = DMatrix::zeros(last, last);
    for a in 0..last {
        for b in 0..last {
            restricted[(a, b)] =
                block[(a, b)] - block[(a, last)] - block[(last, b)] + block[(last, last)];
        }
    }
    Ok(positive_definite(&restricted, rel_tol))
}

/// `true` iff the `d x d` Gram block is strictly positive definite.
pub fn linearly_independent_block(block: &DMatrix<f64>, rel_tol: f64) -> Result<bool, GramError> {
    if block.nrows() != block.ncols() {
        return Err(GramError::BlockShape {
            expected: block.nrows(),
            rows: block.nrows(),
            cols: block.ncols(),
        });
    }
    Ok(positive_definite(block, rel_tol))
}

fn positive_definite(m: &DMatrix<f64>, rel_tol: f64) -> bool {
    let scale = linalg::max_abs_diagonal(m);
    if scale == 0.0 {
        return false;
    }
    linalg::min_eigenvalue(m) > rel_tol * scale
}

/// Affine independence of the field vectors on `clique`, from polarized data.
pub fn affinely_independent(gram: &PartialGram, clique: &[usize], rel_tol: f64) -> Result<bool, GramError> {
    affinely_independent_block(&gram.block(clique)?, rel_tol)
}

/// Linear independence of the field vectors on `face`, from polarized data.
pub fn linearly_independent(gram: &PartialGram, face: &[usize], rel_tol: f64) -> Result<bool, GramError> {
    linearly_independent_block(&gram.block(face)?, rel_tol)
}
