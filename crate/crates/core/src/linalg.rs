//! Small dense linear-algebra helpers shared by the reconstruction and
//! certification modules. Everything is `f64` and built on nalgebra.

use faer::{Mat, MatRef, Side};
use nalgebra::{DMatrix, DVector};

/// Symmetric eigendecomposition with eigenvalues sorted in descending order.
///
/// Eigenvector signs are canonicalized so that the entry of largest magnitude
/// (first one on ties) is positive, which keeps embeddings reproducible.
pub fn sorted_symmetric_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let sym = to_faer(&symmetrize(m));
    let (raw_vals, raw_vecs) = match sym.self_adjoint_eigen(Side::Lower) {
        Ok(e) => {
            let s = e.S().column_vector();
            ((0..n).map(|k| s[k]).collect::<Vec<_>>(), from_faer(e.U()))
        }
        Err(_) => (vec![f64::NAN; n], DMatrix::from_element(n, n, f64::NAN)),
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| raw_vals[b].partial_cmp(&raw_vals[a]).unwrap_or(std::cmp::Ordering::Equal));
    let mut values = Vec::with_capacity(n);
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        values.push(raw_vals[k]);
        let mut v = raw_vecs.column(k).into_owned();
        let mut pivot = 0;
        for i in 1..n {
            if v[i].abs() > v[pivot].abs() + 1e-12 {
                pivot = i;
            }
        }
        if v[pivot] < 0.0 {
            v = -v;
        }
        vectors.set_column(col, &v);
    }
    (values, vectors)
}

fn to_faer(m: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: MatRef<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Full singular value decomposition `M = U diag(s) V^T`.
#[derive(Clone, Debug)]
pub struct Svd {
    /// `rows x rows`, orthogonal.
    pub u: DMatrix<f64>,
    /// `min(rows, cols)` values in descending order.
    pub singular_values: Vec<f64>,
    /// `cols x cols`, orthogonal.
    pub v: DMatrix<f64>,
}

/// Non-finite input yields NaN factors.
pub fn svd(m: &DMatrix<f64>) -> Svd {
    let (r, c) = m.shape();
    let k = r.min(c);
    if k == 0 {
        return Svd {
            u: DMatrix::identity(r, r),
            singular_values: Vec::new(),
            v: DMatrix::identity(c, c),
        };
    }
    match to_faer(m).svd() {
        Ok(d) => {
            let s = d.S().column_vector();
            Svd {
                u: from_faer(d.U()),
                singular_values: (0..k).map(|i| s[i]).collect(),
                v: from_faer(d.V()),
            }
        }
        Err(_) => Svd {
            u: DMatrix::from_element(r, r, f64::NAN),
            singular_values: vec![f64::NAN; k],
            v: DMatrix::from_element(c, c, f64::NAN),
        },
    }
}

/// Minimum-norm least-squares solution of `A x = b`, dropping singular values
/// below `rel_tol * sigma_max`.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>, rel_tol: f64) -> DVector<f64> {
    let d = svd(a);
    let smax = d.singular_values.first().copied().unwrap_or(0.0);
    let mut x = DVector::zeros(a.ncols());
    for (k, &s) in d.singular_values.iter().enumerate() {
        if s > rel_tol * smax && s > 0.0 {
            let coef = d.u.column(k).dot(b) / s;
            x += d.v.column(k) * coef;
        }
    }
    x
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Smallest eigenvalue of a symmetric matrix (`+inf` for the empty matrix).
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    sorted_symmetric_eigen(m).0.last().copied().unwrap_or(f64::INFINITY)
}

pub fn max_abs_diagonal(m: &DMatrix<f64>) -> f64 {
    (0..m.nrows().min(m.ncols()))
        .map(|i| m[(i, i)].abs())
        .fold(0.0, f64::max)
}

/// Singular values of `m` in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    to_faer(m)
        .singular_values()
        .unwrap_or_else(|_| vec![f64::NAN; m.nrows().min(m.ncols())])
}

/// Numerical rank with threshold `rel_tol * sigma_max`.
pub fn rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        Some(&smax) if smax > 0.0 => s.iter().filter(|&&x| x > rel_tol * smax).count(),
        _ => 0,
    }
}

/// Orthonormal basis (columns) of the right null space of `m`, using the
/// threshold `rel_tol * sigma_max`. A zero matrix has the full space as kernel.
pub fn null_space(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let cols = m.ncols();
    if cols == 0 {
        return DMatrix::zeros(0, 0);
    }
    let d = svd(m);
    let smax = d.singular_values.first().copied().unwrap_or(0.0);
    let threshold = rel_tol * smax;
    // right singular vectors beyond min(rows, cols) are always in the kernel
    let null_cols: Vec<usize> = (0..cols)
        .filter(|&k| smax == 0.0 || d.singular_values.get(k).is_none_or(|&s| s <= threshold))
        .collect();
    let mut basis = DMatrix::zeros(cols, null_cols.len());
    for (c, &k) in null_cols.iter().enumerate() {
        basis.set_column(c, &d.v.column(k));
    }
    basis
}

/// Nearest orthogonal matrix in Frobenius norm (orthogonal polar factor).
pub fn polar_orthogonal(m: &DMatrix<f64>) -> DMatrix<f64> {
    let d = svd(m);
    let k = d.singular_values.len();
    d.u.columns(0, k) * d.v.columns(0, k).transpose()
}

/// `max |M^T M - I|` entrywise.
pub fn orthogonality_defect(m: &DMatrix<f64>) -> f64 {
    let n = m.ncols();
    let p = m.transpose() * m - DMatrix::<f64>::identity(n, n);
    p.amax()
}

/// Condition number in the 2-norm; `inf` for singular matrices.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

pub fn dvec(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn eigen_is_sorted_descending() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0, -1.0]);
        let (vals, vecs) = sorted_symmetric_eigen(&m);
        assert_relative_eq!(vals[0], 5.0, epsilon = 1e-12);
        assert_relative_eq!(vals[2], -1.0, epsilon = 1e-12);
        assert_relative_eq!(vecs[(1, 0)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn eigen_close_pair_is_accurate() {
        let mut rng = crate::rng::Rng64::new(9871999525513174295);
        let q = DMatrix::from_fn(6, 6, |_, _| rng.normal()).qr().q();
        let lambda = DVector::from_vec(vec![2.1404, 2.1385, 0.0, 0.0, 0.0, -1.5]);
        let m = &q * DMatrix::from_diagonal(&lambda) * q.transpose();
        let (vals, vecs) = sorted_symmetric_eigen(&m);
        let back = &vecs * DMatrix::from_diagonal(&DVector::from_vec(vals)) * vecs.transpose();
        assert!((back - &m).amax() < 1e-13);
        assert!(orthogonality_defect(&vecs) < 1e-13);
    }

    #[test]
    fn svd_recomposes_degenerate_spectra() {
        let mut rng = crate::rng::Rng64::new(17);
        for n in 2..8 {
            let q = DMatrix::from_fn(n, n, |_, _| rng.normal()).qr().q();
            let p = DMatrix::from_fn(n, n, |_, _| rng.normal()).qr().q();
            let s = DVector::from_fn(n, |k, _| match k {
                0 | 1 => 2.0 + 1e-3 * k as f64,
                _ if k == n - 1 => 0.0,
                _ => 0.5,
            });
            let m = &q * DMatrix::from_diagonal(&s) * p.transpose();
            let d = svd(&m);
            let back = &d.u * DMatrix::from_diagonal(&DVector::from_vec(d.singular_values.clone())) * d.v.transpose();
            assert!((back - &m).amax() < 1e-13);
            assert!(orthogonality_defect(&d.u) < 1e-13 && orthogonality_defect(&d.v) < 1e-13);
        }
    }

    #[test]
    fn null_space_of_wide_matrix() {
        let m = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let ns = null_space(&m, 1e-12);
        assert_eq!(ns.ncols(), 2);
        assert!((m * ns).amax() < 1e-12);
    }

    #[test]
    fn polar_factor_of_scaled_rotation() {
        let r = DMatrix::from_row_slice(2, 2, &[0.0, -2.0, 2.0, 0.0]);
        let q = polar_orthogonal(&r);
        assert!(orthogonality_defect(&q) < 1e-12);
        assert_relative_eq!(q[(1, 0)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rank_of_zero_matrix_is_zero() {
        assert_eq!(rank(&DMatrix::zeros(3, 2), 1e-10), 0);
    }
}
