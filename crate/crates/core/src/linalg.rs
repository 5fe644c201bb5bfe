//! Small dense linear-algebra helpers.
//!
//! The generic routines work over any [`Scalar`] so that they can run inside
//! forward-differentiated code; the `f64` routines lean on nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::ad::Scalar;

/// Gaussian elimination with partial pivoting on the real part.
/// Returns `None` when a pivot is (numerically) zero.
pub fn solve<S: Scalar>(a: &DMatrix<S>, b: &DMatrix<S>) -> Option<DMatrix<S>> {
    let n = a.nrows();
    assert_eq!(a.ncols(), n, "solve: matrix must be square");
    assert_eq!(b.nrows(), n, "solve: rhs row mismatch");
    let mut m = a.clone();
    let mut r = b.clone();
    let scale = a.iter().fold(0.0_f64, |acc, z| acc.max(z.re().abs())).max(1e-300);
    for col in 0..n {
        let (piv, best) = (col..n)
            .map(|i| (i, m[(i, col)].re().abs()))
            .fold((col, -1.0), |acc, c| if c.1 > acc.1 { c } else { acc });
        if best <= 1e-14 * scale {
            return None;
        }
        if piv != col {
            m.swap_rows(piv, col);
            r.swap_rows(piv, col);
        }
        let inv = m[(col, col)].recip();
        for i in (col + 1)..n {
            let f = m[(i, col)] * inv;
            if f.re() == 0.0 && f.is_zero() {
                continue;
            }
            for j in col..n {
                let t = m[(col, j)];
                m[(i, j)] -= f * t;
            }
            for j in 0..r.ncols() {
                let t = r[(col, j)];
                r[(i, j)] -= f * t;
            }
        }
    }
    for col in (0..n).rev() {
        let inv = m[(col, col)].recip();
        for j in 0..r.ncols() {
            let mut acc = r[(col, j)];
            for k in (col + 1)..n {
                acc -= m[(col, k)] * r[(k, j)];
            }
            r[(col, j)] = acc * inv;
        }
    }
    Some(r)
}

pub fn inverse<S: Scalar>(a: &DMatrix<S>) -> Option<DMatrix<S>> {
    solve(a, &DMatrix::identity(a.nrows(), a.ncols()))
}

pub fn solve_vec<S: Scalar>(a: &DMatrix<S>, b: &DVector<S>) -> Option<DVector<S>> {
    let bm = DMatrix::from_column_slice(b.len(), 1, b.as_slice());
    solve(a, &bm).map(|x| DVector::from_column_slice(x.as_slice()))
}

/// Frobenius inner product `tr(A^T B)`.
pub fn frob(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub fn bracket(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a * b - b * a
}

/// `max |A + A^T|`.
pub fn skew_defect(a: &DMatrix<f64>) -> f64 {
    (a + a.transpose()).amax()
}

pub fn is_skew(a: &DMatrix<f64>, tol: f64) -> bool {
    a.is_square() && skew_defect(a) <= tol
}

/// Orthonormal basis of so(n) ordered lexicographically by `(p, q)`, `p < q`:
/// `(E_pq - E_qp) / sqrt(2)`.
pub fn so_basis(n: usize) -> Vec<DMatrix<f64>> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for p in 0..n {
        for q in (p + 1)..n {
            let mut e = DMatrix::zeros(n, n);
            e[(p, q)] = s;
            e[(q, p)] = -s;
            out.push(e);
        }
    }
    out
}

/// Flatten matrices as columns of a single matrix.
pub fn stack_columns(mats: &[DMatrix<f64>]) -> DMatrix<f64> {
    let rows = mats.first().map(|m| m.len()).unwrap_or(0);
    let mut out = DMatrix::zeros(rows, mats.len());
    for (j, m) in mats.iter().enumerate() {
        out.column_mut(j).copy_from_slice(m.as_slice());
    }
    out
}

/// Null space of `a` (columns of the result), singular values below
/// `rel_tol * sigma_max` count as zero. An all-zero matrix has full null space.
pub fn null_space(a: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let n = a.ncols();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    // pad wide inputs so that the SVD returns a full right basis
    let padded = if a.nrows() < n {
        let mut p = DMatrix::zeros(n, n);
        p.view_mut((0, 0), (a.nrows(), n)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("svd v_t");
    let sv = &svd.singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let cols: Vec<DVector<f64>> = (0..n)
        .filter(|&i| smax == 0.0 || sv[i] <= rel_tol * smax)
        .map(|i| vt.row(i).transpose())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Numerical rank of `a` by singular values above `rel_tol * sigma_max`.
pub fn rank(a: &DMatrix<f64>, rel_tol: f64) -> usize {
    if a.is_empty() {
        return 0;
    }
    let sv = a.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Lower Cholesky factor `L` with `G = L L^T`.
pub fn cholesky(g: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    nalgebra::Cholesky::new(g.clone()).map(|c| c.l())
}

/// Change of frame to a `g`-orthonormal one at a point.
///
/// Frame components `v` map to orthonormal components `L^T v`; an
/// endomorphism `A` maps to `L^T A L^{-T}`, so `g`-skew endomorphisms land in
/// so(2m). Bilinear forms `B` map to `L^{-1} B L^{-T}`.
#[derive(Debug, Clone)]
pub struct OrthoFrame {
    pub lt: DMatrix<f64>,
    pub lt_inv: DMatrix<f64>,
}

impl OrthoFrame {
    pub fn new(g: &DMatrix<f64>) -> Option<Self> {
        let l = cholesky(g)?;
        let lt = l.transpose();
        let lt_inv = lt.clone().try_inverse()?;
        Some(OrthoFrame { lt, lt_inv })
    }

    pub fn endo(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        &self.lt * a * &self.lt_inv
    }

    pub fn endo_back(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        &self.lt_inv * a * &self.lt
    }

    pub fn form(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.lt_inv.transpose() * b * &self.lt_inv
    }

    pub fn vector(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.lt * v
    }
}

/// Symmetric eigendecomposition with eigenvalues sorted ascending.
pub fn sorted_symmetric_eigen(s: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let sym = (s + s.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let cols: Vec<DVector<f64>> = idx.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect();
    let vecs = if cols.is_empty() { DMatrix::zeros(s.nrows(), 0) } else { DMatrix::from_columns(&cols) };
    (vals, vecs)
}

/// Nearest orthogonal matrix (polar factor).
pub fn orthogonalize(q: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = q.clone().svd(true, true);
    let u = svd.u.expect("svd u");
    let vt = svd.v_t.expect("svd v_t");
    u * vt
}
