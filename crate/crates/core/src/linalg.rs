//! Small dense linear-algebra helpers shared across modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigenpairs of a symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SortedEigen {
    pub values: DVector<f64>,
    /// Eigenvectors as columns, in the same order as `values`.
    pub vectors: DMatrix<f64>,
}

impl SortedEigen {
    /// Columns in descending eigenvalue order.
    pub fn descending(&self) -> (DVector<f64>, DMatrix<f64>) {
        let k = self.values.len();
        let values = DVector::from_iterator(k, (0..k).rev().map(|i| self.values[i]));
        let mut vectors = DMatrix::zeros(self.vectors.nrows(), k);
        for (dst, src) in (0..k).rev().enumerate() {
            vectors.set_column(dst, &self.vectors.column(src));
        }
        (values, vectors)
    }
}

pub fn symmetric_eigen(matrix: &DMatrix<f64>) -> Result<SortedEigen> {
    if matrix.nrows() != matrix.ncols() {
        return Err(Error::mismatch("square matrix", format!("{}x{}", matrix.nrows(), matrix.ncols())));
    }
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("eigendecomposition of a non-finite matrix".into()));
    }
    let sym = symmetrize(matrix);
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("symmetric eigensolver did not converge".into()))?;
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    sign_fix_columns(&mut vectors);
    Ok(SortedEigen { values, vectors })
}

pub fn symmetrize(matrix: &DMatrix<f64>) -> DMatrix<f64> {
    (matrix + matrix.transpose()) * 0.5
}

/// Flips each column so that its largest-magnitude entry is positive.
/// Ties in magnitude go to the lower row index.
pub fn sign_fix_columns(matrix: &mut DMatrix<f64>) {
    for mut col in matrix.column_iter_mut() {
        let mut best = 0usize;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[best].abs() {
                best = i;
            }
        }
        if !col.is_empty() && col[best] < 0.0 {
            col.neg_mut();
        }
    }
}

/// Thin QR factor with the diagonal of R made non-negative.
///
/// Returns `None` if the input is numerically rank deficient.
pub fn qr_positive(matrix: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let (n, m) = matrix.shape();
    if m > n || m == 0 {
        return None;
    }
    let qr = matrix.clone().qr();
    let mut q = qr.q();
    let r = qr.r();
    let scale = r.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if !scale.is_finite() || scale == 0.0 {
        return None;
    }
    for j in 0..m {
        let d = r[(j, j)];
        if d.abs() <= scale * 1e-13 {
            return None;
        }
        if d < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Some(q)
}

/// Frobenius inner product.
pub fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// `‖UᵀU − I‖_F`.
pub fn orthonormality_error(u: &DMatrix<f64>) -> f64 {
    let gram = u.transpose() * u;
    (gram - DMatrix::identity(u.ncols(), u.ncols())).norm()
}

/// Tikhonov shift `1e-6 · trace / n`, falling back to an absolute `1e-12`
/// when the matrix has zero trace.
pub fn tikhonov_shift(matrix: &DMatrix<f64>) -> f64 {
    let n = matrix.nrows().max(1) as f64;
    let eps = 1e-6 * matrix.trace() / n;
    if eps.is_finite() && eps > 0.0 {
        eps
    } else {
        1e-12
    }
}

/// Solves `A u = λ B u` for symmetric `A` and symmetric positive definite `B`.
///
/// Eigenvalues ascending; eigenvectors are unit-norm columns, sign-fixed.
pub fn generalized_symmetric_eigen(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<SortedEigen> {
    let chol = symmetrize(b)
        .cholesky()
        .ok_or_else(|| Error::Numerical("right-hand matrix is not positive definite".into()))?;
    let l = chol.l();
    let l_inv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
    let reduced = &l_inv * symmetrize(a) * l_inv.transpose();
    let eig = symmetric_eigen(&reduced)?;
    let mut vectors = l_inv.transpose() * eig.vectors;
    for mut col in vectors.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
    }
    sign_fix_columns(&mut vectors);
    Ok(SortedEigen {
        values: eig.values,
        vectors,
    })
}

/// Squared Euclidean distance between columns `i` of `a` and `j` of `b`.
pub fn column_sq_dist(a: &DMatrix<f64>, i: usize, b: &DMatrix<f64>, j: usize) -> f64 {
    a.column(i)
        .iter()
        .zip(b.column(j).iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum()
}
