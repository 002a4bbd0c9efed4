//! Baseline dimensionality reduction: PCA, LDA, RBF kernel PCA and
//! marginal Fisher analysis.
//!
//! Eigenvectors are sign-fixed (largest-magnitude entry positive) so every
//! fit is deterministic given its inputs.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::affinity::{laplacian, neighbor_sets_raw};
use crate::error::{Error, Result};
use crate::linalg::{column_sq_dist, generalized_symmetric_eigen, symmetric_eigen, tikhonov_shift};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DrKind {
    Pca,
    Lda,
    Kpca,
    Mfa,
}

impl DrKind {
    pub fn name(self) -> &'static str {
        match self {
            DrKind::Pca => "PCA",
            DrKind::Lda => "LDA",
            DrKind::Kpca => "KPCA",
            DrKind::Mfa => "MFA",
        }
    }
}

impl std::fmt::Display for DrKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone)]
pub enum Projection {
    /// `Bᵀ(x − center)`.
    Linear { basis: DMatrix<f64>, center: DVector<f64> },
    /// Centered RBF kernel expansion over the stored training samples.
    Kernel {
        train: DMatrix<f64>,
        gamma: f64,
        /// Column means of the training Gram matrix.
        gram_col_means: DVector<f64>,
        gram_mean: f64,
        /// `p × d`, eigenvectors scaled by `1/√λ`.
        coeffs: DMatrix<f64>,
        train_scores: DMatrix<f64>,
    },
}

#[derive(Debug, Clone)]
pub struct DrModel {
    pub kind: DrKind,
    pub out_dim: usize,
    pub input_dim: usize,
    pub projection: Projection,
    /// Eigenvalues of the retained components, largest first.
    pub eigenvalues: DVector<f64>,
    /// Some retained component had a numerically zero eigenvalue.
    pub degenerate: bool,
    /// Neighbor graphs were cut short by small classes (MFA only).
    pub truncated: bool,
}

impl DrModel {
    pub fn basis(&self) -> Option<&DMatrix<f64>> {
        match &self.projection {
            Projection::Linear { basis, .. } => Some(basis),
            Projection::Kernel { .. } => None,
        }
    }
}

fn check_dim(d: usize, max: usize, what: &str) -> Result<()> {
    if d == 0 || d > max {
        return Err(Error::InvalidArgument(format!("{what}: output dimension {d} must lie in 1..={max}")));
    }
    Ok(())
}

fn centered(x: &DMatrix<f64>, center: &DVector<f64>) -> DMatrix<f64> {
    let mut out = x.clone();
    for mut col in out.column_iter_mut() {
        col -= center;
    }
    out
}

fn top_columns(values: DVector<f64>, vectors: DMatrix<f64>, d: usize) -> (DVector<f64>, DMatrix<f64>) {
    (values.rows(0, d).into_owned(), vectors.columns(0, d).into_owned())
}

fn linear_model(kind: DrKind, basis: DMatrix<f64>, center: DVector<f64>, eigenvalues: DVector<f64>) -> DrModel {
    DrModel {
        kind,
        out_dim: basis.ncols(),
        input_dim: basis.nrows(),
        projection: Projection::Linear { basis, center },
        eigenvalues,
        degenerate: false,
        truncated: false,
    }
}

/// Top-`d` principal directions of the sample covariance.
pub fn fit_pca(x: &DMatrix<f64>, d: usize) -> Result<DrModel> {
    check_dim(d, x.nrows(), "PCA")?;
    if x.ncols() == 0 {
        return Err(Error::InvalidData("PCA needs at least one sample".into()));
    }
    let mean = x.column_mean();
    let xc = centered(x, &mean);
    let denom = (x.ncols().max(2) - 1) as f64;
    let cov = &xc * xc.transpose() / denom;
    let (values, vectors) = symmetric_eigen(&cov)?.descending();
    let (values, basis) = top_columns(values, vectors, d);
    Ok(linear_model(DrKind::Pca, basis, mean, values))
}

/// Fisher discriminant directions from `S_b u = λ S_w u`.
pub fn fit_lda(x: &DMatrix<f64>, labels: &[usize], d: usize) -> Result<DrModel> {
    if labels.len() != x.ncols() {
        return Err(Error::mismatch(format!("{} labels", x.ncols()), format!("{} labels", labels.len())));
    }
    let n = x.nrows();
    let c = labels.iter().copied().max().unwrap_or(0);
    if c < 2 {
        return Err(Error::InvalidData("LDA needs at least two classes".into()));
    }
    check_dim(d, c - 1, "LDA")?;
    let mean = x.column_mean();
    let mut class_sum = vec![DVector::zeros(n); c];
    let mut class_n = vec![0usize; c];
    for (j, &l) in labels.iter().enumerate() {
        class_sum[l - 1] += x.column(j);
        class_n[l - 1] += 1;
    }
    let class_mean: Vec<DVector<f64>> = class_sum
        .iter()
        .zip(&class_n)
        .map(|(s, &k)| if k > 0 { s / k as f64 } else { s.clone() })
        .collect();
    let mut sw = DMatrix::zeros(n, n);
    for (j, &l) in labels.iter().enumerate() {
        let diff = x.column(j) - &class_mean[l - 1];
        sw.ger(1.0, &diff, &diff, 1.0);
    }
    let mut sb = DMatrix::zeros(n, n);
    for (mu, &k) in class_mean.iter().zip(&class_n) {
        let diff = mu - &mean;
        sb.ger(k as f64, &diff, &diff, 1.0);
    }
    let rank_deficient = x.ncols().saturating_sub(c) < n;
    if rank_deficient || sw.clone().cholesky().is_none() {
        let eps = tikhonov_shift(&sw);
        for i in 0..n {
            sw[(i, i)] += eps;
        }
    }
    let (values, vectors) = generalized_symmetric_eigen(&sb, &sw)?.descending();
    let (values, basis) = top_columns(values, vectors, d);
    Ok(linear_model(DrKind::Lda, basis, mean, values))
}

fn rbf(a: &DMatrix<f64>, i: usize, b: &DMatrix<f64>, j: usize, gamma: f64) -> f64 {
    (-gamma * column_sq_dist(a, i, b, j)).exp()
}

/// Kernel PCA with `k(x, y) = exp(−γ‖x − y‖²)` on the double-centered Gram matrix.
pub fn fit_kpca(x: &DMatrix<f64>, d: usize, gamma: f64) -> Result<DrModel> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidArgument(format!("KPCA gamma must be positive, got {gamma}")));
    }
    let p = x.ncols();
    check_dim(d, p, "KPCA")?;
    let gram = DMatrix::from_fn(p, p, |i, j| rbf(x, i, x, j, gamma));
    let col_means = DVector::from_iterator(p, gram.column_iter().map(|c| c.mean()));
    let grand = gram.mean();
    let kc = DMatrix::from_fn(p, p, |i, j| gram[(i, j)] - col_means[i] - col_means[j] + grand);
    let (values, vectors) = symmetric_eigen(&kc)?.descending();
    let (values, vectors) = top_columns(values, vectors, d);
    let floor = 1e-12 * p as f64;
    let mut degenerate = false;
    let mut coeffs = DMatrix::zeros(p, d);
    for k in 0..d {
        if values[k] > floor {
            coeffs.set_column(k, &(vectors.column(k) / values[k].sqrt()));
        } else {
            degenerate = true;
        }
    }
    if degenerate {
        log::warn!("KPCA: some retained eigenvalues are numerically zero (gamma = {gamma})");
    }
    let train_scores = coeffs.transpose() * &kc;
    Ok(DrModel {
        kind: DrKind::Kpca,
        out_dim: d,
        input_dim: x.nrows(),
        projection: Projection::Kernel {
            train: x.clone(),
            gamma,
            gram_col_means: col_means,
            gram_mean: grand,
            coeffs,
            train_scores,
        },
        eigenvalues: values,
        degenerate,
        truncated: false,
    })
}

/// Marginal Fisher analysis: the intrinsic graph joins each sample to its
/// `k1` nearest same-class samples, the penalty graph to its `k2` nearest
/// other-class samples; directions maximize penalty over intrinsic scatter.
pub fn fit_mfa(x: &DMatrix<f64>, labels: &[usize], d: usize, k1: usize, k2: usize) -> Result<DrModel> {
    let n = x.nrows();
    check_dim(d, n, "MFA")?;
    let sets = neighbor_sets_raw(x, labels, k1, k2)?;
    let intrinsic = x * laplacian(&sets.within_adjacency()) * x.transpose();
    let penalty = x * laplacian(&sets.between_adjacency()) * x.transpose();
    let mut rhs = crate::linalg::symmetrize(&intrinsic);
    let eps = tikhonov_shift(&rhs);
    for i in 0..n {
        rhs[(i, i)] += eps;
    }
    let (values, vectors) = generalized_symmetric_eigen(&penalty, &rhs)?.descending();
    let (values, basis) = top_columns(values, vectors, d);
    let mut model = linear_model(DrKind::Mfa, basis, x.column_mean(), values);
    model.truncated = sets.truncated;
    Ok(model)
}

pub fn apply_dr(model: &DrModel, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.nrows() != model.input_dim {
        return Err(Error::mismatch(
            format!("{}-dimensional samples for {}", model.input_dim, model.kind),
            format!("{}-dimensional samples", x.nrows()),
        ));
    }
    match &model.projection {
        Projection::Linear { basis, center } => Ok(basis.transpose() * centered(x, center)),
        Projection::Kernel {
            train,
            gamma,
            gram_col_means,
            gram_mean,
            coeffs,
            ..
        } => {
            let p = train.ncols();
            let mut kc = DMatrix::from_fn(p, x.ncols(), |i, j| rbf(train, i, x, j, *gamma));
            for mut col in kc.column_iter_mut() {
                let m = col.mean();
                for i in 0..p {
                    col[i] += gram_mean - gram_col_means[i] - m;
                }
            }
            Ok(coeffs.transpose() * kc)
        }
    }
}
