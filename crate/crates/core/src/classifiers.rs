//! Classifier suite: k-nearest neighbors, one-vs-rest linear SVM, linear and
//! quadratic Gaussian discriminants, and a CART tree.
//!
//! Every argmax tie resolves to the lower class index.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::linalg::{column_sq_dist, symmetrize, tikhonov_shift};
use crate::rng;

/// Which classifier to train, with its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ClassifierKind {
    Knn(usize),
    LinearSvm,
    Ldc,
    Qdc,
    Tree,
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassifierKind::Knn(k) => write!(f, "{k}nn"),
            ClassifierKind::LinearSvm => f.write_str("svm"),
            ClassifierKind::Ldc => f.write_str("ldc"),
            ClassifierKind::Qdc => f.write_str("qdc"),
            ClassifierKind::Tree => f.write_str("tree"),
        }
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "svm" => Ok(ClassifierKind::LinearSvm),
            "ldc" => Ok(ClassifierKind::Ldc),
            "qdc" => Ok(ClassifierKind::Qdc),
            "tree" => Ok(ClassifierKind::Tree),
            other => other
                .strip_suffix("nn")
                .and_then(|k| k.parse().ok())
                .filter(|&k: &usize| k >= 1)
                .map(ClassifierKind::Knn)
                .ok_or_else(|| Error::Config(format!("unknown classifier {s:?} (expected e.g. 1nn, svm, ldc, qdc, tree)"))),
        }
    }
}

impl Serialize for ClassifierKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ClassifierKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmOptions {
    pub c: f64,
    /// Stop when the spread of projected gradients falls below this.
    pub tol: f64,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for SvmOptions {
    fn default() -> Self {
        Self {
            c: 1.0,
            tol: 1e-4,
            max_epochs: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeOptions {
    pub max_depth: usize,
    pub min_samples_split: usize,
}

impl Default for TreeOptions {
    fn default() -> Self {
        Self {
            max_depth: 20,
            min_samples_split: 2,
        }
    }
}

/// Hyperparameters shared by every classifier built in an experiment.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierOptions {
    pub svm: SvmOptions,
    pub tree: TreeOptions,
}

#[derive(Debug, Clone)]
pub struct KnnModel {
    k: usize,
    train: DMatrix<f64>,
    labels: Vec<usize>,
    classes: usize,
}

/// A binary L1-loss linear SVM trained on `[x; 1]`.
#[derive(Debug, Clone)]
pub struct BinarySvm {
    /// Weights over the features followed by the bias weight.
    pub weights: DVector<f64>,
    pub alpha: Vec<f64>,
    pub epochs: usize,
    pub converged: bool,
}

impl BinarySvm {
    pub fn decision(&self, x: &DMatrix<f64>, j: usize) -> f64 {
        let n = x.nrows();
        let mut v = self.weights[n];
        for i in 0..n {
            v += self.weights[i] * x[(i, j)];
        }
        v
    }
}

#[derive(Debug, Clone)]
pub struct SvmModel {
    dim: usize,
    /// One-vs-rest separators, class `k` at index `k − 1`.
    pub separators: Vec<BinarySvm>,
}

#[derive(Debug, Clone)]
pub struct GaussianModel {
    dim: usize,
    means: Vec<DVector<f64>>,
    factors: Vec<Cholesky<f64, Dyn>>,
    log_dets: Vec<f64>,
    /// Classes that borrowed the pooled covariance (QDC with < 2 samples).
    pub pooled_fallback: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Leaf { label: usize },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone)]
pub struct TreeModel {
    dim: usize,
    pub nodes: Vec<TreeNode>,
}

impl TreeModel {
    pub fn root_split(&self) -> Option<(usize, f64)> {
        match self.nodes.first() {
            Some(TreeNode::Split { feature, threshold, .. }) => Some((*feature, *threshold)),
            _ => None,
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            match &nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone)]
pub enum Classifier {
    Knn(KnnModel),
    LinearSvm(SvmModel),
    Ldc(GaussianModel),
    Qdc(GaussianModel),
    Tree(TreeModel),
}

impl Classifier {
    pub fn fit(kind: ClassifierKind, train: &LabeledDataset, opts: &ClassifierOptions) -> Result<Self> {
        match kind {
            ClassifierKind::Knn(k) => fit_knn(train, k),
            ClassifierKind::LinearSvm => fit_linear_svm(train, &opts.svm),
            ClassifierKind::Ldc => fit_ldc(train),
            ClassifierKind::Qdc => fit_qdc(train),
            ClassifierKind::Tree => fit_tree(train, &opts.tree),
        }
    }

    pub fn kind(&self) -> ClassifierKind {
        match self {
            Classifier::Knn(m) => ClassifierKind::Knn(m.k),
            Classifier::LinearSvm(_) => ClassifierKind::LinearSvm,
            Classifier::Ldc(_) => ClassifierKind::Ldc,
            Classifier::Qdc(_) => ClassifierKind::Qdc,
            Classifier::Tree(_) => ClassifierKind::Tree,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Classifier::Knn(m) => m.train.nrows(),
            Classifier::LinearSvm(m) => m.dim,
            Classifier::Ldc(m) | Classifier::Qdc(m) => m.dim,
            Classifier::Tree(m) => m.dim,
        }
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<usize>> {
        predict(self, x)
    }
}

pub fn fit_knn(train: &LabeledDataset, k: usize) -> Result<Classifier> {
    if k == 0 || k > train.sample_count() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} must lie in 1..={} (training samples)",
            train.sample_count()
        )));
    }
    Ok(Classifier::Knn(KnnModel {
        k,
        train: train.features().clone(),
        labels: train.labels().to_vec(),
        classes: train.class_count(),
    }))
}

fn knn_predict_one(model: &KnnModel, x: &DMatrix<f64>, j: usize) -> usize {
    let mut scored: Vec<(f64, usize)> = (0..model.train.ncols())
        .map(|i| (column_sq_dist(&model.train, i, x, j), i))
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let neighbors = &scored[..model.k];
    let mut votes = vec![0usize; model.classes];
    for &(_, i) in neighbors {
        votes[model.labels[i] - 1] += 1;
    }
    let best = *votes.iter().max().unwrap();
    // among tied classes, the one owning the nearest neighbor wins
    neighbors
        .iter()
        .map(|&(_, i)| model.labels[i])
        .find(|&l| votes[l - 1] == best)
        .unwrap()
}

/// Dual coordinate descent for the L2-regularized L1-loss SVM on `[x; 1]`.
///
/// `targets` are ±1.
pub fn fit_binary_svm(x: &DMatrix<f64>, targets: &[f64], opts: &SvmOptions, stream: u64) -> BinarySvm {
    let (n, p) = x.shape();
    let mut w = DVector::zeros(n + 1);
    let mut alpha = vec![0.0; p];
    let q_diag: Vec<f64> = (0..p).map(|i| x.column(i).norm_squared() + 1.0).collect();
    let mut order: Vec<usize> = (0..p).collect();
    let mut rng = rng::stream(opts.seed, stream);
    let upper = opts.c;
    let mut epochs = 0;
    let mut converged = false;
    while epochs < opts.max_epochs {
        epochs += 1;
        for i in (1..p).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        let mut pg_max = f64::NEG_INFINITY;
        let mut pg_min = f64::INFINITY;
        for &i in &order {
            let y = targets[i];
            let col = x.column(i);
            let margin = w.rows(0, n).dot(&col) + w[n];
            let g = y * margin - 1.0;
            let pg = if alpha[i] == 0.0 {
                g.min(0.0)
            } else if alpha[i] == upper {
                g.max(0.0)
            } else {
                g
            };
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg.abs() > 1e-12 {
                let old = alpha[i];
                alpha[i] = (old - g / q_diag[i]).clamp(0.0, upper);
                let delta = (alpha[i] - old) * y;
                if delta != 0.0 {
                    let mut head = w.rows_mut(0, n);
                    head.axpy(delta, &col, 1.0);
                    w[n] += delta;
                }
            }
        }
        if pg_max - pg_min < opts.tol {
            converged = true;
            break;
        }
    }
    BinarySvm {
        weights: w,
        alpha,
        epochs,
        converged,
    }
}

/// `½ αᵀQα − Σα` with `Q_ij = y_i y_j [x_i; 1]ᵀ[x_j; 1]`.
pub fn svm_dual_objective(x: &DMatrix<f64>, targets: &[f64], alpha: &[f64]) -> f64 {
    let n = x.nrows();
    let mut w = DVector::zeros(n + 1);
    for (i, (&a, &y)) in alpha.iter().zip(targets).enumerate() {
        let mut head = w.rows_mut(0, n);
        head.axpy(a * y, &x.column(i), 1.0);
        w[n] += a * y;
    }
    0.5 * w.norm_squared() - alpha.iter().sum::<f64>()
}

pub fn fit_linear_svm(train: &LabeledDataset, opts: &SvmOptions) -> Result<Classifier> {
    if train.class_count() < 2 {
        return Err(Error::InvalidData("SVM needs at least two classes".into()));
    }
    if !(opts.c > 0.0) || !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument("SVM C and tol must be positive".into()));
    }
    let x = train.features();
    let separators = (1..=train.class_count())
        .map(|k| {
            let targets: Vec<f64> = train
                .labels()
                .iter()
                .map(|&l| if l == k { 1.0 } else { -1.0 })
                .collect();
            let svm = fit_binary_svm(x, &targets, opts, k as u64);
            if !svm.converged {
                log::debug!("SVM class {k} stopped after {} epochs without reaching tol", svm.epochs);
            }
            svm
        })
        .collect();
    Ok(Classifier::LinearSvm(SvmModel {
        dim: train.dim(),
        separators,
    }))
}

fn argmax_lower(scores: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (k, s) in scores.enumerate() {
        if s > best_score || (k == 0 && s.is_nan()) {
            best = k;
            best_score = s;
        }
    }
    best + 1
}

fn regularized_factor(mut cov: DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let eps = tikhonov_shift(&cov);
    for i in 0..cov.nrows() {
        cov[(i, i)] += eps;
    }
    let chol = symmetrize(&cov)
        .cholesky()
        .ok_or_else(|| Error::Numerical("covariance is not positive definite after regularization".into()))?;
    let log_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    Ok((chol, log_det))
}

fn class_scatter(train: &LabeledDataset) -> (Vec<DVector<f64>>, Vec<DMatrix<f64>>, Vec<usize>) {
    let n = train.dim();
    let c = train.class_count();
    let x = train.features();
    let groups = train.class_indices();
    let mut means = Vec::with_capacity(c);
    let mut scatters = Vec::with_capacity(c);
    for members in &groups {
        let mut mean = DVector::zeros(n);
        for &j in members {
            mean += x.column(j);
        }
        mean /= members.len() as f64;
        let mut s = DMatrix::zeros(n, n);
        for &j in members {
            let d = x.column(j) - &mean;
            s.ger(1.0, &d, &d, 1.0);
        }
        means.push(mean);
        scatters.push(s);
    }
    (means, scatters, groups.iter().map(Vec::len).collect())
}

fn pooled_covariance(scatters: &[DMatrix<f64>], sizes: &[usize]) -> DMatrix<f64> {
    let total: usize = sizes.iter().sum();
    let dof = total.saturating_sub(sizes.len()).max(1) as f64;
    let n = scatters[0].nrows();
    scatters.iter().fold(DMatrix::zeros(n, n), |acc, s| acc + s) / dof
}

pub fn fit_ldc(train: &LabeledDataset) -> Result<Classifier> {
    if train.class_count() < 2 {
        return Err(Error::InvalidData("LDC needs at least two classes".into()));
    }
    let (means, scatters, sizes) = class_scatter(train);
    let (chol, log_det) = regularized_factor(pooled_covariance(&scatters, &sizes))?;
    let c = means.len();
    Ok(Classifier::Ldc(GaussianModel {
        dim: train.dim(),
        means,
        factors: vec![chol; c],
        log_dets: vec![log_det; c],
        pooled_fallback: Vec::new(),
    }))
}

pub fn fit_qdc(train: &LabeledDataset) -> Result<Classifier> {
    if train.class_count() < 2 {
        return Err(Error::InvalidData("QDC needs at least two classes".into()));
    }
    let (means, scatters, sizes) = class_scatter(train);
    let pooled = regularized_factor(pooled_covariance(&scatters, &sizes))?;
    let mut factors = Vec::new();
    let mut log_dets = Vec::new();
    let mut pooled_fallback = Vec::new();
    for (k, (s, &size)) in scatters.iter().zip(&sizes).enumerate() {
        if size < 2 {
            pooled_fallback.push(k + 1);
            factors.push(pooled.0.clone());
            log_dets.push(pooled.1);
        } else {
            let (chol, ld) = regularized_factor(s / (size - 1) as f64)?;
            factors.push(chol);
            log_dets.push(ld);
        }
    }
    Ok(Classifier::Qdc(GaussianModel {
        dim: train.dim(),
        means,
        factors,
        log_dets,
        pooled_fallback,
    }))
}

fn gaussian_predict_one(model: &GaussianModel, x: &DMatrix<f64>, j: usize) -> usize {
    let col = x.column(j).into_owned();
    argmax_lower(model.means.iter().enumerate().map(|(k, mu)| {
        let diff = &col - mu;
        let z = model.factors[k].l().solve_lower_triangular(&diff).unwrap_or(diff);
        -0.5 * z.norm_squared() - 0.5 * model.log_dets[k]
    }))
}

/// Exact comparison key for a split: `Σ_l c²/N_l + Σ_r c²/N_r` as a
/// fraction. Larger is purer.
#[derive(Clone, Copy)]
struct Purity {
    num: u128,
    den: u128,
}

impl Purity {
    fn of(left: &[usize], right: &[usize]) -> Self {
        let nl: u128 = left.iter().map(|&v| v as u128).sum();
        let nr: u128 = right.iter().map(|&v| v as u128).sum();
        let sl: u128 = left.iter().map(|&v| (v * v) as u128).sum();
        let sr: u128 = right.iter().map(|&v| (v * v) as u128).sum();
        Purity {
            num: sl * nr + sr * nl,
            den: nl * nr,
        }
    }

    fn cmp(&self, other: &Purity) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

/// Weighted Gini impurity of a candidate split.
pub fn split_gini(left: &[usize], right: &[usize]) -> f64 {
    let gini = |counts: &[usize]| {
        let total: usize = counts.iter().sum();
        if total == 0 {
            return 0.0;
        }
        1.0 - counts.iter().map(|&c| (c as f64 / total as f64).powi(2)).sum::<f64>()
    };
    let nl: usize = left.iter().sum();
    let nr: usize = right.iter().sum();
    let n = (nl + nr) as f64;
    (nl as f64 * gini(left) + nr as f64 * gini(right)) / n
}

struct TreeBuilder<'a> {
    x: &'a DMatrix<f64>,
    labels: &'a [usize],
    classes: usize,
    opts: TreeOptions,
    nodes: Vec<TreeNode>,
}

impl TreeBuilder<'_> {
    fn counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut c = vec![0usize; self.classes];
        for &i in idx {
            c[self.labels[i] - 1] += 1;
        }
        c
    }

    fn best_split(&self, idx: &[usize]) -> Option<(usize, f64)> {
        let mut best: Option<(Purity, usize, f64)> = None;
        for f in 0..self.x.nrows() {
            let mut sorted: Vec<usize> = idx.to_vec();
            sorted.sort_by(|&a, &b| self.x[(f, a)].total_cmp(&self.x[(f, b)]).then(a.cmp(&b)));
            let mut left = vec![0usize; self.classes];
            let mut right = self.counts(idx);
            for w in 0..sorted.len() - 1 {
                let l = self.labels[sorted[w]] - 1;
                left[l] += 1;
                right[l] -= 1;
                let lo = self.x[(f, sorted[w])];
                let hi = self.x[(f, sorted[w + 1])];
                if lo >= hi {
                    continue;
                }
                let mut threshold = (lo + hi) / 2.0;
                if !threshold.is_finite() {
                    threshold = lo + (hi - lo) / 2.0;
                }
                if threshold >= hi {
                    threshold = lo;
                }
                let purity = Purity::of(&left, &right);
                // strict improvement keeps the lower feature / smaller threshold on ties
                if best.as_ref().is_none_or(|(b, _, _)| purity.cmp(b) == Ordering::Greater) {
                    best = Some((purity, f, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }

    fn build(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let counts = self.counts(&idx);
        let majority = argmax_lower(counts.iter().map(|&c| c as f64));
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let slot = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { label: majority });
        if pure || depth >= self.opts.max_depth || idx.len() < self.opts.min_samples_split {
            return slot;
        }
        let Some((feature, threshold)) = self.best_split(&idx) else {
            return slot;
        };
        let (l_idx, r_idx): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x[(feature, i)] <= threshold);
        let left = self.build(l_idx, depth + 1);
        let right = self.build(r_idx, depth + 1);
        self.nodes[slot] = TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        };
        slot
    }
}

pub fn fit_tree(train: &LabeledDataset, opts: &TreeOptions) -> Result<Classifier> {
    let mut builder = TreeBuilder {
        x: train.features(),
        labels: train.labels(),
        classes: train.class_count(),
        opts: *opts,
        nodes: Vec::new(),
    };
    builder.build((0..train.sample_count()).collect(), 0);
    Ok(Classifier::Tree(TreeModel {
        dim: train.dim(),
        nodes: builder.nodes,
    }))
}

fn tree_predict_one(model: &TreeModel, x: &DMatrix<f64>, j: usize) -> usize {
    let mut at = 0;
    loop {
        match &model.nodes[at] {
            TreeNode::Leaf { label } => return *label,
            TreeNode::Split { feature, threshold, left, right } => {
                at = if x[(*feature, j)] <= *threshold { *left } else { *right };
            }
        }
    }
}

pub fn predict(clf: &Classifier, x: &DMatrix<f64>) -> Result<Vec<usize>> {
    if x.nrows() != clf.dim() && x.ncols() > 0 {
        return Err(Error::mismatch(
            format!("{}-dimensional samples", clf.dim()),
            format!("{}-dimensional samples", x.nrows()),
        ));
    }
    let out = (0..x.ncols())
        .map(|j| match clf {
            Classifier::Knn(m) => knn_predict_one(m, x, j),
            Classifier::LinearSvm(m) => argmax_lower(m.separators.iter().map(|s| s.decision(x, j))),
            Classifier::Ldc(m) | Classifier::Qdc(m) => gaussian_predict_one(m, x, j),
            Classifier::Tree(m) => tree_predict_one(m, x, j),
        })
        .collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(cols: &[&[f64]], labels: &[usize]) -> LabeledDataset {
        let n = cols[0].len();
        let flat: Vec<f64> = cols.iter().flat_map(|c| c.iter().copied()).collect();
        let c = *labels.iter().max().unwrap();
        LabeledDataset::new(DMatrix::from_column_slice(n, cols.len(), &flat), labels.to_vec(), c).unwrap()
    }

    fn point(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(v.len(), 1, v)
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("3nn".parse::<ClassifierKind>().unwrap(), ClassifierKind::Knn(3));
        assert_eq!("SVM".parse::<ClassifierKind>().unwrap(), ClassifierKind::LinearSvm);
        assert!("0nn".parse::<ClassifierKind>().is_err());
        assert!("forest".parse::<ClassifierKind>().is_err());
        assert_eq!(ClassifierKind::Knn(5).to_string(), "5nn");
    }

    #[test]
    fn knn_rules() {
        let train = ds(&[&[0.0], &[1.0], &[1.2], &[5.0]], &[1, 1, 2, 2]);
        let one = fit_knn(&train, 1).unwrap();
        assert_eq!(one.predict(&point(&[5.0])).unwrap(), vec![2]);
        assert_eq!(one.predict(train.features()).unwrap(), train.labels());

        let three = fit_knn(&ds(&[&[0.0], &[0.1], &[0.3], &[9.0]], &[1, 1, 2, 2]), 3).unwrap();
        assert_eq!(three.predict(&point(&[0.0])).unwrap(), vec![1]);

        assert!(fit_knn(&train, 5).is_err());
        assert!(fit_knn(&train, 0).is_err());
    }

    #[test]
    fn knn_vote_tie_goes_to_nearest_class() {
        // k = 2 from x = 0: nearest is class 2 at 0.5, then class 1 at 0.6
        let train = ds(&[&[0.6], &[0.5], &[10.0], &[11.0]], &[1, 2, 1, 2]);
        let two = fit_knn(&train, 2).unwrap();
        assert_eq!(two.predict(&point(&[0.0])).unwrap(), vec![2]);
    }

    #[test]
    fn svm_separable() {
        let train = ds(
            &[&[0.0, 0.0], &[0.5, 1.0], &[1.0, 0.2], &[4.0, 4.0], &[5.0, 4.5], &[4.5, 5.5]],
            &[1, 1, 1, 2, 2, 2],
        );
        let svm = fit_linear_svm(&train, &SvmOptions::default()).unwrap();
        assert_eq!(svm.predict(train.features()).unwrap(), train.labels());
    }

    #[test]
    fn gaussian_midpoint_tie() {
        let train = ds(
            &[&[-2.0, 0.0], &[0.0, 0.0], &[-1.0, 1.0], &[-1.0, -1.0], &[0.0, 0.0], &[2.0, 0.0], &[1.0, 1.0], &[1.0, -1.0]],
            &[1, 1, 1, 1, 2, 2, 2, 2],
        );
        let ldc = fit_ldc(&train).unwrap();
        assert_eq!(ldc.predict(&point(&[0.0, 0.0])).unwrap(), vec![1]);
        assert_eq!(ldc.predict(&point(&[0.1, 0.0])).unwrap(), vec![2]);
    }

    #[test]
    fn gaussian_singular_covariance() {
        let train = ds(&[&[0.0, 0.0], &[1.0, 1.0], &[2.0, 2.0], &[5.0, 5.0], &[6.0, 6.0], &[7.0, 7.0]], &[1, 1, 1, 2, 2, 2]);
        assert_eq!(fit_ldc(&train).unwrap().predict(&point(&[1.5, 1.5])).unwrap(), vec![1]);
        assert_eq!(fit_qdc(&train).unwrap().predict(&point(&[6.5, 6.5])).unwrap(), vec![2]);
    }

    #[test]
    fn qdc_fallback_recorded() {
        let train = ds(&[&[0.0], &[1.0], &[5.0]], &[1, 1, 2]);
        let Classifier::Qdc(m) = fit_qdc(&train).unwrap() else { unreachable!() };
        assert_eq!(m.pooled_fallback, vec![2]);
    }

    #[test]
    fn tree_single_split() {
        let train = ds(&[&[-3.0], &[-1.0], &[-0.5], &[0.5], &[2.0]], &[1, 1, 1, 2, 2]);
        let Classifier::Tree(t) = fit_tree(&train, &TreeOptions::default()).unwrap() else { unreachable!() };
        assert_eq!(t.root_split(), Some((0, 0.0)));
        assert_eq!(t.depth(), 1);
        let clf = Classifier::Tree(t);
        assert_eq!(clf.predict(train.features()).unwrap(), train.labels());
    }

    #[test]
    fn tree_conflicting_duplicates() {
        let train = ds(&[&[1.0], &[1.0], &[1.0], &[3.0]], &[2, 1, 2, 1]);
        let clf = fit_tree(&train, &TreeOptions::default()).unwrap();
        assert_eq!(clf.predict(&point(&[1.0])).unwrap(), vec![2]);
        assert_eq!(clf.predict(&point(&[3.0])).unwrap(), vec![1]);
        let tie = ds(&[&[1.0], &[1.0]], &[2, 1]);
        assert_eq!(fit_tree(&tie, &TreeOptions::default()).unwrap().predict(&point(&[1.0])).unwrap(), vec![1]);
    }

    #[test]
    fn predict_edge_cases() {
        let train = ds(&[&[0.0, 1.0], &[1.0, 0.0]], &[1, 2]);
        let clf = fit_knn(&train, 1).unwrap();
        assert!(clf.predict(&DMatrix::zeros(2, 0)).unwrap().is_empty());
        assert!(matches!(clf.predict(&DMatrix::zeros(3, 1)), Err(Error::DimensionMismatch { .. })));
    }
}
