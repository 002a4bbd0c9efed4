//! Within-class / between-class nearest-neighbor sets and the signed
//! affinity graph built from them.
//!
//! For each sample `i`, `within[i]` holds its `v_w` nearest same-class
//! samples and `between[i]` its `v_b` nearest samples of any other class.
//! The graph then sets `A_ij = g_w(i, j) − g_b(i, j)` where `g_w(i, j) = 1`
//! iff `j ∈ within[i]` or `i ∈ within[j]` (and likewise for `g_b`), so `A`
//! is symmetric with entries in `{−1, 0, +1}`.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::linalg::column_sq_dist;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborSets {
    /// Same-class neighbors of each sample, ascending by index.
    pub within: Vec<Vec<usize>>,
    /// Other-class neighbors of each sample, ascending by index.
    pub between: Vec<Vec<usize>>,
    pub v_w: usize,
    pub v_b: usize,
    /// Set when some sample had fewer candidates than requested.
    pub truncated: bool,
}

impl NeighborSets {
    pub fn len(&self) -> usize {
        self.within.len()
    }

    pub fn is_empty(&self) -> bool {
        self.within.is_empty()
    }

    /// Symmetrized 0/1 adjacency of the within-class relation.
    pub fn within_adjacency(&self) -> DMatrix<f64> {
        symmetric_adjacency(&self.within)
    }

    /// Symmetrized 0/1 adjacency of the between-class relation.
    pub fn between_adjacency(&self) -> DMatrix<f64> {
        symmetric_adjacency(&self.between)
    }
}

fn symmetric_adjacency(lists: &[Vec<usize>]) -> DMatrix<f64> {
    let p = lists.len();
    let mut w = DMatrix::zeros(p, p);
    for (i, list) in lists.iter().enumerate() {
        for &j in list {
            w[(i, j)] = 1.0;
            w[(j, i)] = 1.0;
        }
    }
    w
}

/// `v` nearest candidates to column `i`, ties broken by smaller index.
fn nearest(features: &DMatrix<f64>, i: usize, candidates: impl Iterator<Item = usize>, v: usize) -> Vec<usize> {
    let mut scored: Vec<(f64, usize)> = candidates
        .map(|j| (column_sq_dist(features, i, features, j), j))
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut picked: Vec<usize> = scored.into_iter().take(v).map(|(_, j)| j).collect();
    picked.sort_unstable();
    picked
}

/// Exact brute-force neighbor search in the original feature space.
pub fn neighbor_sets_raw(features: &DMatrix<f64>, labels: &[usize], v_w: usize, v_b: usize) -> Result<NeighborSets> {
    if v_w == 0 || v_b == 0 {
        return Err(Error::InvalidArgument("neighbor counts v_w and v_b must be at least 1".into()));
    }
    if features.ncols() != labels.len() {
        return Err(Error::mismatch(
            format!("{} labels", features.ncols()),
            format!("{} labels", labels.len()),
        ));
    }
    let mut distinct = labels.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::InvalidData("neighbor sets need at least two classes".into()));
    }
    let p = labels.len();
    let rows: Vec<(Vec<usize>, Vec<usize>)> = (0..p)
        .into_par_iter()
        .map(|i| {
            let same = (0..p).filter(|&j| j != i && labels[j] == labels[i]);
            let other = (0..p).filter(|&j| labels[j] != labels[i]);
            (nearest(features, i, same, v_w), nearest(features, i, other, v_b))
        })
        .collect();
    let truncated = rows.iter().any(|(w, b)| w.len() < v_w || b.len() < v_b);
    if truncated {
        log::warn!("neighbor sets truncated: some samples have fewer than v_w={v_w} / v_b={v_b} candidates");
    }
    let (within, between) = rows.into_iter().unzip();
    Ok(NeighborSets {
        within,
        between,
        v_w,
        v_b,
        truncated,
    })
}

pub fn neighbor_sets(train: &LabeledDataset, v_w: usize, v_b: usize) -> Result<NeighborSets> {
    neighbor_sets_raw(train.features(), train.labels(), v_w, v_b)
}

/// Sparse symmetric signed affinity matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffinityGraph {
    /// Nonzero entries of each row as `(column, value)`, ascending by column.
    rows: Vec<Vec<(usize, i8)>>,
    pub source: NeighborSets,
}

impl AffinityGraph {
    pub fn size(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &[(usize, i8)] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> i8 {
        self.rows[i]
            .binary_search_by_key(&j, |&(c, _)| c)
            .map(|k| self.rows[i][k].1)
            .unwrap_or(0)
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.nnz() == 0
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let p = self.size();
        let mut a = DMatrix::zeros(p, p);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                a[(i, j)] = v as f64;
            }
        }
        a
    }

    /// Matrix Market coordinate text, 1-based indices, full (general) storage.
    pub fn to_matrix_market(&self) -> String {
        let p = self.size();
        let mut out = String::from("%%MatrixMarket matrix coordinate integer general\n");
        let _ = writeln!(out, "{p} {p} {}", self.nnz());
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                let _ = writeln!(out, "{} {} {v}", i + 1, j + 1);
            }
        }
        out
    }
}

pub fn build_affinity(sets: &NeighborSets, labels: &[usize]) -> Result<AffinityGraph> {
    let p = sets.len();
    if labels.len() != p || sets.between.len() != p {
        return Err(Error::mismatch(format!("{p} samples"), format!("{} labels", labels.len())));
    }
    let mut g_w = vec![Vec::new(); p];
    let mut g_b = vec![Vec::new(); p];
    for i in 0..p {
        for &j in &sets.within[i] {
            if j >= p || j == i || labels[j] != labels[i] {
                return Err(Error::InvalidData(format!("within-class neighbor {j} of {i} is inconsistent with labels")));
            }
            g_w[i].push(j);
            g_w[j].push(i);
        }
        for &j in &sets.between[i] {
            if j >= p || labels[j] == labels[i] {
                return Err(Error::InvalidData(format!("between-class neighbor {j} of {i} is inconsistent with labels")));
            }
            g_b[i].push(j);
            g_b[j].push(i);
        }
    }
    let rows = (0..p)
        .map(|i| {
            let mut entries: Vec<(usize, i8)> = Vec::new();
            let mut w = std::mem::take(&mut g_w[i]);
            let mut b = std::mem::take(&mut g_b[i]);
            w.sort_unstable();
            w.dedup();
            b.sort_unstable();
            b.dedup();
            entries.extend(w.into_iter().map(|j| (j, 1i8)));
            entries.extend(b.into_iter().map(|j| (j, -1i8)));
            entries.sort_unstable_by_key(|&(j, _)| j);
            // disjoint label pools keep a column from appearing with both signs
            entries
        })
        .collect();
    Ok(AffinityGraph {
        rows,
        source: sets.clone(),
    })
}

/// `D − A` with `D` the diagonal of row sums. Indefinite in general.
pub fn signed_laplacian(graph: &AffinityGraph) -> DMatrix<f64> {
    let mut l = graph.to_dense();
    l.neg_mut();
    for i in 0..graph.size() {
        let degree: f64 = graph.row(i).iter().map(|&(_, v)| v as f64).sum();
        l[(i, i)] += degree;
    }
    l
}

/// Graph Laplacian `D − W` of a dense symmetric weight matrix.
pub fn laplacian(weights: &DMatrix<f64>) -> DMatrix<f64> {
    let mut l = -weights.clone();
    for i in 0..weights.nrows() {
        l[(i, i)] += weights.row(i).sum();
    }
    l
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(points: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(1, points.len(), points)
    }

    #[test]
    fn only_pair() {
        let sets = neighbor_sets_raw(&line(&[0.0, 1.0, 9.0]), &[1, 1, 2], 1, 1).unwrap();
        assert_eq!(sets.within[0], vec![1]);
        assert_eq!(sets.within[1], vec![0]);
        assert!(sets.within[2].is_empty());
        assert!(sets.truncated);
    }

    #[test]
    fn alternating_four_points() {
        let labels = [1, 2, 1, 2];
        let sets = neighbor_sets_raw(&line(&[0.0, 1.0, 2.0, 3.0]), &labels, 1, 1).unwrap();
        assert_eq!(sets.within, vec![vec![2], vec![3], vec![0], vec![1]]);
        assert_eq!(sets.between, vec![vec![1], vec![0], vec![1], vec![2]]);
        assert!(!sets.truncated);

        let a = build_affinity(&sets, &labels).unwrap();
        let expected = [[0, -1, 1, 0], [-1, 0, -1, 1], [1, -1, 0, -1], [0, 1, -1, 0]];
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(a.get(i, j), expected[i][j], "A[{i}][{j}]");
            }
        }
    }

    #[test]
    fn singleton_class_truncates() {
        let sets = neighbor_sets_raw(&line(&[0.0, 1.0, 2.0]), &[1, 2, 2], 5, 1).unwrap();
        assert!(sets.within[0].is_empty());
        assert!(sets.truncated);
        assert_eq!(sets.within[1], vec![2]);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(neighbor_sets_raw(&line(&[0.0, 1.0]), &[1, 2], 0, 1).is_err());
        assert!(neighbor_sets_raw(&line(&[0.0, 1.0]), &[1, 1], 1, 1).is_err());
    }

    #[test]
    fn laplacian_examples() {
        let sets = neighbor_sets_raw(&line(&[0.0, 1.0, 50.0]), &[1, 1, 2], 1, 1).unwrap();
        let a = build_affinity(&sets, &[1, 1, 2]).unwrap();
        // samples 0 and 1 are within-neighbors; sample 2's nearest other-class point is 1
        assert_eq!(a.get(0, 1), 1);
        let l = signed_laplacian(&a);
        assert_eq!(l[(0, 0)], 1.0 - 1.0);
        assert_eq!(l[(0, 1)], -1.0);
        assert_eq!(l[(1, 2)], 1.0);

        let pos = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(laplacian(&pos), DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
        let neg = -pos;
        assert_eq!(laplacian(&neg), DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]));
    }

    #[test]
    fn signed_pair_laplacian() {
        // two points of different classes: each is the other's between-neighbor
        let sets = neighbor_sets_raw(&line(&[0.0, 1.0]), &[1, 2], 1, 1).unwrap();
        let a = build_affinity(&sets, &[1, 2]).unwrap();
        assert_eq!(signed_laplacian(&a), DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]));
    }

    #[test]
    fn matrix_market_export() {
        let sets = neighbor_sets_raw(&line(&[0.0, 1.0]), &[1, 2], 1, 1).unwrap();
        let a = build_affinity(&sets, &[1, 2]).unwrap();
        assert_eq!(
            a.to_matrix_market(),
            "%%MatrixMarket matrix coordinate integer general\n2 2 2\n1 2 -1\n2 1 -1\n"
        );
    }

    #[test]
    fn inconsistent_sets_rejected() {
        let sets = NeighborSets {
            within: vec![vec![1], vec![0]],
            between: vec![vec![], vec![]],
            v_w: 1,
            v_b: 1,
            truncated: true,
        };
        assert!(build_affinity(&sets, &[1, 2]).is_err());
    }
}
