//! Reference implementations written from the definitions, with no shared
//! code path with the library.
#![allow(dead_code)]

use geomap::rng;
use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

/// Random features (n × p) and labels in 1..=c with every class present.
pub fn random_labeled(seed: u64, n: usize, p: usize, c: usize) -> (DMatrix<f64>, Vec<usize>) {
    assert!(p >= c);
    let mut rng = rng::seeded(seed);
    let x = DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng));
    let mut labels: Vec<usize> = (0..p).map(|i| if i < c { i + 1 } else { rng.random_range(1..=c) }).collect();
    // keep the guaranteed members from always sitting at the front
    for i in (1..p).rev() {
        let j = rng.random_range(0..=i);
        labels.swap(i, j);
    }
    (x, labels)
}

/// Features on a coarse integer grid, so many distances tie exactly.
pub fn random_tied(seed: u64, n: usize, p: usize, c: usize) -> (DMatrix<f64>, Vec<usize>) {
    let (_, labels) = random_labeled(seed, n, p, c);
    let mut rng = rng::seeded(seed ^ 0x5eed);
    let x = DMatrix::from_fn(n, p, |_, _| rng.random_range(-2i32..=2) as f64);
    (x, labels)
}

pub fn random_matrix(seed: u64, rows: usize, cols: usize) -> DMatrix<f64> {
    let mut rng = rng::seeded(seed);
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
}

/// Gram–Schmidt orthonormalization of the columns of a random matrix.
pub fn random_orthonormal(seed: u64, n: usize, m: usize) -> DMatrix<f64> {
    let mut a = random_matrix(seed, n, m);
    for j in 0..m {
        for _ in 0..2 {
            for k in 0..j {
                let proj = a.column(k).dot(&a.column(j));
                let ck = a.column(k).clone_owned();
                a.column_mut(j).axpy(-proj, &ck, 1.0);
            }
        }
        let norm = a.column(j).norm();
        a.column_mut(j).scale_mut(1.0 / norm);
    }
    a
}

fn sq_dist(x: &DMatrix<f64>, i: usize, j: usize) -> f64 {
    (0..x.nrows()).map(|r| (x[(r, i)] - x[(r, j)]).powi(2)).sum()
}

/// The `v` nearest of `candidates` to `i`, ties to the smaller index.
fn nearest(x: &DMatrix<f64>, i: usize, candidates: impl Iterator<Item = usize>, v: usize) -> Vec<usize> {
    let mut c: Vec<(f64, usize)> = candidates.map(|j| (sq_dist(x, i, j), j)).collect();
    // insertion sort keeps equal distances in index order
    for a in 1..c.len() {
        let mut b = a;
        while b > 0 && (c[b].0 < c[b - 1].0 || (c[b].0 == c[b - 1].0 && c[b].1 < c[b - 1].1)) {
            c.swap(b, b - 1);
            b -= 1;
        }
    }
    c.into_iter().take(v).map(|(_, j)| j).collect()
}

/// Signed affinity by direct enumeration of the within/between kNN rules.
pub fn brute_force_affinity(x: &DMatrix<f64>, labels: &[usize], v_w: usize, v_b: usize) -> DMatrix<f64> {
    let p = labels.len();
    let within: Vec<Vec<usize>> = (0..p)
        .map(|i| nearest(x, i, (0..p).filter(|&j| j != i && labels[j] == labels[i]), v_w))
        .collect();
    let between: Vec<Vec<usize>> = (0..p)
        .map(|i| nearest(x, i, (0..p).filter(|&j| labels[j] != labels[i]), v_b))
        .collect();
    DMatrix::from_fn(p, p, |i, j| {
        let gw = within[i].contains(&j) || within[j].contains(&i);
        let gb = between[i].contains(&j) || between[j].contains(&i);
        (gw as i32 - gb as i32) as f64
    })
}

/// `Σ_i Σ_j A_ij ‖Uᵀx_i − Uᵀx_j‖²` over all ordered pairs; `u` need not be orthonormal.
pub fn double_sum_cost(u: &DMatrix<f64>, x: &DMatrix<f64>, a: &DMatrix<f64>) -> f64 {
    let y = u.transpose() * x;
    let p = x.ncols();
    let mut total = 0.0;
    for i in 0..p {
        for j in 0..p {
            if a[(i, j)] != 0.0 {
                let d: f64 = (0..y.nrows()).map(|r| (y[(r, i)] - y[(r, j)]).powi(2)).sum();
                total += a[(i, j)] * d;
            }
        }
    }
    total
}

/// Central finite differences of `f` at `u`.
pub fn finite_difference(f: impl Fn(&DMatrix<f64>) -> f64, u: &DMatrix<f64>, h: f64) -> DMatrix<f64> {
    DMatrix::from_fn(u.nrows(), u.ncols(), |i, j| {
        let mut plus = u.clone();
        plus[(i, j)] += h;
        let mut minus = u.clone();
        minus[(i, j)] -= h;
        (f(&plus) - f(&minus)) / (2.0 * h)
    })
}

/// Largest elementwise relative error; elements smaller than `floor · max|expected|`
/// are measured against that floor.
pub fn max_relative_error(got: &DMatrix<f64>, expected: &DMatrix<f64>, floor: f64) -> f64 {
    let scale = expected.amax() * floor;
    got.iter()
        .zip(expected.iter())
        .map(|(g, e)| (g - e).abs() / e.abs().max(scale).max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

/// Sum of the `m` smallest eigenvalues of a symmetric matrix via cyclic Jacobi.
pub fn jacobi_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut a = a.clone();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[(i, j)].powi(2)).sum();
        if off < 1e-26 * a.norm_squared().max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[(p, q)] == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// `X(D − A)Xᵀ` assembled from pair differences: `½ Σ_ij A_ij (x_i − x_j)(x_i − x_j)ᵀ`.
pub fn pair_scatter(x: &DMatrix<f64>, a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let p = x.ncols();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..p {
        for j in 0..p {
            if a[(i, j)] != 0.0 {
                let d = x.column(i) - x.column(j);
                m += &d * d.transpose() * (0.5 * a[(i, j)]);
            }
        }
    }
    m
}

/// Ky Fan value of the graph cost: twice the sum of the `m` smallest eigenvalues.
pub fn ky_fan_cost(x: &DMatrix<f64>, a: &DMatrix<f64>, m: usize) -> f64 {
    2.0 * jacobi_eigenvalues(&pair_scatter(x, a)).iter().take(m).sum::<f64>()
}

/// `½ αᵀQα − Σα` with `Q_ij = y_i y_j (x_iᵀx_j + 1)`.
pub fn svm_dual(x: &DMatrix<f64>, y: &[f64], alpha: &[f64]) -> f64 {
    let p = y.len();
    let mut quad = 0.0;
    for i in 0..p {
        for j in 0..p {
            let k = x.column(i).dot(&x.column(j)) + 1.0;
            quad += alpha[i] * alpha[j] * y[i] * y[j] * k;
        }
    }
    0.5 * quad - alpha.iter().sum::<f64>()
}

/// Box-constrained dual minimized by projected gradient with a fixed 1/L step.
pub fn svm_dual_projected_gradient(x: &DMatrix<f64>, y: &[f64], c: f64, iters: usize) -> f64 {
    let p = y.len();
    let q = DMatrix::from_fn(p, p, |i, j| y[i] * y[j] * (x.column(i).dot(&x.column(j)) + 1.0));
    let lipschitz = q.trace().max(1e-12);
    let mut alpha = vec![0.0; p];
    for _ in 0..iters {
        let grad: Vec<f64> = (0..p).map(|i| (0..p).map(|j| q[(i, j)] * alpha[j]).sum::<f64>() - 1.0).collect();
        for i in 0..p {
            alpha[i] = (alpha[i] - grad[i] / lipschitz).clamp(0.0, c);
        }
    }
    svm_dual(x, y, &alpha)
}

/// Dual minimum over a uniform grid of the box `[0, c]^p`.
pub fn svm_dual_grid(x: &DMatrix<f64>, y: &[f64], c: f64, steps: usize) -> f64 {
    let p = y.len();
    let q = DMatrix::from_fn(p, p, |i, j| y[i] * y[j] * (x.column(i).dot(&x.column(j)) + 1.0));
    let mut idx = vec![0usize; p];
    let mut alpha = vec![0.0; p];
    let mut best = f64::INFINITY;
    loop {
        for (a, &k) in alpha.iter_mut().zip(&idx) {
            *a = c * k as f64 / steps as f64;
        }
        let mut value = 0.0;
        for i in 0..p {
            value -= alpha[i];
            for j in 0..p {
                value += 0.5 * alpha[i] * alpha[j] * q[(i, j)];
            }
        }
        best = best.min(value);
        let mut d = 0;
        loop {
            if d == p {
                return best;
            }
            idx[d] += 1;
            if idx[d] <= steps {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

/// Best axis-aligned root split by exhaustive enumeration: maximizes
/// `Σ l_k²/n_l + Σ r_k²/n_r` (equivalently minimizes weighted Gini), compared
/// exactly as fractions, ties to the lower feature then smaller threshold.
pub fn exhaustive_root_split(x: &DMatrix<f64>, labels: &[usize], c: usize) -> Option<(usize, f64)> {
    let p = labels.len();
    let mut best: Option<(u128, u128, usize, f64)> = None;
    for f in 0..x.nrows() {
        let mut values: Vec<f64> = (0..p).map(|j| x[(f, j)]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let mut left = vec![0u128; c + 1];
            let mut right = vec![0u128; c + 1];
            for j in 0..p {
                if x[(f, j)] <= t {
                    left[labels[j]] += 1;
                } else {
                    right[labels[j]] += 1;
                }
            }
            let nl: u128 = left.iter().sum();
            let nr: u128 = right.iter().sum();
            let sl: u128 = left.iter().map(|v| v * v).sum();
            let sr: u128 = right.iter().map(|v| v * v).sum();
            let num = sl * nr + sr * nl;
            let den = nl * nr;
            let better = match best {
                None => true,
                Some((bn, bd, _, _)) => num * bd > bn * den,
            };
            if better {
                best = Some((num, den, f, t));
            }
        }
    }
    best.map(|(_, _, f, t)| (f, t))
}
