//! Starting graphs: a principal-axis segment and an MST over k-means centroids.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::graph::{minimum_spanning_tree, EmbeddedGraph};
use crate::measure::{dist_sq, DiscreteMeasure, Point};

/// Polyline with `n ≥ 2` equally spaced vertices on `mean ± σ·v`, where v
/// is the top principal axis and σ² its variance. `None` when ρ has no spread.
pub fn principal_segment(rho: &DiscreteMeasure, n: usize) -> Option<EmbeddedGraph> {
    let d = rho.dim();
    let mean = rho.mean();
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for (x, w) in rho.iter() {
        let c = x.sub(&mean);
        for i in 0..d {
            for j in 0..d {
                cov[(i, j)] += w * c.0[i] * c.0[j];
            }
        }
    }
    let eig = SymmetricEigen::new(cov);
    let (k, &var) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())?;
    if !(var > 0.0) {
        return None;
    }
    let sigma = var.sqrt();
    let axis = Point(eig.eigenvectors.column(k).iter().copied().collect());
    let a = mean.sub(&axis.scale(sigma));
    let b = mean.add(&axis.scale(sigma));
    let n = n.max(2);
    let points = (0..n).map(|i| a.lerp(&b, i as f64 / (n - 1) as f64)).collect();
    EmbeddedGraph::polyline(points).ok()
}

/// Weighted k-means (Lloyd) with k-means++ seeding from `seed`.
/// Returns at most `k` distinct centroids.
pub fn kmeans(rho: &DiscreteMeasure, k: usize, seed: u64, iterations: usize) -> Vec<Point> {
    let pts = rho.points();
    let w = rho.weights();
    let k = k.min(pts.len()).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut centers: Vec<Point> = Vec::with_capacity(k);
    let first = pick_weighted(&mut rng, w).unwrap_or(0);
    centers.push(pts[first].clone());
    let mut nearest: Vec<f64> = pts.iter().map(|x| x.dist_sq(&centers[0])).collect();
    while centers.len() < k {
        let scores: Vec<f64> = nearest.iter().zip(w).map(|(d, w)| d * w).collect();
        let Some(i) = pick_weighted(&mut rng, &scores) else { break };
        centers.push(pts[i].clone());
        for (j, x) in pts.iter().enumerate() {
            nearest[j] = nearest[j].min(x.dist_sq(&pts[i]));
        }
    }

    let d = rho.dim();
    let mut assign = vec![0usize; pts.len()];
    for _ in 0..iterations {
        let mut changed = false;
        for (j, x) in pts.iter().enumerate() {
            let best = (0..centers.len())
                .min_by(|&a, &b| {
                    dist_sq(x.coords(), centers[a].coords())
                        .partial_cmp(&dist_sq(x.coords(), centers[b].coords()))
                        .unwrap()
                })
                .unwrap();
            if best != assign[j] {
                assign[j] = best;
                changed = true;
            }
        }
        let mut sums = vec![(vec![0.0; d], 0.0); centers.len()];
        for (j, x) in pts.iter().enumerate() {
            let s = &mut sums[assign[j]];
            for (acc, c) in s.0.iter_mut().zip(x.coords()) {
                *acc += w[j] * c;
            }
            s.1 += w[j];
        }
        for (c, (s, m)) in centers.iter_mut().zip(sums) {
            if m > 0.0 {
                *c = Point(s.into_iter().map(|v| v / m).collect());
            }
        }
        if !changed {
            break;
        }
    }
    let mut distinct: Vec<Point> = Vec::with_capacity(centers.len());
    for c in centers {
        if !distinct.contains(&c) {
            distinct.push(c);
        }
    }
    distinct
}

fn pick_weighted(rng: &mut ChaCha8Rng, scores: &[f64]) -> Option<usize> {
    let total: f64 = scores.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let mut r = rng.random::<f64>() * total;
    for (i, &s) in scores.iter().enumerate() {
        if r < s {
            return Some(i);
        }
        r -= s;
    }
    scores.iter().rposition(|&s| s > 0.0)
}

/// Euclidean MST over `k` k-means centroids.
pub fn kmeans_tree(rho: &DiscreteMeasure, k: usize, seed: u64) -> Result<EmbeddedGraph> {
    minimum_spanning_tree(&kmeans(rho, k, seed, 100))
}
