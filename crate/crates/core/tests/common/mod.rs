//! Independent oracles for the integration tests.
#![allow(dead_code)]

use curvemeas::{DiscreteMeasure, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EPS: f64 = 1e-12;

/// min cᵀx subject to Ax = b, x ≥ 0, by a dense two-phase simplex with
/// Bland's rule. `None` if infeasible or unbounded.
pub fn lp_min(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Option<f64> {
    let m = a.len();
    let n = c.len();
    let width = n + m + 1;
    let mut t: Vec<Vec<f64>> = Vec::with_capacity(m);
    for (i, row) in a.iter().enumerate() {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        let mut r = vec![0.0; width];
        for j in 0..n {
            r[j] = sign * row[j];
        }
        r[n + i] = 1.0;
        r[width - 1] = sign * b[i];
        t.push(r);
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    let phase1: Vec<f64> = (0..n + m).map(|j| if j >= n { 1.0 } else { 0.0 }).collect();
    if !simplex(&mut t, &mut basis, &phase1, n + m) {
        return None;
    }
    if objective(&t, &basis, &phase1) > 1e-9 {
        return None;
    }
    // pivot remaining artificials out where possible
    for i in 0..m {
        if basis[i] >= n {
            if let Some(j) = (0..n).find(|&j| t[i][j].abs() > 1e-9) {
                pivot(&mut t, &mut basis, i, j);
            }
        }
    }
    let mut cost = c.to_vec();
    cost.extend(std::iter::repeat(0.0).take(m));
    if !simplex(&mut t, &mut basis, &cost, n) {
        return None;
    }
    Some(objective(&t, &basis, &cost))
}

fn objective(t: &[Vec<f64>], basis: &[usize], cost: &[f64]) -> f64 {
    let rhs = t[0].len() - 1;
    basis.iter().enumerate().map(|(i, &j)| cost[j] * t[i][rhs]).sum()
}

fn pivot(t: &mut [Vec<f64>], basis: &mut [usize], r: usize, c: usize) {
    let p = t[r][c];
    for v in t[r].iter_mut() {
        *v /= p;
    }
    let row = t[r].clone();
    for (i, other) in t.iter_mut().enumerate() {
        if i != r {
            let f = other[c];
            if f != 0.0 {
                for (o, v) in other.iter_mut().zip(&row) {
                    *o -= f * v;
                }
            }
        }
    }
    basis[r] = c;
}

/// Runs simplex iterations with entering columns restricted to `< allowed`.
fn simplex(t: &mut [Vec<f64>], basis: &mut [usize], cost: &[f64], allowed: usize) -> bool {
    let rhs = t[0].len() - 1;
    for _ in 0..100_000 {
        let entering = (0..allowed).find(|&j| {
            if basis.contains(&j) {
                return false;
            }
            let z: f64 = basis.iter().enumerate().map(|(i, &bj)| cost[bj] * t[i][j]).sum();
            cost[j] - z < -EPS
        });
        let Some(j) = entering else { return true };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..t.len() {
            if t[i][j] > EPS {
                let ratio = t[i][rhs] / t[i][j];
                let better = match leave {
                    None => true,
                    Some((li, lr)) => ratio < lr - EPS || (ratio <= lr + EPS && basis[i] < basis[li]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        let Some((i, _)) = leave else { return false };
        pivot(t, basis, i, j);
    }
    false
}

pub fn cost(x: &Point, y: &Point, p: f64) -> f64 {
    x.dist(y).powf(p)
}

/// Optimal transport cost as an LP over the full coupling matrix.
pub fn ot_oracle(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> f64 {
    let (n, m) = (mu.len(), nu.len());
    let mut c = Vec::with_capacity(n * m);
    for x in mu.points() {
        for y in nu.points() {
            c.push(cost(x, y, p));
        }
    }
    let mut a = Vec::new();
    let mut b = Vec::new();
    for i in 0..n {
        let mut row = vec![0.0; n * m];
        for j in 0..m {
            row[i * m + j] = 1.0;
        }
        a.push(row);
        b.push(mu.weights()[i]);
    }
    for j in 0..m {
        let mut row = vec![0.0; n * m];
        for i in 0..n {
            row[i * m + j] = 1.0;
        }
        a.push(row);
        b.push(nu.weights()[j]);
    }
    lp_min(&c, &a, &b).expect("balanced transport is feasible")
}

/// Transport to `sites` with free weights `w ≥ lower`: the coupling plus
/// one surplus variable per site.
pub fn lower_bounded_oracle(mu: &DiscreteMeasure, sites: &[Point], lower: &[f64], p: f64) -> f64 {
    let (n, m) = (mu.len(), sites.len());
    let nv = n * m + m;
    let mut c = vec![0.0; nv];
    for (i, x) in mu.points().iter().enumerate() {
        for (j, y) in sites.iter().enumerate() {
            c[i * m + j] = cost(x, y, p);
        }
    }
    let mut a = Vec::new();
    let mut b = Vec::new();
    for i in 0..n {
        let mut row = vec![0.0; nv];
        for j in 0..m {
            row[i * m + j] = 1.0;
        }
        a.push(row);
        b.push(mu.weights()[i]);
    }
    for j in 0..m {
        let mut row = vec![0.0; nv];
        for i in 0..n {
            row[i * m + j] = 1.0;
        }
        row[n * m + j] = -1.0;
        a.push(row);
        b.push(lower[j]);
    }
    lp_min(&c, &a, &b).expect("floors fit inside the mass")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_point(rng: &mut ChaCha8Rng, d: usize, half_width: f64) -> Point {
    Point((0..d).map(|_| rng.random_range(-half_width..half_width)).collect())
}

/// Probability measure on `n` random points with weights bounded away from 0.
pub fn random_measure(rng: &mut ChaCha8Rng, n: usize, d: usize) -> DiscreteMeasure {
    let pts = (0..n).map(|_| random_point(rng, d, 1.0)).collect();
    let w = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    DiscreteMeasure::new(pts, w).unwrap()
}

#[test]
fn lp_small_cases() {
    // min x + 2y, x + y = 1 → 1
    assert!((lp_min(&[1.0, 2.0], &[vec![1.0, 1.0]], &[1.0]).unwrap() - 1.0).abs() < 1e-12);
    // x − y = 1 with x, y ≥ 0 and cost −y is unbounded
    assert!(lp_min(&[0.0, -1.0], &[vec![1.0, -1.0]], &[1.0]).is_none());
    // x = −1 infeasible
    assert!(lp_min(&[1.0], &[vec![1.0]], &[-1.0]).is_none());
}
