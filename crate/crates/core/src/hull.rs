//! Closed convex hull of a point set: distance and projection queries.
//!
//! Dimensions one and two build the hull explicitly (interval, Andrew's
//! monotone chain). Higher dimensions project onto the hull with Wolfe's
//! minimum-norm-point algorithm over the convex-combination simplex, which
//! terminates finitely and needs no explicit facet structure.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::measure::{DiscreteMeasure, Point};

const WOLFE_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub enum ConvexHull {
    Interval { lo: f64, hi: f64 },
    /// Counter-clockwise hull vertices; one or two entries for degenerate inputs.
    Polygon(Vec<[f64; 2]>),
    General { dim: usize, points: Vec<Point> },
}

impl ConvexHull {
    pub fn new(points: &[Point]) -> Result<Self> {
        let first = points.first().ok_or(Error::EmptyMeasure)?;
        let dim = first.dim();
        if let Some(bad) = points.iter().find(|p| p.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.dim(),
            });
        }
        Ok(match dim {
            1 => {
                let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |acc, p| {
                    (acc.0.min(p.0[0]), acc.1.max(p.0[0]))
                });
                ConvexHull::Interval { lo, hi }
            }
            2 => ConvexHull::Polygon(monotone_chain(points)),
            _ => ConvexHull::General {
                dim,
                points: dedup(points),
            },
        })
    }

    pub fn of_support(measure: &DiscreteMeasure) -> Result<Self> {
        Self::new(measure.points())
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexHull::Interval { .. } => 1,
            ConvexHull::Polygon(_) => 2,
            ConvexHull::General { dim, .. } => *dim,
        }
    }

    /// Nearest point of the hull.
    pub fn project(&self, q: &Point) -> Result<Point> {
        if q.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: q.dim(),
            });
        }
        Ok(match self {
            ConvexHull::Interval { lo, hi } => Point(vec![q.0[0].clamp(*lo, *hi)]),
            ConvexHull::Polygon(poly) => Point(project_polygon(poly, [q.0[0], q.0[1]]).to_vec()),
            ConvexHull::General { points, .. } => wolfe_projection(points, q),
        })
    }

    /// Euclidean distance to the hull, zero inside.
    pub fn distance(&self, q: &Point) -> Result<f64> {
        let proj = self.project(q)?;
        Ok(proj.dist(q))
    }
}

/// Distance from each query point to the closed convex hull of `supp ρ`.
pub fn convex_hull_margin(rho: &DiscreteMeasure, query: &[Point]) -> Result<Vec<f64>> {
    let hull = ConvexHull::of_support(rho)?;
    query.iter().map(|q| hull.distance(q)).collect()
}

fn dedup(points: &[Point]) -> Vec<Point> {
    let mut out: Vec<Point> = Vec::with_capacity(points.len());
    for p in points {
        if !out.iter().any(|q| q == p) {
            out.push(p.clone());
        }
    }
    out
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn monotone_chain(points: &[Point]) -> Vec<[f64; 2]> {
    let mut pts: Vec<[f64; 2]> = points.iter().map(|p| [p.0[0], p.0[1]]).collect();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn project_segment2(a: [f64; 2], b: [f64; 2], q: [f64; 2]) -> [f64; 2] {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    if len2 == 0.0 {
        return a;
    }
    let t = (((q[0] - a[0]) * d[0] + (q[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0);
    [a[0] + t * d[0], a[1] + t * d[1]]
}

fn project_polygon(poly: &[[f64; 2]], q: [f64; 2]) -> [f64; 2] {
    match poly.len() {
        0 => q,
        1 => poly[0],
        2 => project_segment2(poly[0], poly[1], q),
        n => {
            let inside = (0..n).all(|i| cross(poly[i], poly[(i + 1) % n], q) >= 0.0);
            if inside {
                return q;
            }
            let mut best = poly[0];
            let mut best_d = f64::INFINITY;
            for i in 0..n {
                let c = project_segment2(poly[i], poly[(i + 1) % n], q);
                let d = (c[0] - q[0]).powi(2) + (c[1] - q[1]).powi(2);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            best
        }
    }
}

/// Minimum-norm point of `conv{pᵢ − q}`, shifted back by `q`.
fn wolfe_projection(points: &[Point], q: &Point) -> Point {
    let shifted: Vec<DVector<f64>> = points
        .iter()
        .map(|p| DVector::from_iterator(p.dim(), p.0.iter().zip(&q.0).map(|(a, b)| a - b)))
        .collect();
    let x = min_norm_point(&shifted);
    Point(x.iter().zip(&q.0).map(|(a, b)| a + b).collect())
}

pub(crate) fn min_norm_point(pts: &[DVector<f64>]) -> DVector<f64> {
    let scale = pts.iter().map(|p| p.norm_squared()).fold(0.0, f64::max).max(1e-300);
    let start = pts
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.norm_squared().partial_cmp(&b.1.norm_squared()).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    let mut active: Vec<usize> = vec![start];
    let mut lambda: Vec<f64> = vec![1.0];
    let mut x = pts[start].clone();

    for _major in 0..(10 * pts.len() + 100) {
        let (j, xpj) = pts
            .iter()
            .enumerate()
            .map(|(i, p)| (i, x.dot(p)))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        if xpj >= x.norm_squared() - WOLFE_TOL * scale || active.contains(&j) {
            break;
        }
        active.push(j);
        lambda.push(0.0);

        loop {
            let mu = match affine_min_norm(pts, &active) {
                Some(mu) => mu,
                None => {
                    // affinely dependent set: drop the newest point and stop
                    active.pop();
                    lambda.pop();
                    return combine(pts, &active, &lambda);
                }
            };
            if mu.iter().all(|&m| m > WOLFE_TOL) {
                lambda = mu;
                x = combine(pts, &active, &lambda);
                break;
            }
            let mut theta = 1.0;
            for (l, m) in lambda.iter().zip(&mu) {
                if *m <= WOLFE_TOL && l - m > 0.0 {
                    theta = f64::min(theta, l / (l - m));
                }
            }
            for (l, m) in lambda.iter_mut().zip(&mu) {
                *l = (1.0 - theta) * *l + theta * m;
            }
            let mut k = 0;
            while k < active.len() {
                if lambda[k] <= WOLFE_TOL {
                    active.remove(k);
                    lambda.remove(k);
                } else {
                    k += 1;
                }
            }
            let s: f64 = lambda.iter().sum();
            for l in &mut lambda {
                *l /= s;
            }
            x = combine(pts, &active, &lambda);
            if active.len() == 1 {
                break;
            }
        }
    }
    x
}

fn combine(pts: &[DVector<f64>], active: &[usize], lambda: &[f64]) -> DVector<f64> {
    let mut x = DVector::zeros(pts[0].len());
    for (&i, &l) in active.iter().zip(lambda) {
        x += &pts[i] * l;
    }
    x
}

/// Barycentric weights of the minimum-norm point of the affine hull of the active set.
fn affine_min_norm(pts: &[DVector<f64>], active: &[usize]) -> Option<Vec<f64>> {
    let k = active.len();
    let mut m = DMatrix::zeros(k + 1, k + 1);
    let mut rhs = DVector::zeros(k + 1);
    for a in 0..k {
        for b in 0..k {
            m[(a, b)] = pts[active[a]].dot(&pts[active[b]]);
        }
        m[(a, k)] = 1.0;
        m[(k, a)] = 1.0;
    }
    rhs[k] = 1.0;
    let sol = m.lu().solve(&rhs)?;
    let mu: Vec<f64> = sol.iter().take(k).copied().collect();
    if mu.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(mu)
}
