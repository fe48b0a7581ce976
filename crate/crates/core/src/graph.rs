//! Connected one-dimensional sets embedded in ℝᵈ, stored as straight-edge graphs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{dist_sq, Point};

/// Tolerance for degenerate sphere/graph contact in [`EmbeddedGraph::sphere_crossings`].
pub const SPHERE_DEGENERACY_TOL: f64 = 1e-12;

/// A compact connected set Σ made of straight segments.
///
/// Either a single point (no edges) or a connected graph whose edges all
/// have positive length. Geometric overlap between edges is not detected;
/// lengths of overlapping edges are summed.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddedGraph {
    dim: usize,
    vertices: Vec<Point>,
    edges: Vec<[usize; 2]>,
}

/// Result of projecting a point onto a graph.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub closest: Point,
    /// `None` for a singleton graph.
    pub edge: Option<usize>,
    /// Position along the edge, 0 at its first vertex.
    pub param: f64,
    pub distance: f64,
}

impl EmbeddedGraph {
    pub fn new(vertices: Vec<Point>, edges: Vec<[usize; 2]>) -> Result<Self> {
        let dim = vertices
            .first()
            .map(Point::dim)
            .ok_or_else(|| Error::InvalidGraph("no vertices".into()))?;
        if dim == 0 {
            return Err(Error::InvalidGraph("zero-dimensional vertices".into()));
        }
        for (i, v) in vertices.iter().enumerate() {
            if v.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: v.dim(),
                });
            }
            if !v.is_finite() {
                return Err(Error::NonFinite { index: i });
            }
        }
        let n = vertices.len();
        if edges.is_empty() {
            if n != 1 {
                return Err(Error::InvalidGraph(format!(
                    "{n} vertices without edges; only a single point may have no edges"
                )));
            }
            return Ok(EmbeddedGraph {
                dim,
                vertices,
                edges,
            });
        }
        let mut seen = std::collections::HashSet::new();
        for (k, &[a, b]) in edges.iter().enumerate() {
            if a >= n || b >= n {
                return Err(Error::InvalidGraph(format!("edge {k} has an out-of-range vertex")));
            }
            if a == b {
                return Err(Error::InvalidGraph(format!("edge {k} is a self-loop")));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(Error::InvalidGraph(format!("edge {k} is a duplicate")));
            }
            if !(vertices[a].dist_sq(&vertices[b]) > 0.0) {
                return Err(Error::InvalidGraph(format!("edge {k} has zero length")));
            }
        }
        let graph = EmbeddedGraph {
            dim,
            vertices,
            edges,
        };
        if !graph.is_connected() {
            return Err(Error::InvalidGraph("graph is not connected".into()));
        }
        Ok(graph)
    }

    pub fn singleton(p: Point) -> Self {
        EmbeddedGraph {
            dim: p.dim(),
            vertices: vec![p],
            edges: Vec::new(),
        }
    }

    pub fn segment(a: Point, b: Point) -> Result<Self> {
        Self::new(vec![a, b], vec![[0, 1]])
    }

    /// Path through the given points in order.
    pub fn polyline(points: Vec<Point>) -> Result<Self> {
        let n = points.len();
        if n == 1 {
            return Ok(Self::singleton(points.into_iter().next().unwrap()));
        }
        let edges = (0..n.saturating_sub(1)).map(|i| [i, i + 1]).collect();
        Self::new(points, edges)
    }

    fn is_connected(&self) -> bool {
        let n = self.vertices.len();
        let adj = self.adjacency();
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &(v, _) in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == n
    }

    /// Neighbor lists as `(vertex, edge index)`.
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for (k, &[a, b]) in self.edges.iter().enumerate() {
            adj[a].push((b, k));
            adj[b].push((a, k));
        }
        adj
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.vertices.len()];
        for &[a, b] in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn is_singleton(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn edge_points(&self, e: usize) -> (&Point, &Point) {
        let [a, b] = self.edges[e];
        (&self.vertices[a], &self.vertices[b])
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let (a, b) = self.edge_points(e);
        a.dist(b)
    }

    pub fn edge_lengths(&self) -> Vec<f64> {
        (0..self.edges.len()).map(|e| self.edge_length(e)).collect()
    }

    pub fn point_on_edge(&self, e: usize, t: f64) -> Point {
        let (a, b) = self.edge_points(e);
        a.lerp(b, t)
    }

    /// ℋ¹(Σ): sum of edge lengths, zero for a singleton.
    pub fn total_length(&self) -> f64 {
        (0..self.edges.len()).map(|e| self.edge_length(e)).sum()
    }

    /// Largest distance between two vertices; the diameter of Σ.
    pub fn diameter(&self) -> f64 {
        let mut best: f64 = 0.0;
        for i in 0..self.vertices.len() {
            for j in (i + 1)..self.vertices.len() {
                best = best.max(self.vertices[i].dist_sq(&self.vertices[j]));
            }
        }
        best.sqrt()
    }

    /// Nearest point of Σ. Ties go to the smallest edge index, then the smallest parameter.
    pub fn project(&self, x: &Point) -> Projection {
        if self.is_singleton() {
            let v = &self.vertices[0];
            return Projection {
                closest: v.clone(),
                edge: None,
                param: 0.0,
                distance: v.dist(x),
            };
        }
        let mut best: Option<(usize, f64, f64)> = None;
        for e in 0..self.edges.len() {
            let (a, b) = self.edge_points(e);
            let (t, d2) = segment_param(a.coords(), b.coords(), x.coords());
            if best.map_or(true, |(_, _, bd)| d2 < bd) {
                best = Some((e, t, d2));
            }
        }
        let (e, t, d2) = best.unwrap();
        let closest = if t == 0.0 {
            self.edge_points(e).0.clone()
        } else if t == 1.0 {
            self.edge_points(e).1.clone()
        } else {
            self.point_on_edge(e, t)
        };
        Projection {
            closest,
            edge: Some(e),
            param: t,
            distance: d2.sqrt(),
        }
    }

    pub fn distance_to(&self, x: &Point) -> f64 {
        if self.is_singleton() {
            return self.vertices[0].dist(x);
        }
        let mut best = f64::INFINITY;
        for e in 0..self.edges.len() {
            let (a, b) = self.edge_points(e);
            best = best.min(segment_param(a.coords(), b.coords(), x.coords()).1);
        }
        best.sqrt()
    }

    /// Points of Σ spaced at most `step` apart along every edge, endpoints included.
    pub fn sample_with_step(&self, step: f64) -> Vec<Point> {
        if self.is_singleton() {
            return vec![self.vertices[0].clone()];
        }
        let mut out = Vec::new();
        for e in 0..self.edges.len() {
            let len = self.edge_length(e);
            let k = ((len / step).ceil() as usize).max(1);
            for i in 0..=k {
                out.push(self.point_on_edge(e, i as f64 / k as f64));
            }
        }
        out
    }

    /// `n` points at arc-length positions `(k + ½)·ℋ¹(Σ)/n`, walking edges in index order.
    pub fn sample_by_arclength(&self, n: usize) -> Vec<Point> {
        if self.is_singleton() || n == 0 {
            return vec![self.vertices[0].clone(); n.min(1)];
        }
        let lengths = self.edge_lengths();
        let total: f64 = lengths.iter().sum();
        let mut out = Vec::with_capacity(n);
        let mut e = 0;
        let mut start = 0.0;
        for k in 0..n {
            let s = (k as f64 + 0.5) * total / n as f64;
            while e + 1 < lengths.len() && s > start + lengths[e] {
                start += lengths[e];
                e += 1;
            }
            let t = ((s - start) / lengths[e]).clamp(0.0, 1.0);
            out.push(self.point_on_edge(e, t));
        }
        out
    }

    /// ℋ¹(Σ ∩ B_r(x)) for the open ball, exact per edge.
    pub fn ball_length(&self, x: &Point, r: f64) -> f64 {
        let mut total = 0.0;
        for e in 0..self.edges.len() {
            let (a, b) = self.edge_points(e);
            if let Some((t0, t1)) = ball_interval(a.coords(), b.coords(), x.coords(), r) {
                total += (t1 - t0) * a.dist(b);
            }
        }
        total
    }

    /// Number of transversal intersections of Σ with the sphere ∂B_r(x).
    ///
    /// Fails with [`Error::DegenerateRadius`] when the sphere passes within
    /// [`SPHERE_DEGENERACY_TOL`] of a vertex or is tangent to an edge; callers
    /// perturb the radius.
    pub fn sphere_crossings(&self, x: &Point, r: f64) -> Result<usize> {
        let tol = SPHERE_DEGENERACY_TOL;
        for v in &self.vertices {
            if (v.dist(x) - r).abs() < tol {
                return Err(Error::DegenerateRadius { radius: r });
            }
        }
        let mut count = 0;
        for e in 0..self.edges.len() {
            let (a, b) = self.edge_points(e);
            let (t, d2) = line_foot(a.coords(), b.coords(), x.coords());
            if (0.0..=1.0).contains(&t) && (d2.sqrt() - r).abs() < tol {
                return Err(Error::DegenerateRadius { radius: r });
            }
            for root in sphere_roots(a.coords(), b.coords(), x.coords(), r) {
                if root > 0.0 && root < 1.0 {
                    count += 1;
                }
            }
        }
        Ok(count)
    }
}

/// Parameter of the nearest point on segment `[a, b]` and the squared distance to it.
pub(crate) fn segment_param(a: &[f64], b: &[f64], x: &[f64]) -> (f64, f64) {
    let mut dd = 0.0;
    let mut fd = 0.0;
    for i in 0..a.len() {
        let d = b[i] - a[i];
        dd += d * d;
        fd += (x[i] - a[i]) * d;
    }
    let t = if dd > 0.0 { (fd / dd).clamp(0.0, 1.0) } else { 0.0 };
    let d2: f64 = (0..a.len())
        .map(|i| {
            let c = a[i] + t * (b[i] - a[i]) - x[i];
            c * c
        })
        .sum();
    (t, d2)
}

/// Unclamped foot of the perpendicular from `x` onto the line through `a`, `b`.
fn line_foot(a: &[f64], b: &[f64], x: &[f64]) -> (f64, f64) {
    let mut dd = 0.0;
    let mut fd = 0.0;
    for i in 0..a.len() {
        let d = b[i] - a[i];
        dd += d * d;
        fd += (x[i] - a[i]) * d;
    }
    let t = fd / dd;
    let d2 = (0..a.len())
        .map(|i| {
            let c = a[i] + t * (b[i] - a[i]) - x[i];
            c * c
        })
        .sum();
    (t, d2)
}

/// Real roots `t` of `|a + t(b − a) − x|² = r²`, ascending.
fn sphere_roots(a: &[f64], b: &[f64], x: &[f64], r: f64) -> Vec<f64> {
    let mut qa = 0.0;
    let mut qb = 0.0;
    let mut qc = -r * r;
    for i in 0..a.len() {
        let d = b[i] - a[i];
        let f = a[i] - x[i];
        qa += d * d;
        qb += 2.0 * f * d;
        qc += f * f;
    }
    let disc = qb * qb - 4.0 * qa * qc;
    if disc <= 0.0 || qa == 0.0 {
        return Vec::new();
    }
    let sq = disc.sqrt();
    let q = -0.5 * (qb + qb.signum() * sq);
    let (mut t0, mut t1) = if q != 0.0 { (q / qa, qc / q) } else { (-sq / (2.0 * qa), sq / (2.0 * qa)) };
    if t0 > t1 {
        std::mem::swap(&mut t0, &mut t1);
    }
    vec![t0, t1]
}

/// Parameter interval of `[a, b]` inside the open ball, if nonempty.
fn ball_interval(a: &[f64], b: &[f64], x: &[f64], r: f64) -> Option<(f64, f64)> {
    let roots = sphere_roots(a, b, x, r);
    if roots.len() != 2 {
        return None;
    }
    let t0 = roots[0].max(0.0);
    let t1 = roots[1].min(1.0);
    (t1 > t0).then_some((t0, t1))
}

/// Directed distance `sup_{a ∈ A} dist(a, B)`, sampled along `A`.
fn directed_hausdorff(a: &EmbeddedGraph, b: &EmbeddedGraph, resolution: f64) -> f64 {
    a.sample_with_step(resolution)
        .iter()
        .map(|s| b.distance_to(s))
        .fold(0.0, f64::max)
}

/// Hausdorff distance between two graphs.
///
/// Each graph is sampled at arc-length step at most `resolution` and the
/// samples are projected exactly onto the other graph. Every sample lies
/// within `resolution / 2` of a point of its edge, and distance-to-a-set is
/// 1-Lipschitz, so the returned value is a lower estimate of the true d_H
/// that falls short by at most `resolution / 2`.
pub fn hausdorff_distance(a: &EmbeddedGraph, b: &EmbeddedGraph, resolution: f64) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    if !(resolution > 0.0) {
        return Err(Error::InvalidParameter("resolution must be positive".into()));
    }
    Ok(directed_hausdorff(a, b, resolution).max(directed_hausdorff(b, a, resolution)))
}

/// Euclidean minimum spanning tree (Prim, O(n²)). Coincident points are merged first.
pub fn minimum_spanning_tree(points: &[Point]) -> Result<EmbeddedGraph> {
    if points.is_empty() {
        return Err(Error::InvalidParameter("spanning tree of no points".into()));
    }
    let mut unique: Vec<Point> = Vec::with_capacity(points.len());
    for p in points {
        if !unique.iter().any(|q| q == p) {
            unique.push(p.clone());
        }
    }
    let n = unique.len();
    if n == 1 {
        return Ok(EmbeddedGraph::singleton(unique.pop().unwrap()));
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut link = vec![usize::MAX; n];
    let mut edges = Vec::with_capacity(n - 1);
    best[0] = 0.0;
    for _ in 0..n {
        let u = (0..n)
            .filter(|&i| !in_tree[i])
            .min_by(|&i, &j| best[i].partial_cmp(&best[j]).unwrap())
            .unwrap();
        in_tree[u] = true;
        if link[u] != usize::MAX {
            edges.push([link[u], u]);
        }
        for v in 0..n {
            if !in_tree[v] {
                let d = dist_sq(unique[u].coords(), unique[v].coords());
                if d < best[v] {
                    best[v] = d;
                    link[v] = u;
                }
            }
        }
    }
    EmbeddedGraph::new(unique, edges)
}

/// JSON layout of a graph file.
#[derive(Debug, Serialize, Deserialize)]
pub struct GraphFile {
    pub dimension: usize,
    pub vertices: Vec<Vec<f64>>,
    pub edges: Vec<[usize; 2]>,
}

impl GraphFile {
    pub fn into_graph(self) -> Result<EmbeddedGraph> {
        if let Some(v) = self.vertices.iter().find(|v| v.len() != self.dimension) {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                found: v.len(),
            });
        }
        EmbeddedGraph::new(self.vertices.into_iter().map(Point).collect(), self.edges)
    }
}

impl From<&EmbeddedGraph> for GraphFile {
    fn from(g: &EmbeddedGraph) -> Self {
        GraphFile {
            dimension: g.dim,
            vertices: g.vertices.iter().map(|v| v.0.clone()).collect(),
            edges: g.edges.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(c: &[f64]) -> Point {
        Point(c.to_vec())
    }

    fn unit_segment() -> EmbeddedGraph {
        EmbeddedGraph::segment(p(&[0.0, 0.0]), p(&[1.0, 0.0])).unwrap()
    }

    fn plus_sign() -> EmbeddedGraph {
        EmbeddedGraph::new(
            vec![p(&[0.0, 0.0]), p(&[1.0, 0.0]), p(&[-1.0, 0.0]), p(&[0.0, 1.0]), p(&[0.0, -1.0])],
            vec![[0, 1], [0, 2], [0, 3], [0, 4]],
        )
        .unwrap()
    }

    #[test]
    fn validation() {
        assert!(EmbeddedGraph::new(vec![p(&[0.0]), p(&[1.0])], vec![]).is_err());
        assert!(EmbeddedGraph::new(vec![p(&[0.0]), p(&[1.0])], vec![[0, 0]]).is_err());
        assert!(EmbeddedGraph::new(vec![p(&[0.0]), p(&[1.0])], vec![[0, 1], [1, 0]]).is_err());
        assert!(EmbeddedGraph::new(vec![p(&[0.0]), p(&[0.0])], vec![[0, 1]]).is_err());
        assert!(EmbeddedGraph::new(vec![p(&[0.0]), p(&[1.0])], vec![[0, 2]]).is_err());
        let disconnected = EmbeddedGraph::new(
            vec![p(&[0.0]), p(&[1.0]), p(&[2.0]), p(&[3.0])],
            vec![[0, 1], [2, 3]],
        );
        assert!(matches!(disconnected, Err(Error::InvalidGraph(_))));
    }

    #[test]
    fn lengths() {
        assert_eq!(unit_segment().total_length(), 1.0);
        let v = EmbeddedGraph::new(
            vec![p(&[-0.6, 0.8]), p(&[0.0, 0.0]), p(&[0.6, 0.8])],
            vec![[0, 1], [1, 2]],
        )
        .unwrap();
        assert!((v.total_length() - 2.0).abs() < 1e-15);
        assert_eq!(EmbeddedGraph::singleton(p(&[1.0, 2.0])).total_length(), 0.0);
    }

    #[test]
    fn projections() {
        let seg = unit_segment();
        let pr = seg.project(&p(&[0.5, 2.0]));
        assert_eq!(pr.closest, p(&[0.5, 0.0]));
        assert_eq!(pr.distance, 2.0);
        let on = seg.project(&p(&[0.25, 0.0]));
        assert_eq!(on.distance, 0.0);
        assert_eq!(on.closest, p(&[0.25, 0.0]));
    }

    #[test]
    fn projection_onto_l_shape_matches_sampling() {
        let l = EmbeddedGraph::new(
            vec![p(&[0.0, 0.0]), p(&[1.0, 0.0]), p(&[0.0, 1.0])],
            vec![[0, 1], [0, 2]],
        )
        .unwrap();
        let x = p(&[-1.0, -1.0]);
        // oracle: 10⁴ samples of Σ
        let brute = (0..5000)
            .flat_map(|i| {
                let s = i as f64 / 4999.0;
                [p(&[s, 0.0]), p(&[0.0, s])]
            })
            .map(|q| q.dist(&x))
            .fold(f64::INFINITY, f64::min);
        let pr = l.project(&x);
        assert!((pr.distance - 2f64.sqrt()).abs() < 1e-15);
        assert!((pr.distance - brute).abs() < 1e-12);
        assert_eq!(pr.closest, p(&[0.0, 0.0]));
        // tie between both edges at the shared vertex resolves to edge 0
        assert_eq!(pr.edge, Some(0));
        assert_eq!(pr.param, 0.0);
    }

    #[test]
    fn hausdorff_examples() {
        let res = 1e-3;
        let a = unit_segment();
        assert_eq!(hausdorff_distance(&a, &a, res).unwrap(), 0.0);
        let h = 0.37;
        let b = EmbeddedGraph::segment(p(&[0.0, h]), p(&[1.0, h])).unwrap();
        assert!((hausdorff_distance(&a, &b, res).unwrap() - h).abs() <= res / 2.0);
        let half = EmbeddedGraph::segment(p(&[0.0, 0.0]), p(&[0.5, 0.0])).unwrap();
        assert!((hausdorff_distance(&a, &half, res).unwrap() - 0.5).abs() <= res / 2.0);
        assert!(hausdorff_distance(&a, &EmbeddedGraph::singleton(p(&[0.0])), res).is_err());
    }

    #[test]
    fn ball_lengths() {
        let seg = unit_segment();
        assert!((seg.ball_length(&p(&[0.5, 0.0]), 0.25) - 0.5).abs() < 1e-15);
        assert!((seg.ball_length(&p(&[0.0, 0.0]), 0.25) - 0.25).abs() < 1e-15);
        assert!((plus_sign().ball_length(&p(&[0.0, 0.0]), 0.5) - 2.0).abs() < 1e-15);
        assert_eq!(seg.ball_length(&p(&[0.5, 3.0]), 1.0), 0.0);
    }

    #[test]
    fn sphere_crossing_counts() {
        let seg = unit_segment();
        assert_eq!(seg.sphere_crossings(&p(&[0.5, 0.0]), 0.3).unwrap(), 2);
        assert_eq!(seg.sphere_crossings(&p(&[0.5, 0.0]), 2.0).unwrap(), 0);
        assert_eq!(plus_sign().sphere_crossings(&p(&[0.0, 0.0]), 0.5 * (1.0 - 1e-6)).unwrap(), 4);
        assert!(matches!(
            seg.sphere_crossings(&p(&[0.5, 0.0]), 0.5),
            Err(Error::DegenerateRadius { .. })
        ));
        // tangent to the segment from above
        assert!(matches!(
            seg.sphere_crossings(&p(&[0.5, 0.25]), 0.25),
            Err(Error::DegenerateRadius { .. })
        ));
    }

    #[test]
    fn spanning_trees() {
        let two = minimum_spanning_tree(&[p(&[0.0, 0.0]), p(&[3.0, 4.0])]).unwrap();
        assert_eq!(two.edges().len(), 1);
        assert_eq!(two.total_length(), 5.0);
        let line = minimum_spanning_tree(&[p(&[0.0]), p(&[2.0]), p(&[1.0])]).unwrap();
        assert_eq!(line.total_length(), 2.0);
        assert_eq!(line.degrees()[2], 2);
        let single = minimum_spanning_tree(&[p(&[1.0, 1.0]), p(&[1.0, 1.0])]).unwrap();
        assert!(single.is_singleton());
    }

    fn prufer_decode(seq: &[usize], n: usize) -> Vec<[usize; 2]> {
        let mut degree = vec![1; n];
        for &s in seq {
            degree[s] += 1;
        }
        let mut edges = Vec::new();
        for &s in seq {
            let leaf = (0..n).find(|&i| degree[i] == 1).unwrap();
            edges.push([leaf, s]);
            degree[leaf] -= 1;
            degree[s] -= 1;
        }
        let rest: Vec<usize> = (0..n).filter(|&i| degree[i] == 1).collect();
        edges.push([rest[0], rest[1]]);
        edges
    }

    #[test]
    fn mst_matches_cayley_enumeration() {
        // oracle: all 5³ = 125 labeled trees on 5 vertices via Prüfer sequences
        let pts = [
            p(&[0.1, 0.7]),
            p(&[0.9, 0.2]),
            p(&[0.4, 0.4]),
            p(&[0.8, 0.95]),
            p(&[0.05, 0.1]),
        ];
        let mut best = f64::INFINITY;
        let mut count = 0;
        for code in 0..125 {
            let seq = [code / 25, (code / 5) % 5, code % 5];
            let edges = prufer_decode(&seq, 5);
            let len: f64 = edges.iter().map(|&[a, b]| pts[a].dist(&pts[b])).sum();
            best = best.min(len);
            count += 1;
        }
        assert_eq!(count, 125);
        let mst = minimum_spanning_tree(&pts).unwrap();
        assert!((mst.total_length() - best).abs() < 1e-12);
    }

    #[test]
    fn arclength_samples_lie_on_graph() {
        let g = plus_sign();
        let s = g.sample_by_arclength(16);
        assert_eq!(s.len(), 16);
        assert!(s.iter().all(|q| g.distance_to(q) < 1e-12));
    }

    fn random_tree() -> impl Strategy<Value = EmbeddedGraph> {
        prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 2..9).prop_filter_map("distinct", |raw| {
            let pts: Vec<Point> = raw.iter().map(|&(x, y)| p(&[x, y])).collect();
            let g = minimum_spanning_tree(&pts).ok()?;
            (!g.is_singleton() && g.edge_lengths().iter().all(|&l| l > 1e-3)).then_some(g)
        })
    }

    proptest! {
        #[test]
        fn projection_is_no_worse_than_any_vertex(g in random_tree(), x in (-4.0f64..4.0, -4.0f64..4.0)) {
            let x = p(&[x.0, x.1]);
            let d = g.project(&x).distance;
            for v in g.vertices() {
                prop_assert!(d <= v.dist(&x) + 1e-12);
            }
        }

        #[test]
        fn hausdorff_symmetric_and_triangle(a in random_tree(), b in random_tree(), c in random_tree()) {
            let res = 0.01;
            let ab = hausdorff_distance(&a, &b, res).unwrap();
            let ba = hausdorff_distance(&b, &a, res).unwrap();
            prop_assert_eq!(ab, ba);
            let bc = hausdorff_distance(&b, &c, res).unwrap();
            let ac = hausdorff_distance(&a, &c, res).unwrap();
            prop_assert!(ac <= ab + bc + 2.0 * res);
        }

        #[test]
        fn ball_length_monotone_and_ahlfors_lower(g in random_tree(), s in 0.0f64..1.0, r1 in 0.01f64..2.0, r2 in 0.01f64..2.0) {
            let x = g.sample_by_arclength(97)[(s * 96.0) as usize].clone();
            let (lo, hi) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
            prop_assert!(g.ball_length(&x, lo) <= g.ball_length(&x, hi) + 1e-12);
            let reaches_out = g.vertices().iter().any(|v| v.dist(&x) >= hi);
            if reaches_out {
                prop_assert!(g.ball_length(&x, hi) >= hi * (1.0 - 1e-12));
            }
        }

        #[test]
        fn coarea_bound_for_crossings(g in random_tree(), s in 0.0f64..1.0, r in 0.2f64..2.0) {
            // ∫_{r/2}^{r} #(Σ ∩ ∂B_s) ds ≤ ℋ¹(Σ ∩ B_r) − ℋ¹(Σ ∩ B_{r/2})
            let x = g.sample_by_arclength(53)[(s * 52.0) as usize].clone();
            let (r2, r1) = (0.5 * r, r);
            let n = 2000;
            let h = (r1 - r2) / n as f64;
            let mut integral = 0.0;
            for k in 0..n {
                let mut rad = r2 + (k as f64 + 0.5) * h;
                let count = loop {
                    match g.sphere_crossings(&x, rad) {
                        Ok(c) => break c,
                        Err(_) => rad += 1e-9,
                    }
                };
                integral += count as f64 * h;
            }
            let diff = g.ball_length(&x, r1) - g.ball_length(&x, r2);
            let max_count = 2.0 * g.edges().len() as f64;
            prop_assert!(integral <= diff + max_count * h + 1e-9, "integral {} diff {}", integral, diff);
        }
    }
}
