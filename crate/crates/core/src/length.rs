//! Measures carried by embedded graphs and the length functional ℒ.
//!
//! A [`CurveMeasure`] is a constant density θ_e on every edge plus point
//! masses at vertices. For such measures ℒ(ν) = max_e 1/θ_e (atoms do not
//! count), ℒ = 0 for a single atom, and ℒ = +∞ as soon as an edge carries no
//! density.

use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{segment_param, EmbeddedGraph, GraphFile};
use crate::measure::{DiscreteMeasure, Point};
use crate::transport::solve_ot;

/// Accepted deviation of the total mass from 1 before renormalizing.
pub const CURVE_MASS_TOL: f64 = 1e-9;

/// Fewest quadrature sites placed on any edge.
pub const MIN_SITES_PER_EDGE: usize = 3;

/// Constant edge densities plus vertex atoms on an [`EmbeddedGraph`].
#[derive(Clone, Debug, PartialEq)]
pub struct CurveMeasure {
    graph: EmbeddedGraph,
    edge_density: Vec<f64>,
    vertex_atoms: Vec<f64>,
}

impl CurveMeasure {
    /// Validates shapes and signs. Total mass must be 1 within [`CURVE_MASS_TOL`];
    /// small deviations are renormalized away.
    pub fn new(graph: EmbeddedGraph, edge_density: Vec<f64>, vertex_atoms: Vec<f64>) -> Result<Self> {
        if edge_density.len() != graph.edges().len() {
            return Err(Error::Malformed(format!(
                "{} edge densities for {} edges",
                edge_density.len(),
                graph.edges().len()
            )));
        }
        if vertex_atoms.len() != graph.vertices().len() {
            return Err(Error::Malformed(format!(
                "{} vertex atoms for {} vertices",
                vertex_atoms.len(),
                graph.vertices().len()
            )));
        }
        for (i, &v) in edge_density.iter().chain(&vertex_atoms).enumerate() {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::NegativeWeight { index: i, value: v });
            }
        }
        let mut nu = CurveMeasure {
            graph,
            edge_density,
            vertex_atoms,
        };
        let mass = nu.total_mass();
        if (mass - 1.0).abs() > CURVE_MASS_TOL {
            return Err(Error::MassMismatch { left: mass, right: 1.0 });
        }
        if mass != 1.0 {
            nu.edge_density.iter_mut().chain(nu.vertex_atoms.iter_mut()).for_each(|w| *w /= mass);
        }
        Ok(nu)
    }

    /// The uniform measure ν_Σ; a unit atom when Σ is a point.
    pub fn uniform(graph: EmbeddedGraph) -> Self {
        if graph.is_singleton() {
            return CurveMeasure {
                graph,
                edge_density: Vec::new(),
                vertex_atoms: vec![1.0],
            };
        }
        let theta = 1.0 / graph.total_length();
        let ne = graph.edges().len();
        let nv = graph.vertices().len();
        CurveMeasure {
            graph,
            edge_density: vec![theta; ne],
            vertex_atoms: vec![0.0; nv],
        }
    }

    pub fn dirac(x: Point) -> Self {
        Self::uniform(EmbeddedGraph::singleton(x))
    }

    /// Rebuilds a measure from weights placed on quadrature sites of `graph`.
    ///
    /// Edge densities are the total site weight on each edge over its length;
    /// vertex-site weights become atoms.
    pub fn from_site_weights(graph: EmbeddedGraph, quad: &Quadrature, weights: &[f64]) -> Result<Self> {
        let mut mass_on_edge = vec![0.0; graph.edges().len()];
        let mut atoms = vec![0.0; graph.vertices().len()];
        for (owner, &w) in quad.owners.iter().zip(weights) {
            match *owner {
                SiteOwner::Edge(e) => mass_on_edge[e] += w,
                SiteOwner::Vertex(v) => atoms[v] += w,
            }
        }
        let density = mass_on_edge
            .iter()
            .enumerate()
            .map(|(e, m)| m / graph.edge_length(e))
            .collect();
        CurveMeasure::new(graph, density, atoms)
    }

    pub fn graph(&self) -> &EmbeddedGraph {
        &self.graph
    }

    pub fn edge_density(&self) -> &[f64] {
        &self.edge_density
    }

    pub fn vertex_atoms(&self) -> &[f64] {
        &self.vertex_atoms
    }

    pub fn dim(&self) -> usize {
        self.graph.dim()
    }

    pub fn total_mass(&self) -> f64 {
        let diffuse: f64 = self
            .edge_density
            .iter()
            .enumerate()
            .map(|(e, th)| th * self.graph.edge_length(e))
            .sum();
        diffuse + self.vertex_atoms.iter().sum::<f64>()
    }

    /// ℒ(ν): 0 for a point, +∞ if some edge has zero density, else max 1/θ_e.
    pub fn length(&self) -> f64 {
        if self.graph.is_singleton() {
            return 0.0;
        }
        self.edge_density
            .iter()
            .fold(0.0f64, |acc, &th| if th > 0.0 { acc.max(1.0 / th) } else { f64::INFINITY })
    }

    /// Mass carried above the floor `1/α` per unit length: atoms plus
    /// density surplus.
    pub fn excess_mass(&self, alpha: f64) -> f64 {
        let floor = if alpha > 0.0 { 1.0 / alpha } else { 0.0 };
        let surplus: f64 = self
            .edge_density
            .iter()
            .enumerate()
            .map(|(e, th)| (th - floor).max(0.0) * self.graph.edge_length(e))
            .sum();
        surplus + self.vertex_atoms.iter().sum::<f64>()
    }

    /// Quadrature of ν: `max(3, ⌈per_unit · len⌉)` midpoint sites per edge,
    /// each carrying an equal share of the edge mass, plus one site per
    /// positive atom.
    pub fn quadrature(&self, per_unit: usize) -> Quadrature {
        let mut quad = Quadrature::of_graph(&self.graph, per_unit, false);
        for (o, w) in quad.owners.iter().zip(quad.weights.iter_mut()) {
            if let SiteOwner::Edge(e) = *o {
                let k = sites_per_edge(self.graph.edge_length(e), per_unit);
                *w = self.edge_density[e] * self.graph.edge_length(e) / k as f64;
            }
        }
        for (v, &a) in self.vertex_atoms.iter().enumerate() {
            if a > 0.0 {
                quad.sites.push(self.graph.vertices()[v].clone());
                quad.owners.push(SiteOwner::Vertex(v));
                quad.params.push(0.0);
                quad.weights.push(a);
            }
        }
        quad
    }
}

/// Sites on edge `e` of length `len`.
pub fn sites_per_edge(len: f64, per_unit: usize) -> usize {
    ((per_unit as f64 * len).ceil() as usize).max(MIN_SITES_PER_EDGE)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SiteOwner {
    Edge(usize),
    Vertex(usize),
}

/// Points on a graph with the edge or vertex each belongs to.
#[derive(Clone, Debug)]
pub struct Quadrature {
    pub sites: Vec<Point>,
    pub owners: Vec<SiteOwner>,
    /// Position along the owning edge (0 for vertex sites).
    pub params: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Quadrature {
    /// Midpoint sites on every edge (zero weights), optionally followed by
    /// one site per vertex. A singleton graph always gets its vertex.
    pub fn of_graph(graph: &EmbeddedGraph, per_unit: usize, with_vertices: bool) -> Self {
        let mut sites = Vec::new();
        let mut owners = Vec::new();
        let mut params = Vec::new();
        for e in 0..graph.edges().len() {
            let k = sites_per_edge(graph.edge_length(e), per_unit);
            for i in 0..k {
                let t = (i as f64 + 0.5) / k as f64;
                sites.push(graph.point_on_edge(e, t));
                owners.push(SiteOwner::Edge(e));
                params.push(t);
            }
        }
        if with_vertices || graph.is_singleton() {
            for (v, x) in graph.vertices().iter().enumerate() {
                sites.push(x.clone());
                owners.push(SiteOwner::Vertex(v));
                params.push(0.0);
            }
        }
        let weights = vec![0.0; sites.len()];
        Quadrature {
            sites,
            owners,
            params,
            weights,
        }
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn measure(&self) -> DiscreteMeasure {
        let dim = self.sites.first().map(Point::dim).unwrap_or(0);
        DiscreteMeasure::from_parts(dim, self.sites.clone(), self.weights.clone())
    }
}

/// ℒ(ν); see [`CurveMeasure::length`].
pub fn length_of(nu: &CurveMeasure) -> f64 {
    nu.length()
}

/// Length and ℒ of the measure traced by a sampled Lipschitz curve.
///
/// The chain's segments are cut at every chain vertex lying on them (within
/// `1e-6 · len`), so overlapping stretches become identical pieces. The
/// multiplicity of a piece is the number of pieces coinciding with it, and
/// ℒ = len / min multiplicity.
pub fn length_parametric(samples: &[Point], closed: bool) -> Result<(f64, f64)> {
    let mut pts: Vec<Point> = Vec::with_capacity(samples.len() + 1);
    for s in samples {
        if pts.last().map_or(true, |q| q != s) {
            pts.push(s.clone());
        }
    }
    if closed && pts.len() > 1 && pts.first() != pts.last() {
        pts.push(pts[0].clone());
    }
    if pts.len() < 2 {
        return Err(Error::InvalidParameter("curve samples are all coincident".into()));
    }
    let dim = pts[0].dim();
    if pts.iter().any(|p| p.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: pts.iter().find(|p| p.dim() != dim).unwrap().dim(),
        });
    }
    let len: f64 = pts.windows(2).map(|w| w[0].dist(&w[1])).sum();
    let snap = 1e-6 * len;

    let mut pieces: Vec<(Point, Point)> = Vec::new();
    for w in pts.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let seg_len = a.dist(b);
        let mut cuts = vec![0.0, 1.0];
        for q in &pts {
            let (t, d2) = segment_param(a.coords(), b.coords(), q.coords());
            if d2.sqrt() <= snap && t * seg_len > snap && (1.0 - t) * seg_len > snap {
                cuts.push(t);
            }
        }
        cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for c in cuts.windows(2) {
            if (c[1] - c[0]) * seg_len > snap {
                pieces.push((a.lerp(b, c[0]), a.lerp(b, c[1])));
            }
        }
    }

    // spatial hash on piece midpoints, cell size a few snap radii
    let cell = 4.0 * snap;
    let key = |p: &Point| -> Vec<i64> { p.coords().iter().map(|c| (c / cell).floor() as i64).collect() };
    let mut buckets: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    let mids: Vec<Point> = pieces.iter().map(|(a, b)| a.lerp(b, 0.5)).collect();
    for (i, m) in mids.iter().enumerate() {
        buckets.entry(key(m)).or_default().push(i);
    }
    let same = |i: usize, j: usize| {
        let (a, b) = &pieces[i];
        let (c, d) = &pieces[j];
        (a.dist(c) <= snap && b.dist(d) <= snap) || (a.dist(d) <= snap && b.dist(c) <= snap)
    };
    let mut min_card = usize::MAX;
    for (i, m) in mids.iter().enumerate() {
        let base = key(m);
        let mut card = 0;
        for offset in neighbor_offsets(dim) {
            let k: Vec<i64> = base.iter().zip(&offset).map(|(a, b)| a + b).collect();
            if let Some(list) = buckets.get(&k) {
                card += list.iter().filter(|&&j| same(i, j)).count();
            }
        }
        min_card = min_card.min(card);
    }
    Ok((len, len / min_card.max(1) as f64))
}

fn neighbor_offsets(dim: usize) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|o| {
                (-1..=1).map(move |d| {
                    let mut v = o.clone();
                    v.push(d);
                    v
                })
            })
            .collect();
    }
    out
}

/// Lower estimate of ℒ from balls: max of ℋ¹(Σ ∩ B_r(x)) / ν(B̄_r(x)).
///
/// The ν-mass is taken over the closed ball so that a discretization
/// placed on Σ is never undercounted at its own sample points. A ball with
/// positive length and no mass gives +∞; a singleton graph gives 0.
pub fn ball_ratio_estimate(
    nu_points: &DiscreteMeasure,
    sigma: &EmbeddedGraph,
    centers: &[Point],
    radii: &[f64],
) -> Result<f64> {
    if sigma.is_singleton() {
        return Ok(0.0);
    }
    if let Some(&r) = radii.iter().find(|&&r| !(r > 0.0)) {
        return Err(Error::InvalidParameter(format!("radius {r} must be positive")));
    }
    let mut best: f64 = 0.0;
    for x in centers {
        if x.dim() != sigma.dim() {
            return Err(Error::DimensionMismatch {
                expected: sigma.dim(),
                found: x.dim(),
            });
        }
        for &r in radii {
            let length = sigma.ball_length(x, r);
            let r2 = r * r;
            let mass: f64 = nu_points.iter().filter(|(y, _)| y.dist_sq(x) <= r2).map(|(_, w)| w).sum();
            if length > 0.0 {
                if mass <= 0.0 {
                    return Ok(f64::INFINITY);
                }
                best = best.max(length / mass);
            }
        }
    }
    Ok(best)
}

/// Operator 2-norm (largest singular value) of a square matrix given by rows.
pub fn operator_norm(linear: &[Vec<f64>]) -> Result<f64> {
    let m = square_matrix(linear)?;
    Ok(m.singular_values().max())
}

fn square_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let d = rows.len();
    if d == 0 || rows.iter().any(|r| r.len() != d) {
        return Err(Error::InvalidParameter("linear map must be a square matrix".into()));
    }
    Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
}

/// Pushforward under `x ↦ A x + b`. Each edge keeps its mass, so densities
/// scale by `len(e) / len(f(e))`.
pub fn apply_affine(nu: &CurveMeasure, linear: &[Vec<f64>], shift: &Point) -> Result<CurveMeasure> {
    let d = nu.dim();
    let a = square_matrix(linear)?;
    if a.nrows() != d || shift.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: if a.nrows() != d { a.nrows() } else { shift.dim() },
        });
    }
    let sv = a.singular_values();
    if !(sv.min() > 1e-12 * sv.max().max(f64::MIN_POSITIVE)) {
        return Err(Error::InvalidParameter("singular linear part".into()));
    }
    let vertices: Vec<Point> = nu
        .graph
        .vertices()
        .iter()
        .map(|v| {
            let y = &a * nalgebra::DVector::from_column_slice(v.coords());
            Point(y.iter().zip(shift.coords()).map(|(yi, bi)| yi + bi).collect())
        })
        .collect();
    let graph = EmbeddedGraph::new(vertices, nu.graph.edges().to_vec())?;
    let density = nu
        .edge_density
        .iter()
        .enumerate()
        .map(|(e, th)| th * nu.graph.edge_length(e) / graph.edge_length(e))
        .collect();
    CurveMeasure::new(graph, density, nu.vertex_atoms.clone())
}

/// One cube of the approximation grid.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CubeReport {
    pub cube_index: Vec<i64>,
    /// ν(Q).
    pub mass: f64,
    /// ℋ¹(Σ ∩ Q).
    pub h1_length: f64,
    /// Length added inside Q, `ℒ(ν)·ν(Q) − ℋ¹(Σ ∩ Q)`.
    pub excess: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ApproximationReport {
    pub n: usize,
    pub p: f64,
    pub length_functional: f64,
    pub original_length: f64,
    pub total_length: f64,
    pub added_length: f64,
    /// W_p(ν_{Σ_n}, ν), both sides discretized with `quadrature_per_unit`.
    pub wasserstein: f64,
    pub quadrature_per_unit: usize,
    pub cubes: Vec<CubeReport>,
}

/// Quadrature used by [`approximate_uniform`] when estimating W_p.
pub fn approximation_quadrature(n: usize) -> usize {
    (16 * n).max(64)
}

/// Builds Σ_n ⊃ Σ with ℋ¹(Σ_n) = ℒ(ν) and ν_{Σ_n} close to ν.
///
/// Space is cut into half-open cubes of side 1/n. In each cube Q the
/// missing length `ℒ(ν)ν(Q) − ℋ¹(Σ ∩ Q)` is added as a fan of segments
/// inside Q, attached at the point of Σ ∩ Q nearest to the ν-barycenter of
/// Q. For a point mass the result is the segment `x₀ + [0, 1/n]e₁`.
/// Requires d ≥ 2 unless ν is a point mass.
pub fn approximate_uniform(nu: &CurveMeasure, n: usize, p: f64) -> Result<(EmbeddedGraph, ApproximationReport)> {
    approximate_uniform_with(nu, n, p, approximation_quadrature(n))
}

pub fn approximate_uniform_with(
    nu: &CurveMeasure,
    n: usize,
    p: f64,
    quadrature_per_unit: usize,
) -> Result<(EmbeddedGraph, ApproximationReport)> {
    if n == 0 {
        return Err(Error::InvalidParameter("grid refinement n must be >= 1".into()));
    }
    let alpha = nu.length();
    if !alpha.is_finite() {
        return Err(Error::InfiniteLength);
    }
    let graph = &nu.graph;
    let h = 1.0 / n as f64;
    let (sigma_n, cubes) = if graph.is_singleton() {
        let x0 = &graph.vertices()[0];
        let mut end = x0.clone();
        end.0[0] += h;
        let cube = CubeReport {
            cube_index: cube_of(x0, n),
            mass: 1.0,
            h1_length: 0.0,
            excess: 0.0,
        };
        (EmbeddedGraph::segment(x0.clone(), end)?, vec![cube])
    } else {
        if nu.dim() < 2 {
            return Err(Error::InvalidParameter(
                "approximate_uniform needs dimension >= 2 to add length inside a cube".into(),
            ));
        }
        build_cube_fans(nu, alpha, n)?
    };

    let uniform = CurveMeasure::uniform(sigma_n.clone());
    let a = uniform.quadrature(quadrature_per_unit).measure();
    let b = nu.quadrature(quadrature_per_unit).measure();
    let wasserstein = solve_ot(&a, &b, p)?.wasserstein();

    let report = ApproximationReport {
        n,
        p,
        length_functional: alpha,
        original_length: graph.total_length(),
        total_length: sigma_n.total_length(),
        added_length: sigma_n.total_length() - graph.total_length(),
        wasserstein,
        quadrature_per_unit,
        cubes,
    };
    Ok((sigma_n, report))
}

fn cube_of(x: &Point, n: usize) -> Vec<i64> {
    x.coords().iter().map(|c| (c * n as f64).floor() as i64).collect()
}

#[derive(Default)]
struct CubeAcc {
    mass: f64,
    h1: f64,
    moment: Vec<f64>,
    pieces: Vec<(usize, f64, f64)>,
    vertices: Vec<usize>,
}

impl CubeAcc {
    fn add_moment(&mut self, x: &Point, w: f64) {
        if self.moment.is_empty() {
            self.moment = vec![0.0; x.dim()];
        }
        for (m, c) in self.moment.iter_mut().zip(x.coords()) {
            *m += w * c;
        }
    }
}

enum Anchor {
    Vertex(usize),
    Edge(usize, f64),
}

fn build_cube_fans(nu: &CurveMeasure, alpha: f64, n: usize) -> Result<(EmbeddedGraph, Vec<CubeReport>)> {
    let graph = &nu.graph;
    let nf = n as f64;
    let mut cubes: BTreeMap<Vec<i64>, CubeAcc> = BTreeMap::new();

    for e in 0..graph.edges().len() {
        let (a, b) = graph.edge_points(e);
        let len = a.dist(b);
        let mut cuts = vec![0.0, 1.0];
        for (ai, bi) in a.coords().iter().zip(b.coords()) {
            let (lo, hi) = ((ai.min(*bi)) * nf, (ai.max(*bi)) * nf);
            let mut k = lo.floor() + 1.0;
            while k < hi {
                cuts.push((k / nf - ai) / (bi - ai));
                k += 1.0;
            }
        }
        cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
        cuts.dedup();
        for c in cuts.windows(2) {
            if c[1] <= c[0] {
                continue;
            }
            let mid = graph.point_on_edge(e, 0.5 * (c[0] + c[1]));
            let piece_len = (c[1] - c[0]) * len;
            let mass = nu.edge_density[e] * piece_len;
            let acc = cubes.entry(cube_of(&mid, n)).or_default();
            acc.mass += mass;
            acc.h1 += piece_len;
            acc.add_moment(&mid, mass);
            acc.pieces.push((e, c[0], c[1]));
        }
    }
    for (v, x) in graph.vertices().iter().enumerate() {
        let acc = cubes.entry(cube_of(x, n)).or_default();
        let atom = nu.vertex_atoms[v];
        acc.mass += atom;
        acc.add_moment(x, atom);
        acc.vertices.push(v);
    }

    let mut vertices = graph.vertices().to_vec();
    let mut splits: Vec<Vec<(f64, usize)>> = vec![Vec::new(); graph.edges().len()];
    let mut extra_edges: Vec<[usize; 2]> = Vec::new();
    let mut reports = Vec::new();
    let end_tol = 1e-12;

    for (key, acc) in &cubes {
        let raw = alpha * acc.mass - acc.h1;
        let excess = if raw > 1e-13 { raw } else { 0.0 };
        reports.push(CubeReport {
            cube_index: key.clone(),
            mass: acc.mass,
            h1_length: acc.h1,
            excess,
        });
        if excess == 0.0 {
            continue;
        }
        let target = if acc.mass > 0.0 {
            Point(acc.moment.iter().map(|m| m / acc.mass).collect())
        } else {
            graph.vertices()[acc.vertices.first().copied().unwrap_or(graph.edges()[acc.pieces[0].0][0])].clone()
        };
        let (anchor, at) = nearest_in_cube(graph, acc, &target);
        let attach = match anchor {
            Anchor::Vertex(v) => v,
            Anchor::Edge(e, t) if t <= end_tol => graph.edges()[e][0],
            Anchor::Edge(e, t) if t >= 1.0 - end_tol => graph.edges()[e][1],
            Anchor::Edge(e, t) => {
                vertices.push(at.clone());
                splits[e].push((t, vertices.len() - 1));
                vertices.len() - 1
            }
        };
        let pieces: Vec<(Point, Point)> = acc
            .pieces
            .iter()
            .map(|&(e, t0, t1)| (graph.point_on_edge(e, t0), graph.point_on_edge(e, t1)))
            .collect();
        for (dir, len) in fan_segments(&at, key, n, excess, &pieces) {
            let end = at.add(&dir.scale(len));
            vertices.push(end);
            extra_edges.push([attach, vertices.len() - 1]);
        }
    }

    let mut edges = Vec::with_capacity(graph.edges().len() + extra_edges.len());
    for (e, &[a, b]) in graph.edges().iter().enumerate() {
        let list = &mut splits[e];
        list.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
        let mut prev = a;
        for &(_, v) in list.iter() {
            edges.push([prev, v]);
            prev = v;
        }
        edges.push([prev, b]);
    }
    edges.extend(extra_edges);
    Ok((EmbeddedGraph::new(vertices, edges)?, reports))
}

fn nearest_in_cube(graph: &EmbeddedGraph, acc: &CubeAcc, target: &Point) -> (Anchor, Point) {
    let mut best: Option<(f64, Anchor, Point)> = None;
    for &v in &acc.vertices {
        let x = &graph.vertices()[v];
        let d = x.dist_sq(target);
        if best.as_ref().map_or(true, |b| d < b.0) {
            best = Some((d, Anchor::Vertex(v), x.clone()));
        }
    }
    for &(e, t0, t1) in &acc.pieces {
        let a = graph.point_on_edge(e, t0);
        let b = graph.point_on_edge(e, t1);
        let (s, d) = segment_param(a.coords(), b.coords(), target.coords());
        if best.as_ref().map_or(true, |b| d < b.0) {
            let t = t0 + s * (t1 - t0);
            best = Some((d, Anchor::Edge(e, t), a.lerp(&b, s)));
        }
    }
    let (_, anchor, at) = best.expect("cube with mass contains part of the graph");
    (anchor, at)
}

/// Directions (in the plane of the first two axes) and lengths of segments
/// from `at` adding up to `total`, each at most half of its ray's exit
/// distance from the cube, none running along a piece of Σ.
fn fan_segments(at: &Point, key: &[i64], n: usize, total: f64, pieces: &[(Point, Point)]) -> Vec<(Point, f64)> {
    let h = 1.0 / n as f64;
    let lo = [key[0] as f64 * h, key[1] as f64 * h];
    let hi = [lo[0] + h, lo[1] + h];
    let u = [lo[0] + 0.5 * h - at.0[0], lo[1] + 0.5 * h - at.0[1]];
    let phi = if u[0].hypot(u[1]) > 1e-9 * h { u[1].atan2(u[0]) } else { 0.0 };
    let spread = std::f64::consts::FRAC_PI_6;
    let d = at.dim();

    let exit = |c: f64, s: f64| -> f64 {
        let mut t = f64::INFINITY;
        for (i, comp) in [c, s].into_iter().enumerate() {
            if comp > 1e-15 {
                t = t.min((hi[i] - at.0[i]) / comp);
            } else if comp < -1e-15 {
                t = t.min((lo[i] - at.0[i]) / comp);
            }
        }
        t.max(0.0)
    };
    let runs_along_sigma = |dir: &Point, reach: f64| -> bool {
        let tol = 1e-12 * (1.0 + at.norm());
        pieces.iter().any(|(a, b)| {
            let sa = a.sub(at).dot(dir);
            let sb = b.sub(at).dot(dir);
            let off_a = a.sub(at).sub(&dir.scale(sa)).norm();
            let off_b = b.sub(at).sub(&dir.scale(sb)).norm();
            off_a <= tol && off_b <= tol && sa.max(sb).min(reach) - sa.min(sb).max(0.0) > tol
        })
    };

    let mut k = 1usize;
    loop {
        let mut fan = Vec::with_capacity(k);
        for j in 0..k {
            let off = if k == 1 {
                0.0
            } else {
                -spread + 2.0 * spread * j as f64 / (k - 1) as f64
            };
            let (s, c) = (phi + off).sin_cos();
            let mut dir = vec![0.0; d];
            dir[0] = c;
            dir[1] = s;
            let dir = Point(dir);
            let cap = 0.5 * exit(c, s);
            if cap > 0.0 && !runs_along_sigma(&dir, cap) {
                fan.push((dir, cap));
            }
        }
        let capacity: f64 = fan.iter().map(|f| f.1).sum();
        if capacity >= total && !fan.is_empty() {
            return fan.into_iter().map(|(dir, cap)| (dir, total * cap / capacity)).collect();
        }
        k = if capacity > 0.0 {
            (k + 1).max((k as f64 * total / capacity).ceil() as usize + 1)
        } else {
            k + 1
        };
    }
}

/// JSON layout of a curve measure: graph fields plus densities and atoms.
#[derive(Debug, Serialize, Deserialize)]
pub struct CurveMeasureFile {
    pub dimension: usize,
    pub vertices: Vec<Vec<f64>>,
    pub edges: Vec<[usize; 2]>,
    pub edge_density: Vec<f64>,
    pub vertex_atoms: Vec<f64>,
}

impl CurveMeasureFile {
    pub fn into_measure(self) -> Result<CurveMeasure> {
        let graph = GraphFile {
            dimension: self.dimension,
            vertices: self.vertices,
            edges: self.edges,
        }
        .into_graph()?;
        CurveMeasure::new(graph, self.edge_density, self.vertex_atoms)
    }
}

impl From<&CurveMeasure> for CurveMeasureFile {
    fn from(nu: &CurveMeasure) -> Self {
        let g = GraphFile::from(&nu.graph);
        CurveMeasureFile {
            dimension: g.dimension,
            vertices: g.vertices,
            edges: g.edges,
            edge_density: nu.edge_density.clone(),
            vertex_atoms: nu.vertex_atoms.clone(),
        }
    }
}

impl Serialize for CurveMeasure {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CurveMeasureFile::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for CurveMeasure {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        CurveMeasureFile::deserialize(d)?
            .into_measure()
            .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn p(c: &[f64]) -> Point {
        Point(c.to_vec())
    }

    fn unit_segment() -> EmbeddedGraph {
        EmbeddedGraph::segment(p(&[0.0, 0.0]), p(&[1.0, 0.0])).unwrap()
    }

    /// [0,1] split at ½ with densities 2/3 and 4/3.
    fn halves() -> CurveMeasure {
        let g = EmbeddedGraph::polyline(vec![p(&[0.0, 0.0]), p(&[0.5, 0.0]), p(&[1.0, 0.0])]).unwrap();
        CurveMeasure::new(g, vec![2.0 / 3.0, 4.0 / 3.0], vec![0.0; 3]).unwrap()
    }

    #[test]
    fn length_examples() {
        assert_eq!(CurveMeasure::uniform(unit_segment()).length(), 1.0);
        assert_eq!(CurveMeasure::dirac(p(&[3.0, 1.0])).length(), 0.0);
        assert_eq!(halves().length(), 1.5);
        let nu = CurveMeasure::new(unit_segment(), vec![0.8], vec![0.2, 0.0]).unwrap();
        assert_relative_eq!(nu.length(), 1.25, max_relative = 1e-15);
        let dead = CurveMeasure::new(unit_segment(), vec![0.0], vec![0.5, 0.5]).unwrap();
        assert_eq!(dead.length(), f64::INFINITY);
    }

    #[test]
    fn mass_is_checked() {
        assert!(matches!(
            CurveMeasure::new(unit_segment(), vec![0.5], vec![0.0, 0.0]),
            Err(Error::MassMismatch { .. })
        ));
        assert!(CurveMeasure::new(unit_segment(), vec![-0.5], vec![1.5, 0.0]).is_err());
        let nu = CurveMeasure::new(unit_segment(), vec![1.0 + 1e-10], vec![0.0, 0.0]).unwrap();
        assert_eq!(nu.total_mass(), 1.0);
    }

    #[test]
    fn quadrature_carries_all_mass() {
        let nu = CurveMeasure::new(unit_segment(), vec![0.8], vec![0.2, 0.0]).unwrap();
        let q = nu.quadrature(10);
        assert_eq!(q.len(), 11);
        assert_relative_eq!(q.weights.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        let back = CurveMeasure::from_site_weights(nu.graph().clone(), &q, &q.weights).unwrap();
        assert_relative_eq!(back.edge_density()[0], 0.8, epsilon = 1e-15);
        assert_eq!(back.vertex_atoms(), &[0.2, 0.0]);
        assert_eq!(Quadrature::of_graph(&unit_segment(), 1, false).len(), MIN_SITES_PER_EDGE);
    }

    #[test]
    fn parametric_examples() {
        let (len, l) = length_parametric(&[p(&[0.0, 0.0]), p(&[1.0, 0.0])], false).unwrap();
        assert_eq!((len, l), (1.0, 1.0));
        let (len, l) = length_parametric(&[p(&[0.0, 0.0]), p(&[1.0, 0.0]), p(&[0.0, 0.0])], false).unwrap();
        assert_eq!((len, l), (2.0, 1.0));
        let chain = [p(&[0.0]), p(&[1.0]), p(&[0.0]), p(&[1.0]), p(&[2.0])];
        let (len, l) = length_parametric(&chain, false).unwrap();
        assert_eq!((len, l), (4.0, 4.0));
        let chain = [p(&[0.0]), p(&[1.0]), p(&[0.0]), p(&[2.0])];
        let (len, l) = length_parametric(&chain, false).unwrap();
        assert_eq!((len, l), (4.0, 4.0));
        assert!(length_parametric(&[p(&[1.0]), p(&[1.0])], false).is_err());
    }

    #[test]
    fn parametric_twice_then_once() {
        // [0,1] covered twice, then [1,2] once
        let chain = [p(&[1.0, 0.0]), p(&[0.0, 0.0]), p(&[1.0, 0.0]), p(&[2.0, 0.0])];
        let (len, l) = length_parametric(&chain, false).unwrap();
        assert_relative_eq!(len, 3.0);
        assert_relative_eq!(l, 3.0);
        // a full double traversal halves the ratio
        let chain = [p(&[0.0, 0.0]), p(&[2.0, 0.0]), p(&[0.0, 0.0])];
        assert_eq!(length_parametric(&chain, false).unwrap(), (4.0, 2.0));
    }

    #[test]
    fn closed_square_has_unit_multiplicity() {
        let sq = [p(&[0.0, 0.0]), p(&[1.0, 0.0]), p(&[1.0, 1.0]), p(&[0.0, 1.0])];
        let (len, l) = length_parametric(&sq, true).unwrap();
        assert_eq!((len, l), (4.0, 4.0));
    }

    #[test]
    fn ball_ratio_examples() {
        let g = unit_segment();
        let n = 1000;
        let pts: Vec<Point> = (0..n).map(|i| p(&[(i as f64 + 0.5) / n as f64, 0.0])).collect();
        let disc = DiscreteMeasure::uniform(pts.clone()).unwrap();
        let centers: Vec<Point> = pts.iter().step_by(50).cloned().collect();
        let radii: Vec<f64> = [0.01, 0.05, 0.1].iter().map(|r| r * (1.0 + 1e-9)).collect();
        let est = ball_ratio_estimate(&disc, &g, &centers, &radii).unwrap();
        assert!((0.9..=1.0).contains(&est), "{est}");

        let half: Vec<Point> = pts[..n / 2].to_vec();
        let disc = DiscreteMeasure::uniform(half).unwrap();
        let est = ball_ratio_estimate(&disc, &g, &[p(&[0.9, 0.0])], &[0.05]).unwrap();
        assert_eq!(est, f64::INFINITY);

        let single = EmbeddedGraph::singleton(p(&[0.0, 0.0]));
        assert_eq!(ball_ratio_estimate(&disc, &single, &[p(&[0.0, 0.0])], &[1.0]).unwrap(), 0.0);
    }

    #[test]
    fn affine_examples() {
        let nu = CurveMeasure::uniform(unit_segment());
        let id = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let zero = p(&[0.0, 0.0]);
        assert_eq!(apply_affine(&nu, &id, &zero).unwrap(), nu);
        let twice = vec![vec![2.0, 0.0], vec![0.0, 2.0]];
        assert_relative_eq!(apply_affine(&nu, &twice, &zero).unwrap().length(), 2.0);
        let (s, c) = 0.7f64.sin_cos();
        let rot = vec![vec![c, -s], vec![s, c]];
        assert_relative_eq!(apply_affine(&nu, &rot, &p(&[1.0, 2.0])).unwrap().length(), 1.0, epsilon = 1e-14);
        let singular = vec![vec![1.0, 0.0], vec![0.0, 0.0]];
        assert!(apply_affine(&halves(), &singular, &zero).is_err());
    }

    #[test]
    fn approximate_uniform_on_uniform_adds_nothing() {
        let nu = CurveMeasure::uniform(EmbeddedGraph::polyline(vec![p(&[0.1, 0.2]), p(&[0.7, 0.4]), p(&[0.5, 0.9])]).unwrap());
        let (g, report) = approximate_uniform(&nu, 4, 2.0).unwrap();
        assert!(report.cubes.iter().all(|c| c.excess == 0.0));
        assert_relative_eq!(g.total_length(), nu.graph().total_length(), epsilon = 1e-12);
    }

    #[test]
    fn approximate_uniform_halves() {
        let nu = halves();
        for n in [2, 4, 8] {
            let (g, report) = approximate_uniform(&nu, n, 2.0).unwrap();
            assert_relative_eq!(g.total_length(), 1.5, epsilon = 1e-9);
            assert_relative_eq!(report.added_length, 0.5, epsilon = 1e-9);
            for c in &report.cubes {
                // oracle: cube over [i/n, (i+1)/n] on the dense half gets (3/2)(4/3)/n − 1/n
                let left = c.cube_index[0] as f64 / n as f64;
                let want = if left >= 0.5 && left < 1.0 { 1.0 / n as f64 } else { 0.0 };
                assert!((c.excess - want).abs() < 1e-12, "{c:?}");
            }
        }
    }

    // Atoms 2^-k on a refining grid of [0, 1] with the leftover 2^-n spread
    // as density. Support stays the segment while ℒ = 2^n blows up, which is
    // the finite shadow of a dense Dirac series having ℒ = +∞.
    #[test]
    fn dirac_series_length_diverges() {
        let mut prev = 0.0;
        for n in [2usize, 4, 8, 12] {
            let verts: Vec<Point> = (0..=n).map(|i| p(&[i as f64 / n as f64])).collect();
            let g = EmbeddedGraph::polyline(verts).unwrap();
            let mut atoms: Vec<f64> = (1..=n).map(|k| 0.5f64.powi(k as i32)).collect();
            atoms.push(0.0);
            let rest = 0.5f64.powi(n as i32);
            let nu = CurveMeasure::new(g, vec![rest; n], atoms).unwrap();
            assert_relative_eq!(nu.length(), 2f64.powi(n as i32), max_relative = 1e-12);
            assert!(nu.length() > prev);
            prev = nu.length();
        }
    }

    #[test]
    fn approximate_uniform_dirac() {
        let (g, _) = approximate_uniform(&CurveMeasure::dirac(p(&[0.3, 0.3])), 10, 2.0).unwrap();
        assert_eq!(g.vertices(), &[p(&[0.3, 0.3]), p(&[0.3 + 0.1, 0.3])]);
    }

    #[test]
    fn approximate_uniform_needs_plane() {
        let g = EmbeddedGraph::segment(p(&[0.0]), p(&[1.0])).unwrap();
        let nu = CurveMeasure::new(g, vec![0.5], vec![0.5, 0.0]).unwrap();
        assert!(approximate_uniform(&nu, 4, 2.0).is_err());
    }

    #[test]
    fn approximate_uniform_with_atoms_stays_in_cubes() {
        let g = EmbeddedGraph::polyline(vec![p(&[0.05, 0.05]), p(&[0.55, 0.35]), p(&[0.9, 0.8])]).unwrap();
        let theta = 0.85 / g.total_length();
        let nu = CurveMeasure::new(g, vec![theta; 2], vec![0.1, 0.05, 0.0]).unwrap();
        for n in [2, 4, 8, 16] {
            let (sigma_n, report) = approximate_uniform(&nu, n, 2.0).unwrap();
            assert_relative_eq!(sigma_n.total_length(), nu.length(), epsilon = 1e-9);
            assert!(report.cubes.iter().all(|c| c.excess >= 0.0));
        }
    }

    proptest! {
        #[test]
        fn length_dominates_support(th in prop::collection::vec(0.1f64..2.0, 3), atom in 0.0f64..0.5) {
            let g = EmbeddedGraph::polyline(vec![p(&[0.0, 0.0]), p(&[1.0, 0.0]), p(&[1.0, 2.0]), p(&[0.0, 3.0])]).unwrap();
            let lens = g.edge_lengths();
            let m: f64 = th.iter().zip(&lens).map(|(a, b)| a * b).sum();
            let scale = (1.0 - atom) / m;
            let dens: Vec<f64> = th.iter().map(|t| t * scale).collect();
            let nu = CurveMeasure::new(g.clone(), dens, vec![atom, 0.0, 0.0, 0.0]).unwrap();
            prop_assert!(nu.length() >= g.total_length() * (1.0 - 1e-12));
        }

        #[test]
        fn affine_lipschitz(a in prop::collection::vec(-2.0f64..2.0, 4), b in prop::collection::vec(-1.0f64..1.0, 2)) {
            let linear = vec![vec![a[0], a[1]], vec![a[2], a[3]]];
            let nu = halves();
            if let Ok(img) = apply_affine(&nu, &linear, &Point(b)) {
                let k = operator_norm(&linear).unwrap();
                prop_assert!(img.length() <= k * nu.length() * (1.0 + 1e-12));
            }
        }

        #[test]
        fn injective_chain_multiplicity_one(pts in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 2..6)) {
            // monotone in x, hence injective
            let mut pts = pts;
            pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let chain: Vec<Point> = pts.iter().enumerate().map(|(i, &(x, y))| p(&[x + i as f64, y])).collect();
            let (len, l) = length_parametric(&chain, false).unwrap();
            prop_assert!((len - l).abs() <= 1e-12 * len);
        }
    }
}
