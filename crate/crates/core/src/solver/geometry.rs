//! Vertex moves and topology moves on the support graph.
//!
//! A move step freezes the current coupling, sends every quadrature site to
//! the barycenter of the mass it receives, and refits the vertices by
//! weighted least squares. The length ℋ¹(Σ) enters through the quadratic
//! majorizer `|u| ≤ |u|²/(2ℓ) + ℓ/2`, with ℓ the current edge length. For
//! `p ≠ 2` the site weights are reweighted by `(p/2)|x − y|^{p−2}`. Steps
//! are only kept when the true energy decreases.

use nalgebra::DMatrix;

use crate::error::Result;
use crate::graph::EmbeddedGraph;
use crate::length::SiteOwner;
use crate::measure::{cost_pow, Point};

use super::{Ctx, Mode, State};

/// Step length schedule for [`super::move_vertices`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepControl {
    /// First trial fraction of the least-squares displacement.
    pub initial_step: f64,
    /// Trials after the first, each halving the step.
    pub max_halvings: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            initial_step: 1.0,
            max_halvings: 10,
        }
    }
}

/// Least-squares vertex targets for the current coupling.
fn refit_vertices(ctx: &Ctx, cur: &State) -> Vec<Vec<f64>> {
    let graph = &cur.graph;
    let nv = graph.vertices().len();
    let d = graph.dim();
    let nsites = cur.quad.len();
    let mut mass = vec![0.0; nsites];
    let mut moment = vec![vec![0.0; d]; nsites];
    let eps = 1e-6 * ctx.scale;
    for e in cur.plan.entries() {
        let x = &ctx.rho.points()[e.source];
        let y = &cur.quad.sites[e.target];
        let w = if ctx.p == 2.0 {
            e.mass
        } else {
            e.mass * 0.5 * ctx.p * x.dist(y).max(eps).powf(ctx.p - 2.0)
        };
        mass[e.target] += w;
        for (m, c) in moment[e.target].iter_mut().zip(x.coords()) {
            *m += w * c;
        }
    }

    let mut a = DMatrix::<f64>::zeros(nv, nv);
    let mut b = DMatrix::<f64>::zeros(nv, d);
    let mut total = 0.0;
    for k in 0..nsites {
        let m = mass[k];
        if m <= 0.0 {
            continue;
        }
        total += m;
        let coeffs: Vec<(usize, f64)> = match cur.quad.owners[k] {
            SiteOwner::Edge(e) => {
                let [u, v] = graph.edges()[e];
                let t = cur.quad.params[k];
                vec![(u, 1.0 - t), (v, t)]
            }
            SiteOwner::Vertex(v) => vec![(v, 1.0)],
        };
        for &(i, ci) in &coeffs {
            for &(j, cj) in &coeffs {
                a[(i, j)] += m * ci * cj;
            }
            for c in 0..d {
                b[(i, c)] += ci * moment[k][c];
            }
        }
    }
    let with_length = ctx.mode == Mode::Uniform || cur.at_alpha_floor();
    if with_length && ctx.lambda > 0.0 {
        for (e, &[u, v]) in graph.edges().iter().enumerate() {
            let w = ctx.lambda / (2.0 * graph.edge_length(e));
            a[(u, u)] += w;
            a[(v, v)] += w;
            a[(u, v)] -= w;
            a[(v, u)] -= w;
            total += w;
        }
    }
    let mu = 1e-10 * total.max(1e-300);
    for i in 0..nv {
        a[(i, i)] += mu;
        for c in 0..d {
            b[(i, c)] += mu * graph.vertices()[i].coords()[c];
        }
    }
    let sol = match a.clone().cholesky() {
        Some(ch) => ch.solve(&b),
        None => a.lu().solve(&b).unwrap_or_else(|| {
            DMatrix::from_fn(nv, d, |i, c| graph.vertices()[i].coords()[c])
        }),
    };
    (0..nv).map(|i| (0..d).map(|c| sol[(i, c)]).collect()).collect()
}

/// One accepted geometry update, or `None` if no trial step lowers the objective.
pub(crate) fn geometry_step(ctx: &Ctx, cur: &State, step: StepControl) -> Result<Option<State>> {
    if cur.graph.is_singleton() || step.initial_step <= 0.0 {
        return Ok(None);
    }
    let target = refit_vertices(ctx, cur);
    let old = cur.graph.vertices();
    let mut tau = step.initial_step;
    for _ in 0..=step.max_halvings {
        let moved: Vec<Point> = old
            .iter()
            .zip(&target)
            .map(|(v, t)| Point(v.coords().iter().zip(t).map(|(a, b)| a + tau * (b - a)).collect()))
            .collect();
        if moved.iter().zip(old).all(|(a, b)| a == b) {
            return Ok(None);
        }
        let graph = ctx.rebuild(moved, cur.graph.edges().to_vec())?;
        let next = ctx.evaluate_moved(cur, graph)?;
        if next.objective < cur.objective - 1e-13 * cur.objective.abs() {
            return Ok(Some(next));
        }
        tau *= 0.5;
    }
    Ok(None)
}

/// Tries pruning light leaves, then splitting the costliest edge (with and
/// without a new branch). Returns the best candidate if it lowers the objective.
pub(crate) fn topology_step(ctx: &Ctx, cur: &State) -> Result<Option<State>> {
    let graph = &cur.graph;
    if graph.is_singleton() {
        return Ok(None);
    }
    let mut best: Option<State> = None;
    let consider = |cand: State, best: &mut Option<State>, allow_tie: bool| {
        let bar = best.as_ref().map_or(cur.objective, |b| b.objective);
        let better = if allow_tie && best.is_none() {
            cand.objective <= cur.objective
        } else {
            cand.objective < bar - 1e-13 * bar.abs()
        };
        if better {
            *best = Some(cand);
        }
    };

    if let Some(pruned) = prune_light_leaves(cur) {
        let st = ctx.evaluate(pruned)?;
        consider(st, &mut best, true);
    }

    let ne = graph.edges().len();
    let mut cost = vec![0.0; ne];
    let mut cost_t = vec![0.0; ne];
    let mut mass = vec![0.0; ne];
    let mut pull = vec![vec![0.0; graph.dim()]; ne];
    for en in cur.plan.entries() {
        if let SiteOwner::Edge(e) = cur.quad.owners[en.target] {
            let x = &ctx.rho.points()[en.source];
            let c = en.mass * cost_pow(x.coords(), cur.quad.sites[en.target].coords(), ctx.p);
            cost[e] += c;
            cost_t[e] += c * cur.quad.params[en.target];
            mass[e] += en.mass;
            for (acc, xc) in pull[e].iter_mut().zip(x.coords()) {
                *acc += en.mass * xc;
            }
        }
    }
    let lengths = graph.edge_lengths();
    let worst = (0..ne)
        .filter(|&e| cost[e] > 0.0)
        .max_by(|&a, &b| (cost[a] / lengths[a]).partial_cmp(&(cost[b] / lengths[b])).unwrap());
    if let Some(e) = worst {
        let t = (cost_t[e] / cost[e]).clamp(0.1, 0.9);
        let split_at = graph.point_on_edge(e, t);
        let mut vertices = graph.vertices().to_vec();
        let mut edges = graph.edges().to_vec();
        vertices.push(split_at.clone());
        let s = vertices.len() - 1;
        let [u, v] = edges[e];
        edges[e] = [u, s];
        edges.push([s, v]);

        let mut candidates = vec![(vertices.clone(), edges.clone())];
        if mass[e] > 0.0 {
            let g = Point(pull[e].iter().map(|c| c / mass[e]).collect());
            let tip = split_at.lerp(&g, 0.5);
            if tip.dist(&split_at) > 10.0 * ctx.contract_tol {
                let mut vs = vertices;
                let mut es = edges;
                vs.push(tip);
                es.push([s, vs.len() - 1]);
                candidates.push((vs, es));
            }
        }
        for (vs, es) in candidates {
            let graph = ctx.rebuild(vs, es)?;
            let st = ctx.evaluate(graph)?;
            let st = match geometry_step(ctx, &st, StepControl::default())? {
                Some(next) => ctx.refresh(next)?,
                None => st,
            };
            consider(st, &mut best, false);
        }
    }
    Ok(best)
}

/// Removes leaf edges carrying less than 1e-6 mass, keeping at least one edge.
fn prune_light_leaves(cur: &State) -> Option<EmbeddedGraph> {
    let graph = &cur.graph;
    let ne = graph.edges().len();
    if ne < 2 {
        return None;
    }
    let mut edge_mass = vec![0.0; ne];
    let mut atom = vec![0.0; graph.vertices().len()];
    for (k, owner) in cur.quad.owners.iter().enumerate() {
        match *owner {
            SiteOwner::Edge(e) => edge_mass[e] += cur.quad.weights[k],
            SiteOwner::Vertex(v) => atom[v] += cur.quad.weights[k],
        }
    }
    let degrees = graph.degrees();
    let mut drop_edge = vec![false; ne];
    let mut drop_vertex = vec![false; graph.vertices().len()];
    let mut remaining = ne;
    for (e, &[u, v]) in graph.edges().iter().enumerate() {
        let leaf = if degrees[u] == 1 {
            u
        } else if degrees[v] == 1 {
            v
        } else {
            continue;
        };
        if remaining > 1 && !drop_vertex[u] && !drop_vertex[v] && edge_mass[e] + atom[leaf] < 1e-6 {
            drop_edge[e] = true;
            drop_vertex[leaf] = true;
            remaining -= 1;
        }
    }
    if remaining == ne {
        return None;
    }
    let mut index = vec![usize::MAX; graph.vertices().len()];
    let mut vertices = Vec::new();
    for (i, x) in graph.vertices().iter().enumerate() {
        if !drop_vertex[i] {
            index[i] = vertices.len();
            vertices.push(x.clone());
        }
    }
    let edges = graph
        .edges()
        .iter()
        .enumerate()
        .filter(|(e, _)| !drop_edge[*e])
        .map(|(_, &[u, v])| [index[u], index[v]])
        .collect();
    EmbeddedGraph::new(vertices, edges).ok()
}

/// Merges vertices joined by edges shorter than `tol`, dropping loops and
/// duplicate edges. Returns a singleton when everything merges.
pub(crate) fn contract_short_edges(mut vertices: Vec<Point>, mut edges: Vec<[usize; 2]>, tol: f64) -> Result<EmbeddedGraph> {
    loop {
        let n = vertices.len();
        let mut root: Vec<usize> = (0..n).collect();
        fn find(root: &mut [usize], mut i: usize) -> usize {
            while root[i] != i {
                root[i] = root[root[i]];
                i = root[i];
            }
            i
        }
        let mut merged = false;
        for &[u, v] in &edges {
            if vertices[u].dist(&vertices[v]) <= tol {
                let (a, b) = (find(&mut root, u), find(&mut root, v));
                if a != b {
                    root[a.max(b)] = a.min(b);
                    merged = true;
                }
            }
        }
        if !merged {
            break;
        }
        let d = vertices[0].dim();
        let mut index = vec![usize::MAX; n];
        let mut sums: Vec<(Vec<f64>, f64)> = Vec::new();
        for i in 0..n {
            let r = find(&mut root, i);
            if index[r] == usize::MAX {
                index[r] = sums.len();
                sums.push((vec![0.0; d], 0.0));
            }
            index[i] = index[r];
            let s = &mut sums[index[i]];
            for (acc, c) in s.0.iter_mut().zip(vertices[i].coords()) {
                *acc += c;
            }
            s.1 += 1.0;
        }
        vertices = sums.into_iter().map(|(s, k)| Point(s.into_iter().map(|c| c / k).collect())).collect();
        let mut seen = std::collections::BTreeSet::new();
        edges = edges
            .iter()
            .map(|&[u, v]| [index[u], index[v]])
            .filter(|&[u, v]| u != v && seen.insert((u.min(v), u.max(v))))
            .collect();
    }
    if edges.is_empty() {
        let first = vertices.swap_remove(0);
        return Ok(EmbeddedGraph::singleton(first));
    }
    EmbeddedGraph::new(vertices, edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(c: &[f64]) -> Point {
        Point(c.to_vec())
    }

    #[test]
    fn contraction_merges_short_edges() {
        let g = contract_short_edges(
            vec![p(&[0.0, 0.0]), p(&[1e-12, 0.0]), p(&[1.0, 0.0])],
            vec![[0, 1], [1, 2]],
            1e-9,
        )
        .unwrap();
        assert_eq!(g.vertices().len(), 2);
        assert_eq!(g.edges(), &[[0, 1]]);
        let g = contract_short_edges(vec![p(&[0.0]), p(&[0.0])], vec![[0, 1]], 1e-9).unwrap();
        assert!(g.is_singleton());
    }

    #[test]
    fn contraction_drops_duplicate_edges() {
        // triangle with one short side collapses to a single edge
        let g = contract_short_edges(
            vec![p(&[0.0, 0.0]), p(&[0.0, 1e-12]), p(&[1.0, 0.0])],
            vec![[0, 1], [1, 2], [2, 0]],
            1e-9,
        )
        .unwrap();
        assert_eq!(g.edges().len(), 1);
    }
}
