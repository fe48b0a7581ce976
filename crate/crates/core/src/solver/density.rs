//! Energy evaluation and the density/α steps for a fixed support graph.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::EmbeddedGraph;
use crate::length::{sites_per_edge, CurveMeasure, Quadrature, SiteOwner};
use crate::measure::DiscreteMeasure;
use crate::transport::{solve_ot, solve_ot_lower_bounded, TransportPlan};

/// Energy breakdown `total = w_term + Λ·l_term`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Energy {
    pub w_term: f64,
    pub l_term: f64,
    pub total: f64,
}

impl Energy {
    pub fn is_finite(&self) -> bool {
        self.total.is_finite()
    }
}

/// ℰ(ν) = W_p^p(ρ₀, ν) + Λℒ(ν), with ν discretized by its quadrature at
/// `per_unit` sites per unit length. An infinite ℒ gives an infinite total.
pub fn energy(rho: &DiscreteMeasure, nu: &CurveMeasure, p: f64, lambda: f64, per_unit: usize) -> Result<Energy> {
    let quad = nu.quadrature(per_unit);
    let w_term = solve_ot(rho, &quad.measure(), p)?.cost();
    let l_term = nu.length();
    let total = if l_term.is_finite() {
        w_term + lambda * l_term
    } else {
        f64::INFINITY
    };
    Ok(Energy { w_term, l_term, total })
}

/// Optimal site weights on a fixed graph under the floor `1/α` per unit length.
#[derive(Clone, Debug)]
pub struct DensityFit {
    pub nu: CurveMeasure,
    pub alpha: f64,
    /// Site-level transport cost `Σ γ |x − y|^p`.
    pub cost: f64,
    pub plan: TransportPlan,
    pub quadrature: Quadrature,
    /// Lower bound on each site's weight.
    pub floors: Vec<f64>,
}

/// Per-site floors `(len(e)/k_e)/α` on edge sites, 0 on vertex sites.
pub(crate) fn site_floors(graph: &EmbeddedGraph, quad: &Quadrature, alpha: f64, per_unit: usize) -> Vec<f64> {
    quad.owners
        .iter()
        .map(|o| match *o {
            SiteOwner::Edge(e) => {
                let len = graph.edge_length(e);
                len / sites_per_edge(len, per_unit) as f64 / alpha
            }
            SiteOwner::Vertex(_) => 0.0,
        })
        .collect()
}

/// Minimizes W_p^p(ρ₀, ν) over measures on Σ with density at least `1/α`
/// on every edge. Sites are the edge quadrature points and the vertices;
/// mass is free above the floors.
pub fn optimize_densities(
    rho: &DiscreteMeasure,
    graph: &EmbeddedGraph,
    alpha: f64,
    p: f64,
    per_unit: usize,
) -> Result<DensityFit> {
    let length = graph.total_length();
    if graph.is_singleton() {
        let nu = CurveMeasure::uniform(graph.clone());
        let quadrature = nu.quadrature(per_unit);
        let plan = solve_ot(rho, &quadrature.measure(), p)?;
        return Ok(DensityFit {
            nu,
            alpha: 0.0,
            cost: plan.cost(),
            plan,
            floors: vec![0.0; quadrature.len()],
            quadrature,
        });
    }
    if !(alpha >= length * (1.0 - 1e-12)) {
        return Err(Error::Infeasible(format!(
            "alpha = {alpha} is below the support length {length}"
        )));
    }
    let alpha = alpha.max(length);
    let mut quadrature = Quadrature::of_graph(graph, per_unit, true);
    let floors = site_floors(graph, &quadrature, alpha, per_unit);
    let (plan, target) = solve_ot_lower_bounded(rho, &quadrature.sites, &floors, p)?;
    quadrature.weights = target.weights().to_vec();
    let nu = CurveMeasure::from_site_weights(graph.clone(), &quadrature, &quadrature.weights)?;
    Ok(DensityFit {
        nu,
        alpha,
        cost: plan.cost(),
        plan,
        quadrature,
        floors,
    })
}

/// Result of the one-dimensional search over α.
#[derive(Clone, Debug)]
pub struct AlphaFit {
    pub fit: DensityFit,
    /// Site-level objective `cost + Λα` at the returned α.
    pub objective: f64,
    /// Minimum found at ℋ¹(Σ), where the floor uses up the whole mass.
    pub at_lower_edge: bool,
    /// Minimum found at the top of the bracket.
    pub at_upper_edge: bool,
}

impl AlphaFit {
    pub fn alpha(&self) -> f64 {
        self.fit.alpha
    }

    pub fn at_bracket_edge(&self) -> bool {
        self.at_lower_edge || self.at_upper_edge
    }
}

/// Golden-section search of `α ↦ min W_p^p + Λα` over `[ℋ¹(Σ), factor·ℋ¹(Σ)]`.
///
/// The inner minimum is a convex function of `1/α` that does not increase
/// in α, so the objective is convex in α and golden section applies. Both
/// bracket ends are evaluated so boundary minima are found exactly.
pub fn optimize_alpha(
    rho: &DiscreteMeasure,
    graph: &EmbeddedGraph,
    p: f64,
    lambda: f64,
    per_unit: usize,
    bracket_factor: f64,
    rel_tol: f64,
) -> Result<AlphaFit> {
    if graph.is_singleton() {
        let fit = optimize_densities(rho, graph, 0.0, p, per_unit)?;
        return Ok(AlphaFit {
            objective: fit.cost,
            fit,
            at_lower_edge: true,
            at_upper_edge: false,
        });
    }
    if !(bracket_factor > 1.0) {
        return Err(Error::InvalidParameter("alpha bracket factor must exceed 1".into()));
    }
    let lo = graph.total_length();
    let hi = bracket_factor * lo;
    let mut best: Option<(f64, DensityFit)> = None;
    let eval = |alpha: f64, best: &mut Option<(f64, DensityFit)>| -> Result<f64> {
        let fit = optimize_densities(rho, graph, alpha, p, per_unit)?;
        let f = fit.cost + lambda * alpha;
        if best.as_ref().map_or(true, |(bf, _)| f < *bf) {
            *best = Some((f, fit));
        }
        Ok(f)
    };

    eval(lo, &mut best)?;
    eval(hi, &mut best)?;
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = eval(c, &mut best)?;
    let mut fd = eval(d, &mut best)?;
    let mut iters = 0;
    while b - a > rel_tol * a && iters < 200 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = eval(c, &mut best)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = eval(d, &mut best)?;
        }
        iters += 1;
    }
    let (objective, fit) = best.expect("bracket evaluated");
    let at_lower_edge = fit.alpha <= lo * (1.0 + rel_tol);
    let at_upper_edge = fit.alpha >= hi * (1.0 - rel_tol);
    if at_upper_edge {
        log::debug!("alpha search hit the upper bracket {hi}");
    }
    Ok(AlphaFit {
        fit,
        objective,
        at_lower_edge,
        at_upper_edge,
    })
}
