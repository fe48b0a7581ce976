//! Minimization of ℰ(ν) = W_p^p(ρ₀, ν) + Λℒ(ν) over measures on graphs.
//!
//! Two problems are handled. In uniform mode ν is the normalized length
//! measure of its support Σ, so ℒ(ν) = ℋ¹(Σ). In relaxed mode ν may carry
//! any density above a floor `1/α` plus atoms, and the search runs jointly
//! over α, the densities and Σ.
//!
//! The outer loop alternates a coupling/density step with a vertex move
//! (see [`StepControl`]) and, optionally, topology moves. Every step is kept
//! only if it lowers the objective, so the energy trace never increases. A
//! Dirac mass at the p-mean is always a candidate; it wins ties.

mod bounds;
mod density;
mod geometry;
mod init;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use bounds::{lambda_star_bounds, LambdaStarBounds};
pub use density::{energy, optimize_alpha, optimize_densities, AlphaFit, DensityFit, Energy};
pub use geometry::StepControl;
pub use init::{kmeans, kmeans_tree, principal_segment};

use crate::error::{Error, Result};
use crate::graph::EmbeddedGraph;
use crate::hull::ConvexHull;
use crate::length::{CurveMeasure, Quadrature};
use crate::measure::{p_mean, p_moment_cost, DiscreteMeasure, Point};
use crate::transport::{solve_ot, TransportPlan};
use geometry::{contract_short_edges, geometry_step, topology_step};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// ν uniform on Σ.
    Uniform,
    /// ν with density at least `1/α` on Σ, plus atoms.
    Relaxed,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Mode::Uniform),
            "relaxed" => Ok(Mode::Relaxed),
            other => Err(Error::InvalidParameter(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub p: f64,
    pub lambda: f64,
    pub mode: Mode,
    /// Vertices of the principal-segment start, and centroids of the k-means tree start.
    pub n_vertices: usize,
    /// Quadrature sites per unit length (at least 3 per edge).
    pub quadrature_per_edge: usize,
    pub max_outer_iters: usize,
    /// Stop once an outer iteration lowers the objective by less than this fraction.
    /// The α search uses the same relative tolerance, floored at 1e-4.
    pub tol_rel_energy: f64,
    pub seed: u64,
    pub topology_moves: bool,
    /// Supports shorter than this stop the iteration; defaults to `1e-3·diam(supp ρ₀)`.
    pub collapse_length_eps: Option<f64>,
    pub alpha_bracket_factor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            p: 2.0,
            lambda: 0.1,
            mode: Mode::Relaxed,
            n_vertices: 8,
            quadrature_per_edge: 200,
            max_outer_iters: 100,
            tol_rel_energy: 1e-6,
            seed: 0,
            topology_moves: true,
            collapse_length_eps: None,
            alpha_bracket_factor: 50.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.into()));
        if !(self.p >= 1.0) || !self.p.is_finite() {
            return bad("p must be >= 1");
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return bad("lambda must be >= 0");
        }
        if self.n_vertices < 2 {
            return bad("n_vertices must be >= 2");
        }
        if self.quadrature_per_edge < 1 {
            return bad("quadrature_per_edge must be >= 1");
        }
        if !(self.tol_rel_energy > 0.0 && self.tol_rel_energy < 1.0) {
            return bad("tol_rel_energy must lie in (0, 1)");
        }
        if let Some(eps) = self.collapse_length_eps {
            if !(eps >= 0.0) {
                return bad("collapse_length_eps must be >= 0");
            }
        }
        if !(self.alpha_bracket_factor > 1.0) {
            return bad("alpha_bracket_factor must exceed 1");
        }
        Ok(())
    }

    fn alpha_tol(&self) -> f64 {
        self.tol_rel_energy.max(1e-4)
    }
}

/// The coupling behind a result, kept for diagnostics.
#[derive(Clone, Debug)]
pub struct FinalCoupling {
    pub plan: TransportPlan,
    /// Sites and realized weights the plan targets.
    pub quadrature: Quadrature,
    /// Density floor carried by each site (all of its weight in uniform mode).
    pub floors: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveResult {
    #[serde(flatten)]
    pub nu: CurveMeasure,
    pub p: f64,
    pub lambda: f64,
    pub mode: Mode,
    pub w_term: f64,
    pub l_term: f64,
    pub energy: f64,
    /// Floor parameter: ℋ¹(Σ) in uniform mode, the optimal α in relaxed
    /// mode, 0 for a Dirac.
    pub alpha: f64,
    pub support_length: f64,
    /// Mass above the floor `1/α` (atoms plus density surplus).
    pub excess_mass: f64,
    pub iterations: usize,
    /// Objective after each accepted step of the winning run. In relaxed
    /// mode this is the site-level objective `W + Λα`.
    pub energy_trace: Vec<f64>,
    pub collapsed: bool,
    pub collapse_point: Option<Point>,
    /// Energy of the Dirac mass at the p-mean.
    pub dirac_energy: f64,
    pub config: SolverConfig,
    pub seed: u64,
    #[serde(skip)]
    pub coupling: Option<FinalCoupling>,
}

/// Shared read-only data for one solve.
pub(crate) struct Ctx<'a> {
    rho: &'a DiscreteMeasure,
    p: f64,
    lambda: f64,
    mode: Mode,
    per_unit: usize,
    bracket: f64,
    alpha_tol: f64,
    hull: ConvexHull,
    scale: f64,
    contract_tol: f64,
}

/// A candidate support with its optimal coupling.
#[derive(Clone, Debug)]
pub(crate) struct State {
    graph: EmbeddedGraph,
    nu: CurveMeasure,
    alpha: f64,
    objective: f64,
    plan: TransportPlan,
    quad: Quadrature,
    floors: Vec<f64>,
}

impl State {
    fn at_alpha_floor(&self) -> bool {
        self.alpha <= 1.01 * self.graph.total_length()
    }
}

impl<'a> Ctx<'a> {
    fn new(rho: &'a DiscreteMeasure, cfg: &SolverConfig) -> Result<Self> {
        let diam = rho.diameter();
        let scale = if diam > 0.0 { diam } else { 1.0 };
        Ok(Ctx {
            rho,
            p: cfg.p,
            lambda: cfg.lambda,
            mode: cfg.mode,
            per_unit: cfg.quadrature_per_edge,
            bracket: cfg.alpha_bracket_factor,
            alpha_tol: cfg.alpha_tol(),
            hull: ConvexHull::of_support(rho)?,
            scale,
            contract_tol: 1e-9 * scale,
        })
    }

    fn eval_uniform(&self, graph: EmbeddedGraph) -> Result<State> {
        let nu = CurveMeasure::uniform(graph.clone());
        let quad = nu.quadrature(self.per_unit);
        let plan = solve_ot(self.rho, &quad.measure(), self.p)?;
        let length = nu.length();
        Ok(State {
            graph,
            alpha: length,
            objective: plan.cost() + self.lambda * length,
            plan,
            floors: quad.weights.clone(),
            quad,
            nu,
        })
    }

    fn from_fit(&self, fit: DensityFit) -> State {
        State {
            graph: fit.nu.graph().clone(),
            objective: fit.cost + self.lambda * fit.alpha,
            alpha: fit.alpha,
            nu: fit.nu,
            plan: fit.plan,
            quad: fit.quadrature,
            floors: fit.floors,
        }
    }

    /// Best state on a fixed graph (α optimized in relaxed mode).
    fn evaluate(&self, graph: EmbeddedGraph) -> Result<State> {
        match self.mode {
            Mode::Uniform => self.eval_uniform(graph),
            Mode::Relaxed => {
                let fit = optimize_alpha(self.rho, &graph, self.p, self.lambda, self.per_unit, self.bracket, self.alpha_tol)?;
                Ok(self.from_fit(fit.fit))
            }
        }
    }

    /// Cheap evaluation of a moved graph. In relaxed mode α is carried over
    /// (raised to the new length if needed) or, when the floor was binding,
    /// rescaled with the length.
    fn evaluate_moved(&self, cur: &State, graph: EmbeddedGraph) -> Result<State> {
        if self.mode == Mode::Uniform || graph.is_singleton() {
            return match self.mode {
                Mode::Uniform => self.eval_uniform(graph),
                Mode::Relaxed => Ok(self.from_fit(optimize_densities(self.rho, &graph, 0.0, self.p, self.per_unit)?)),
            };
        }
        let new_len = graph.total_length();
        let mut alphas = vec![cur.alpha.max(new_len)];
        let old_len = cur.graph.total_length();
        if cur.at_alpha_floor() && old_len > 0.0 {
            alphas.push((new_len * cur.alpha / old_len).max(new_len));
        }
        let mut best: Option<State> = None;
        for a in alphas {
            let st = self.from_fit(optimize_densities(self.rho, &graph, a, self.p, self.per_unit)?);
            if best.as_ref().map_or(true, |b| st.objective < b.objective) {
                best = Some(st);
            }
        }
        Ok(best.unwrap())
    }

    /// Re-optimizes α after a move, keeping whichever is better.
    fn refresh(&self, st: State) -> Result<State> {
        if self.mode == Mode::Uniform {
            return Ok(st);
        }
        let alt = self.evaluate(st.graph.clone())?;
        Ok(if alt.objective < st.objective { alt } else { st })
    }

    /// Projects vertices into conv(supp ρ₀) and contracts near-zero edges.
    fn rebuild(&self, vertices: Vec<Point>, edges: Vec<[usize; 2]>) -> Result<EmbeddedGraph> {
        let mut projected = Vec::with_capacity(vertices.len());
        for v in vertices {
            let q = self.hull.project(&v)?;
            projected.push(if q.dist(&v) > 1e-12 * self.scale { q } else { v });
        }
        contract_short_edges(projected, edges, self.contract_tol)
    }
}

struct Run {
    state: State,
    trace: Vec<f64>,
    iterations: usize,
}

fn local_solve(ctx: &Ctx, init: EmbeddedGraph, cfg: &SolverConfig, collapse_eps: f64) -> Result<Run> {
    let mut cur = ctx.evaluate(init)?;
    let mut trace = vec![cur.objective];
    let mut iterations = 0;
    while iterations < cfg.max_outer_iters {
        iterations += 1;
        let prev = cur.objective;
        let mut improved = false;
        if let Some(next) = geometry_step(ctx, &cur, StepControl::default())? {
            cur = ctx.refresh(next)?;
            improved = true;
        }
        let small = |cur: &State| prev - cur.objective <= cfg.tol_rel_energy * prev.abs();
        let mut stalled = !improved || small(&cur);
        if cfg.topology_moves && (iterations % 5 == 0 || stalled) {
            if let Some(next) = topology_step(ctx, &cur)? {
                cur = next;
                improved = true;
            }
            stalled = !improved || small(&cur);
        }
        if improved {
            trace.push(cur.objective);
        }
        if stalled || cur.graph.is_singleton() || cur.graph.total_length() < collapse_eps {
            break;
        }
    }
    Ok(Run {
        state: cur,
        trace,
        iterations,
    })
}

fn center_of(rho: &DiscreteMeasure, p: f64) -> Result<Point> {
    match p_mean(rho, p, 1e-12) {
        Ok(x) => Ok(x),
        Err(Error::NoConvergence { best_point, .. }) => Ok(Point(best_point)),
        Err(e) => Err(e),
    }
}

fn check_probability(rho: &DiscreteMeasure) -> Result<()> {
    if rho.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    let mass = rho.total_mass();
    if (mass - 1.0).abs() > 1e-9 {
        return Err(Error::MassMismatch { left: mass, right: 1.0 });
    }
    Ok(())
}

/// Solves from the default starting graphs.
pub fn solve(rho: &DiscreteMeasure, config: &SolverConfig) -> Result<SolveResult> {
    solve_with_inits(rho, config, &[])
}

/// Solves from the default starting graphs plus `extra` ones, keeping the best.
pub fn solve_with_inits(rho: &DiscreteMeasure, config: &SolverConfig, extra: &[EmbeddedGraph]) -> Result<SolveResult> {
    config.validate()?;
    check_probability(rho)?;
    let ctx = Ctx::new(rho, config)?;
    let (p, lambda) = (config.p, config.lambda);
    let center = center_of(rho, p)?;
    let dirac_energy = p_moment_cost(rho, &center, p)?;
    let diam = rho.diameter();
    let collapse_eps = config.collapse_length_eps.unwrap_or(1e-3 * diam);

    let mut inits = Vec::new();
    if diam > 0.0 {
        inits.extend(principal_segment(rho, config.n_vertices));
        if config.n_vertices > 2 && config.topology_moves {
            inits.push(kmeans_tree(rho, config.n_vertices, config.seed)?);
        }
        for g in extra {
            if g.dim() != rho.dim() {
                return Err(Error::DimensionMismatch {
                    expected: rho.dim(),
                    found: g.dim(),
                });
            }
            inits.push(g.clone());
        }
    }

    let mut starts = Vec::with_capacity(inits.len());
    for init in inits {
        let graph = ctx.rebuild(init.vertices().to_vec(), init.edges().to_vec())?;
        if !graph.is_singleton() {
            starts.push(graph);
        }
    }
    // independent runs; the winner is picked in start order, so the result
    // does not depend on scheduling
    #[cfg(feature = "parallel")]
    let runs: Vec<Result<Run>> = {
        use rayon::prelude::*;
        starts
            .into_par_iter()
            .map(|g| local_solve(&ctx, g, config, collapse_eps))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let runs: Vec<Result<Run>> = starts
        .into_iter()
        .map(|g| local_solve(&ctx, g, config, collapse_eps))
        .collect();
    let mut best: Option<Run> = None;
    for run in runs {
        let run = run?;
        log::debug!(
            "run with {} vertices: objective {} after {} iterations",
            run.state.graph.vertices().len(),
            run.state.objective,
            run.iterations
        );
        if best.as_ref().map_or(true, |b| run.state.objective < b.state.objective) {
            best = Some(run);
        }
    }

    let graph_candidate = match best {
        Some(run) if !run.state.graph.is_singleton() => {
            let e = energy(rho, &run.state.nu, p, lambda, config.quadrature_per_edge)?;
            Some((run, e))
        }
        _ => None,
    };
    let collapse = graph_candidate.as_ref().map_or(true, |(_, e)| dirac_energy <= e.total);

    let result = if collapse {
        let nu = CurveMeasure::dirac(center.clone());
        let quadrature = nu.quadrature(config.quadrature_per_edge);
        let plan = solve_ot(rho, &quadrature.measure(), p)?;
        let (mut trace, iterations) = match graph_candidate {
            Some((run, _)) => (run.trace, run.iterations),
            None => (Vec::new(), 0),
        };
        if trace.last().map_or(true, |&last| dirac_energy <= last) {
            trace.push(dirac_energy);
        }
        SolveResult {
            nu,
            p,
            lambda,
            mode: config.mode,
            w_term: dirac_energy,
            l_term: 0.0,
            energy: dirac_energy,
            alpha: 0.0,
            support_length: 0.0,
            excess_mass: 1.0,
            iterations,
            energy_trace: trace,
            collapsed: true,
            collapse_point: Some(center),
            dirac_energy,
            config: config.clone(),
            seed: config.seed,
            coupling: Some(FinalCoupling {
                plan,
                floors: vec![0.0; quadrature.len()],
                quadrature,
            }),
        }
    } else {
        let (run, e) = graph_candidate.unwrap();
        let st = run.state;
        SolveResult {
            p,
            lambda,
            mode: config.mode,
            w_term: e.w_term,
            l_term: e.l_term,
            energy: e.total,
            alpha: st.alpha,
            support_length: st.graph.total_length(),
            excess_mass: st.nu.excess_mass(st.alpha),
            iterations: run.iterations,
            energy_trace: run.trace,
            collapsed: false,
            collapse_point: None,
            dirac_energy,
            config: config.clone(),
            seed: config.seed,
            nu: st.nu,
            coupling: Some(FinalCoupling {
                plan: st.plan,
                quadrature: st.quad,
                floors: st.floors,
            }),
        }
    };
    Ok(result)
}

/// Outcome of a single [`move_vertices`] call.
#[derive(Clone, Debug)]
pub struct MoveOutcome {
    pub graph: EmbeddedGraph,
    pub objective_before: f64,
    pub objective_after: f64,
    pub moved: bool,
}

/// One geometry update of the support of `nu`.
///
/// The coupling is recomputed from ν's quadrature: against ν_Σ in uniform
/// mode, and with the floor `1/ℒ(ν)` in relaxed mode. The graph is returned
/// unchanged when no trial step lowers the objective.
pub fn move_vertices(rho: &DiscreteMeasure, nu: &CurveMeasure, config: &SolverConfig, step: StepControl) -> Result<MoveOutcome> {
    config.validate()?;
    check_probability(rho)?;
    let ctx = Ctx::new(rho, config)?;
    let graph = nu.graph().clone();
    let cur = match config.mode {
        Mode::Uniform => ctx.eval_uniform(graph)?,
        Mode::Relaxed => {
            let alpha = nu.length().max(nu.graph().total_length());
            ctx.from_fit(optimize_densities(rho, &graph, alpha, config.p, config.quadrature_per_edge)?)
        }
    };
    Ok(match geometry_step(&ctx, &cur, step)? {
        Some(next) => MoveOutcome {
            graph: next.graph,
            objective_before: cur.objective,
            objective_after: next.objective,
            moved: true,
        },
        None => MoveOutcome {
            objective_after: cur.objective,
            objective_before: cur.objective,
            graph: cur.graph,
            moved: false,
        },
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepResult {
    pub lambdas: Vec<f64>,
    pub results: Vec<SolveResult>,
    /// Midpoint of the first adjacent pair where the result stops being a Dirac.
    pub lambda_star_empirical: Option<f64>,
    pub flip_bracket: Option<[f64; 2]>,
}

/// Solves for each Λ in decreasing order, seeding every run with the
/// previous support in addition to the default starts.
pub fn sweep_lambda(rho: &DiscreteMeasure, lambdas: &[f64], config: &SolverConfig) -> Result<SweepResult> {
    if lambdas.is_empty() {
        return Err(Error::InvalidParameter("empty lambda list".into()));
    }
    if lambdas.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
        return Err(Error::InvalidParameter("lambdas must be positive".into()));
    }
    if lambdas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter("lambdas must be strictly decreasing".into()));
    }
    let mut results: Vec<SolveResult> = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let cfg = SolverConfig {
            lambda,
            ..config.clone()
        };
        let warm: Vec<EmbeddedGraph> = results
            .last()
            .filter(|r| !r.collapsed)
            .map(|r| r.nu.graph().clone())
            .into_iter()
            .collect();
        let res = solve_with_inits(rho, &cfg, &warm)?;
        log::info!(
            "lambda {lambda}: energy {} collapsed {} length {}",
            res.energy,
            res.collapsed,
            res.support_length
        );
        results.push(res);
    }
    let flip = (1..results.len()).find(|&i| results[i - 1].collapsed && !results[i].collapsed);
    Ok(SweepResult {
        lambda_star_empirical: flip.map(|i| 0.5 * (lambdas[i - 1] + lambdas[i])),
        flip_bracket: flip.map(|i| [lambdas[i], lambdas[i - 1]]),
        lambdas: lambdas.to_vec(),
        results,
    })
}

/// `n` geometrically spaced values from `hi` down to `lo`.
pub fn geometric_lambdas(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo) || n == 0 {
        return Err(Error::InvalidParameter("lambda range needs 0 < lo < hi and n >= 1".into()));
    }
    if n == 1 {
        return Ok(vec![hi]);
    }
    let ratio = (lo / hi).powf(1.0 / (n - 1) as f64);
    let mut out: Vec<f64> = (0..n).map(|i| hi * ratio.powi(i as i32)).collect();
    out[n - 1] = lo;
    Ok(out)
}

/// Sweep table: `lambda,w_term,l_term,energy,collapsed,support_length`.
pub fn write_sweep_csv<W: Write>(results: &[SolveResult], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["lambda", "w_term", "l_term", "energy", "collapsed", "support_length"])?;
    for r in results {
        w.write_record([
            crate::io::csv_float(r.lambda),
            crate::io::csv_float(r.w_term),
            crate::io::csv_float(r.l_term),
            crate::io::csv_float(r.energy),
            r.collapsed.to_string(),
            crate::io::csv_float(r.support_length),
        ])?;
    }
    w.flush()?;
    Ok(())
}
