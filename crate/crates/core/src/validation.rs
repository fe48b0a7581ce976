//! Closed-form oracles and diagnostic checks on solver output.
//!
//! [`two_dirac_solution`] is the exact minimizer for ρ₀ = ½(δ₋₁ + δ₁) with
//! p = 2. The remaining checks look at structural properties every
//! minimizer has: density-one lower bounds on balls, excess mass sent to its
//! nearest point of Σ, and cost additivity of the optimal plan.

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::graph::EmbeddedGraph;
use crate::hull::convex_hull_margin;
use crate::length::{CurveMeasure, SiteOwner};
use crate::measure::{p_mean, p_moment_cost, DiscreteMeasure, Point};
use crate::solver::{self, optimize_alpha, FinalCoupling, Mode, SolveResult, SolverConfig};
use crate::transport::{restrict_plan, solve_ot, TransportPlan};

/// Slack on the connectedness lower bound `ℋ¹(Σ ∩ B_r(x)) ≥ r`.
pub const AHLFORS_TOL: f64 = 1e-12;

/// Mass below this per site is rounding noise from the flow solver, not excess.
const MASS_NOISE: f64 = 1e-10;

/// Relative tolerance for plan-cost identities.
pub const PLAN_COST_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// Floor density plus atoms at ±1.
    Mixture,
    /// Uniform on [−b*, b*].
    Uniform,
    /// δ₀.
    Dirac,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TwoDiracSolution {
    pub regime: Regime,
    pub lambda: f64,
    pub alpha_star: Option<f64>,
    pub b_star: Option<f64>,
    pub energy: f64,
    pub nu: CurveMeasure,
}

/// Exact minimizer for ρ₀ = ½(δ₋₁ + δ₁), p = 2:
///
/// * Λ < 1/6: density `1/α*` on [−1, 1] plus atoms `½ − 1/α*` at ±1, with `α* = √(2/(3Λ))`
/// * 1/6 ≤ Λ < 1/2: uniform on [−b*, b*], `b* = (3/2)(1 − 2Λ)`
/// * Λ ≥ 1/2: δ₀
pub fn two_dirac_solution(lambda: f64) -> Result<TwoDiracSolution> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("lambda = {lambda} must be > 0")));
    }
    let seg = |b: f64| EmbeddedGraph::segment(Point(vec![-b]), Point(vec![b]));
    if lambda < 1.0 / 6.0 {
        let alpha = (2.0 / (3.0 * lambda)).sqrt();
        let atom = 0.5 - 1.0 / alpha;
        let nu = CurveMeasure::new(seg(1.0)?, vec![1.0 / alpha], vec![atom, atom])?;
        Ok(TwoDiracSolution {
            regime: Regime::Mixture,
            lambda,
            alpha_star: Some(alpha),
            b_star: None,
            energy: lambda * alpha + 2.0 / (3.0 * alpha),
            nu,
        })
    } else if lambda < 0.5 {
        let b = 1.5 * (1.0 - 2.0 * lambda);
        Ok(TwoDiracSolution {
            regime: Regime::Uniform,
            lambda,
            alpha_star: None,
            b_star: Some(b),
            energy: b * b / 3.0 + (2.0 * lambda - 1.0) * b + 1.0,
            nu: CurveMeasure::uniform(seg(b)?),
        })
    } else {
        Ok(TwoDiracSolution {
            regime: Regime::Dirac,
            lambda,
            alpha_star: None,
            b_star: None,
            energy: 1.0,
            nu: CurveMeasure::dirac(Point(vec![0.0])),
        })
    }
}

/// ½(δ₋₁ + δ₁) on the line.
pub fn two_dirac_measure() -> DiscreteMeasure {
    DiscreteMeasure::new(vec![Point(vec![-1.0]), Point(vec![1.0])], vec![0.5, 0.5]).expect("valid measure")
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AhlforsRow {
    pub center: Point,
    pub radius: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AhlforsProfile {
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub rows: Vec<AhlforsRow>,
}

impl AhlforsProfile {
    /// Connectedness forces `ℋ¹(Σ ∩ B_r(x)) ≥ r` whenever Σ leaves the ball.
    pub fn lower_bound_holds(&self) -> bool {
        self.min_ratio >= 1.0 - AHLFORS_TOL
    }
}

/// `ℋ¹(Σ ∩ B_r(x))/r` at `n_centers` arc-length samples x (plus every
/// vertex) and each radius, skipping balls that contain all of Σ.
pub fn ahlfors_profile(graph: &EmbeddedGraph, n_centers: usize, radii: &[f64]) -> Result<AhlforsProfile> {
    if graph.is_singleton() {
        return Err(Error::InvalidParameter("Ahlfors profile needs a non-singleton support".into()));
    }
    let half_diam = 0.5 * graph.diameter();
    if let Some(&r) = radii.iter().find(|&&r| !(r > 0.0 && r < half_diam)) {
        return Err(Error::InvalidParameter(format!("radius {r} outside (0, diam/2 = {half_diam})")));
    }
    let mut rows = Vec::new();
    let mut centers = graph.sample_by_arclength(n_centers.max(1));
    centers.extend(graph.vertices().iter().cloned());
    for x in centers {
        let far = graph.vertices().iter().map(|v| v.dist(&x)).fold(0.0, f64::max);
        for &r in radii {
            if far < r {
                continue;
            }
            rows.push(AhlforsRow {
                ratio: graph.ball_length(&x, r) / r,
                center: x.clone(),
                radius: r,
            });
        }
    }
    let min_ratio = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    let max_ratio = rows.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max);
    Ok(AhlforsProfile {
        min_ratio,
        max_ratio,
        rows,
    })
}

/// Radii `diam/4 · 2^{-k}` for `k < n`.
pub fn default_radii(graph: &EmbeddedGraph, n: usize) -> Vec<f64> {
    let top = 0.25 * graph.diameter();
    (0..n).map(|k| top * 0.5f64.powi(k as i32)).collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExcessProjectionReport {
    /// Mass attributed to excess (above the per-site floor).
    pub excess_mass: f64,
    /// Excess mass whose source is farther from its site than from Σ by more than `tol`.
    pub violation_mass: f64,
    /// Largest `|x − y| − dist(x, Σ)` over violating entries.
    pub max_violation: f64,
    pub tol: f64,
}

/// Checks that excess mass travels to the nearest point of Σ.
///
/// Each site's intake is split into a floor part (up to `floors[j]`) and an
/// excess part. Floor mass is attributed first to the entries with the
/// largest slack `|x − y| − dist(x, Σ)`, the most favourable split, so a
/// reported violation cannot be blamed on the attribution.
pub fn check_excess_projection(
    graph: &EmbeddedGraph,
    plan: &TransportPlan,
    floors: &[f64],
    tol: f64,
) -> Result<ExcessProjectionReport> {
    let sites = plan.target().points();
    if floors.len() != sites.len() {
        return Err(Error::Malformed(format!("{} floors for {} sites", floors.len(), sites.len())));
    }
    let mut by_site: Vec<Vec<(f64, f64)>> = vec![Vec::new(); sites.len()];
    for e in plan.entries() {
        let x = &plan.source().points()[e.source];
        let slack = x.dist(&sites[e.target]) - graph.distance_to(x);
        by_site[e.target].push((slack, e.mass));
    }
    let mut report = ExcessProjectionReport {
        excess_mass: 0.0,
        violation_mass: 0.0,
        max_violation: 0.0,
        tol,
    };
    for (entries, &floor) in by_site.iter_mut().zip(floors) {
        entries.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut floor_left = if floor > 0.0 { floor + MASS_NOISE } else { 0.0 };
        for &(slack, mass) in entries.iter() {
            let to_floor = mass.min(floor_left);
            floor_left -= to_floor;
            let excess = mass - to_floor;
            if excess <= 0.0 {
                continue;
            }
            report.excess_mass += excess;
            if slack > tol {
                report.violation_mass += excess;
                report.max_violation = report.max_violation.max(slack);
            }
        }
    }
    Ok(report)
}

/// Half the largest gap between neighbouring quadrature sites of a coupling.
pub fn site_spacing_tolerance(graph: &EmbeddedGraph, coupling: &FinalCoupling) -> f64 {
    let mut per_edge = vec![0usize; graph.edges().len()];
    for o in &coupling.quadrature.owners {
        if let SiteOwner::Edge(e) = *o {
            per_edge[e] += 1;
        }
    }
    let spacing = per_edge
        .iter()
        .enumerate()
        .filter(|(_, &k)| k > 0)
        .map(|(e, &k)| graph.edge_length(e) / k as f64)
        .fold(0.0, f64::max);
    0.5 * spacing + 1e-12 * graph.diameter().max(1.0)
}

/// [`check_excess_projection`] on a solver result's own coupling, with
/// tolerance `tol` or half the site spacing.
pub fn check_result_excess_projection(result: &SolveResult, tol: Option<f64>) -> Result<ExcessProjectionReport> {
    let coupling = result
        .coupling
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("result carries no coupling".into()))?;
    let graph = result.nu.graph();
    let tol = tol.unwrap_or_else(|| site_spacing_tolerance(graph, coupling));
    check_excess_projection(graph, &coupling.plan, &coupling.floors, tol)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PieceReport {
    pub targets: Vec<usize>,
    pub mass: f64,
    pub cost: f64,
    /// Optimal cost between the piece's own marginals.
    pub resolved_cost: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlanDecompositionReport {
    pub total_cost: f64,
    pub sum_of_pieces: f64,
    pub pieces: Vec<PieceReport>,
    /// Largest `cost − resolved_cost` over pieces.
    pub max_gap: f64,
    pub additive: bool,
    pub pieces_optimal: bool,
}

impl PlanDecompositionReport {
    pub fn pass(&self) -> bool {
        self.additive && self.pieces_optimal
    }
}

/// Splits `plan` by a partition of its target indices, checks that piece
/// costs add up to the total, and re-solves every piece between its own
/// marginals. Pieces of an optimal plan are optimal, so the re-solve must
/// reproduce each cost.
pub fn check_plan_decomposition(plan: &TransportPlan, partition: &[Vec<usize>]) -> Result<PlanDecompositionReport> {
    let m = plan.target().len();
    let mut seen = vec![false; m];
    for &j in partition.iter().flatten() {
        if j >= m || seen[j] {
            return Err(Error::InvalidParameter(format!("partition index {j} repeated or out of range")));
        }
        seen[j] = true;
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::InvalidParameter("partition does not cover every target".into()));
    }
    let all_sources: Vec<usize> = (0..plan.source().len()).collect();
    let mut pieces = Vec::with_capacity(partition.len());
    for part in partition {
        let piece = restrict_plan(plan, &all_sources, part)?;
        let cost = piece.plan.cost();
        let resolved_cost = if piece.source_marginal.is_empty() {
            0.0
        } else {
            solve_ot(&piece.source_marginal, &piece.target_marginal, plan.p())?.cost()
        };
        pieces.push(PieceReport {
            targets: part.clone(),
            mass: piece.source_marginal.total_mass(),
            cost,
            resolved_cost,
        });
    }
    let total_cost = plan.cost();
    let sum_of_pieces: f64 = pieces.iter().map(|p| p.cost).sum();
    let max_gap = pieces.iter().map(|p| p.cost - p.resolved_cost).fold(0.0, f64::max);
    let close = |a: f64, b: f64| (a - b).abs() <= PLAN_COST_TOL * a.abs().max(b.abs()).max(1.0);
    Ok(PlanDecompositionReport {
        additive: close(total_cost, sum_of_pieces),
        pieces_optimal: pieces.iter().all(|p| close(p.cost, p.resolved_cost)),
        total_cost,
        sum_of_pieces,
        pieces,
        max_gap,
    })
}

/// Structural checks on one solver result.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InvariantReport {
    /// Largest distance from a vertex of Σ to conv(supp ρ₀).
    pub hull_margin: f64,
    pub support_length: f64,
    /// `W_p^p(ρ₀, δ_{p-mean})/Λ`, which bounds ℋ¹(Σ) for a minimizer.
    pub length_bound: f64,
    pub excess: ExcessProjectionReport,
    /// `None` for a Dirac.
    pub ahlfors_min_ratio: Option<f64>,
    pub ahlfors_max_ratio: Option<f64>,
}

impl InvariantReport {
    /// Hull margin ≤ 1e-6, length within 10% slack, violation mass < 1e-4,
    /// Ahlfors lower bound.
    pub fn pass(&self) -> bool {
        self.hull_margin <= 1e-6
            && self.support_length <= 1.1 * self.length_bound
            && self.excess.violation_mass < 1e-4
            && self.ahlfors_min_ratio.is_none_or(|r| r >= 1.0 - AHLFORS_TOL)
    }
}

pub fn check_invariants(rho: &DiscreteMeasure, result: &SolveResult) -> Result<InvariantReport> {
    let graph = result.nu.graph();
    let hull_margin = convex_hull_margin(rho, graph.vertices())?.into_iter().fold(0.0, f64::max);
    let center = match p_mean(rho, result.p, 1e-12) {
        Ok(c) => c,
        Err(Error::NoConvergence { best_point, .. }) => Point(best_point),
        Err(e) => return Err(e),
    };
    let length_bound = p_moment_cost(rho, &center, result.p)? / result.lambda;
    let excess = check_result_excess_projection(result, None)?;
    let ahlfors = if graph.is_singleton() || graph.diameter() <= 0.0 {
        None
    } else {
        Some(ahlfors_profile(graph, 16, &default_radii(graph, 4))?)
    };
    Ok(InvariantReport {
        hull_margin,
        support_length: graph.total_length(),
        length_bound,
        excess,
        ahlfors_min_ratio: ahlfors.as_ref().map(|a| a.min_ratio),
        ahlfors_max_ratio: ahlfors.as_ref().map(|a| a.max_ratio),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub details: serde_json::Value,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ValidationReport {
    pub suite: String,
    pub pass: bool,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    fn new(suite: &str, checks: Vec<Check>) -> Self {
        ValidationReport {
            suite: suite.into(),
            pass: checks.iter().all(|c| c.pass),
            checks,
        }
    }

    pub fn merge(suite: &str, reports: Vec<ValidationReport>) -> Self {
        Self::new(suite, reports.into_iter().flat_map(|r| r.checks).collect())
    }
}

fn check(name: &str, pass: bool, details: serde_json::Value) -> Check {
    Check {
        name: name.into(),
        pass,
        details,
    }
}

/// Closed-form checks on the two-Dirac problem, solver included.
/// `per_unit` is the solver quadrature density (the spec-level checks use ≥ 200).
pub fn two_dirac_suite(per_unit: usize) -> Result<ValidationReport> {
    let rho = two_dirac_measure();
    let mut checks = Vec::new();

    let lo = two_dirac_solution(1.0 / 6.0 - 1e-15)?;
    let at = two_dirac_solution(1.0 / 6.0)?;
    let hi = two_dirac_solution(0.5 - 1e-9)?;
    let gap_sixth = (lo.energy - at.energy).abs();
    checks.push(check(
        "regime continuity",
        gap_sixth < 1e-12 && (hi.energy - 1.0).abs() < 1e-8,
        json!({"gap_at_one_sixth": gap_sixth, "energy_below_half": hi.energy}),
    ));

    let mut worst = 0.0f64;
    let mut rows = Vec::new();
    for &lambda in &[0.05, 0.1, 0.15, 0.2, 0.3, 0.4, 0.6, 0.8] {
        let sol = two_dirac_solution(lambda)?;
        let e = solver::energy(&rho, &sol.nu, 2.0, lambda, 500)?;
        let rel = (e.total - sol.energy).abs() / sol.energy;
        worst = worst.max(rel);
        rows.push(json!({"lambda": lambda, "closed_form": sol.energy, "quadrature": e.total}));
    }
    checks.push(check(
        "quadrature energy matches closed form",
        worst < 0.01,
        json!({"max_relative_error": worst, "rows": rows}),
    ));

    let base = SolverConfig {
        p: 2.0,
        quadrature_per_edge: per_unit,
        ..SolverConfig::default()
    };
    for &lambda in &[0.6, 0.8] {
        let res = solver::solve(&rho, &SolverConfig { lambda, ..base.clone() })?;
        let x = res.collapse_point.as_ref().map(|c| c.0[0]);
        checks.push(check(
            &format!("dirac regime at lambda {lambda}"),
            res.collapsed && x.is_some_and(|x| x.abs() < 1e-3) && (res.energy - 1.0).abs() < 1e-3,
            json!({"collapsed": res.collapsed, "point": x, "energy": res.energy}),
        ));
    }

    let res = solver::solve(
        &rho,
        &SolverConfig {
            lambda: 0.3,
            mode: Mode::Uniform,
            ..base.clone()
        },
    )?;
    let xs: Vec<f64> = res.nu.graph().vertices().iter().map(|v| v.0[0]).collect();
    let left = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let right = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    checks.push(check(
        "uniform regime at lambda 0.3",
        !res.collapsed && (left + 0.6).abs() <= 0.03 && (right - 0.6).abs() <= 0.03 && (res.energy - 0.88).abs() <= 0.02 * 0.88,
        json!({"endpoints": [left, right], "energy": res.energy, "expected_energy": 0.88}),
    ));

    let segment = EmbeddedGraph::segment(Point(vec![-1.0]), Point(vec![1.0]))?;
    let fit = optimize_alpha(&rho, &segment, 2.0, 0.1, per_unit, base.alpha_bracket_factor, 1e-5)?;
    let want = two_dirac_solution(0.1)?;
    let a_star = want.alpha_star.unwrap_or(f64::NAN);
    let total = solver::energy(&rho, &fit.fit.nu, 2.0, 0.1, per_unit)?.total;
    checks.push(check(
        "mixture regime at lambda 0.1",
        (fit.alpha() - a_star).abs() <= 0.05 * a_star && (total - want.energy).abs() <= 0.02 * want.energy,
        json!({"alpha": fit.alpha(), "expected_alpha": a_star, "energy": total, "expected_energy": want.energy}),
    ));

    let mixture = solver::solve(
        &rho,
        &SolverConfig {
            lambda: 0.1,
            ..base
        },
    )?;
    let excess = check_result_excess_projection(&mixture, None)?;
    checks.push(check(
        "excess mass goes to its own side",
        excess.violation_mass < 1e-6,
        serde_json::to_value(&excess)?,
    ));

    Ok(ValidationReport::new("two-dirac", checks))
}

/// Structural invariants of solver output on a few seeded sample measures.
pub fn invariants_suite(per_unit: usize, seed: u64) -> Result<ValidationReport> {
    use crate::measure::{sample_density, DensitySpec, MixtureComponent};
    let blob = |mean: Vec<f64>, std: f64| MixtureComponent {
        weight: 0.5,
        spec: DensitySpec::isotropic_gaussian(mean, std),
    };
    let families = [
        DensitySpec::isotropic_gaussian(vec![0.0, 0.0], 1.0),
        DensitySpec::Mixture {
            components: vec![blob(vec![-2.0, 0.0], 0.4), blob(vec![2.0, 0.5], 0.4)],
        },
    ];
    let mut checks = Vec::new();
    for (k, spec) in families.iter().enumerate() {
        let rho = sample_density(spec, 40, seed.wrapping_add(k as u64))?;
        for &lambda in &[1.0, 0.2] {
            let cfg = SolverConfig {
                lambda,
                quadrature_per_edge: per_unit,
                n_vertices: 4,
                max_outer_iters: 30,
                seed,
                ..SolverConfig::default()
            };
            let res = solver::solve(&rho, &cfg)?;
            let inv = check_invariants(&rho, &res)?;
            checks.push(check(
                &format!("family {k} lambda {lambda}"),
                inv.pass(),
                serde_json::to_value(&inv)?,
            ));
        }
    }

    let mu = sample_density(&families[0], 5, seed)?;
    let nu = sample_density(&families[1], 5, seed.wrapping_add(7))?;
    let plan = solve_ot(&mu, &nu, 2.0)?;
    let dec = check_plan_decomposition(&plan, &[vec![0, 1], vec![2, 3, 4]])?;
    checks.push(check("plan decomposition", dec.pass(), serde_json::to_value(&dec)?));

    Ok(ValidationReport::new("invariants", checks))
}
