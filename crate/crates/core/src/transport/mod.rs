//! Exact discrete optimal transport.
//!
//! Masses are scaled to integers with denominator [`MASS_SCALE`] and the
//! transportation problem is solved by network simplex, so plans are exact
//! basic solutions up to that rounding. Costs are `|x − y|^p` in `f64`.

mod network_simplex;

use std::collections::{HashMap, HashSet};
use std::io::Write;

use crate::error::{Error, Result};
use crate::measure::{cost_pow, DiscreteMeasure, Point};
use network_simplex::{FlowError, FlowNetwork};

/// Integer scaling applied to masses before flow solving.
pub const MASS_SCALE: f64 = 1e12;

/// Tolerance for comparing the total masses of the two marginals.
pub const MASS_MATCH_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlanEntry {
    pub source: usize,
    pub target: usize,
    pub mass: f64,
}

/// Sparse coupling between two discrete measures.
#[derive(Clone, Debug)]
pub struct TransportPlan {
    entries: Vec<PlanEntry>,
    source: DiscreteMeasure,
    target: DiscreteMeasure,
    p: f64,
    cost: f64,
}

impl TransportPlan {
    /// Wraps explicit entries; the cost is recomputed. Entries with zero mass are dropped.
    pub fn from_entries(
        source: DiscreteMeasure,
        target: DiscreteMeasure,
        p: f64,
        mut entries: Vec<PlanEntry>,
    ) -> Result<Self> {
        check_exponent(p)?;
        for e in &entries {
            if e.source >= source.len() || e.target >= target.len() {
                return Err(Error::InvalidParameter("plan entry index out of range".into()));
            }
            if !(e.mass >= 0.0) {
                return Err(Error::NegativeWeight {
                    index: e.source,
                    value: e.mass,
                });
            }
        }
        entries.retain(|e| e.mass > 0.0);
        entries.sort_by_key(|e| (e.source, e.target));
        let mut plan = TransportPlan {
            entries,
            source,
            target,
            p,
            cost: 0.0,
        };
        plan.cost = plan.recompute_cost();
        Ok(plan)
    }

    pub fn entries(&self) -> &[PlanEntry] {
        &self.entries
    }

    pub fn source(&self) -> &DiscreteMeasure {
        &self.source
    }

    pub fn target(&self) -> &DiscreteMeasure {
        &self.target
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// `Σ mass · |x − y|^p`, i.e. `W_p^p` for an optimal plan.
    pub fn cost(&self) -> f64 {
        self.cost
    }

    /// `cost^{1/p}`.
    pub fn wasserstein(&self) -> f64 {
        self.cost.max(0.0).powf(1.0 / self.p)
    }

    pub fn entry_cost(&self, e: &PlanEntry) -> f64 {
        e.mass
            * cost_pow(
                self.source.points()[e.source].coords(),
                self.target.points()[e.target].coords(),
                self.p,
            )
    }

    pub fn recompute_cost(&self) -> f64 {
        self.entries.iter().map(|e| self.entry_cost(e)).sum()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let mut rows = vec![0.0; self.source.len()];
        for e in &self.entries {
            rows[e.source] += e.mass;
        }
        rows
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut cols = vec![0.0; self.target.len()];
        for e in &self.entries {
            cols[e.target] += e.mass;
        }
        cols
    }

    /// CSV dump: `source_index,target_index,mass,cost_contribution`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["source_index", "target_index", "mass", "cost_contribution"])?;
        for e in &self.entries {
            w.write_record([
                e.source.to_string(),
                e.target.to_string(),
                crate::io::csv_float(e.mass),
                crate::io::csv_float(self.entry_cost(e)),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_exponent(p: f64) -> Result<()> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!("exponent p = {p} must be >= 1")));
    }
    Ok(())
}

fn scale_masses(weights: &[f64]) -> Vec<i64> {
    weights.iter().map(|&w| (w * MASS_SCALE).round() as i64).collect()
}

/// Moves the rounding residual `want − Σ` onto the largest entry.
fn fix_total(scaled: &mut [i64], want: i64) {
    let have: i64 = scaled.iter().sum();
    if have != want {
        let k = (0..scaled.len()).max_by_key(|&i| scaled[i]).unwrap();
        scaled[k] += want - have;
    }
}

fn cost_matrix_row<'a>(x: &Point, targets: &'a [Point], p: f64) -> impl Iterator<Item = f64> + 'a {
    let xc = x.coords().to_vec();
    targets.iter().map(move |y| cost_pow(&xc, y.coords(), p))
}

/// Optimal plan between two discrete measures of equal mass for cost `|x − y|^p`.
pub fn solve_ot(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<TransportPlan> {
    check_exponent(p)?;
    if mu.is_empty() || nu.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            found: nu.dim(),
        });
    }
    let (ma, mb) = (mu.total_mass(), nu.total_mass());
    if (ma - mb).abs() > MASS_MATCH_TOL {
        return Err(Error::MassMismatch { left: ma, right: mb });
    }
    let n = mu.len();
    let m = nu.len();
    let a = scale_masses(mu.weights());
    let mut b = scale_masses(nu.weights());
    fix_total(&mut b, a.iter().sum());

    let mut supply = a;
    supply.extend(b.iter().map(|v| -v));
    let mut net = FlowNetwork::with_arc_capacity(supply, n * m);
    for (i, x) in mu.points().iter().enumerate() {
        for (j, c) in cost_matrix_row(x, nu.points(), p).enumerate() {
            net.add_arc(i, n + j, c);
        }
    }
    let flow = net.solve().map_err(flow_error)?;
    let entries = flow
        .iter()
        .enumerate()
        .filter(|(_, &f)| f > 0)
        .map(|(k, &f)| PlanEntry {
            source: k / m,
            target: k % m,
            mass: f as f64 / MASS_SCALE,
        })
        .collect();
    TransportPlan::from_entries(mu.clone(), nu.clone(), p, entries)
}

fn flow_error(e: FlowError) -> Error {
    match e {
        FlowError::Infeasible => Error::Infeasible("flow problem has no feasible solution".into()),
        FlowError::Unbounded => Error::Infeasible("flow problem is unbounded".into()),
    }
}

/// Transport with free target weights bounded below.
///
/// Finds weights `w ≥ lower` on `sites` with `Σ w = mass(μ)` and a coupling
/// minimizing `Σ mass · |x − y|^p` jointly. Returns the plan and the
/// realized target measure (same mass as `μ`, zero weights kept so that
/// indices match `sites`).
pub fn solve_ot_lower_bounded(
    mu: &DiscreteMeasure,
    sites: &[Point],
    lower: &[f64],
    p: f64,
) -> Result<(TransportPlan, DiscreteMeasure)> {
    check_exponent(p)?;
    if mu.is_empty() || sites.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    if sites.len() != lower.len() {
        return Err(Error::InvalidParameter(format!(
            "{} sites but {} lower bounds",
            sites.len(),
            lower.len()
        )));
    }
    if let Some(s) = sites.iter().find(|s| s.dim() != mu.dim()) {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            found: s.dim(),
        });
    }
    if let Some((i, &l)) = lower.iter().enumerate().find(|(_, &l)| !(l >= 0.0)) {
        return Err(Error::NegativeWeight { index: i, value: l });
    }
    let mass = mu.total_mass();
    let floor_total: f64 = lower.iter().sum();
    if floor_total > mass + 1e-12 {
        return Err(Error::Infeasible(format!(
            "lower bounds sum to {floor_total} but only {mass} mass is available"
        )));
    }

    let n = mu.len();
    let m = sites.len();
    let a = scale_masses(mu.weights());
    let total: i64 = a.iter().sum();
    let mut l = scale_masses(lower);
    let mut excess: i64 = l.iter().sum::<i64>() - total;
    while excess > 0 {
        let k = (0..m).max_by_key(|&i| l[i]).unwrap();
        let cut = excess.min(l[k]);
        l[k] -= cut;
        excess -= cut;
    }
    let free = total - l.iter().sum::<i64>();

    let sink = n + m;
    let mut supply = a;
    supply.extend(l.iter().map(|v| -v));
    supply.push(-free);
    let mut net = FlowNetwork::with_arc_capacity(supply, n * m + m);
    for (i, x) in mu.points().iter().enumerate() {
        for (j, c) in cost_matrix_row(x, sites, p).enumerate() {
            net.add_arc(i, n + j, c);
        }
    }
    for j in 0..m {
        net.add_arc(n + j, sink, 0.0);
    }
    let flow = net.solve().map_err(flow_error)?;

    let entries: Vec<PlanEntry> = flow[..n * m]
        .iter()
        .enumerate()
        .filter(|(_, &f)| f > 0)
        .map(|(k, &f)| PlanEntry {
            source: k / m,
            target: k % m,
            mass: f as f64 / MASS_SCALE,
        })
        .collect();
    let weights: Vec<f64> = (0..m)
        .map(|j| (l[j] + flow[n * m + j]) as f64 / MASS_SCALE)
        .collect();
    let target = DiscreteMeasure::new_raw(sites.to_vec(), weights)?;
    let plan = TransportPlan::from_entries(mu.clone(), target.clone(), p, entries)?;
    Ok((plan, target))
}

/// A plan restricted to `S0 × S1` with its two marginals.
#[derive(Clone, Debug)]
pub struct RestrictedPlan {
    /// Fragment re-indexed against `source_marginal` / `target_marginal`.
    pub plan: TransportPlan,
    pub source_marginal: DiscreteMeasure,
    pub target_marginal: DiscreteMeasure,
    /// Original source index of each point of `source_marginal`.
    pub source_indices: Vec<usize>,
    /// Original target index of each point of `target_marginal`.
    pub target_indices: Vec<usize>,
}

/// Keeps the entries with source in `s0` and target in `s1`.
pub fn restrict_plan(plan: &TransportPlan, s0: &[usize], s1: &[usize]) -> Result<RestrictedPlan> {
    let keep0: HashSet<usize> = s0.iter().copied().collect();
    let keep1: HashSet<usize> = s1.iter().copied().collect();
    if keep0.iter().any(|&i| i >= plan.source.len()) || keep1.iter().any(|&j| j >= plan.target.len()) {
        return Err(Error::InvalidParameter("restriction index out of range".into()));
    }
    let kept: Vec<PlanEntry> = plan
        .entries
        .iter()
        .filter(|e| keep0.contains(&e.source) && keep1.contains(&e.target))
        .copied()
        .collect();

    let mut src_map: HashMap<usize, usize> = HashMap::new();
    let mut tgt_map: HashMap<usize, usize> = HashMap::new();
    let mut source_indices = Vec::new();
    let mut target_indices = Vec::new();
    let mut src_w = Vec::new();
    let mut tgt_w = Vec::new();
    let mut entries = Vec::with_capacity(kept.len());
    for e in &kept {
        let si = *src_map.entry(e.source).or_insert_with(|| {
            source_indices.push(e.source);
            src_w.push(0.0);
            source_indices.len() - 1
        });
        let ti = *tgt_map.entry(e.target).or_insert_with(|| {
            target_indices.push(e.target);
            tgt_w.push(0.0);
            target_indices.len() - 1
        });
        src_w[si] += e.mass;
        tgt_w[ti] += e.mass;
        entries.push(PlanEntry {
            source: si,
            target: ti,
            mass: e.mass,
        });
    }
    let source_marginal = DiscreteMeasure::from_parts(
        plan.source.dim(),
        source_indices.iter().map(|&i| plan.source.points()[i].clone()).collect(),
        src_w,
    );
    let target_marginal = DiscreteMeasure::from_parts(
        plan.target.dim(),
        target_indices.iter().map(|&j| plan.target.points()[j].clone()).collect(),
        tgt_w,
    );
    let fragment = TransportPlan::from_entries(source_marginal.clone(), target_marginal.clone(), plan.p, entries)?;
    Ok(RestrictedPlan {
        plan: fragment,
        source_marginal,
        target_marginal,
        source_indices,
        target_indices,
    })
}

/// Pushes the plan through `(x, y) ↦ (1 − t)x + ty`, merging coincident points.
pub fn geodesic_interpolate(plan: &TransportPlan, t: f64) -> Result<DiscreteMeasure> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidParameter(format!("t = {t} outside [0, 1]")));
    }
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for e in &plan.entries {
        let x = &plan.source.points()[e.source];
        let y = &plan.target.points()[e.target];
        let z = if t == 0.0 {
            x.clone()
        } else if t == 1.0 {
            y.clone()
        } else {
            x.lerp(y, t)
        };
        let key: Vec<u64> = z.coords().iter().map(|c| (c + 0.0).to_bits()).collect();
        match index.get(&key) {
            Some(&k) => weights[k] += e.mass,
            None => {
                index.insert(key, points.len());
                points.push(z);
                weights.push(e.mass);
            }
        }
    }
    Ok(DiscreteMeasure::from_parts(plan.source.dim(), points, weights))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(points: &[f64], weights: &[f64]) -> DiscreteMeasure {
        DiscreteMeasure::new(points.iter().map(|&x| Point(vec![x])).collect(), weights.to_vec()).unwrap()
    }

    #[test]
    fn identical_measures_cost_nothing() {
        let mu = line(&[0.0, 1.0, 3.0], &[0.2, 0.5, 0.3]);
        let plan = solve_ot(&mu, &mu, 2.0).unwrap();
        assert_eq!(plan.cost(), 0.0);
    }

    #[test]
    fn single_pair() {
        let plan = solve_ot(&line(&[-1.0], &[1.0]), &line(&[1.0], &[1.0]), 2.0).unwrap();
        assert_eq!(plan.cost(), 4.0);
        assert_eq!(plan.wasserstein(), 2.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let mu = line(&[0.0], &[1.0]);
        let raw = DiscreteMeasure::new_raw(vec![Point(vec![0.0])], vec![2.0]).unwrap();
        assert!(matches!(solve_ot(&mu, &raw, 2.0), Err(Error::MassMismatch { .. })));
        assert!(solve_ot(&mu, &mu, 0.5).is_err());
        let planar = DiscreteMeasure::dirac(Point(vec![0.0, 0.0]));
        assert!(solve_ot(&mu, &planar, 1.0).is_err());
        assert!(solve_ot_lower_bounded(&mu, &[Point(vec![0.0])], &[1.5], 2.0).is_err());
    }

    #[test]
    fn lower_bounded_without_bounds_is_nearest_site() {
        let mu = line(&[-1.0, 0.1, 2.0], &[0.3, 0.3, 0.4]);
        let sites = [Point(vec![-0.5]), Point(vec![1.0])];
        let (plan, target) = solve_ot_lower_bounded(&mu, &sites, &[0.0, 0.0], 2.0).unwrap();
        let nearest: f64 = mu
            .iter()
            .map(|(x, w)| w * sites.iter().map(|s| x.dist_sq(s)).fold(f64::INFINITY, f64::min))
            .sum();
        assert!((plan.cost() - nearest).abs() < 1e-12);
        assert!((target.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn restriction_pieces() {
        let mu = line(&[0.0, 1.0, 2.0], &[0.3, 0.3, 0.4]);
        let nu = line(&[0.5, 2.5], &[0.5, 0.5]);
        let plan = solve_ot(&mu, &nu, 2.0).unwrap();
        let full = restrict_plan(&plan, &[0, 1, 2], &[0, 1]).unwrap();
        assert!((full.plan.cost() - plan.cost()).abs() < 1e-15);
        let empty = restrict_plan(&plan, &[0, 1, 2], &[]).unwrap();
        assert!(empty.plan.entries().is_empty());
        assert_eq!(empty.source_marginal.total_mass(), 0.0);
        let left = restrict_plan(&plan, &[0, 1, 2], &[0]).unwrap();
        let right = restrict_plan(&plan, &[0, 1, 2], &[1]).unwrap();
        assert!((left.plan.cost() + right.plan.cost() - plan.cost()).abs() < 1e-15);
    }

    #[test]
    fn geodesic_endpoints_and_midpoint() {
        let mu = line(&[-1.0], &[1.0]);
        let nu = line(&[1.0], &[1.0]);
        let plan = solve_ot(&mu, &nu, 2.0).unwrap();
        assert_eq!(geodesic_interpolate(&plan, 0.0).unwrap().points()[0], Point(vec![-1.0]));
        assert_eq!(geodesic_interpolate(&plan, 1.0).unwrap().points()[0], Point(vec![1.0]));
        let mid = geodesic_interpolate(&plan, 0.5).unwrap();
        assert_eq!(mid.points(), &[Point(vec![0.0])]);
        assert_eq!(mid.weights(), &[1.0]);
    }

    #[test]
    fn plan_csv_has_header() {
        let plan = solve_ot(&line(&[0.0], &[1.0]), &line(&[2.0], &[1.0]), 1.0).unwrap();
        let mut buf = Vec::new();
        plan.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("source_index,target_index,mass,cost_contribution\n0,0,"));
    }
}
