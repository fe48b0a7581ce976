//! Upper bounds on the critical parameter Λ★.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{p_moment_cost, DiscreteMeasure, Point};

/// Every field is an upper bound on Λ★ when present.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaStarBounds {
    /// 1, for p = 1.
    pub p1_bound: Option<f64>,
    /// `2∫|x − x̄| dρ₀`, for p = 2.
    pub p2_bound: Option<f64>,
    /// `p·diam(supp ρ₀)^{p−1}`.
    pub diam_bound: f64,
    /// `max_{y ∈ B(x̄, R)} p∫|x − y|^{p−1} dρ₀` with `R = 2W_p(δ_x̄, ρ₀)`,
    /// maximized over a grid (so a slight underestimate of the true maximum).
    pub general_bound: f64,
    pub grid_points: usize,
}

impl LambdaStarBounds {
    /// Smallest of the available bounds.
    pub fn best(&self) -> f64 {
        [self.p1_bound, self.p2_bound, Some(self.diam_bound), Some(self.general_bound)]
            .into_iter()
            .flatten()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Total grid size budget for the general bound.
const GRID_BUDGET: usize = 4096;

pub fn lambda_star_bounds(rho: &DiscreteMeasure, p: f64) -> Result<LambdaStarBounds> {
    if rho.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!("exponent p = {p} must be >= 1")));
    }
    let mean = rho.mean();
    let p1_bound = (p == 1.0).then_some(1.0);
    let p2_bound = if p == 2.0 {
        Some(2.0 * rho.iter().map(|(x, w)| w * x.dist(&mean)).sum::<f64>())
    } else {
        None
    };
    let diam = rho.diameter();
    let diam_bound = if p == 1.0 { 1.0 } else { p * diam.powf(p - 1.0) };

    let radius = 2.0 * p_moment_cost(rho, &mean, p)?.powf(1.0 / p);
    let d = rho.dim();
    let mut per_axis = (GRID_BUDGET as f64).powf(1.0 / d as f64).floor() as usize;
    per_axis = per_axis.max(3);
    if per_axis % 2 == 0 {
        per_axis -= 1;
    }
    let integrand = |y: &Point| -> f64 {
        p * rho
            .iter()
            .map(|(x, w)| {
                let r = x.dist(y);
                if p == 1.0 {
                    w
                } else {
                    w * r.powf(p - 1.0)
                }
            })
            .sum::<f64>()
    };
    let mut general_bound = integrand(&mean);
    let mut grid_points = 1;
    if radius > 0.0 {
        let total = per_axis.pow(d as u32);
        for flat in 0..total {
            let mut rem = flat;
            let mut u = Vec::with_capacity(d);
            for _ in 0..d {
                let i = rem % per_axis;
                rem /= per_axis;
                u.push(-1.0 + 2.0 * i as f64 / (per_axis - 1) as f64);
            }
            let norm2: f64 = u.iter().map(|v| v * v).sum();
            if norm2 > 1.0 {
                // push onto the sphere rather than skipping: the maximum of a
                // convex integrand sits on the boundary
                let s = norm2.sqrt();
                u.iter_mut().for_each(|v| *v /= s);
            }
            let y = Point(mean.coords().iter().zip(&u).map(|(m, v)| m + radius * v).collect());
            general_bound = general_bound.max(integrand(&y));
            grid_points += 1;
        }
    }
    Ok(LambdaStarBounds {
        p1_bound,
        p2_bound,
        diam_bound,
        general_bound,
        grid_points,
    })
}
