//! Browser bindings for the curvemeas demo page.
//!
//! Each exported function takes plain numbers or JSON text and returns a
//! JSON string. The `*_json` functions hold the logic so they can be tested
//! natively; the `#[wasm_bindgen]` wrappers only convert the error type.

use curvemeas::length::approximate_uniform;
use curvemeas::svg::render_svg;
use curvemeas::validation::{two_dirac_solution, Regime};
use curvemeas::{solve, CurveMeasure, DiscreteMeasure, EmbeddedGraph, Mode, Point, SolveResult, SolverConfig};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Enough quadrature for the demo to stay interactive.
const QUADRATURE: usize = 60;
const MAX_CLICKS: usize = 200;

#[derive(Serialize)]
struct Fit {
    energy: f64,
    w_term: f64,
    l_term: f64,
    alpha: f64,
    support_length: f64,
    collapsed: bool,
    iterations: usize,
    svg: String,
}

impl Fit {
    fn from_result(rho: &DiscreteMeasure, r: &SolveResult) -> Result<Self, String> {
        Ok(Fit {
            energy: r.energy,
            w_term: r.w_term,
            l_term: r.l_term,
            alpha: r.alpha,
            support_length: r.support_length,
            collapsed: r.collapsed,
            iterations: r.iterations,
            svg: render_svg(Some(rho), &r.nu).map_err(|e| e.to_string())?,
        })
    }
}

#[derive(Serialize)]
struct Closed {
    regime: Regime,
    alpha_star: Option<f64>,
    b_star: Option<f64>,
    energy: f64,
}

#[derive(Serialize)]
struct TwoDirac {
    lambda: f64,
    closed_form: Closed,
    solver: Fit,
}

fn err(e: impl ToString) -> String {
    e.to_string()
}

fn config(lambda: f64, mode: &str) -> Result<SolverConfig, String> {
    let cfg = SolverConfig {
        lambda,
        mode: mode.parse::<Mode>().map_err(err)?,
        quadrature_per_edge: QUADRATURE,
        max_outer_iters: 40,
        ..SolverConfig::default()
    };
    cfg.validate().map_err(err)?;
    Ok(cfg)
}

/// Closed-form minimizer for ½(δ₋₁ + δ₁) next to a numerical solve.
///
/// The measure is placed on the x-axis of the plane so it can be drawn.
pub fn two_dirac_json(lambda: f64) -> Result<String, String> {
    let exact = two_dirac_solution(lambda).map_err(err)?;
    let rho = DiscreteMeasure::new(vec![Point(vec![-1.0, 0.0]), Point(vec![1.0, 0.0])], vec![0.5, 0.5]).map_err(err)?;
    let r = solve(&rho, &config(lambda, "relaxed")?).map_err(err)?;
    let out = TwoDirac {
        lambda,
        closed_form: Closed {
            regime: exact.regime,
            alpha_star: exact.alpha_star,
            b_star: exact.b_star,
            energy: exact.energy,
        },
        solver: Fit::from_result(&rho, &r)?,
    };
    serde_json::to_string(&out).map_err(err)
}

/// Fits a measure on a curve to equally weighted points.
///
/// `points` is a JSON array of `[x, y]` pairs.
pub fn fit_points_json(points: &str, lambda: f64, mode: &str) -> Result<String, String> {
    let pts: Vec<[f64; 2]> = serde_json::from_str(points).map_err(|e| format!("points: {e}"))?;
    if pts.is_empty() {
        return Err("click at least one point".into());
    }
    if pts.len() > MAX_CLICKS {
        return Err(format!("at most {MAX_CLICKS} points"));
    }
    let rho = DiscreteMeasure::uniform(pts.iter().map(|&[x, y]| Point(vec![x, y])).collect()).map_err(err)?;
    let r = solve(&rho, &config(lambda, mode)?).map_err(err)?;
    serde_json::to_string(&Fit::from_result(&rho, &r)?).map_err(err)
}

#[derive(Serialize)]
struct Approx {
    n: usize,
    length_functional: f64,
    original_length: f64,
    added_length: f64,
    wasserstein: f64,
    svg_before: String,
    svg_after: String,
}

/// Uniform approximation of a two-piece segment with densities 2/3 and 4/3.
pub fn approximate_json(n: usize) -> Result<String, String> {
    if !(1..=64).contains(&n) {
        return Err("n must be between 1 and 64".into());
    }
    let g = EmbeddedGraph::new(
        vec![Point(vec![0.0, 0.0]), Point(vec![0.5, 0.0]), Point(vec![1.0, 0.0])],
        vec![[0, 1], [1, 2]],
    )
    .map_err(err)?;
    let nu = CurveMeasure::new(g, vec![2.0 / 3.0, 4.0 / 3.0], vec![0.0; 3]).map_err(err)?;
    let (sigma, rep) = approximate_uniform(&nu, n, 2.0).map_err(err)?;
    let out = Approx {
        n,
        length_functional: rep.length_functional,
        original_length: rep.original_length,
        added_length: rep.added_length,
        wasserstein: rep.wasserstein,
        svg_before: render_svg(None, &nu).map_err(err)?,
        svg_after: render_svg(None, &CurveMeasure::uniform(sigma)).map_err(err)?,
    };
    serde_json::to_string(&out).map_err(err)
}

#[wasm_bindgen]
pub fn two_dirac(lambda: f64) -> Result<String, JsError> {
    two_dirac_json(lambda).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn fit_points(points: &str, lambda: f64, mode: &str) -> Result<String, JsError> {
    fit_points_json(points, lambda, mode).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn approximate(n: usize) -> Result<String, JsError> {
    approximate_json(n).map_err(|e| JsError::new(&e))
}
