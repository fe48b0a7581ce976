mod common;

use curvemeas::hull::convex_hull_margin;
use curvemeas::solver::{energy, lambda_star_bounds, solve, sweep_lambda, Mode, SolverConfig};
use curvemeas::transport::{restrict_plan, solve_ot};
use curvemeas::validation::{check_plan_decomposition, two_dirac_measure, two_dirac_solution};
use curvemeas::{DiscreteMeasure, Point};
use proptest::prelude::*;

fn small_measure() -> impl Strategy<Value = DiscreteMeasure> {
    prop::collection::vec(((-2.0f64..2.0), (-2.0f64..2.0), (0.1f64..1.0)), 3..8).prop_map(|v| {
        let pts = v.iter().map(|&(x, y, _)| Point(vec![x, y])).collect();
        let w = v.iter().map(|&(_, _, w)| w).collect();
        DiscreteMeasure::new(pts, w).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn closed_form_matches_quadrature(lambda in 0.02f64..1.0) {
        let sol = two_dirac_solution(lambda).unwrap();
        let e = energy(&two_dirac_measure(), &sol.nu, 2.0, lambda, 500).unwrap();
        prop_assert!((e.total - sol.energy).abs() <= 0.01 * sol.energy, "{} vs {}", e.total, sol.energy);
    }

    #[test]
    fn solver_output_invariants(rho in small_measure(), frac in 0.05f64..0.8, relaxed in any::<bool>()) {
        let lambda = frac * lambda_star_bounds(&rho, 2.0).unwrap().best();
        prop_assume!(lambda > 0.0);
        let cfg = SolverConfig {
            lambda,
            mode: if relaxed { Mode::Relaxed } else { Mode::Uniform },
            n_vertices: 4,
            quadrature_per_edge: 15,
            max_outer_iters: 25,
            ..SolverConfig::default()
        };
        let r = solve(&rho, &cfg).unwrap();
        prop_assert!((r.energy - (r.w_term + lambda * r.l_term)).abs() <= 1e-9 * r.energy.max(1.0));
        for w in r.energy_trace.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9, "trace {:?}", r.energy_trace);
        }
        prop_assert!(r.energy <= r.dirac_energy + 1e-12);
        let margin = convex_hull_margin(&rho, r.nu.graph().vertices()).unwrap();
        prop_assert!(margin.iter().all(|&m| m <= 1e-6));
        prop_assert!((r.nu.total_mass() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn ot_matches_lp(seed in any::<u64>(), p in prop::sample::select(vec![1.0, 1.5, 2.0, 3.0])) {
        let mut rng = common::rng(seed);
        let mu = common::random_measure(&mut rng, 4, 2);
        let nu = common::random_measure(&mut rng, 5, 2);
        let got = solve_ot(&mu, &nu, p).unwrap().cost();
        let want = common::ot_oracle(&mu, &nu, p);
        prop_assert!((got - want).abs() <= 1e-9, "{got} vs {want}");
    }
}

#[test]
fn decomposition_pieces_match_lp() {
    let mut rng = common::rng(11);
    let mu = common::random_measure(&mut rng, 5, 2);
    let nu = common::random_measure(&mut rng, 5, 2);
    let plan = solve_ot(&mu, &nu, 2.0).unwrap();
    let parts = [vec![0, 3], vec![1, 2, 4]];
    let rep = check_plan_decomposition(&plan, &parts).unwrap();
    assert!(rep.pass(), "{rep:?}");
    assert_eq!(rep.sum_of_pieces, rep.pieces.iter().map(|p| p.cost).sum::<f64>());
    let all: Vec<usize> = (0..5).collect();
    for (part, piece) in parts.iter().zip(&rep.pieces) {
        let r = restrict_plan(&plan, &all, part).unwrap();
        let lp = common::ot_oracle(&r.source_marginal, &r.target_marginal, 2.0);
        assert!((piece.resolved_cost - lp).abs() < 1e-9);
    }
}

#[test]
fn sweep_length_monotone_and_dirac_never_flips() {
    let lambdas = [0.8, 0.6, 0.45, 0.3, 0.15, 0.05];
    let sw = sweep_lambda(&two_dirac_measure(), &lambdas, &SolverConfig::default()).unwrap();
    let [lo, hi] = sw.flip_bracket.unwrap();
    assert_eq!((lo, hi), (0.45, 0.6));
    for w in sw.results.windows(2) {
        // Λ decreases along the sweep, so ℒ should not shrink
        assert!(w[1].l_term >= 0.95 * w[0].l_term, "{} then {}", w[0].l_term, w[1].l_term);
    }

    let dirac = DiscreteMeasure::dirac(Point(vec![1.0, 2.0]));
    let sw = sweep_lambda(&dirac, &[0.5, 0.1, 0.01], &SolverConfig::default()).unwrap();
    assert!(sw.results.iter().all(|r| r.collapsed));
    assert!(sw.lambda_star_empirical.is_none());
}

#[test]
fn uniform_mode_two_dirac_closed_form_across_regime() {
    for lambda in [0.2, 0.25, 0.4] {
        let want = two_dirac_solution(lambda).unwrap();
        let cfg = SolverConfig {
            lambda,
            mode: Mode::Uniform,
            quadrature_per_edge: 100,
            ..SolverConfig::default()
        };
        let r = solve(&two_dirac_measure(), &cfg).unwrap();
        assert!((r.energy - want.energy).abs() < 0.02 * want.energy, "Λ={lambda}: {} vs {}", r.energy, want.energy);
        let b = want.b_star.unwrap();
        assert!((r.support_length - 2.0 * b).abs() < 0.05 * 2.0 * b, "Λ={lambda}: length {}", r.support_length);
    }
}
