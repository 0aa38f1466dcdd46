mod common;

use std::f64::consts::PI;

use common::{rel, simpson};
use dirichlet_lab::classify::sigma_fn;
use dirichlet_lab::varmin::{
    closed_form_minimizer, discrete_minimizer, energy, minimal_energy, ConstraintSide, MinimizerProblem,
};
use dirichlet_lab::weights::{make_power, make_two_exponent, WeightProfile};
use proptest::prelude::*;

fn weights() -> [WeightProfile; 4] {
    [make_power(0.0), make_power(0.5), make_power(1.0), make_two_exponent(0.5, 1.5)]
}

fn side(left: bool) -> ConstraintSide {
    if left {
        ConstraintSide::LeftConstraint
    } else {
        ConstraintSide::RightConstraint
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn discrete_oracle_agrees_with_the_closed_form(
        k in 0.2f64..2.0,
        ratio in 1.5f64..5.0,
        a in prop_oneof![-3.0f64..-0.1, 0.1f64..3.0],
        left in any::<bool>(),
    ) {
        let big_k = k * ratio;
        for w in weights() {
            for p in [1.5, 2.0, 3.0] {
                let prob = MinimizerProblem::new(k, big_k, a, side(left), p, w.clone()).unwrap();
                let exact = minimal_energy(&prob).unwrap();
                let s = sigma_fn(&w, p);
                let oracle = a.abs().powf(p) * simpson(&s, k, big_k, 4000).powf(1.0 - p);
                prop_assert!(rel(exact, oracle) < 1e-9, "{} p = {p}: {exact} vs {oracle}", w.label());
                let d = discrete_minimizer(&prob, 256).unwrap();
                prop_assert!(d.energy <= exact * 1.01, "{} p = {p}: {} vs {exact}", w.label(), d.energy);
                prop_assert!(d.energy >= exact * (1.0 - 1e-9), "{} p = {p}: {} vs {exact}", w.label(), d.energy);
            }
        }
    }

    #[test]
    fn minimizer_scales_with_its_boundary_value(
        k in 0.2f64..2.0,
        ratio in 1.5f64..5.0,
        a in prop_oneof![-3.0f64..-0.1, 0.1f64..3.0],
        left in any::<bool>(),
        p in 1.3f64..4.0,
        frac in 0.0f64..=1.0,
    ) {
        let big_k = k * ratio;
        for w in weights() {
            let unit = closed_form_minimizer(&MinimizerProblem::new(k, big_k, 1.0, side(left), p, w.clone()).unwrap()).unwrap();
            let scaled = closed_form_minimizer(&MinimizerProblem::new(k, big_k, a, side(left), p, w.clone()).unwrap()).unwrap();
            let t = k + frac * (big_k - k);
            let (x, y) = (scaled.evaluate(t).unwrap(), a * unit.evaluate(t).unwrap());
            prop_assert!((x - y).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }
}

#[test]
fn closed_form_energy_equals_the_minimum_and_beats_perturbations() {
    let (k, big_k) = (0.5, 3.0);
    for w in weights() {
        for p in [1.5, 2.0, 3.0] {
            for left in [true, false] {
                let prob = MinimizerProblem::new(k, big_k, 1.3, side(left), p, w.clone()).unwrap();
                let sol = closed_form_minimizer(&prob).unwrap();
                let e = energy(|t| sol.derivative_at(t), &w, p, k, big_k).unwrap();
                assert!(rel(e, sol.minimal_energy) < 1e-6, "{} p = {p}", w.label());
                assert_eq!(sol.evaluate(k).unwrap(), if left { 1.3 } else { 0.0 });
                assert_eq!(sol.evaluate(big_k).unwrap(), if left { 0.0 } else { 1.3 });
                for j in 0..20 {
                    let m = (1 + j % 4) as f64;
                    let c = (if j % 2 == 0 { 1.0 } else { -1.0 }) * 0.05 * (1 + j / 2) as f64;
                    let bump = |t: f64| c * m * PI / (big_k - k) * (m * PI * (t - k) / (big_k - k)).cos();
                    let perturbed = energy(|t| sol.derivative_at(t) + bump(t), &w, p, k, big_k).unwrap();
                    assert!(perturbed > e, "{} p = {p}, bump {j}: {perturbed} <= {e}", w.label());
                }
            }
        }
    }
}

#[test]
fn euler_lagrange_flux_is_constant() {
    let (k, big_k) = (0.3, 7.0);
    for w in weights() {
        for p in [1.5, 2.0, 3.0] {
            let prob = MinimizerProblem::new(k, big_k, -0.7, ConstraintSide::LeftConstraint, p, w.clone()).unwrap();
            let sol = closed_form_minimizer(&prob).unwrap();
            let reference = sol.euler_lagrange_flux(1.0);
            for i in 0..=50 {
                let t = k + (big_k - k) * i as f64 / 50.0;
                assert!(rel(sol.euler_lagrange_flux(t), reference) < 1e-5, "{} p = {p}, t = {t}", w.label());
            }
        }
    }
}

#[test]
fn discrete_energy_converges_at_second_order() {
    let w = make_power(1.0);
    let prob = MinimizerProblem::new(1.0, std::f64::consts::E, 1.0, ConstraintSide::LeftConstraint, 2.0, w).unwrap();
    let gaps: Vec<f64> = [32, 64, 128]
        .iter()
        .map(|&n| discrete_minimizer(&prob, n).unwrap().energy - 1.0)
        .collect();
    for g in gaps.windows(2) {
        assert!(g[1] > 0.0 && g[1] < g[0]);
        let order = (g[0] / g[1]).log2();
        assert!((order - 2.0).abs() < 0.2, "observed order {order}");
    }
}

#[test]
fn minimal_energy_is_homogeneous_of_degree_p() {
    for w in weights() {
        let e1 = minimal_energy(&MinimizerProblem::new(1.0, 4.0, 1.0, ConstraintSide::RightConstraint, 2.0, w.clone()).unwrap()).unwrap();
        let e2 = minimal_energy(&MinimizerProblem::new(1.0, 4.0, 2.0, ConstraintSide::RightConstraint, 2.0, w.clone()).unwrap()).unwrap();
        assert!(rel(e2 / e1, 4.0) < 1e-14);
    }
}
