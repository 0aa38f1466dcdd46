mod common;

use common::{rel, simpson_log};
use dirichlet_lab::hardy::{
    conj_hardy_function, condition, condition_c, condition_cstar, divergence_witness, estimate_best_constant,
    hardy_function, hardy_transform, Operator, DEFAULT_SEED,
};
use dirichlet_lab::space::{norm_at, Anchor, Derivative};
use dirichlet_lab::weights::{make_power, parse_weight, WeightProfile};
use dirichlet_lab::{Side, Ternary};
use proptest::prelude::*;

/// `int_lo^hi t^alpha`.
fn power_mass(alpha: f64, lo: f64, hi: f64) -> f64 {
    (hi.powf(alpha + 1.0) - lo.powf(alpha + 1.0)) / (alpha + 1.0)
}

fn piecewise() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..6)
        .prop_flat_map(|cells| {
            (
                prop::collection::btree_set(-200i32..200, cells + 1),
                prop::collection::vec(-2.0f64..2.0, cells),
            )
        })
        .prop_map(|(raw, values)| (raw.into_iter().map(|e| 10f64.powf(e as f64 / 100.0)).collect(), values))
}

fn lp_norm(breaks: &[f64], values: &[f64], alpha: f64, p: f64) -> f64 {
    breaks
        .windows(2)
        .zip(values)
        .map(|(b, v)| v.abs().powf(p) * power_mass(alpha, b[0], b[1]))
        .sum::<f64>()
        .powf(1.0 / p)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn hardy_transform_is_an_isometry_onto_the_trace_zero_kernel((breaks, values) in piecewise()) {
        for (alpha, p) in [(0.5, 2.0), (1.0, 3.0), (0.0, 1.5)] {
            let v = Derivative::piecewise_constant(breaks.clone(), values.clone());
            let u = hardy_function(&v).unwrap();
            let n = norm_at(&u, &make_power(alpha), p, Anchor::Zero).unwrap();
            prop_assert!(rel(n, lp_norm(&breaks, &values, alpha, p)) < 1e-6, "alpha {alpha}, p {p}");
        }
    }

    #[test]
    fn conjugate_transform_is_an_isometry_onto_the_kernel_at_infinity((breaks, values) in piecewise()) {
        for (alpha, p) in [(2.0, 2.0), (3.0, 3.0), (1.0, 1.5)] {
            let v = Derivative::piecewise_constant(breaks.clone(), values.clone());
            let u = conj_hardy_function(&v).unwrap();
            let n = norm_at(&u, &make_power(alpha), p, Anchor::Infinity).unwrap();
            prop_assert!(rel(n, lp_norm(&breaks, &values, alpha, p)) < 1e-6, "alpha {alpha}, p {p}");
        }
    }

    #[test]
    fn transform_and_derivative_are_inverse((breaks, values) in piecewise(), frac in 0.0f64..1.0) {
        let v = Derivative::piecewise_constant(breaks.clone(), values.clone());
        let u = hardy_function(&v).unwrap();
        for (i, b) in breaks.windows(2).enumerate() {
            let mid = b[0] + frac.max(1e-3).min(1.0 - 1e-3) * (b[1] - b[0]);
            prop_assert_eq!(u.derivative.eval(mid), values[i]);
            let exact: f64 = breaks
                .windows(2)
                .zip(&values)
                .map(|(c, x)| x * (mid.min(c[1]) - c[0]).max(0.0))
                .sum();
            let hv = hardy_transform(&v, mid).unwrap();
            prop_assert!((hv - exact).abs() <= 1e-9 * (1.0 + exact.abs()));
            prop_assert!((u.value_at(mid).unwrap() - exact).abs() <= 1e-9 * (1.0 + exact.abs()));
        }
    }
}

#[test]
fn e1_matches_closed_forms() {
    for p in [1.5, 2.0, 3.0] {
        let r = condition_c(&make_power(0.0), &make_power(-p), p, p).unwrap();
        assert_eq!(r.bounded, Ternary::Yes);
        assert!((r.quantity("E1").unwrap() - (p - 1.0).powf(-1.0 / p)).abs() < 1e-6, "p = {p}");
    }
    // H = (1+t)^-2 / 2 and S = t, so E1 = sup sqrt(t) / (sqrt 2 (1+t)) at t = 1.
    let h = parse_weight("(1+t)^(0-3)").unwrap();
    let r = condition_c(&make_power(0.0), &h, 2.0, 2.0).unwrap();
    assert_eq!(r.bounded, Ternary::Yes);
    assert!(rel(r.quantity("E1").unwrap(), 0.5f64.sqrt() / 2.0) < 1e-6);
}

fn dilated(lambda: f64, f: fn(f64) -> f64) -> WeightProfile {
    WeightProfile::from_fn(format!("dilated by {lambda}"), move |t| f(lambda * t))
}

#[test]
fn e1_rescales_under_dilation() {
    let w: fn(f64) -> f64 = |t| t.sqrt() * (1.0 + t).sqrt();
    let h: fn(f64) -> f64 = |t| (1.0 + t).powi(-3);
    let one: fn(f64) -> f64 = |_| 1.0;
    for (w, h) in [(one, h), (w, h)] {
        let base = condition_c(&dilated(1.0, w), &dilated(1.0, h), 2.0, 2.0).unwrap();
        assert_eq!(base.bounded, Ternary::Yes);
        let e1 = base.quantity("E1").unwrap();
        for lambda in [2.0, 10.0] {
            let r = condition_c(&dilated(lambda, w), &dilated(lambda, h), 2.0, 2.0).unwrap();
            assert!(rel(r.quantity("E1").unwrap(), e1 / lambda) < 1e-6, "lambda {lambda}");
        }
    }
}

#[test]
fn nested_quantities_match_quadrature_oracles() {
    // w = 1, h = (1+t)^-4, p = 3, q = 2: S = t, H = (1+t)^-3 / 3.
    let h = parse_weight("(1+t)^(0-4)").unwrap();
    let r = condition_c(&make_power(0.0), &h, 3.0, 2.0).unwrap();
    assert_eq!(r.bounded, Ternary::Yes);
    let e2 = 1.0 / 7560.0;
    assert!(rel(r.quantity("E2").unwrap(), e2) < 1e-4, "{}", r.quantity("E2").unwrap());
    let e3 = simpson_log(
        |t| ((1.0 + t).powi(-3) / 3.0).powi(2) * (1.0 + t).powi(-4) * t.powf(4.0 / 3.0),
        1e-12,
        1e12,
        40_000,
    );
    assert!(rel(r.quantity("E3").unwrap(), e3) < 1e-4, "{} vs {e3}", r.quantity("E3").unwrap());

    // w = t^3, p = 3: sigma = t^-3/2 and R = 2 t^-1/2; G = (1 - (1+t)^-3) / 3.
    let r = condition_cstar(&make_power(3.0), &h, 3.0, 2.0).unwrap();
    assert_eq!(r.bounded, Ternary::Yes);
    let g = |t: f64| if t < 1e-4 { t - 2.0 * t * t } else { (1.0 - (1.0 + t).powi(-3)) / 3.0 };
    let a = simpson_log(|t| 8.0 * g(t).powi(3) * t.powi(-3), 1e-12, 1e12, 40_000) + 8.0 * 1e-12;
    assert!(rel(r.quantity("A").unwrap(), a) < 1e-4, "{} vs {a}", r.quantity("A").unwrap());
}

#[test]
fn certified_pairs_have_finite_ratios_and_refuted_pairs_have_witnesses() {
    let bounded = [
        (make_power(0.0), make_power(-2.0), Operator::Hardy),
        (make_power(0.0), parse_weight("(1+t)^(0-3)").unwrap(), Operator::Hardy),
        (make_power(2.0), parse_weight("t/(1+t)^4").unwrap(), Operator::Conjugate),
    ];
    for (w, h, op) in bounded {
        assert_eq!(condition(&w, &h, 2.0, 2.0, op).unwrap().bounded, Ternary::Yes);
        let est = estimate_best_constant(&w, &h, 2.0, 2.0, op, 20, DEFAULT_SEED).unwrap();
        assert!(est.all_finite && est.estimate.is_finite(), "{} / {}", w.label(), h.label());
    }
    let refuted = [
        (make_power(0.0), make_power(0.0), Operator::Hardy, Side::Infinity),
        (make_power(2.0), make_power(-4.0), Operator::Hardy, Side::Zero),
        (make_power(0.0), make_power(-1.5), Operator::Hardy, Side::Infinity),
        (make_power(2.0), make_power(-1.0), Operator::Conjugate, Side::Zero),
        (make_power(0.0), parse_weight("(1+t)^(0-3)").unwrap(), Operator::Conjugate, Side::Infinity),
    ];
    for (w, h, op, side) in refuted {
        let report = condition(&w, &h, 2.0, 2.0, op).unwrap();
        assert_eq!(report.bounded, Ternary::No);
        assert_eq!(report.offending_endpoint, Some(side));
        let witness = divergence_witness(&w, &h, 2.0, 2.0, &report).unwrap();
        assert_eq!(witness.endpoint, side);
        assert!(witness.diverging, "{} / {}: {:?}", w.label(), h.label(), witness.ratios);
    }
}

#[test]
fn best_constant_estimate_is_deterministic_and_monotone_in_the_family() {
    let (w, h) = (make_power(0.0), make_power(-2.0));
    let small = estimate_best_constant(&w, &h, 2.0, 2.0, Operator::Hardy, 5, DEFAULT_SEED).unwrap();
    let large = estimate_best_constant(&w, &h, 2.0, 2.0, Operator::Hardy, 40, DEFAULT_SEED).unwrap();
    let again = estimate_best_constant(&w, &h, 2.0, 2.0, Operator::Hardy, 40, DEFAULT_SEED).unwrap();
    assert!(large.estimate >= small.estimate);
    assert_eq!(large.estimate, again.estimate);
    assert_eq!(large.best_index, again.best_index);
    assert!(large.estimate >= 1.8 && large.estimate <= 2.0 + 1e-9, "{}", large.estimate);
}
