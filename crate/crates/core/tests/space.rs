mod common;

use common::rel;
use dirichlet_lab::space::{
    equivalence_constant, morrey_modulus, norm_at, omega0, omega_inf, seminorm, trace_with_probes,
    weighted_distance, Anchor, Derivative, DirichletFunction,
};
use dirichlet_lab::weights::{make_power, make_two_exponent, WeightProfile};
use dirichlet_lab::Side;
use proptest::prelude::*;

/// `u(t) = a + b t^s / (1 + t^s)`, so `u(0) = a` and `u(inf) = a + b`.
fn sigmoid(a: f64, b: f64, s: f64) -> DirichletFunction {
    let v = Derivative::from_fn(move |t| {
        let ts = t.powf(s);
        b * s * ts / (t * (1.0 + ts).powi(2))
    });
    DirichletFunction::new(1.0, a + 0.5 * b, v, "sigmoid").unwrap()
}

fn weights() -> [WeightProfile; 3] {
    [make_power(0.0), make_power(0.5), make_two_exponent(0.5, 1.5)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn trace_bound_dominates_the_residual_at_zero(
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        s in 1.0f64..2.5,
        p in 1.5f64..3.0,
        frac in 0.0f64..0.8,
    ) {
        let alpha = frac * (p - 1.0);
        let u = sigmoid(a, b, s);
        let w = make_power(alpha);
        let (tr, probes) = trace_with_probes(&u, &w, p, Side::Zero, 1e-8).unwrap();
        for pr in &probes {
            let exact = a + b * pr.probe.powf(s) / (1.0 + pr.probe.powf(s));
            prop_assert!((exact - a).abs() <= pr.bound * (1.0 + 1e-9) + 1e-13);
            prop_assert!((pr.value - exact).abs() <= 1e-9 * (1.0 + exact.abs()));
        }
        prop_assert!((tr.value - a).abs() <= 2.0 * tr.certified_error + 1e-12);
    }

    #[test]
    fn trace_bound_dominates_the_residual_at_infinity(
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        s in 1.0f64..2.5,
        gap in 0.3f64..2.0,
    ) {
        let p = 2.0;
        let u = sigmoid(a, b, s);
        let w = make_power(p - 1.0 + gap);
        let (tr, probes) = trace_with_probes(&u, &w, p, Side::Infinity, 1e-8).unwrap();
        for pr in &probes {
            let exact = a + b * pr.probe.powf(s) / (1.0 + pr.probe.powf(s));
            prop_assert!((exact - a - b).abs() <= pr.bound * (1.0 + 1e-9) + 1e-13);
        }
        prop_assert!((tr.value - a - b).abs() <= 2.0 * tr.certified_error + 1e-12);
    }

    #[test]
    fn anchored_norms_are_equivalent(
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        s in 1.0f64..2.5,
        i in 0usize..3,
        j in 0usize..3,
        k in 0usize..3,
    ) {
        let anchors = [0.5, 1.0, 2.0];
        let (x, y) = (anchors[i], anchors[j]);
        let w = &weights()[k];
        let u = sigmoid(a, b, s);
        let p = 2.0;
        let c = equivalence_constant(w, p, x, y).unwrap().factor;
        let nx = norm_at(&u, w, p, Anchor::At(x)).unwrap();
        let ny = norm_at(&u, w, p, Anchor::At(y)).unwrap();
        prop_assert!(nx <= c * ny * (1.0 + 1e-9));
        prop_assert!(ny <= c * nx * (1.0 + 1e-9));
    }

    #[test]
    fn morrey_modulus_is_below_the_seminorm(
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        s in 1.0f64..2.5,
        k in 0usize..3,
        raw in prop::collection::btree_set(-300i32..300, 2..8),
    ) {
        let w = &weights()[k];
        let p = 2.0;
        let u = sigmoid(a, b, s);
        let grid: Vec<f64> = raw.iter().map(|&e| 10f64.powf(e as f64 / 100.0)).collect();
        let m = morrey_modulus(&u, w, p, &grid).unwrap();
        prop_assert!(m.value <= seminorm(&u, w, p).unwrap() + 1e-6);
    }

    #[test]
    fn weighted_distance_is_a_metric(
        x in 0.01f64..100.0,
        y in 0.01f64..100.0,
        z in 0.01f64..100.0,
        k in 0usize..3,
        p in 1.5f64..3.0,
    ) {
        let w = &weights()[k];
        let d = |a, b| weighted_distance(w, p, a, b).unwrap();
        prop_assert_eq!(d(x, y), d(y, x));
        prop_assert_eq!(d(x, x), 0.0);
        if x != y {
            prop_assert!(d(x, y) > 0.0);
        }
        let mut pts = [x, y, z];
        pts.sort_by(f64::total_cmp);
        let [l, m, r] = pts;
        prop_assert!((d(l, r) - d(l, m) - d(m, r)).abs() <= 1e-9 * d(l, r).max(1e-12));
        prop_assert!(d(x, z) <= d(x, y) + d(y, z) + 1e-9 * d(x, z));
    }
}

#[test]
fn omega_is_monotone_and_vanishes_at_its_endpoint() {
    let p = 2.0;
    for w in [make_power(0.0), make_power(0.5), make_two_exponent(0.5, 1.5)] {
        let first = omega0(&w, p, 1.0).unwrap();
        let mut last = f64::INFINITY;
        for k in 0..40 {
            let t = 2f64.powi(-k);
            let om = omega0(&w, p, t).unwrap();
            assert!(om <= last, "{}: omega0 increases at {t}", w.label());
            last = om;
        }
        assert!(last < 1e-2 * first, "{}: omega0 -> {last}", w.label());
    }
    for w in [make_power(2.0), make_power(3.0), make_two_exponent(0.5, 1.5)] {
        let first = omega_inf(&w, p, 1.0).unwrap();
        let mut last = f64::INFINITY;
        for k in 0..40 {
            let t = 2f64.powi(k);
            let om = omega_inf(&w, p, t).unwrap();
            assert!(om <= last, "{}: omega_inf increases at {t}", w.label());
            last = om;
        }
        assert!(last < 1e-2 * first, "{}: omega_inf -> {last}", w.label());
    }
}

#[test]
fn trace_bound_is_tight_for_a_linear_function() {
    let u = DirichletFunction::new(1.0, 4.0, Derivative::constant(1.0), "3+t").unwrap();
    let (_, probes) = trace_with_probes(&u, &make_power(0.0), 2.0, Side::Zero, 1e-8).unwrap();
    for pr in probes {
        assert!(rel(pr.bound, pr.probe) < 1e-6, "probe {}: {}", pr.probe, pr.bound);
    }
}

#[test]
fn zero_anchor_norm_uses_the_trace() {
    let u = sigmoid(2.0, 1.0, 1.5);
    let w = make_power(0.5);
    let n = norm_at(&u, &w, 2.0, Anchor::Zero).unwrap();
    assert!(rel(n, seminorm(&u, &w, 2.0).unwrap() + 2.0) < 1e-7);
}
