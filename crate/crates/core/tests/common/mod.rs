//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use dirichlet_lab::weights::{make_power, make_two_exponent, WeightProfile};

pub fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs().max(a.abs())
    }
}

/// Composite Simpson rule in `x = ln t` over `[lo, hi]` with `n` (even) panels.
pub fn simpson_log(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    assert!(n % 2 == 0 && lo > 0.0 && hi > lo);
    let (a, b) = (lo.ln(), hi.ln());
    let h = (b - a) / n as f64;
    let g = |x: f64| {
        let t = x.exp();
        f(t) * t
    };
    let mut s = g(a) + g(b);
    for i in 1..n {
        let x = a + h * i as f64;
        s += if i % 2 == 1 { 4.0 * g(x) } else { 2.0 * g(x) };
    }
    s * h / 3.0
}

/// Composite Simpson rule on `[a, b]`.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    assert!(n % 2 == 0);
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let x = a + h * i as f64;
        s += if i % 2 == 1 { 4.0 * f(x) } else { 2.0 * f(x) };
    }
    s * h / 3.0
}

/// The four weights realizing the four regimes at p = 2, in the order
/// ZeroOnly, InfinityOnly, Neither, Both.
pub fn canonical_weights() -> [(&'static str, WeightProfile); 4] {
    [
        ("t^0.5", make_power(0.5)),
        ("t^2", make_power(2.0)),
        ("t", make_power(1.0)),
        ("two-exponent(0.5,1.5)", make_two_exponent(0.5, 1.5)),
    ]
}
