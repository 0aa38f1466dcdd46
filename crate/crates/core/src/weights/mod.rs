//! Weights `w` on `(0, inf)`, their dual densities and interpolated weights.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::{Error, Result};

pub mod dsl;

pub use dsl::{parse_expr, Expr};

/// Power-law exponents of a weight near `0` and near `inf`: `w(t) ~ t^zero`
/// as `t -> 0` and `w(t) ~ t^infinity` as `t -> inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EndpointHints {
    pub zero: f64,
    pub infinity: f64,
}

/// Exponent `p` (and optionally `q`, used by Hardy-type checks).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentPair {
    pub p: f64,
    pub q: Option<f64>,
}

impl ExponentPair {
    pub fn new(p: f64, q: Option<f64>) -> Result<Self> {
        check_exponent(p)?;
        if let Some(q) = q {
            if !(q > 1.0 && q.is_finite()) {
                return Err(Error::InvalidArgument(format!("q must lie in (1, inf), got {q}")));
            }
        }
        Ok(Self { p, q })
    }

    /// Conjugate exponent `p / (p - 1)`.
    pub fn conjugate(&self) -> f64 {
        self.p / (self.p - 1.0)
    }
}

pub(crate) fn check_exponent(p: f64) -> Result<()> {
    if p > 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("p must lie in (1, inf), got {p}")))
    }
}

#[derive(Clone)]
enum Kind {
    Power { alpha: f64 },
    TwoExponent { a0: f64, a1: f64 },
    Parsed(Arc<Expr>),
    Interpolated {
        w0: Box<WeightProfile>,
        e0: f64,
        w1: Box<WeightProfile>,
        e1: f64,
    },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

/// A positive continuous weight on `(0, inf)`.
///
/// Profiles are immutable and cheap to clone.
#[derive(Clone)]
pub struct WeightProfile {
    kind: Kind,
    hints: Option<EndpointHints>,
    label: String,
}

impl fmt::Debug for WeightProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WeightProfile")
            .field("label", &self.label)
            .field("hints", &self.hints)
            .finish()
    }
}

const PROBE_COUNT: usize = 200;
const PROBE_LO: f64 = 1e-8;
const PROBE_HI: f64 = 1e8;

/// Geometric grid used to screen parsed weights for positivity.
pub fn positivity_probes() -> impl Iterator<Item = f64> {
    let ratio = (PROBE_HI / PROBE_LO).ln() / (PROBE_COUNT - 1) as f64;
    (0..PROBE_COUNT).map(move |i| PROBE_LO * (ratio * i as f64).exp())
}

/// Parses a weight from the expression DSL and screens it for positivity.
pub fn parse_weight(src: &str) -> Result<WeightProfile> {
    let expr = parse_expr(src)?;
    for t in positivity_probes() {
        let value = expr.eval(t);
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::NonPositiveWeight { t, value });
        }
    }
    let hints = expr.power_template().map(|a| EndpointHints { zero: a, infinity: a });
    Ok(WeightProfile {
        kind: Kind::Parsed(Arc::new(expr)),
        hints,
        label: src.trim().to_string(),
    })
}

/// `w(t) = t^alpha`.
pub fn make_power(alpha: f64) -> WeightProfile {
    WeightProfile {
        kind: Kind::Power { alpha },
        hints: Some(EndpointHints {
            zero: alpha,
            infinity: alpha,
        }),
        label: format!("t^{alpha}"),
    }
}

/// `w(t) = t^a0 (1+t)^(a1-a0)`: behaves like `t^a0` at 0 and `t^a1` at infinity.
pub fn make_two_exponent(a0: f64, a1: f64) -> WeightProfile {
    WeightProfile {
        kind: Kind::TwoExponent { a0, a1 },
        hints: Some(EndpointHints { zero: a0, infinity: a1 }),
        label: format!("t^{a0}*(1+t)^{}", a1 - a0),
    }
}

/// `sigma(t) = w(t)^{-1/(p-1)}`.
pub fn dual_density(w: &WeightProfile, p: f64, t: f64) -> Result<f64> {
    let value = w.eval(t);
    if value <= 0.0 || !value.is_finite() {
        return Err(Error::WeightUnderflow { t });
    }
    let sigma = value.powf(-1.0 / (p - 1.0));
    if sigma.is_finite() {
        Ok(sigma)
    } else {
        Err(Error::WeightUnderflow { t })
    }
}

/// Builds `(w_theta, p_theta)` with `1/p_theta = (1-theta)/p0 + theta/p1` and
/// `w_theta^{1/p_theta} = w0^{(1-theta)/p0} w1^{theta/p1}`.
pub fn interpolate_weights(
    w0: &WeightProfile,
    p0: f64,
    w1: &WeightProfile,
    p1: f64,
    theta: f64,
) -> Result<(WeightProfile, f64)> {
    check_exponent(p0)?;
    check_exponent(p1)?;
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::InvalidArgument(format!("theta must lie in [0, 1], got {theta}")));
    }
    let p_theta = 1.0 / ((1.0 - theta) / p0 + theta / p1);
    let e0 = (1.0 - theta) * p_theta / p0;
    let e1 = theta * p_theta / p1;
    let hints = match (w0.hints, w1.hints) {
        (Some(h0), Some(h1)) => Some(EndpointHints {
            zero: e0 * h0.zero + e1 * h1.zero,
            infinity: e0 * h0.infinity + e1 * h1.infinity,
        }),
        _ => None,
    };
    let label = format!("({})^({e0})*({})^({e1})", w0.label, w1.label);
    if let (Kind::Power { alpha: a0 }, Kind::Power { alpha: a1 }) = (&w0.kind, &w1.kind) {
        let mut w = make_power(e0 * a0 + e1 * a1);
        w.label = label;
        return Ok((w, p_theta));
    }
    Ok((
        WeightProfile {
            kind: Kind::Interpolated {
                w0: Box::new(w0.clone()),
                e0,
                w1: Box::new(w1.clone()),
                e1,
            },
            hints,
            label,
        },
        p_theta,
    ))
}

impl WeightProfile {
    /// Wraps an arbitrary positive function. No hints, no closed forms.
    pub fn from_fn(label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            kind: Kind::Custom(Arc::new(f)),
            hints: None,
            label: label.into(),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match &self.kind {
            Kind::Power { alpha } => {
                if *alpha == 0.0 {
                    1.0
                } else {
                    t.powf(*alpha)
                }
            }
            Kind::TwoExponent { a0, a1 } => t.powf(*a0) * (1.0 + t).powf(a1 - a0),
            Kind::Parsed(e) => e.eval(t),
            Kind::Interpolated { w0, e0, w1, e1 } => {
                let mut v = 1.0;
                if *e0 != 0.0 {
                    v *= w0.eval(t).powf(*e0);
                }
                if *e1 != 0.0 {
                    v *= w1.eval(t).powf(*e1);
                }
                v
            }
            Kind::Custom(f) => f(t),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn hints(&self) -> Option<EndpointHints> {
        self.hints
    }

    /// Same weight with endpoint hints removed, forcing numerical decisions.
    pub fn without_hints(&self) -> Self {
        Self {
            hints: None,
            ..self.clone()
        }
    }

    /// Power exponent when the weight is exactly `t^alpha`.
    pub fn power_exponent(&self) -> Option<f64> {
        match self.kind {
            Kind::Power { alpha } => Some(alpha),
            _ => None,
        }
    }

    /// Closed-form `S` with `S'(t) = sigma(t)`, available for the power family.
    pub fn sigma_antiderivative(&self, p: f64) -> Option<impl Fn(f64) -> f64> {
        let alpha = self.power_exponent()?;
        let beta = alpha / (p - 1.0);
        Some(move |t: f64| {
            if beta == 1.0 {
                t.ln()
            } else {
                t.powf(1.0 - beta) / (1.0 - beta)
            }
        })
    }

    /// Closed-form `int_lo^hi sigma` for the power family. `lo = 0` and
    /// `hi = inf` are allowed; a divergent integral is `+inf`.
    pub fn sigma_integral_closed(&self, p: f64, lo: f64, hi: f64) -> Option<f64> {
        let alpha = self.power_exponent()?;
        let beta = alpha / (p - 1.0);
        let s = self.sigma_antiderivative(p)?;
        let lower = if lo == 0.0 {
            if beta < 1.0 {
                0.0
            } else {
                return Some(f64::INFINITY);
            }
        } else {
            s(lo)
        };
        let upper = if hi.is_infinite() {
            if beta > 1.0 {
                0.0
            } else {
                return Some(f64::INFINITY);
            }
        } else {
            s(hi)
        };
        Some(upper - lower)
    }

    /// DSL text evaluating to the same weight.
    pub fn render(&self) -> String {
        match &self.kind {
            Kind::Power { alpha } => format!("t^({})", Expr::Num(*alpha)),
            Kind::TwoExponent { a0, a1 } => {
                format!("t^({})*(1+t)^({})", Expr::Num(*a0), Expr::Num(a1 - a0))
            }
            Kind::Parsed(e) => e.to_string(),
            Kind::Interpolated { w0, e0, w1, e1 } => format!(
                "({})^({})*({})^({})",
                w0.render(),
                Expr::Num(*e0),
                w1.render(),
                Expr::Num(*e1)
            ),
            Kind::Custom(_) => self.label.clone(),
        }
    }
}
