//! Elements of `D^{1,p}(R_+, w)` and the quantities attached to them.
//!
//! A function is stored through an interior anchor `a0`, its value there and
//! its derivative `v`, so `u(t) = u(a0) + int_{a0}^t v`. Endpoint values are
//! always derived: the trace at `0` is approached along `a0 2^{-k}` and every
//! reported value comes with the Hölder bound
//! `|u(t) - Tr u| <= (int_0^t |v|^p w)^{1/p} Omega_0(t)`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::classify::{self, sigma_error, sigma_fn};
use crate::quad::{self, QuadOutcome, Verdict};
use crate::weights::{check_exponent, parse_expr, Expr, WeightProfile};
use crate::{Error, Result, Side, Ternary};

/// Relative tolerance of the integrals computed in this module.
pub const SPACE_TOL: f64 = 1e-10;
/// Number of dyadic probes tried by the trace routines.
pub const MAX_TRACE_PROBES: usize = 60;
/// Pairs closer than this in the weighted distance are skipped.
pub const MORREY_MIN_DISTANCE: f64 = 1e-14;

#[derive(Clone)]
enum DerivKind {
    Zero,
    Expr(Arc<Expr>),
    Closure(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

/// The a.e. derivative of a Dirichlet function.
///
/// Besides the values it records a closed support (outside of which the
/// derivative vanishes) and breakpoints where it may jump; quadrature splits
/// at both.
#[derive(Clone)]
pub struct Derivative {
    kind: DerivKind,
    source: Option<String>,
    breakpoints: Vec<f64>,
    support: (f64, f64),
}

impl fmt::Debug for Derivative {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Derivative")
            .field("source", &self.source)
            .field("breakpoints", &self.breakpoints)
            .field("support", &self.support)
            .finish()
    }
}

impl Derivative {
    pub fn zero() -> Self {
        Self {
            kind: DerivKind::Zero,
            source: Some("0".to_string()),
            breakpoints: Vec::new(),
            support: (1.0, 1.0),
        }
    }

    pub fn from_expr(src: &str) -> Result<Self> {
        let e = parse_expr(src)?;
        if e.constant_value() == Some(0.0) {
            return Ok(Self::zero());
        }
        Ok(Self {
            kind: DerivKind::Expr(Arc::new(e)),
            source: Some(src.trim().to_string()),
            breakpoints: Vec::new(),
            support: (0.0, f64::INFINITY),
        })
    }

    pub fn from_fn(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            kind: DerivKind::Closure(Arc::new(f)),
            source: None,
            breakpoints: Vec::new(),
            support: (0.0, f64::INFINITY),
        }
    }

    pub fn constant(c: f64) -> Self {
        if c == 0.0 {
            return Self::zero();
        }
        Self {
            source: Some(Expr::Num(c).to_string()),
            ..Self::from_fn(move |_| c)
        }
    }

    /// `value` on `(a, b)`, zero elsewhere.
    pub fn indicator(a: f64, b: f64, value: f64) -> Self {
        Self::piecewise_constant(vec![a, b], vec![value])
    }

    /// `values[i]` on `(breaks[i], breaks[i+1])`, zero outside
    /// `[breaks[0], breaks[last]]`. The last break may be infinite.
    pub fn piecewise_constant(breaks: Vec<f64>, values: Vec<f64>) -> Self {
        assert_eq!(breaks.len(), values.len() + 1, "one value per cell");
        assert!(breaks.windows(2).all(|w| w[0] < w[1]), "breaks must increase");
        let lo = breaks[0];
        let hi = *breaks.last().expect("nonempty");
        let cells = breaks.clone();
        let f = move |t: f64| {
            if t < cells[0] || t > cells[cells.len() - 1] {
                return 0.0;
            }
            let i = cells.partition_point(|&x| x <= t).saturating_sub(1);
            values[i.min(values.len() - 1)]
        };
        Self {
            kind: DerivKind::Closure(Arc::new(f)),
            source: None,
            breakpoints: breaks.into_iter().filter(|x| x.is_finite()).collect(),
            support: (lo, hi),
        }
    }

    /// Restricts the support to `[lo, hi]` (intersected with the current one).
    pub fn with_support(mut self, lo: f64, hi: f64) -> Self {
        self.support = (self.support.0.max(lo), self.support.1.min(hi));
        if self.support.0 >= self.support.1 {
            return Self::zero();
        }
        self.breakpoints.extend([lo, hi].into_iter().filter(|x| *x > 0.0 && x.is_finite()));
        self.normalize_breaks();
        self
    }

    pub fn with_breakpoints(mut self, breaks: impl IntoIterator<Item = f64>) -> Self {
        self.breakpoints.extend(breaks);
        self.normalize_breaks();
        self
    }

    fn normalize_breaks(&mut self) {
        let (lo, hi) = self.support;
        self.breakpoints.retain(|&x| x >= lo && x <= hi && x > 0.0 && x.is_finite());
        self.breakpoints.sort_by(f64::total_cmp);
        self.breakpoints.dedup();
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t < self.support.0 || t > self.support.1 {
            return 0.0;
        }
        match &self.kind {
            DerivKind::Zero => 0.0,
            DerivKind::Expr(e) => e.eval(t),
            DerivKind::Closure(f) => f(t),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, DerivKind::Zero)
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn source(&self) -> Option<&str> {
        self.source.as_deref()
    }

    /// Pointwise combination `f(self(t), other(t))`, supported on the hull of
    /// both supports and breaking at both sets of breakpoints.
    pub fn zip_with(
        &self,
        other: &Derivative,
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Derivative {
        let (a, b) = (self.clone(), other.clone());
        let support = if self.is_zero() {
            other.support
        } else if other.is_zero() {
            self.support
        } else {
            (self.support.0.min(other.support.0), self.support.1.max(other.support.1))
        };
        let mut breaks: Vec<f64> = self.breakpoints.iter().chain(&other.breakpoints).copied().collect();
        breaks.extend([self.support.0, self.support.1, other.support.0, other.support.1]);
        let mut out = Derivative {
            kind: DerivKind::Closure(Arc::new(move |t| f(a.eval(t), b.eval(t)))),
            source: None,
            breakpoints: breaks,
            support,
        };
        out.normalize_breaks();
        out
    }

    /// `int_lo^hi g(t, v(t)) dt` over the part of `(lo, hi)` inside the support;
    /// `lo = 0` and `hi = inf` allowed.
    pub fn integrate_against(
        &self,
        g: impl Fn(f64, f64) -> f64,
        lo: f64,
        hi: f64,
        tol: f64,
    ) -> Result<QuadOutcome> {
        let (a, b) = (lo.max(self.support.0), hi.min(self.support.1));
        if self.is_zero() || a >= b {
            return Ok(QuadOutcome::exact(0.0));
        }
        quad::integrate_span(|t| g(t, self.eval(t)), a, b, &self.breakpoints, tol)
    }

    /// Signed `int_a^b v` for finite positive `a`, `b`.
    pub fn integral(&self, a: f64, b: f64, tol: f64) -> Result<f64> {
        let (lo, hi, sign) = if a <= b { (a, b, 1.0) } else { (b, a, -1.0) };
        let out = self.integrate_against(|_, v| v, lo, hi, tol)?;
        if out.verdict != Verdict::Converged {
            return Err(Error::Undetermined("integral of the derivative"));
        }
        Ok(sign * out.value)
    }
}

/// `u(t) = anchor_value + int_anchor^t derivative`.
#[derive(Debug, Clone)]
pub struct DirichletFunction {
    pub anchor: f64,
    pub anchor_value: f64,
    pub derivative: Derivative,
    pub label: String,
}

/// JSON form: `{anchor, anchor_value, derivative, label}` with the derivative
/// as DSL text. `support` (`[lo, hi]`, `hi = null` for infinity) and
/// `breakpoints` are optional.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DirichletFunctionSpec {
    pub anchor: f64,
    pub anchor_value: f64,
    pub derivative: String,
    #[serde(default)]
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support: Option<(f64, Option<f64>)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub breakpoints: Vec<f64>,
}

impl DirichletFunction {
    pub fn new(anchor: f64, anchor_value: f64, derivative: Derivative, label: impl Into<String>) -> Result<Self> {
        if !(anchor > 0.0 && anchor.is_finite()) {
            return Err(Error::InvalidArgument(format!("anchor must lie in (0, inf), got {anchor}")));
        }
        Ok(Self {
            anchor,
            anchor_value,
            derivative,
            label: label.into(),
        })
    }

    pub fn constant(c: f64) -> Self {
        Self {
            anchor: 1.0,
            anchor_value: c,
            derivative: Derivative::zero(),
            label: format!("{c}"),
        }
    }

    pub fn from_spec(spec: &DirichletFunctionSpec) -> Result<Self> {
        let mut d = Derivative::from_expr(&spec.derivative)?;
        if let Some((lo, hi)) = spec.support {
            d = d.with_support(lo, hi.unwrap_or(f64::INFINITY));
        }
        d = d.with_breakpoints(spec.breakpoints.iter().copied());
        Self::new(spec.anchor, spec.anchor_value, d, spec.label.clone())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: DirichletFunctionSpec = serde_json::from_str(text).map_err(|e| Error::Json(e.to_string()))?;
        Self::from_spec(&spec)
    }

    pub fn to_spec(&self) -> Result<DirichletFunctionSpec> {
        let source = self
            .derivative
            .source()
            .ok_or_else(|| Error::InvalidArgument("derivative has no DSL form".to_string()))?;
        let (lo, hi) = self.derivative.support();
        let support = (lo > 0.0 || hi.is_finite()).then_some((lo, hi.is_finite().then_some(hi)));
        Ok(DirichletFunctionSpec {
            anchor: self.anchor,
            anchor_value: self.anchor_value,
            derivative: source.to_string(),
            label: self.label.clone(),
            support,
            breakpoints: self.derivative.breakpoints().to_vec(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(&self.to_spec()?).map_err(|e| Error::Json(e.to_string()))
    }

    /// `u(t)` for `t > 0`.
    pub fn value_at(&self, t: f64) -> Result<f64> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidArgument(format!("u is evaluated on (0, inf), got {t}")));
        }
        Ok(self.anchor_value + self.derivative.integral(self.anchor, t, SPACE_TOL)?)
    }

    /// Same function, anchored at `a`.
    pub fn reanchored(&self, a: f64) -> Result<Self> {
        Ok(Self {
            anchor: a,
            anchor_value: self.value_at(a)?,
            ..self.clone()
        })
    }
}

/// `int_lo^hi sigma`, in closed form for power weights.
pub fn sigma_integral(w: &WeightProfile, p: f64, lo: f64, hi: f64) -> Result<QuadOutcome> {
    check_exponent(p)?;
    if lo == hi {
        return Ok(QuadOutcome::exact(0.0));
    }
    if let Some(v) = w.sigma_integral_closed(p, lo, hi) {
        return Ok(if v.is_finite() {
            QuadOutcome::exact(v)
        } else {
            QuadOutcome::diverged(f64::INFINITY)
        });
    }
    quad::integrate_span(sigma_fn(w, p), lo, hi, &[], SPACE_TOL).map_err(sigma_error)
}

fn hinted_member(w: &WeightProfile, p: f64, side: Side) -> Option<bool> {
    let h = w.hints()?;
    Some(match side {
        Side::Zero => h.zero < p - 1.0,
        Side::Infinity => h.infinity > p - 1.0,
    })
}

fn endpoint_sigma_integral(w: &WeightProfile, p: f64, side: Side, t: f64) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("t must lie in (0, inf), got {t}")));
    }
    if hinted_member(w, p, side) == Some(false) {
        return Err(Error::NotBp { side });
    }
    let out = match side {
        Side::Zero => sigma_integral(w, p, 0.0, t)?,
        Side::Infinity => sigma_integral(w, p, t, f64::INFINITY)?,
    };
    match out.verdict {
        Verdict::Converged => Ok(out.value),
        Verdict::Diverged => Err(Error::NotBp { side }),
        Verdict::Inconclusive => Err(Error::Undetermined("endpoint integral of sigma")),
    }
}

/// `Omega_0(t) = (int_0^t sigma)^{1-1/p}`.
pub fn omega0(w: &WeightProfile, p: f64, t: f64) -> Result<f64> {
    Ok(endpoint_sigma_integral(w, p, Side::Zero, t)?.powf(1.0 - 1.0 / p))
}

/// `Omega_inf(t) = (int_t^inf sigma)^{1-1/p}`.
pub fn omega_inf(w: &WeightProfile, p: f64, t: f64) -> Result<f64> {
    Ok(endpoint_sigma_integral(w, p, Side::Infinity, t)?.powf(1.0 - 1.0 / p))
}

pub fn omega(w: &WeightProfile, p: f64, side: Side, t: f64) -> Result<f64> {
    match side {
        Side::Zero => omega0(w, p, t),
        Side::Infinity => omega_inf(w, p, t),
    }
}

/// `int |v|^p w` over `(lo, hi)`.
pub fn energy_outcome(u: &DirichletFunction, w: &WeightProfile, p: f64, lo: f64, hi: f64) -> Result<QuadOutcome> {
    u.derivative
        .integrate_against(|t, v| v.abs().powf(p) * w.eval(t), lo, hi, SPACE_TOL)
}

/// `(int_0^inf |u'|^p w)^{1/p}`; `+inf` when the integral diverges.
pub fn seminorm(u: &DirichletFunction, w: &WeightProfile, p: f64) -> Result<f64> {
    check_exponent(p)?;
    let out = energy_outcome(u, w, p, 0.0, f64::INFINITY)?;
    match out.verdict {
        Verdict::Converged => Ok(out.value.max(0.0).powf(1.0 / p)),
        Verdict::Diverged => Ok(f64::INFINITY),
        Verdict::Inconclusive => Err(Error::Undetermined("seminorm")),
    }
}

/// Where `norm_at` reads off the function value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Anchor {
    At(f64),
    Zero,
    Infinity,
}

/// Tolerance of the trace used by [`norm_at`] at an endpoint.
pub const NORM_TRACE_TOL: f64 = 1e-10;

/// `seminorm + |u(a)|`, with `u(0)` / `u(inf)` read as traces.
pub fn norm_at(u: &DirichletFunction, w: &WeightProfile, p: f64, a: Anchor) -> Result<f64> {
    let s = seminorm(u, w, p)?;
    let value = match a {
        Anchor::At(t) => u.value_at(t)?,
        Anchor::Zero => trace_zero(u, w, p, NORM_TRACE_TOL)?.value,
        Anchor::Infinity => trace_infinity(u, w, p, NORM_TRACE_TOL)?.value,
    };
    Ok(s + value.abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceResult {
    pub value: f64,
    pub certified_error: f64,
    pub side: Side,
    pub probe: f64,
    pub converged: bool,
    pub probes_used: usize,
    /// Largest `|u(t) - value| / Omega(t)` over the visited probes; a
    /// diagnostic for boundedness of the asymptotic residual, not a bound.
    pub residual_sup: f64,
}

fn require_bp(w: &WeightProfile, p: f64, side: Side) -> Result<()> {
    match classify::bp(w, p, side)?.member {
        Ternary::Yes => Ok(()),
        Ternary::No => Err(Error::TraceUndefined { side }),
        Ternary::Unknown => Err(Error::Undetermined("endpoint condition")),
    }
}

/// One probe of a trace computation: `u(probe)` and the bound
/// `|u(probe) - Tr u| <= bound`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceProbe {
    pub probe: f64,
    pub value: f64,
    pub bound: f64,
}

fn trace(u: &DirichletFunction, w: &WeightProfile, p: f64, side: Side, tol: f64) -> Result<TraceResult> {
    Ok(trace_with_probes(u, w, p, side, tol)?.0)
}

/// Trace together with every visited probe.
pub fn trace_with_probes(
    u: &DirichletFunction,
    w: &WeightProfile,
    p: f64,
    side: Side,
    tol: f64,
) -> Result<(TraceResult, Vec<TraceProbe>)> {
    check_exponent(p)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    require_bp(w, p, side)?;
    let step = match side {
        Side::Zero => 0.5,
        Side::Infinity => 2.0,
    };
    let mut probe = u.anchor;
    let mut value = u.anchor_value;
    let mut visited: Vec<(TraceProbe, f64)> = Vec::new(); // (probe, Omega)
    let mut best = None;
    for k in 1..=MAX_TRACE_PROBES {
        let next = probe * step;
        value += u.derivative.integral(probe, next, SPACE_TOL)?;
        probe = next;
        let tail = match side {
            Side::Zero => energy_outcome(u, w, p, 0.0, probe)?,
            Side::Infinity => energy_outcome(u, w, p, probe, f64::INFINITY)?,
        };
        match tail.verdict {
            Verdict::Converged => {}
            Verdict::Diverged => {
                return Err(Error::Refused(format!("derivative is not in L^p(w) near {side}")))
            }
            Verdict::Inconclusive => return Err(Error::Undetermined("energy tail")),
        }
        let om = omega(w, p, side, probe)?;
        let bound = tail.value.max(0.0).powf(1.0 / p) * om;
        visited.push((TraceProbe { probe, value, bound }, om));
        best = Some(TraceResult {
            value,
            certified_error: bound,
            side,
            probe,
            converged: bound <= tol,
            probes_used: k,
            residual_sup: 0.0,
        });
        if bound <= tol {
            break;
        }
    }
    let mut result = best.expect("at least one probe");
    result.residual_sup = visited
        .iter()
        .filter(|(_, om)| *om > 0.0)
        .map(|(pr, om)| (pr.value - result.value).abs() / om)
        .fold(0.0, f64::max);
    Ok((result, visited.into_iter().map(|(pr, _)| pr).collect()))
}

/// Trace at `0` with its certified error; probes `a0 2^{-k}` until the bound
/// drops below `tol` (or 60 probes have been used, then `converged = false`).
pub fn trace_zero(u: &DirichletFunction, w: &WeightProfile, p: f64, tol: f64) -> Result<TraceResult> {
    trace(u, w, p, Side::Zero, tol)
}

/// Trace at infinity; probes `a0 2^k`.
pub fn trace_infinity(u: &DirichletFunction, w: &WeightProfile, p: f64, tol: f64) -> Result<TraceResult> {
    trace(u, w, p, Side::Infinity, tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquivalenceConstant {
    /// `(int_I sigma)^{1-1/p}`.
    pub c_i: f64,
    /// `1 + c_i`: norms anchored at the two ends of `I` are within this factor.
    pub factor: f64,
}

/// Hölder constant of the interval between `a` and `b`; `a = 0` needs the
/// condition at `0`.
pub fn equivalence_constant(w: &WeightProfile, p: f64, a: f64, b: f64) -> Result<EquivalenceConstant> {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    if !(lo >= 0.0 && hi.is_finite()) {
        return Err(Error::InvalidArgument(format!("interval ({a}, {b}) must lie in [0, inf)")));
    }
    let s = if lo == 0.0 {
        endpoint_sigma_integral(w, p, Side::Zero, hi)?
    } else {
        let out = sigma_integral(w, p, lo, hi)?;
        if !out.is_converged() {
            return Err(Error::Undetermined("sigma integral"));
        }
        out.value
    };
    let c_i = s.powf(1.0 - 1.0 / p);
    Ok(EquivalenceConstant { c_i, factor: 1.0 + c_i })
}

/// `a(t) = (u(t) - Tr u) / Omega(t)` on the given side.
pub fn asymptotic_residual(u: &DirichletFunction, w: &WeightProfile, p: f64, side: Side, t: f64) -> Result<f64> {
    let tr = trace(u, w, p, side, 1e-12)?;
    let om = omega(w, p, side, t)?;
    if !(om > 0.0) {
        return Err(Error::InvalidArgument(format!("Omega vanishes numerically at t = {t:e}")));
    }
    Ok((u.value_at(t)? - tr.value) / om)
}

/// `d(x, y) = |int_x^y sigma|`.
pub fn weighted_distance(w: &WeightProfile, p: f64, x: f64, y: f64) -> Result<f64> {
    if !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite()) {
        return Err(Error::InvalidArgument(format!("points must lie in (0, inf): {x}, {y}")));
    }
    if x == y {
        return Ok(0.0);
    }
    let out = sigma_integral(w, p, x.min(y), x.max(y))?;
    if !out.is_converged() {
        return Err(Error::Undetermined("weighted distance"));
    }
    Ok(out.value.abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MorreyModulus {
    pub value: f64,
    pub pair: Option<(f64, f64)>,
}

/// `max |u(x) - u(y)| / d(x, y)^{1-1/p}` over pairs of grid points.
pub fn morrey_modulus(u: &DirichletFunction, w: &WeightProfile, p: f64, grid: &[f64]) -> Result<MorreyModulus> {
    check_exponent(p)?;
    let mut pts = grid.to_vec();
    if pts.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::InvalidArgument("grid points must lie in (0, inf)".to_string()));
    }
    pts.sort_by(f64::total_cmp);
    if pts.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument("grid points must be distinct".to_string()));
    }
    if pts.len() < 2 {
        return Ok(MorreyModulus { value: 0.0, pair: None });
    }
    let mut values = vec![u.value_at(pts[0])?];
    let mut dist = vec![0.0];
    for w2 in pts.windows(2) {
        let du = u.derivative.integral(w2[0], w2[1], SPACE_TOL)?;
        values.push(values.last().unwrap() + du);
        dist.push(dist.last().unwrap() + weighted_distance(w, p, w2[0], w2[1])?);
    }
    let exponent = 1.0 - 1.0 / p;
    let mut best = MorreyModulus { value: 0.0, pair: None };
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let d = dist[j] - dist[i];
            if d < MORREY_MIN_DISTANCE {
                continue;
            }
            let ratio = (values[j] - values[i]).abs() / d.powf(exponent);
            if ratio > best.value {
                best = MorreyModulus {
                    value: ratio,
                    pair: Some((pts[i], pts[j])),
                };
            }
        }
    }
    Ok(best)
}
