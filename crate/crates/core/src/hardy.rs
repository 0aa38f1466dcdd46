//! Hardy operators `Hv(t) = int_0^t v`, `H*v(t) = int_t^inf v` and their
//! two-weight boundedness `L^p(w) -> L^q(h)`.
//!
//! [`condition_c`] and [`condition_cstar`] evaluate the boundedness
//! criteria for `H` and `H*`. Suprema over `t` are taken on a geometric grid
//! over `[1e-6, 1e6]` with one golden-section refinement around the grid
//! maximizer; the behaviour beyond the grid is read off log-log slopes over
//! the two outermost decades. Nested integrals tabulate the inner integrals
//! on the same grid and interpolate them monotonically in log-log space.

use std::cell::Cell;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::classify::sigma_error;
use crate::quad::{self, QuadOutcome, Verdict, EXPONENT_MARGIN};
use crate::space::{seminorm, sigma_integral, trace_zero, Derivative, DirichletFunction};
use crate::weights::{check_exponent, WeightProfile};
use crate::{Error, Result, Side, Ternary};

const HARDY_TOL: f64 = 1e-10;
pub const GRID_LO: f64 = 1e-6;
pub const GRID_HI: f64 = 1e6;
pub const GRID_NODES: usize = 512;
/// Decades at each end of the grid used for the endpoint trend.
const TREND_DECADES: f64 = 2.0;
/// Relative spread below which an endpoint trend counts as a finite limit.
const FLAT_SPREAD: f64 = 1e-6;
const GOLDEN_ITERATIONS: usize = 80;
/// Nodes between forced quadrature breaks on the interpolated middle piece.
const BREAK_STRIDE: usize = 32;
pub const DEFAULT_SEED: u64 = 42;

fn check_point(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("t must lie in [0, inf), got {t}")));
    }
    Ok(())
}

/// `Hv(t) = int_0^t v`.
pub fn hardy_transform(v: &Derivative, t: f64) -> Result<f64> {
    check_point(t)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    let abs = v.integrate_against(|_, x| x.abs(), 0.0, t, HARDY_TOL)?;
    match abs.verdict {
        Verdict::Converged => {}
        Verdict::Diverged => return Err(Error::TransformUndefined("Hv undefined: v is not integrable near 0")),
        Verdict::Inconclusive => return Err(Error::Undetermined("integrability of v near 0")),
    }
    Ok(v.integrate_against(|_, x| x, 0.0, t, HARDY_TOL)?.value)
}

/// `H*v(t) = int_t^inf v`.
pub fn conj_hardy_transform(v: &Derivative, t: f64) -> Result<f64> {
    check_point(t)?;
    let abs = v.integrate_against(|_, x| x.abs(), t, f64::INFINITY, HARDY_TOL)?;
    match abs.verdict {
        Verdict::Converged => {}
        Verdict::Diverged => {
            return Err(Error::TransformUndefined("H*v undefined: v is not integrable near infinity"))
        }
        Verdict::Inconclusive => return Err(Error::Undetermined("integrability of v near infinity")),
    }
    Ok(v.integrate_against(|_, x| x, t, f64::INFINITY, HARDY_TOL)?.value)
}

/// `Hv` as a Dirichlet function: derivative `v`, anchored at 1.
pub fn hardy_function(v: &Derivative) -> Result<DirichletFunction> {
    DirichletFunction::new(1.0, hardy_transform(v, 1.0)?, v.clone(), "Hv")
}

/// `H*v` as a Dirichlet function: derivative `-v`, anchored at 1.
pub fn conj_hardy_function(v: &Derivative) -> Result<DirichletFunction> {
    let value = conj_hardy_transform(v, 1.0)?;
    let neg = v.zip_with(&Derivative::zero(), |a, _| -a);
    DirichletFunction::new(1.0, value, neg, "H*v")
}

/// A positive density whose partial integrals enter the conditions: the dual
/// density `sigma` of `w`, or a weight `h` itself.
#[derive(Clone, Copy)]
enum Density<'a> {
    Sigma(&'a WeightProfile, f64),
    Weight(&'a WeightProfile),
}

fn power_integral(alpha: f64, lo: f64, hi: f64) -> f64 {
    let s = |t: f64| {
        if alpha == -1.0 {
            t.ln()
        } else {
            t.powf(alpha + 1.0) / (alpha + 1.0)
        }
    };
    let lower = if lo == 0.0 {
        if alpha > -1.0 {
            0.0
        } else {
            return f64::INFINITY;
        }
    } else {
        s(lo)
    };
    let upper = if hi.is_infinite() {
        if alpha < -1.0 {
            0.0
        } else {
            return f64::INFINITY;
        }
    } else {
        s(hi)
    };
    upper - lower
}

impl Density<'_> {
    fn eval(&self, t: f64) -> f64 {
        match *self {
            Density::Sigma(w, p) => w.eval(t).powf(-1.0 / (p - 1.0)),
            Density::Weight(h) => h.eval(t),
        }
    }

    fn integrable(&self, side: Side) -> Option<bool> {
        match *self {
            Density::Sigma(w, p) => {
                let hints = w.hints()?;
                Some(match side {
                    Side::Zero => hints.zero < p - 1.0,
                    Side::Infinity => hints.infinity > p - 1.0,
                })
            }
            Density::Weight(h) => {
                let hints = h.hints()?;
                Some(match side {
                    Side::Zero => hints.zero > -1.0,
                    Side::Infinity => hints.infinity < -1.0,
                })
            }
        }
    }

    fn closed(&self, lo: f64, hi: f64) -> Option<f64> {
        match *self {
            Density::Sigma(w, p) => w.sigma_integral_closed(p, lo, hi),
            Density::Weight(h) => h.power_exponent().map(|a| power_integral(a, lo, hi)),
        }
    }

    fn has_closed_form(&self) -> bool {
        self.closed(1.0, 2.0).is_some()
    }

    /// `int_lo^hi`; a divergent integral has value `+inf`.
    fn integral(&self, lo: f64, hi: f64) -> Result<QuadOutcome> {
        if lo == hi {
            return Ok(QuadOutcome::exact(0.0));
        }
        if let Some(v) = self.closed(lo, hi) {
            return Ok(if v.is_finite() {
                QuadOutcome::exact(v)
            } else {
                QuadOutcome::diverged(f64::INFINITY)
            });
        }
        if (lo == 0.0 && self.integrable(Side::Zero) == Some(false))
            || (hi.is_infinite() && self.integrable(Side::Infinity) == Some(false))
        {
            return Ok(QuadOutcome::diverged(f64::INFINITY));
        }
        let mut out = quad::integrate_span(|t| self.eval(t), lo, hi, &[], HARDY_TOL).map_err(sigma_error)?;
        if out.verdict == Verdict::Diverged {
            out.value = f64::INFINITY;
        }
        Ok(out)
    }

    fn value_of(out: QuadOutcome) -> f64 {
        match out.verdict {
            Verdict::Converged => out.value,
            Verdict::Diverged => f64::INFINITY,
            Verdict::Inconclusive => f64::NAN,
        }
    }
}

pub fn log_grid() -> Vec<f64> {
    let step = (GRID_HI / GRID_LO).ln() / (GRID_NODES - 1) as f64;
    (0..GRID_NODES)
        .map(|i| match i {
            0 => GRID_LO,
            i if i == GRID_NODES - 1 => GRID_HI,
            i => GRID_LO * (step * i as f64).exp(),
        })
        .collect()
}

/// `int_0^t f` (`from = Zero`) or `int_t^inf f` (`from = Infinity`) on the grid.
struct Table<'a> {
    density: Density<'a>,
    from: Side,
    grid: Vec<f64>,
    values: Vec<f64>,
    outcome: QuadOutcome,
}

impl<'a> Table<'a> {
    fn build(density: Density<'a>, from: Side, grid: &[f64]) -> Result<Self> {
        let n = grid.len();
        let mut values = vec![0.0; n];
        let mut outcome;
        if density.has_closed_form() {
            outcome = QuadOutcome::exact(0.0);
            for (v, &t) in values.iter_mut().zip(grid) {
                let out = match from {
                    Side::Zero => density.integral(0.0, t)?,
                    Side::Infinity => density.integral(t, f64::INFINITY)?,
                };
                *v = Density::value_of(out);
                outcome = QuadOutcome {
                    value: 0.0,
                    ..outcome.combine(out)
                };
            }
            outcome.value = values[match from {
                Side::Zero => 0,
                Side::Infinity => n - 1,
            }];
        } else {
            let (first, order): (usize, Box<dyn Iterator<Item = usize>>) = match from {
                Side::Zero => (0, Box::new(1..n)),
                Side::Infinity => (n - 1, Box::new((0..n - 1).rev())),
            };
            outcome = match from {
                Side::Zero => density.integral(0.0, grid[0])?,
                Side::Infinity => density.integral(grid[n - 1], f64::INFINITY)?,
            };
            values[first] = Density::value_of(outcome);
            let mut prev = first;
            for i in order {
                let (lo, hi) = if i > prev { (grid[prev], grid[i]) } else { (grid[i], grid[prev]) };
                let cell = density.integral(lo, hi)?;
                values[i] = values[prev] + Density::value_of(cell);
                outcome = QuadOutcome {
                    value: outcome.value,
                    ..outcome.combine(cell)
                };
                prev = i;
            }
        }
        Ok(Self {
            density,
            from,
            grid: grid.to_vec(),
            values,
            outcome,
        })
    }

    /// The inner integral at an arbitrary `t > 0`, continued from the nearest
    /// tabulated node on the far side of the endpoint.
    fn at(&self, t: f64) -> Result<f64> {
        let d = self.density;
        if d.has_closed_form() {
            return Ok(Density::value_of(match self.from {
                Side::Zero => d.integral(0.0, t)?,
                Side::Infinity => d.integral(t, f64::INFINITY)?,
            }));
        }
        let n = self.grid.len();
        Ok(match self.from {
            Side::Zero => {
                if t <= self.grid[0] {
                    Density::value_of(d.integral(0.0, t)?)
                } else {
                    let i = self.grid.partition_point(|&x| x <= t) - 1;
                    self.values[i] + Density::value_of(d.integral(self.grid[i], t)?)
                }
            }
            Side::Infinity => {
                if t >= self.grid[n - 1] {
                    Density::value_of(d.integral(t, f64::INFINITY)?)
                } else {
                    let i = self.grid.partition_point(|&x| x < t);
                    self.values[i] + Density::value_of(d.integral(t, self.grid[i])?)
                }
            }
        })
    }
}

/// Monotone piecewise-cubic Hermite interpolant (Fritsch-Carlson slopes).
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        let n = x.len();
        assert!(n >= 2 && y.len() == n, "need at least two nodes");
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut d = vec![0.0; n];
        d[0] = delta[0];
        d[n - 1] = delta[n - 2];
        for k in 1..n - 1 {
            if delta[k - 1] * delta[k] > 0.0 {
                let w1 = 2.0 * h[k] + h[k - 1];
                let w2 = h[k] + 2.0 * h[k - 1];
                d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
            }
        }
        Self { x, y, d }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        let k = self.x.partition_point(|&v| v <= t).clamp(1, n - 1) - 1;
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let (s2, s3) = (s * s, s * s * s);
        (2.0 * s3 - 3.0 * s2 + 1.0) * self.y[k]
            + (s3 - 2.0 * s2 + s) * h * self.d[k]
            + (-2.0 * s3 + 3.0 * s2) * self.y[k + 1]
            + (s3 - s2) * h * self.d[k + 1]
    }
}

/// Behaviour of a positive grid function beyond one end of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Trend {
    /// Tends to 0 like a power.
    Decaying { slope: f64 },
    /// Tends to a finite positive limit.
    Flat { limit: f64 },
    /// Tends to infinity like a power.
    Growing { slope: f64 },
    Unclear { slope: f64 },
}

fn endpoint_trend(grid: &[f64], values: &[f64], side: Side) -> Trend {
    let span = 10f64.powf(TREND_DECADES);
    let pts: Vec<(f64, f64)> = grid
        .iter()
        .zip(values)
        .filter(|(&t, _)| match side {
            Side::Zero => t <= grid[0] * span,
            Side::Infinity => t >= grid[grid.len() - 1] / span,
        })
        .map(|(&t, &v)| (t.ln(), v.ln()))
        .collect();
    let m = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / m, b + y / m));
    let (sxy, sxx) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + (x - mx) * (y - my), b + (x - mx) * (x - mx)));
    let slope = sxy / sxx;
    let outward = match side {
        Side::Zero => -slope,
        Side::Infinity => slope,
    };
    if outward >= EXPONENT_MARGIN {
        return Trend::Growing { slope };
    }
    if outward <= -EXPONENT_MARGIN {
        return Trend::Decaying { slope };
    }
    let (lo, hi) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (_, y)| {
        (a.min(y.exp()), b.max(y.exp()))
    });
    if hi - lo <= FLAT_SPREAD * hi {
        let edge = match side {
            Side::Zero => values[0],
            Side::Infinity => values[values.len() - 1],
        };
        return Trend::Flat { limit: edge };
    }
    Trend::Unclear { slope }
}

/// Grid supremum, refined by golden-section search in `log t` around the
/// grid maximizer.
fn refined_sup(grid: &[f64], values: &[f64], f: impl Fn(f64) -> Result<f64>) -> Result<(f64, f64)> {
    let (imax, &vmax) = values
        .iter()
        .enumerate()
        .fold((0, &f64::NEG_INFINITY), |best, cur| if *cur.1 > *best.1 { cur } else { best });
    let lo = grid[imax.saturating_sub(1)].ln();
    let hi = grid[(imax + 1).min(grid.len() - 1)].ln();
    let g = |x: f64| f(x.exp());
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (g(c)?, g(d)?);
    for _ in 0..GOLDEN_ITERATIONS {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = g(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = g(d)?;
        }
    }
    let (x, v) = if fc > fd { (c, fc) } else { (d, fd) };
    Ok(if v > vmax { (v, x.exp()) } else { (vmax, grid[imax]) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExponentCase {
    /// `p <= q`.
    #[serde(rename = "PLEQ")]
    Pleq,
    /// `q < p`.
    #[serde(rename = "QLTP")]
    Qltp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Operator {
    Hardy,
    Conjugate,
}

#[derive(Debug, Clone, Serialize)]
pub struct Quantity {
    pub name: &'static str,
    #[serde(serialize_with = "crate::serialize_extended_f64")]
    pub value: f64,
    /// `"grid sup"`, `"endpoint trend"` or `"nested quadrature"`.
    pub method: &'static str,
    pub provenance: QuadOutcome,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub operator: Operator,
    pub applicable_case: ExponentCase,
    pub quantities: Vec<Quantity>,
    pub bounded: Ternary,
    /// Endpoint where a certified-divergent quantity blows up.
    pub offending_endpoint: Option<Side>,
    pub trends: Option<(Trend, Trend)>,
    pub notes: Vec<String>,
}

impl ConditionReport {
    pub fn quantity(&self, name: &str) -> Option<f64> {
        self.quantities.iter().find(|q| q.name == name).map(|q| q.value)
    }
}

fn case_of(p: f64, q: f64) -> Result<ExponentCase> {
    check_exponent(p)?;
    check_exponent(q)?;
    Ok(if p <= q { ExponentCase::Pleq } else { ExponentCase::Qltp })
}

fn divergent_side(t: &Table) -> Side {
    t.from
}

/// `(int_t^inf h)^{1/q} (int_0^t sigma)^{1/p'}` or its mirror
/// `(int_0^t h)^{1/q} (int_t^inf sigma)^{1/p'}`, maximized over `t`.
struct ProductSup {
    sup: f64,
    argmax: f64,
    zero: Trend,
    infinity: Trend,
    provenance: QuadOutcome,
}

enum ProductOutcome {
    Divergent(Side, QuadOutcome),
    Inconclusive(QuadOutcome),
    Finite(ProductSup),
}

fn product_sup(h_table: &Table, s_table: &Table, p: f64, q: f64) -> Result<ProductOutcome> {
    let provenance = h_table.outcome.combine(s_table.outcome);
    for t in [s_table, h_table] {
        if t.outcome.verdict == Verdict::Diverged {
            return Ok(ProductOutcome::Divergent(divergent_side(t), provenance));
        }
    }
    if provenance.verdict == Verdict::Inconclusive {
        return Ok(ProductOutcome::Inconclusive(provenance));
    }
    let pc = 1.0 - 1.0 / p;
    let prod = |a: f64, b: f64| a.powf(1.0 / q) * b.powf(pc);
    let values: Vec<f64> = h_table
        .values
        .iter()
        .zip(&s_table.values)
        .map(|(&a, &b)| prod(a, b))
        .collect();
    let grid = &h_table.grid;
    let (sup, argmax) = refined_sup(grid, &values, |t| Ok(prod(h_table.at(t)?, s_table.at(t)?)))?;
    Ok(ProductOutcome::Finite(ProductSup {
        sup,
        argmax,
        zero: endpoint_trend(grid, &values, Side::Zero),
        infinity: endpoint_trend(grid, &values, Side::Infinity),
        provenance,
    }))
}

/// `int_0^inf F1(t)^{e1} F2(t)^{e2} outer(t) dt` with tabulated inner integrals.
fn nested_integral(factors: [(&Table, f64); 2], outer: Density) -> Result<(QuadOutcome, Option<Side>)> {
    for (t, _) in factors {
        match t.outcome.verdict {
            Verdict::Diverged => return Ok((QuadOutcome::diverged(f64::INFINITY), Some(divergent_side(t)))),
            Verdict::Inconclusive => return Ok((t.outcome, None)),
            Verdict::Converged => {}
        }
    }
    let grid = &factors[0].0.grid;
    let lx: Vec<f64> = grid.iter().map(|t| t.ln()).collect();
    let interp: Vec<(Pchip, f64)> = factors
        .iter()
        .map(|(t, e)| (Pchip::new(lx.clone(), t.values.iter().map(|v| v.ln()).collect()), *e))
        .collect();
    let mid = |t: f64| {
        let x = t.ln();
        interp.iter().map(|(f, e)| e * f.eval(x)).sum::<f64>().exp() * outer.eval(t)
    };
    let failed = Cell::new(false);
    let direct = |t: f64| {
        let mut v = outer.eval(t);
        for (table, e) in factors {
            match table.at(t) {
                Ok(x) if x.is_finite() => v *= x.powf(e),
                _ => {
                    failed.set(true);
                    return f64::NAN;
                }
            }
        }
        v
    };
    let n = grid.len();
    let breaks: Vec<f64> = grid.iter().step_by(BREAK_STRIDE).copied().collect();
    let middle = quad::integrate_with_breaks(mid, grid[0], grid[n - 1], &breaks, HARDY_TOL)?;
    let head = quad::improper_to_zero(&direct, grid[0], HARDY_TOL)?;
    let tail = quad::improper_to_infinity(&direct, grid[n - 1], HARDY_TOL)?;
    if failed.get() {
        return Ok((
            QuadOutcome {
                verdict: Verdict::Inconclusive,
                ..middle
            },
            None,
        ));
    }
    let side = if head.verdict == Verdict::Diverged {
        Some(Side::Zero)
    } else if tail.verdict == Verdict::Diverged {
        Some(Side::Infinity)
    } else {
        None
    };
    let mut out = head.combine(middle).combine(tail);
    if out.verdict == Verdict::Diverged {
        out.value = f64::INFINITY;
    }
    Ok((out, side))
}

fn value_or_inf(out: &QuadOutcome) -> f64 {
    match out.verdict {
        Verdict::Converged => out.value,
        Verdict::Diverged => f64::INFINITY,
        Verdict::Inconclusive => f64::NAN,
    }
}

fn ternary_of(outs: &[&QuadOutcome]) -> Ternary {
    if outs.iter().any(|o| o.verdict == Verdict::Diverged) {
        Ternary::No
    } else if outs.iter().any(|o| o.verdict == Verdict::Inconclusive) {
        Ternary::Unknown
    } else {
        Ternary::Yes
    }
}

fn nested_report(
    operator: Operator,
    named: [(&'static str, (QuadOutcome, Option<Side>)); 2],
) -> ConditionReport {
    let [(n1, (o1, s1)), (n2, (o2, s2))] = named;
    let bounded = ternary_of(&[&o1, &o2]);
    let mut notes = Vec::new();
    for (n, o) in [(n1, &o1), (n2, &o2)] {
        if o.verdict == Verdict::Diverged {
            notes.push(format!("{n} diverges"));
        }
    }
    ConditionReport {
        operator,
        applicable_case: ExponentCase::Qltp,
        quantities: vec![
            Quantity {
                name: n1,
                value: value_or_inf(&o1),
                method: "nested quadrature",
                provenance: o1,
            },
            Quantity {
                name: n2,
                value: value_or_inf(&o2),
                method: "nested quadrature",
                provenance: o2,
            },
        ],
        bounded,
        offending_endpoint: if bounded == Ternary::No { s1.or(s2) } else { None },
        trends: None,
        notes,
    }
}

fn growing_side(zero: Trend, infinity: Trend) -> Option<Side> {
    if matches!(zero, Trend::Growing { .. }) {
        Some(Side::Zero)
    } else if matches!(infinity, Trend::Growing { .. }) {
        Some(Side::Infinity)
    } else {
        None
    }
}

fn any_unclear(zero: Trend, infinity: Trend) -> bool {
    matches!(zero, Trend::Unclear { .. }) || matches!(infinity, Trend::Unclear { .. })
}

/// Boundedness of `H: L^p(w) -> L^q(h)`.
pub fn condition_c(w: &WeightProfile, h: &WeightProfile, p: f64, q: f64) -> Result<ConditionReport> {
    let case = case_of(p, q)?;
    let grid = log_grid();
    let s_table = Table::build(Density::Sigma(w, p), Side::Zero, &grid)?;
    let h_table = Table::build(Density::Weight(h), Side::Infinity, &grid)?;
    if case == ExponentCase::Qltp {
        let e2 = nested_integral(
            [(&h_table, p / (p - q)), (&s_table, p * (q - 1.0) / (p - q))],
            Density::Sigma(w, p),
        )?;
        let e3 = nested_integral(
            [(&h_table, q / (p - q)), (&s_table, q * (p - 1.0) / p)],
            Density::Weight(h),
        )?;
        return Ok(nested_report(Operator::Hardy, [("E2", e2), ("E3", e3)]));
    }

    let mut report = ConditionReport {
        operator: Operator::Hardy,
        applicable_case: case,
        quantities: Vec::new(),
        bounded: Ternary::Unknown,
        offending_endpoint: None,
        trends: None,
        notes: Vec::new(),
    };
    let e1 = |value, provenance| Quantity {
        name: "E1",
        value,
        method: "grid sup",
        provenance,
    };
    match product_sup(&h_table, &s_table, p, q)? {
        ProductOutcome::Divergent(side, prov) => {
            report.quantities.push(e1(f64::INFINITY, prov));
            report.bounded = Ternary::No;
            report.offending_endpoint = Some(side);
            report.notes.push(match side {
                Side::Zero => "int_0^t sigma diverges".to_string(),
                Side::Infinity => "int_t^inf h diverges".to_string(),
            });
        }
        ProductOutcome::Inconclusive(prov) => {
            report.quantities.push(e1(f64::NAN, prov));
            report.notes.push("inner integral inconclusive".to_string());
        }
        ProductOutcome::Finite(s) => {
            report.trends = Some((s.zero, s.infinity));
            if let Some(side) = growing_side(s.zero, s.infinity) {
                report.quantities.push(e1(f64::INFINITY, s.provenance));
                report.bounded = Ternary::No;
                report.offending_endpoint = Some(side);
                report.notes.push(format!("product grows without bound toward {side}"));
            } else {
                report.quantities.push(e1(s.sup, s.provenance));
                report.bounded = if any_unclear(s.zero, s.infinity) {
                    report.notes.push("endpoint behaviour of the product is unclear".to_string());
                    Ternary::Unknown
                } else {
                    Ternary::Yes
                };
                report.notes.push(format!("grid sup attained near t = {:.6e}", s.argmax));
            }
        }
    }
    Ok(report)
}

fn limit_of(trend: Trend) -> f64 {
    match trend {
        Trend::Decaying { .. } => 0.0,
        Trend::Flat { limit } => limit,
        Trend::Growing { .. } => f64::INFINITY,
        Trend::Unclear { .. } => f64::NAN,
    }
}

/// Boundedness of `H*: L^p(w) -> L^q(h)`. For `p <= q` this requires
/// `sup A(t) < inf` and `A(t) -> 0` at both ends.
pub fn condition_cstar(w: &WeightProfile, h: &WeightProfile, p: f64, q: f64) -> Result<ConditionReport> {
    let case = case_of(p, q)?;
    let grid = log_grid();
    let g_table = Table::build(Density::Weight(h), Side::Zero, &grid)?;
    let r_table = Table::build(Density::Sigma(w, p), Side::Infinity, &grid)?;
    if case == ExponentCase::Qltp {
        let a = nested_integral(
            [(&g_table, p / (p - q)), (&r_table, p * (q - 1.0) / (p - q))],
            Density::Sigma(w, p),
        )?;
        let (o, s) = a;
        let bounded = ternary_of(&[&o]);
        return Ok(ConditionReport {
            operator: Operator::Conjugate,
            applicable_case: case,
            quantities: vec![Quantity {
                name: "A",
                value: value_or_inf(&o),
                method: "nested quadrature",
                provenance: o,
            }],
            bounded,
            offending_endpoint: if bounded == Ternary::No { s } else { None },
            trends: None,
            notes: if bounded == Ternary::No { vec!["A diverges".to_string()] } else { Vec::new() },
        });
    }

    let mut report = ConditionReport {
        operator: Operator::Conjugate,
        applicable_case: case,
        quantities: Vec::new(),
        bounded: Ternary::Unknown,
        offending_endpoint: None,
        trends: None,
        notes: Vec::new(),
    };
    let push = |report: &mut ConditionReport, sup: f64, zero: f64, inf: f64, prov: QuadOutcome| {
        for (name, value, method) in [
            ("A_sup", sup, "grid sup"),
            ("A_limit_zero", zero, "endpoint trend"),
            ("A_limit_infinity", inf, "endpoint trend"),
        ] {
            report.quantities.push(Quantity {
                name,
                value,
                method,
                provenance: prov,
            });
        }
    };
    // product_sup's first table plays the h-factor, the second the sigma-factor.
    match product_sup(&g_table, &r_table, p, q)? {
        ProductOutcome::Divergent(side, prov) => {
            push(&mut report, f64::INFINITY, f64::INFINITY, f64::INFINITY, prov);
            report.bounded = Ternary::No;
            report.offending_endpoint = Some(side);
            report.notes.push(match side {
                Side::Zero => "int_0^t h diverges".to_string(),
                Side::Infinity => "int_t^inf sigma diverges".to_string(),
            });
        }
        ProductOutcome::Inconclusive(prov) => {
            push(&mut report, f64::NAN, f64::NAN, f64::NAN, prov);
            report.notes.push("inner integral inconclusive".to_string());
        }
        ProductOutcome::Finite(s) => {
            report.trends = Some((s.zero, s.infinity));
            let (lz, li) = (limit_of(s.zero), limit_of(s.infinity));
            if let Some(side) = growing_side(s.zero, s.infinity) {
                push(&mut report, f64::INFINITY, lz, li, s.provenance);
                report.bounded = Ternary::No;
                report.offending_endpoint = Some(side);
                report.notes.push(format!("A(t) grows without bound toward {side}"));
            } else {
                push(&mut report, s.sup, lz, li, s.provenance);
                let nonzero = [(Side::Zero, lz), (Side::Infinity, li)]
                    .into_iter()
                    .find(|(_, l)| *l > 0.0);
                if let Some((side, l)) = nonzero {
                    report.bounded = Ternary::No;
                    report.offending_endpoint = Some(side);
                    report.notes.push(format!("A(t) tends to {l:.6e} toward {side}, not 0"));
                } else if any_unclear(s.zero, s.infinity) {
                    report.notes.push("endpoint behaviour of A(t) is unclear".to_string());
                } else {
                    report.bounded = Ternary::Yes;
                }
                report.notes.push(format!("grid sup attained near t = {:.6e}", s.argmax));
            }
        }
    }
    Ok(report)
}

pub fn condition(w: &WeightProfile, h: &WeightProfile, p: f64, q: f64, op: Operator) -> Result<ConditionReport> {
    match op {
        Operator::Hardy => condition_c(w, h, p, q),
        Operator::Conjugate => condition_cstar(w, h, p, q),
    }
}

/// Shape of a candidate `v` for the ratio `||Tv||_{L^q(h)} / ||v||_{L^p(w)}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Shape {
    Indicator { a: f64, b: f64 },
    PiecewiseConstant { breaks: Vec<f64>, values: Vec<f64> },
    /// `t^gamma` on `(a, b)`.
    Power { gamma: f64, a: f64, b: f64 },
    /// `sigma` on `(k, K)`: the derivative of the energy-minimizing ramp.
    Ramp { k: f64, big_k: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidate {
    pub shape: Shape,
    pub scale: f64,
}

impl Candidate {
    pub fn new(shape: Shape) -> Self {
        Self { shape, scale: 1.0 }
    }

    pub fn scaled(self, scale: f64) -> Self {
        Self { scale, ..self }
    }

    pub fn support(&self) -> (f64, f64) {
        match &self.shape {
            Shape::Indicator { a, b } | Shape::Power { a, b, .. } => (*a, *b),
            Shape::PiecewiseConstant { breaks, .. } => (breaks[0], breaks[breaks.len() - 1]),
            Shape::Ramp { k, big_k } => (*k, *big_k),
        }
    }

    fn breaks(&self) -> Vec<f64> {
        match &self.shape {
            Shape::PiecewiseConstant { breaks, .. } => breaks.clone(),
            _ => {
                let (a, b) = self.support();
                vec![a, b]
            }
        }
    }

    fn value(&self, t: f64, w: &WeightProfile, p: f64) -> f64 {
        let (a, b) = self.support();
        if t < a || t > b {
            return 0.0;
        }
        self.scale
            * match &self.shape {
                Shape::Indicator { .. } => 1.0,
                Shape::PiecewiseConstant { breaks, values } => {
                    let i = breaks.partition_point(|&x| x <= t).clamp(1, values.len()) - 1;
                    values[i]
                }
                Shape::Power { gamma, .. } => t.powf(*gamma),
                Shape::Ramp { .. } => w.eval(t).powf(-1.0 / (p - 1.0)),
            }
    }

    /// `int_a^t v` for `t` clamped to the support.
    fn primitive(&self, t: f64, w: &WeightProfile, p: f64) -> Result<f64> {
        let (a, b) = self.support();
        let t = t.clamp(a, b);
        Ok(self.scale
            * match &self.shape {
                Shape::Indicator { .. } => t - a,
                Shape::PiecewiseConstant { breaks, values } => breaks
                    .windows(2)
                    .zip(values)
                    .map(|(c, v)| v * (t.min(c[1]) - c[0]).max(0.0))
                    .sum(),
                Shape::Power { gamma, .. } => {
                    if *gamma == -1.0 {
                        (t / a).ln()
                    } else {
                        (t.powf(gamma + 1.0) - a.powf(gamma + 1.0)) / (gamma + 1.0)
                    }
                }
                Shape::Ramp { k, .. } => {
                    let out = sigma_integral(w, p, *k, t)?;
                    if !out.is_converged() {
                        return Err(Error::Undetermined("ramp primitive"));
                    }
                    out.value
                }
            })
    }
}

/// `||Tv||_{L^q(h)} / ||v||_{L^p(w)}` for `T = H` or `H*`.
pub fn hardy_ratio(
    v: &Candidate,
    w: &WeightProfile,
    h: &WeightProfile,
    p: f64,
    q: f64,
    op: Operator,
) -> Result<f64> {
    check_exponent(p)?;
    check_exponent(q)?;
    let (a, b) = v.support();
    if !(a > 0.0 && b > a && b.is_finite()) {
        return Err(Error::InvalidArgument(format!("candidate support ({a}, {b}) must be compact in (0, inf)")));
    }
    let breaks = v.breaks();
    let vnorm = quad::integrate_with_breaks(|t| v.value(t, w, p).abs().powf(p) * w.eval(t), a, b, &breaks, HARDY_TOL)?;
    if !vnorm.is_converged() {
        return Err(Error::Undetermined("candidate norm"));
    }
    let total = v.primitive(b, w, p)?;
    let failed = Cell::new(false);
    let prim = |t: f64| match v.primitive(t, w, p) {
        Ok(x) => x,
        Err(_) => {
            failed.set(true);
            f64::NAN
        }
    };
    let dens = Density::Weight(h);
    let (inside, outside) = match op {
        Operator::Hardy => (
            quad::integrate_with_breaks(|t| prim(t).abs().powf(q) * h.eval(t), a, b, &breaks, HARDY_TOL)?,
            dens.integral(b, f64::INFINITY)?,
        ),
        Operator::Conjugate => (
            quad::integrate_with_breaks(|t| (total - prim(t)).abs().powf(q) * h.eval(t), a, b, &breaks, HARDY_TOL)?,
            dens.integral(0.0, a)?,
        ),
    };
    if failed.get() || !inside.is_converged() || outside.verdict == Verdict::Inconclusive {
        return Err(Error::Undetermined("image norm"));
    }
    let outer = if total == 0.0 {
        0.0
    } else {
        total.abs().powf(q) * value_or_inf(&outside)
    };
    Ok((inside.value + outer).powf(1.0 / q) / vnorm.value.powf(1.0 / p))
}

/// The deterministic part of the candidate family: indicators, ramps and
/// truncated powers.
pub fn structured_candidates(p: f64) -> Vec<Candidate> {
    let mut out = Vec::new();
    for i in -4..=4 {
        let a = 10f64.powi(i);
        for r in [2.0, 10.0, 100.0] {
            out.push(Candidate::new(Shape::Indicator { a, b: a * r }));
        }
    }
    for i in -4..=4 {
        let k = 10f64.powi(i);
        for r in [10.0, 1000.0] {
            out.push(Candidate::new(Shape::Ramp { k, big_k: k * r }));
        }
    }
    let windows: Vec<(f64, f64)> = [4, 8, 12]
        .iter()
        .flat_map(|&k| {
            let e = 10f64.powi(k);
            [(1.0, e), (1.0 / e, 1.0)]
        })
        .chain([(1e-3, 1e3), (1e-6, 1e6)])
        .collect();
    for j in -25..=25 {
        let gamma = -1.0 / p + 0.02 * j as f64;
        for &(a, b) in &windows {
            out.push(Candidate::new(Shape::Power { gamma, a, b }));
        }
    }
    out
}

/// The `i`-th random piecewise-constant candidate; independent of how many
/// others are drawn.
pub fn random_candidate(seed: u64, i: u64) -> Candidate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i);
    let cells = rng.gen_range(1..=8);
    let mut breaks: Vec<f64> = (0..=cells).map(|_| 10f64.powf(rng.gen_range(-3.0..3.0))).collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    if breaks.len() < 2 {
        breaks.push(breaks[0] * 2.0);
    }
    let values = (0..breaks.len() - 1).map(|_| rng.gen_range(0.0..1.0)).collect();
    Candidate::new(Shape::PiecewiseConstant { breaks, values })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstantEstimate {
    pub estimate: f64,
    pub best: Candidate,
    pub best_index: usize,
    pub candidates: usize,
    /// Every tested ratio was finite.
    pub all_finite: bool,
}

/// Maximum ratio over `candidates`, ties going to the smaller index.
pub fn max_ratio(
    candidates: &[Candidate],
    w: &WeightProfile,
    h: &WeightProfile,
    p: f64,
    q: f64,
    op: Operator,
) -> Result<ConstantEstimate> {
    let mut best = (f64::NEG_INFINITY, 0);
    let mut all_finite = true;
    for (i, c) in candidates.iter().enumerate() {
        let r = match hardy_ratio(c, w, h, p, q, op) {
            Ok(r) => r,
            Err(Error::Undetermined(_)) => continue,
            Err(e) => return Err(e),
        };
        all_finite &= r.is_finite();
        if r > best.0 {
            best = (r, i);
        }
    }
    if best.0 == f64::NEG_INFINITY {
        return Err(Error::Undetermined("no candidate ratio could be evaluated"));
    }
    Ok(ConstantEstimate {
        estimate: best.0,
        best: candidates[best.1].clone(),
        best_index: best.1,
        candidates: candidates.len(),
        all_finite,
    })
}

/// Lower bound on the best constant of `||Tv||_{L^q(h)} <= C ||v||_{L^p(w)}`.
/// Refuses unless the matching condition certifies boundedness.
pub fn estimate_best_constant(
    w: &WeightProfile,
    h: &WeightProfile,
    p: f64,
    q: f64,
    op: Operator,
    trials: usize,
    seed: u64,
) -> Result<ConstantEstimate> {
    let report = condition(w, h, p, q, op)?;
    if report.bounded != Ternary::Yes {
        return Err(Error::Refused(format!(
            "operator is not certified bounded (verdict {:?})",
            report.bounded
        )));
    }
    let mut candidates = structured_candidates(p);
    candidates.extend((0..trials as u64).map(|i| random_candidate(seed, i)));
    max_ratio(&candidates, w, h, p, q, op)
}

#[derive(Debug, Clone, Serialize)]
pub struct DivergenceWitness {
    pub endpoint: Side,
    pub candidates: Vec<Candidate>,
    #[serde(serialize_with = "serialize_extended_vec")]
    pub ratios: Vec<f64>,
    pub diverging: bool,
}

fn serialize_extended_vec<S: serde::Serializer>(xs: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    struct Ext(f64);
    impl Serialize for Ext {
        fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
            crate::serialize_extended_f64(&self.0, s)
        }
    }
    let mut seq = s.serialize_seq(Some(xs.len()))?;
    for x in xs {
        seq.serialize_element(&Ext(*x))?;
    }
    seq.end()
}

/// Indicators `chi_(a, 2a)` pushed toward the offending endpoint of a
/// report that says No; `diverging` when the ratios blow up.
pub fn divergence_witness(
    w: &WeightProfile,
    h: &WeightProfile,
    p: f64,
    q: f64,
    report: &ConditionReport,
) -> Result<DivergenceWitness> {
    let endpoint = match (report.bounded, report.offending_endpoint) {
        (Ternary::No, Some(side)) => side,
        _ => return Err(Error::Refused("no certified-divergent quantity to witness".to_string())),
    };
    let candidates: Vec<Candidate> = (0..=8)
        .map(|k| {
            let a = match endpoint {
                Side::Zero => 2f64.powi(-3 * k),
                Side::Infinity => 2f64.powi(3 * k),
            };
            Candidate::new(Shape::Indicator { a, b: 2.0 * a })
        })
        .collect();
    let ratios = candidates
        .iter()
        .map(|c| hardy_ratio(c, w, h, p, q, report.operator))
        .collect::<Result<Vec<f64>>>()?;
    let first = ratios[0];
    let last = ratios[ratios.len() - 1];
    let increasing = ratios.windows(2).rev().take(4).all(|r| r[1] >= r[0]);
    let diverging = ratios.iter().any(|r| r.is_infinite()) || (increasing && last >= 10.0 * first);
    Ok(DivergenceWitness {
        endpoint,
        candidates,
        ratios,
        diverging,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum InequalityForm {
    /// `||u||_{L^q(h)} <= C ||u'||_{L^p(w)}`.
    Plain,
    /// `||u||_{L^q(h)} <= C (||u'||_{L^p(w)} + |Tr_0 u|)`.
    Extended,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum InequalityStatus {
    Holds,
    Violated,
    /// `||u||_{L^q(h)}` is infinite because `u` has a nonzero trace at 0 and
    /// `h` is not integrable near 0.
    Obstruction,
    Undetermined,
}

#[derive(Debug, Clone, Serialize)]
pub struct InequalityReport {
    pub form: InequalityForm,
    #[serde(serialize_with = "crate::serialize_extended_f64")]
    pub lhs: f64,
    #[serde(serialize_with = "crate::serialize_extended_f64")]
    pub rhs: f64,
    #[serde(serialize_with = "crate::serialize_extended_f64")]
    pub slack: f64,
    #[serde(serialize_with = "crate::serialize_extended_f64_opt")]
    pub trace_zero: Option<f64>,
    pub lhs_provenance: QuadOutcome,
    pub status: InequalityStatus,
}

#[allow(clippy::too_many_arguments)]
pub fn check_inequality(
    u: &DirichletFunction,
    w: &WeightProfile,
    h: &WeightProfile,
    p: f64,
    q: f64,
    c: f64,
    form: InequalityForm,
) -> Result<InequalityReport> {
    check_exponent(p)?;
    check_exponent(q)?;
    if !(c >= 0.0 && c.is_finite()) {
        return Err(Error::InvalidArgument(format!("constant must be finite and nonnegative, got {c}")));
    }
    let trace = match trace_zero(u, w, p, HARDY_TOL) {
        Ok(t) => Some(t.value),
        Err(Error::TraceUndefined { .. } | Error::Refused(_)) => None,
        Err(e) => return Err(e),
    };
    if form == InequalityForm::Extended && trace.is_none() {
        return Err(Error::TraceUndefined { side: Side::Zero });
    }

    let lhs_out = if u.derivative.is_zero() {
        if u.anchor_value == 0.0 {
            QuadOutcome::exact(0.0)
        } else {
            let mut o = Density::Weight(h).integral(0.0, f64::INFINITY)?;
            o.value *= u.anchor_value.abs().powf(q);
            o
        }
    } else {
        let (lo, hi) = u.derivative.support();
        let mut breaks = u.derivative.breakpoints().to_vec();
        breaks.extend([lo, hi, u.anchor].into_iter().filter(|x| *x > 0.0 && x.is_finite()));
        let failed = Cell::new(false);
        let out = quad::integrate_span(
            |t| match u.value_at(t) {
                Ok(v) => v.abs().powf(q) * h.eval(t),
                Err(_) => {
                    failed.set(true);
                    f64::NAN
                }
            },
            0.0,
            f64::INFINITY,
            &breaks,
            HARDY_TOL,
        )?;
        if failed.get() {
            QuadOutcome {
                verdict: Verdict::Inconclusive,
                ..out
            }
        } else {
            out
        }
    };
    let semi = seminorm(u, w, p)?;
    let rhs = c * match form {
        InequalityForm::Plain => semi,
        InequalityForm::Extended => semi + trace.map_or(0.0, f64::abs),
    };
    let lhs = value_or_inf(&lhs_out);
    let status = match lhs_out.verdict {
        Verdict::Inconclusive => InequalityStatus::Undetermined,
        Verdict::Diverged => {
            let h_head = Density::Weight(h).integral(0.0, 1.0)?;
            if trace.is_some_and(|t| t != 0.0) && h_head.verdict == Verdict::Diverged {
                InequalityStatus::Obstruction
            } else if rhs.is_finite() {
                InequalityStatus::Violated
            } else {
                InequalityStatus::Undetermined
            }
        }
        Verdict::Converged => {
            if lhs <= rhs {
                InequalityStatus::Holds
            } else {
                InequalityStatus::Violated
            }
        }
    };
    Ok(InequalityReport {
        form,
        lhs: lhs.powf(1.0 / q),
        rhs,
        slack: rhs - lhs.powf(1.0 / q),
        trace_zero: trace,
        lhs_provenance: lhs_out,
        status,
    })
}
