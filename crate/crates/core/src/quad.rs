//! Adaptive quadrature on subintervals of `(0, inf)`.
//!
//! Proper integrals use a nested 7/15-point Gauss–Kronrod pair with global
//! adaptive bisection. Improper integrals toward `0` or `inf` are summed over
//! dyadic shells and carry a three-state verdict: the local power-law
//! exponent of the integrand settles clear cases, and a test on the ratios of
//! consecutive shell integrals settles the rest (or reports `Inconclusive`).

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use serde::Serialize;

use crate::{Error, Result, Side};

/// Absolute error floor of every proper integral.
pub const TOL_ABS: f64 = 1e-12;
/// Maximum number of subintervals of a single proper integral.
pub const MAX_INTERVALS: usize = 10_000;
/// Maximum number of dyadic shells of an improper integral.
pub const MAX_SHELLS: usize = 200;
/// Half-width of the band around `-1` in which the exponent does not decide.
pub const EXPONENT_MARGIN: f64 = 0.1;

const RUN_LENGTH: usize = 8;
const GROWTH_RATIO: f64 = 1.05;
const DECAY_RATIO: f64 = 0.95;
const STABLE_WINDOW: usize = 16;
const STABLE_SPREAD: f64 = 1e-4;
const EQUAL_BAND: f64 = 1e-3;
const EXPONENT_RMS_HIGH: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Converged,
    Diverged,
    Inconclusive,
}

/// Result of a (possibly improper) integral.
///
/// For `Diverged` the value is the partial integral over the shells that were
/// resolved before the decision, not the integral itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadOutcome {
    pub value: f64,
    pub error_estimate: f64,
    pub verdict: Verdict,
    pub evaluations: usize,
}

impl QuadOutcome {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            error_estimate: 0.0,
            verdict: Verdict::Converged,
            evaluations: 0,
        }
    }

    pub fn diverged(partial: f64) -> Self {
        Self {
            value: partial,
            error_estimate: 0.0,
            verdict: Verdict::Diverged,
            evaluations: 0,
        }
    }

    pub fn is_converged(&self) -> bool {
        self.verdict == Verdict::Converged
    }

    /// Sum of two integrals over adjacent pieces.
    pub fn combine(self, other: QuadOutcome) -> QuadOutcome {
        let verdict = match (self.verdict, other.verdict) {
            (Verdict::Diverged, _) | (_, Verdict::Diverged) => Verdict::Diverged,
            (Verdict::Inconclusive, _) | (_, Verdict::Inconclusive) => Verdict::Inconclusive,
            _ => Verdict::Converged,
        };
        QuadOutcome {
            value: self.value + other.value,
            error_estimate: self.error_estimate + other.error_estimate,
            verdict,
            evaluations: self.evaluations + other.evaluations,
        }
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for XGK[1], XGK[3], XGK[5] and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn sample<F: Fn(f64) -> f64>(f: &F, t: f64) -> Result<f64> {
    let v = f(t);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite { t })
    }
}

/// Weights `c` with `sum_j c_j f(x_j)` the value at `x = 1` of the degree-14
/// interpolant through the Kronrod nodes, taken in ascending order.
fn edge_extrapolation() -> &'static [f64; 15] {
    static WEIGHTS: OnceLock<[f64; 15]> = OnceLock::new();
    WEIGHTS.get_or_init(|| {
        let xs = kronrod_nodes();
        let mut c = [0.0; 15];
        for (j, cj) in c.iter_mut().enumerate() {
            *cj = (0..15)
                .filter(|&k| k != j)
                .map(|k| (1.0 - xs[k]) / (xs[j] - xs[k]))
                .product();
        }
        c
    })
}

fn kronrod_nodes() -> [f64; 15] {
    let mut xs = [0.0; 15];
    for j in 0..7 {
        xs[j] = -XGK[j];
        xs[14 - j] = XGK[j];
    }
    xs
}

/// One Gauss–Kronrod 7/15 panel: (Kronrod value, error estimate).
///
/// The error is the QUADPACK rescaling `I * min(1, (200 |K - G| / I)^{3/2})`
/// with `I` the Kronrod integral of `|f - mean f|`, raised when `f` at a
/// panel end (approached from inside) disagrees with the interpolant through
/// the nodes: a kink between the outermost node and the end is invisible to
/// both rules.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<(f64, f64)> {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut fs = [0.0; 15];
    fs[7] = sample(f, centre)?;
    for j in 0..7 {
        let dx = half * XGK[j];
        fs[j] = sample(f, centre - dx)?;
        fs[14 - j] = sample(f, centre + dx)?;
    }
    let mut kronrod = WGK[7] * fs[7];
    let mut gauss = WG[3] * fs[7];
    let mut abs = WGK[7] * fs[7].abs();
    for j in 0..7 {
        let pair = fs[j] + fs[14 - j];
        kronrod += WGK[j] * pair;
        abs += WGK[j] * (fs[j].abs() + fs[14 - j].abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[7] * (fs[7] - mean).abs();
    for j in 0..7 {
        asc += WGK[j] * ((fs[j] - mean).abs() + (fs[14 - j] - mean).abs());
    }
    let (asc, abs) = (asc * half.abs(), abs * half.abs());
    let mut err = ((kronrod - gauss) * half).abs();
    if asc != 0.0 && err != 0.0 {
        err = asc * (200.0 * err / asc).powf(1.5).min(1.0);
    }
    let c = edge_extrapolation();
    let right: f64 = (0..15).map(|j| c[j] * fs[j]).sum();
    let left: f64 = (0..15).map(|j| c[j] * fs[14 - j]).sum();
    let blind = half.abs() * (1.0 - XGK[0]);
    // One-sided limits: a declared jump sits exactly on a panel end.
    let (inner_a, inner_b) = if a < b { (a.next_up(), b.next_down()) } else { (a.next_down(), b.next_up()) };
    for (x, extrapolated) in [(inner_a, left), (inner_b, right)] {
        let v = f(x);
        if v.is_finite() && extrapolated.is_finite() {
            err = err.max((v - extrapolated).abs() * blind);
        }
    }
    err = err.max(50.0 * f64::EPSILON * abs);
    Ok((kronrod * half, err))
}

/// Kronrod nodes plus the two panel ends.
const PANEL_EVALUATIONS: usize = 17;

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    // Largest error first; ties broken by position for determinism.
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

/// Integral of `f` over `[a, b]` to relative tolerance `tol` (absolute floor
/// [`TOL_ABS`]). Reversed limits give the negated integral.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<QuadOutcome> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidArgument(format!("integration limits must be finite: [{a}, {b}]")));
    }
    if a == b {
        return Ok(QuadOutcome::exact(0.0));
    }
    if a > b {
        let mut out = integrate(f, b, a, tol)?;
        out.value = -out.value;
        return Ok(out);
    }

    // A panel's estimate is never smaller than half the disagreement between
    // its parent and the two halves. The root is always split once.
    let split = |p: &Panel| -> Result<Option<(Panel, Panel)>> {
        let mid = 0.5 * (p.a + p.b);
        if mid <= p.a || mid >= p.b {
            return Ok(None);
        }
        let (v1, e1) = gk15(&f, p.a, mid)?;
        let (v2, e2) = gk15(&f, mid, p.b)?;
        let gap = 0.5 * (v1 + v2 - p.value).abs();
        Ok(Some((
            Panel { a: p.a, b: mid, value: v1, error: e1.max(gap) },
            Panel { a: mid, b: p.b, value: v2, error: e2.max(gap) },
        )))
    };

    let (value, error) = gk15(&f, a, b)?;
    let root = Panel { a, b, value, error };
    let mut evaluations = PANEL_EVALUATIONS;
    let mut heap = BinaryHeap::new();
    let mut frozen: Vec<Panel> = Vec::new();
    match split(&root)? {
        Some((l, r)) => {
            evaluations += 2 * PANEL_EVALUATIONS;
            heap.push(l);
            heap.push(r);
        }
        None => frozen.push(root),
    }
    let mut total: f64 = heap.iter().chain(&frozen).map(|p| p.value).sum();
    let mut total_err: f64 = heap.iter().chain(&frozen).map(|p| p.error).sum();
    let mut panels = heap.len().max(1);

    loop {
        if total_err <= (tol * total.abs()).max(TOL_ABS) {
            return Ok(QuadOutcome {
                value: total,
                error_estimate: total_err,
                verdict: Verdict::Converged,
                evaluations,
            });
        }
        let Some(worst) = heap.pop() else { break };
        if panels >= MAX_INTERVALS {
            heap.push(worst);
            break;
        }
        let Some((l, r)) = split(&worst)? else {
            // cannot split further in floating point
            frozen.push(worst);
            continue;
        };
        evaluations += 2 * PANEL_EVALUATIONS;
        panels += 1;
        total += l.value + r.value - worst.value;
        total_err += l.error + r.error - worst.error;
        heap.push(l);
        heap.push(r);
    }

    // Recompute from the panels to shed accumulated update roundoff.
    let value: f64 = heap.iter().chain(&frozen).map(|p| p.value).sum();
    let err: f64 = heap.iter().chain(&frozen).map(|p| p.error).sum();
    Ok(QuadOutcome {
        value,
        error_estimate: err,
        verdict: if err <= (tol * value.abs()).max(TOL_ABS) {
            Verdict::Converged
        } else {
            Verdict::Inconclusive
        },
        evaluations,
    })
}

/// Integral over `[a, b]` split at the given interior breakpoints.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: f64,
) -> Result<QuadOutcome> {
    let (lo, hi, sign) = if a <= b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut points = vec![lo];
    points.extend(breaks.iter().copied().filter(|&x| x > lo && x < hi));
    points.push(hi);
    points.sort_by(f64::total_cmp);
    points.dedup();
    let mut out = QuadOutcome::exact(0.0);
    for w in points.windows(2) {
        out = out.combine(integrate(&f, w[0], w[1], tol)?);
    }
    out.value *= sign;
    Ok(out)
}

/// Least-squares power-law exponent of an integrand near an endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentEstimate {
    pub slope: f64,
    pub confidence: Confidence,
    pub residual_rms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Confidence {
    High,
    Low,
}

/// Exponent estimate from 12 probes at ratio 2 starting at `2^{-20}` (for
/// [`Side::Zero`]) or `2^{20}` (for [`Side::Infinity`]).
pub fn endpoint_exponent<F: Fn(f64) -> f64>(f: F, endpoint: Side) -> Result<ExponentEstimate> {
    let start = match endpoint {
        Side::Zero => 2f64.powi(-20),
        Side::Infinity => 2f64.powi(20),
    };
    endpoint_exponent_with(f, endpoint, start, 12, 2.0)
}

pub fn endpoint_exponent_with<F: Fn(f64) -> f64>(
    f: F,
    endpoint: Side,
    start: f64,
    probes: usize,
    ratio: f64,
) -> Result<ExponentEstimate> {
    let step = match endpoint {
        Side::Zero => 1.0 / ratio,
        Side::Infinity => ratio,
    };
    let mut xs = Vec::with_capacity(probes);
    let mut ys = Vec::with_capacity(probes);
    let mut t = start;
    for _ in 0..probes {
        let v = f(t);
        if !(v.is_finite() && v != 0.0) {
            return Err(Error::InvalidArgument(format!(
                "endpoint exponent needs nonzero finite samples; got {v:e} at t = {t:e}"
            )));
        }
        xs.push(t.ln());
        ys.push(v.abs().ln());
        t *= step;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - my - slope * (x - mx)).powi(2))
        .sum();
    let residual_rms = (rss / n).sqrt();
    Ok(ExponentEstimate {
        slope,
        confidence: if residual_rms < EXPONENT_RMS_HIGH {
            Confidence::High
        } else {
            Confidence::Low
        },
        residual_rms,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Hint {
    Converges,
    Diverges,
    Undecided,
}

fn exponent_hint(est: Option<ExponentEstimate>, endpoint: Side) -> Hint {
    let Some(est) = est else { return Hint::Undecided };
    if est.confidence != Confidence::High {
        return Hint::Undecided;
    }
    let e = est.slope;
    let (conv, div) = match endpoint {
        Side::Zero => (e > -1.0 + EXPONENT_MARGIN, e < -1.0 - EXPONENT_MARGIN),
        Side::Infinity => (e < -1.0 - EXPONENT_MARGIN, e > -1.0 + EXPONENT_MARGIN),
    };
    if conv {
        Hint::Converges
    } else if div {
        Hint::Diverges
    } else {
        Hint::Undecided
    }
}

fn remainder(last: f64, r: f64) -> f64 {
    last.abs() * r / (1.0 - r)
}

/// Sums shells `shell(k)` for `k = 0, 1, ...` and decides convergence.
fn shell_sum<F, S>(f: &F, shell: S, hint: Hint, tol: f64) -> Result<QuadOutcome>
where
    F: Fn(f64) -> f64,
    S: Fn(usize) -> (f64, f64),
{
    let mut sums: Vec<f64> = Vec::new();
    let mut ratios: Vec<f64> = Vec::new();
    let mut total = 0.0;
    let mut err = 0.0;
    let mut evaluations = 0;
    let budget = if hint == Hint::Diverges { RUN_LENGTH } else { MAX_SHELLS };

    for k in 0..budget {
        let (lo, hi) = shell(k);
        let piece = integrate(f, lo, hi, tol)?;
        evaluations += piece.evaluations;
        if piece.verdict != Verdict::Converged {
            return Ok(QuadOutcome {
                value: total,
                error_estimate: err + piece.error_estimate,
                verdict: Verdict::Inconclusive,
                evaluations,
            });
        }
        total += piece.value;
        err += piece.error_estimate;
        if let Some(&prev) = sums.last() {
            let prev: f64 = prev;
            let r = if prev == 0.0 {
                if piece.value == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                (piece.value / prev).abs()
            };
            ratios.push(r);
        }
        sums.push(piece.value);

        if hint == Hint::Diverges {
            continue;
        }
        let outcome = |verdict, value, error_estimate| QuadOutcome {
            value,
            error_estimate,
            verdict,
            evaluations,
        };

        if sums.len() >= RUN_LENGTH && sums[sums.len() - RUN_LENGTH..].iter().all(|&s| s == 0.0) {
            return Ok(outcome(Verdict::Converged, total, err));
        }
        if ratios.len() < RUN_LENGTH {
            continue;
        }
        let run = &ratios[ratios.len() - RUN_LENGTH..];
        if hint != Hint::Converges {
            if run.iter().all(|&r| r > GROWTH_RATIO) {
                return Ok(outcome(Verdict::Diverged, total, err));
            }
            if ratios.len() >= STABLE_WINDOW {
                let window = &ratios[ratios.len() - STABLE_WINDOW..];
                let (lo, hi) = min_max(window);
                let mean = window.iter().sum::<f64>() / window.len() as f64;
                if hi - lo <= STABLE_SPREAD && (mean - 1.0).abs() <= EQUAL_BAND {
                    // equal shell contributions: the partial sums grow linearly
                    return Ok(outcome(Verdict::Diverged, total, err));
                }
            }
        }

        let (r_lo, r_hi) = min_max(run);
        let decaying = r_hi < DECAY_RATIO;
        let stable = ratios.len() >= STABLE_WINDOW && {
            let (lo, hi) = min_max(&ratios[ratios.len() - STABLE_WINDOW..]);
            hi - lo <= STABLE_SPREAD && hi < 1.0 - EQUAL_BAND
        };
        let trusted = hint == Hint::Converges && r_hi < 1.0;
        if !(decaying || stable || trusted) {
            continue;
        }
        let last = *sums.last().expect("nonempty");
        let r_last = *ratios.last().expect("nonempty");
        let rem = remainder(last, r_last).copysign(last);
        let spread = remainder(last, r_hi) - remainder(last, r_lo);
        let value = total + rem;
        if spread <= (tol * value.abs()).max(TOL_ABS) {
            return Ok(outcome(Verdict::Converged, value, err + spread));
        }
    }

    Ok(QuadOutcome {
        value: total,
        error_estimate: err,
        verdict: if hint == Hint::Diverges {
            Verdict::Diverged
        } else {
            Verdict::Inconclusive
        },
        evaluations,
    })
}

fn min_max(xs: &[f64]) -> (f64, f64) {
    xs.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// Decides and evaluates `int_0^b f`.
pub fn improper_to_zero<F: Fn(f64) -> f64>(f: F, b: f64, tol: f64) -> Result<QuadOutcome> {
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::InvalidArgument(format!("upper limit must be positive, got {b}")));
    }
    let start = b.min(1.0) * 2f64.powi(-20);
    let est = endpoint_exponent_with(&f, Side::Zero, start, 12, 2.0).ok();
    let hint = exponent_hint(est, Side::Zero);
    shell_sum(
        &f,
        |k| (b * 0.5f64.powi(k as i32 + 1), b * 0.5f64.powi(k as i32)),
        hint,
        tol,
    )
}

/// Decides and evaluates `int_a^inf f`.
pub fn improper_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, tol: f64) -> Result<QuadOutcome> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::InvalidArgument(format!("lower limit must be positive, got {a}")));
    }
    let start = a.max(1.0) * 2f64.powi(20);
    let est = endpoint_exponent_with(&f, Side::Infinity, start, 12, 2.0).ok();
    let hint = exponent_hint(est, Side::Infinity);
    shell_sum(
        &f,
        |k| (a * 2f64.powi(k as i32), a * 2f64.powi(k as i32 + 1)),
        hint,
        tol,
    )
}

/// Integral over `(lo, hi)` with `0 <= lo < hi <= inf`, split at `breaks`.
/// Endpoint pieces at `0` or `inf` go through the improper routines.
pub fn integrate_span<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    breaks: &[f64],
    tol: f64,
) -> Result<QuadOutcome> {
    if !(lo >= 0.0 && hi > lo) {
        return Err(Error::InvalidArgument(format!("invalid span ({lo}, {hi})")));
    }
    let mut interior: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|&x| x > lo && x < hi && x.is_finite())
        .collect();
    interior.sort_by(f64::total_cmp);
    interior.dedup();

    let first = if lo == 0.0 {
        match interior.first() {
            Some(&x) => x,
            None if hi.is_finite() => hi,
            None => 1.0,
        }
    } else {
        lo
    };
    let last = if hi.is_infinite() {
        match interior.last() {
            Some(&x) => x,
            None => first.max(1.0),
        }
    } else {
        hi
    };

    let mut out = QuadOutcome::exact(0.0);
    if lo == 0.0 {
        out = out.combine(improper_to_zero(&f, first, tol)?);
    }
    if last > first {
        out = out.combine(integrate_with_breaks(&f, first, last, &interior, tol)?);
    }
    if hi.is_infinite() {
        out = out.combine(improper_to_infinity(&f, last, tol)?);
    }
    Ok(out)
}
