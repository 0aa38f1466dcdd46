//! Endpoint integrability of the dual density and the four density regimes.
//!
//! `w` satisfies the condition at `0` when `sigma = w^{-1/(p-1)}` is integrable
//! on `(0, 1)`, and at infinity when it is integrable on `(1, inf)`. The pair
//! of answers decides which subspace the compactly supported functions are
//! dense in and whether the endpoint traces exist.

use serde::Serialize;

use crate::quad::{self, QuadOutcome, Verdict};
use crate::weights::{check_exponent, WeightProfile};
use crate::{Error, Result, Side, Ternary};

/// Split point between "near 0" and "near infinity".
pub const SPLIT_POINT: f64 = 1.0;
/// Relative tolerance used for the endpoint integrals of `sigma`.
pub const CLASSIFY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DecisionMethod {
    /// Decided from the weight's power-law exponent at the endpoint.
    EndpointRule,
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BpVerdict {
    pub side: Side,
    pub member: Ternary,
    pub integral: QuadOutcome,
    pub method: DecisionMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RegimeTag {
    ZeroOnly,
    InfinityOnly,
    Neither,
    Both,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Regime {
    pub tag: RegimeTag,
    pub zero: BpVerdict,
    pub infinity: BpVerdict,
}

/// Closure of compactly supported functions in the Dirichlet space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DensityClass {
    KernelOfTraceZero,
    KernelOfTraceInfinity,
    WholeSpace,
    IntersectionOfKernels,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityReport {
    pub regime: Regime,
    pub d0_characterization: DensityClass,
    pub trace_zero_wellposed: Ternary,
    pub trace_infinity_wellposed: Ternary,
    pub notes: Vec<String>,
}

/// `t -> w(t)^{-1/(p-1)}`; non-finite where the weight under- or overflows.
pub fn sigma_fn(w: &WeightProfile, p: f64) -> impl Fn(f64) -> f64 + '_ {
    let exponent = -1.0 / (p - 1.0);
    move |t| {
        let v = w.eval(t);
        if v > 0.0 {
            v.powf(exponent)
        } else {
            f64::NAN
        }
    }
}

pub(crate) fn sigma_error(e: Error) -> Error {
    match e {
        Error::NonFinite { t } => Error::WeightUnderflow { t },
        other => other,
    }
}

fn member_of(verdict: Verdict) -> Ternary {
    match verdict {
        Verdict::Converged => Ternary::Yes,
        Verdict::Diverged => Ternary::No,
        Verdict::Inconclusive => Ternary::Unknown,
    }
}

fn verdict_of(member: bool) -> Verdict {
    if member {
        Verdict::Converged
    } else {
        Verdict::Diverged
    }
}

fn endpoint_verdict(w: &WeightProfile, p: f64, side: Side) -> Result<BpVerdict> {
    check_exponent(p)?;
    let sigma = sigma_fn(w, p);
    let (lo, hi) = match side {
        Side::Zero => (0.0, SPLIT_POINT),
        Side::Infinity => (SPLIT_POINT, f64::INFINITY),
    };

    if let Some(hints) = w.hints() {
        let alpha = match side {
            Side::Zero => hints.zero,
            Side::Infinity => hints.infinity,
        };
        // sigma ~ t^{-alpha/(p-1)}; the borderline alpha = p-1 is harmonic
        let member = match side {
            Side::Zero => alpha < p - 1.0,
            Side::Infinity => alpha > p - 1.0,
        };
        let integral = if let Some(value) = w.sigma_integral_closed(p, lo, hi) {
            if member {
                QuadOutcome::exact(value)
            } else {
                resolved_piece(&sigma, side)?
            }
        } else if member {
            let mut q = quad::integrate_span(&sigma, lo, hi, &[], CLASSIFY_TOL).map_err(sigma_error)?;
            q.verdict = Verdict::Converged;
            q
        } else {
            resolved_piece(&sigma, side)?
        };
        return Ok(BpVerdict {
            side,
            member: if member { Ternary::Yes } else { Ternary::No },
            integral: QuadOutcome {
                verdict: verdict_of(member),
                ..integral
            },
            method: DecisionMethod::EndpointRule,
        });
    }

    let integral = quad::integrate_span(&sigma, lo, hi, &[], CLASSIFY_TOL).map_err(sigma_error)?;
    Ok(BpVerdict {
        side,
        member: member_of(integral.verdict),
        integral,
        method: DecisionMethod::Quadrature,
    })
}

/// Partial integral reported with a divergent endpoint decision: the shell
/// adjacent to the split point.
fn resolved_piece<F: Fn(f64) -> f64>(sigma: &F, side: Side) -> Result<QuadOutcome> {
    let (a, b) = match side {
        Side::Zero => (0.5 * SPLIT_POINT, SPLIT_POINT),
        Side::Infinity => (SPLIT_POINT, 2.0 * SPLIT_POINT),
    };
    let piece = quad::integrate(sigma, a, b, CLASSIFY_TOL).map_err(sigma_error)?;
    Ok(QuadOutcome {
        verdict: Verdict::Diverged,
        ..piece
    })
}

/// Is `sigma` integrable near `0`?
pub fn bp_zero(w: &WeightProfile, p: f64) -> Result<BpVerdict> {
    endpoint_verdict(w, p, Side::Zero)
}

/// Is `sigma` integrable near infinity?
pub fn bp_infinity(w: &WeightProfile, p: f64) -> Result<BpVerdict> {
    endpoint_verdict(w, p, Side::Infinity)
}

pub fn bp(w: &WeightProfile, p: f64, side: Side) -> Result<BpVerdict> {
    endpoint_verdict(w, p, side)
}

pub fn regime_tag(zero: Ternary, infinity: Ternary) -> RegimeTag {
    match (zero, infinity) {
        (Ternary::Yes, Ternary::No) => RegimeTag::ZeroOnly,
        (Ternary::No, Ternary::Yes) => RegimeTag::InfinityOnly,
        (Ternary::No, Ternary::No) => RegimeTag::Neither,
        (Ternary::Yes, Ternary::Yes) => RegimeTag::Both,
        _ => RegimeTag::Unknown,
    }
}

pub fn regime(w: &WeightProfile, p: f64) -> Result<Regime> {
    let zero = bp_zero(w, p)?;
    let infinity = bp_infinity(w, p)?;
    Ok(Regime {
        tag: regime_tag(zero.member, infinity.member),
        zero,
        infinity,
    })
}

pub fn density_class(tag: RegimeTag) -> DensityClass {
    match tag {
        RegimeTag::ZeroOnly => DensityClass::KernelOfTraceZero,
        RegimeTag::InfinityOnly => DensityClass::KernelOfTraceInfinity,
        RegimeTag::Neither => DensityClass::WholeSpace,
        RegimeTag::Both => DensityClass::IntersectionOfKernels,
        RegimeTag::Unknown => DensityClass::Undetermined,
    }
}

pub fn density_report(w: &WeightProfile, p: f64) -> Result<DensityReport> {
    let regime = regime(w, p)?;
    let mut notes = Vec::new();
    for v in [&regime.zero, &regime.infinity] {
        let end = v.side;
        notes.push(match v.member {
            Ternary::Yes => format!(
                "sigma integrable near {end}: the trace at {end} exists and its kernel is closed; \
                 functions with nonzero trace at {end} are not limits of compactly supported ones"
            ),
            Ternary::No => format!(
                "sigma not integrable near {end}: no trace at {end} exists (sharp), and caloric \
                 ramps toward {end} have energy tending to zero"
            ),
            Ternary::Unknown => format!(
                "integrability of sigma near {end} undetermined ({} evaluations); characterization withheld",
                v.integral.evaluations
            ),
        });
    }
    if regime.tag == RegimeTag::Both {
        notes.push("both traces exist; zero-mean truncations approximate the common kernel".to_string());
    }
    Ok(DensityReport {
        d0_characterization: density_class(regime.tag),
        trace_zero_wellposed: regime.zero.member,
        trace_infinity_wellposed: regime.infinity.member,
        regime,
        notes,
    })
}
