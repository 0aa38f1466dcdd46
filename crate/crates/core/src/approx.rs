//! Approximation of Dirichlet functions by compactly supported ones.
//!
//! Three constructions:
//! - [`truncate_sequence`] cuts the derivative to the window `(1/n, n)`;
//! - [`caloric_extension`] replaces a constant tail (or head) by the
//!   energy-minimizing ramp down to zero;
//! - [`zero_mean_truncation`] truncates and subtracts the window mean of the
//!   derivative so the result vanishes at both ends of its support.
//!
//! [`convergence_diagnostic`] runs one construction along a schedule and
//! reports the gaps `||(u_n - u)'||_{L^p(w)}`.

use serde::Serialize;

use crate::space::{seminorm, sigma_integral, DirichletFunction, Derivative, SPACE_TOL};
use crate::weights::{check_exponent, WeightProfile};
use crate::{Error, Result, Side};

/// Sample count for the constant-beyond-cut check.
const CONSTANCY_SAMPLES: usize = 200;
/// Decades sampled past the cut by the constancy check.
const CONSTANCY_DECADES: f64 = 8.0;
/// Consecutive gaps that must agree within [`PLATEAU_SPREAD`] to call a stall.
pub const PLATEAU_LENGTH: usize = 5;
pub const PLATEAU_SPREAD: f64 = 0.01;
/// Relative agreement required between measured and closed-form gaps.
pub const CROSS_CHECK_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CaloricSide {
    /// `u` is constant on `[cut, inf)`; the ramp ends at `horizon > cut`.
    TailToInfinity,
    /// `u` is constant on `(0, cut]`; the ramp starts at `horizon < cut`.
    HeadToZero,
}

/// A compactly supported approximant with its closed-form gap, if known.
#[derive(Debug, Clone)]
pub struct Approximant {
    pub function: DirichletFunction,
    pub predicted_gap: Option<f64>,
}

impl Approximant {
    /// `[s_n, t_n]`: the declared support of the derivative.
    pub fn support(&self) -> (f64, f64) {
        self.function.derivative.support()
    }
}

fn check_window(n: u64) -> Result<f64> {
    if n <= 1 {
        return Err(Error::InvalidArgument(format!("invalid window: n = {n} must exceed 1")));
    }
    Ok(n as f64)
}

/// `u~_n` with derivative `u' chi_(1/n, n)`.
///
/// `Side::Zero` anchors at `1/n` with value 0 (so `u~_n = 0` near 0);
/// `Side::Infinity` anchors at `n` with value 0.
pub fn truncate_sequence(u: &DirichletFunction, n: u64, side: Side) -> Result<Approximant> {
    let nf = check_window(n)?;
    let (lo, hi) = (1.0 / nf, nf);
    let derivative = u.derivative.clone().with_support(lo, hi);
    let anchor = match side {
        Side::Zero => lo,
        Side::Infinity => hi,
    };
    Ok(Approximant {
        function: DirichletFunction::new(anchor, 0.0, derivative, format!("truncate({}, {n})", u.label))?,
        predicted_gap: None,
    })
}

fn check_constant_beyond(u: &DirichletFunction, cut: f64, side: CaloricSide) -> Result<()> {
    let (lo, hi) = u.derivative.support();
    let clear = match side {
        CaloricSide::TailToInfinity => hi <= cut,
        CaloricSide::HeadToZero => lo >= cut,
    };
    if u.derivative.is_zero() || clear {
        return Ok(());
    }
    let step = CONSTANCY_DECADES * std::f64::consts::LN_10 / CONSTANCY_SAMPLES as f64;
    for i in 1..=CONSTANCY_SAMPLES {
        let factor = (step * i as f64).exp();
        let t = match side {
            CaloricSide::TailToInfinity => cut * factor,
            CaloricSide::HeadToZero => cut / factor,
        };
        let value = u.derivative.eval(t);
        if value != 0.0 {
            return Err(Error::NotConstantBeyondCut { t, value });
        }
    }
    Ok(())
}

/// Replaces the constant part of `u` beyond `cut` by the minimizer ramp that
/// reaches 0 at `horizon`.
///
/// With `C` the constant value, the gap is `|C| (int_cut^horizon sigma)^{(1-p)/p}`.
pub fn caloric_extension(
    u: &DirichletFunction,
    w: &WeightProfile,
    p: f64,
    side: CaloricSide,
    cut: f64,
    horizon: f64,
) -> Result<Approximant> {
    check_exponent(p)?;
    let ordered = match side {
        CaloricSide::TailToInfinity => cut < horizon,
        CaloricSide::HeadToZero => horizon < cut,
    };
    if !(cut > 0.0 && cut.is_finite() && horizon > 0.0 && horizon.is_finite() && ordered) {
        return Err(Error::InvalidArgument(format!(
            "horizon {horizon} must lie beyond cut {cut} on the {side:?} side"
        )));
    }
    check_constant_beyond(u, cut, side)?;
    let c = u.value_at(cut)?;
    let (lo, hi) = if cut < horizon { (cut, horizon) } else { (horizon, cut) };
    let kept = match side {
        CaloricSide::TailToInfinity => u.derivative.clone().with_support(0.0, cut),
        CaloricSide::HeadToZero => u.derivative.clone().with_support(cut, f64::INFINITY),
    };
    let label = format!("caloric({}, {horizon})", u.label);
    if c == 0.0 {
        return Ok(Approximant {
            function: DirichletFunction::new(cut, 0.0, kept, label)?,
            predicted_gap: Some(0.0),
        });
    }
    let out = sigma_integral(w, p, lo, hi)?;
    if !out.is_converged() {
        return Err(Error::Quadrature(format!("integral of sigma over [{lo}, {hi}] not converged")));
    }
    let norm = out.value;
    // Built for C = 1 and scaled back, so the ramp runs from C to 0.
    let slope = match side {
        CaloricSide::TailToInfinity => -c / norm,
        CaloricSide::HeadToZero => c / norm,
    };
    let weight = w.clone();
    let ramp = Derivative::from_fn(move |t| slope * weight.eval(t).powf(-1.0 / (p - 1.0))).with_support(lo, hi);
    let derivative = if kept.is_zero() {
        ramp
    } else {
        kept.zip_with(&ramp, |a, b| a + b)
    };
    Ok(Approximant {
        function: DirichletFunction::new(cut, c, derivative, label)?,
        predicted_gap: Some(c.abs() * norm.powf((1.0 - p) / p)),
    })
}

/// `c_n = (n - 1/n)^{-1} int_{1/n}^n u'`.
pub fn window_mean(u: &DirichletFunction, n: u64) -> Result<f64> {
    let nf = check_window(n)?;
    Ok(u.derivative.integral(1.0 / nf, nf, SPACE_TOL)? / (nf - 1.0 / nf))
}

/// `u_n` with derivative `chi_(1/n, n) (u' - c_n)`, anchored at `1/n` with value 0.
pub fn zero_mean_truncation(u: &DirichletFunction, n: u64) -> Result<Approximant> {
    let nf = check_window(n)?;
    let c = window_mean(u, n)?;
    let source = u.derivative.clone();
    let derivative = Derivative::from_fn(move |t| source.eval(t) - c)
        .with_breakpoints(u.derivative.breakpoints().iter().copied())
        .with_support(1.0 / nf, nf);
    Ok(Approximant {
        function: DirichletFunction::new(1.0 / nf, 0.0, derivative, format!("zero_mean({}, {n})", u.label))?,
        predicted_gap: None,
    })
}

/// Which construction a diagnostic runs. For [`Construction::Caloric`] the
/// schedule entry `n` sets the horizon to `cut * n` (tail) or `cut / n` (head).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Construction {
    Truncation(Side),
    Caloric { side: CaloricSide, cut: f64 },
    ZeroMean,
}

impl Construction {
    pub fn build(&self, u: &DirichletFunction, w: &WeightProfile, p: f64, n: u64) -> Result<Approximant> {
        match *self {
            Construction::Truncation(side) => truncate_sequence(u, n, side),
            Construction::ZeroMean => zero_mean_truncation(u, n),
            Construction::Caloric { side, cut } => {
                let nf = check_window(n)?;
                let horizon = match side {
                    CaloricSide::TailToInfinity => cut * nf,
                    CaloricSide::HeadToZero => cut / nf,
                };
                caloric_extension(u, w, p, side, cut, horizon)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ApproximationStep {
    pub n: u64,
    #[serde(skip)]
    pub approximant: DirichletFunction,
    pub s_n: f64,
    pub t_n: f64,
    pub gap: f64,
    pub predicted_gap: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConvergenceVerdict {
    Converging,
    Stalling,
    Undecided,
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostic {
    pub steps: Vec<ApproximationStep>,
    pub verdict: ConvergenceVerdict,
    /// Largest `|gap - predicted| / predicted` over steps with a prediction.
    pub max_cross_check_deviation: Option<f64>,
    pub cross_check_passed: bool,
}

/// `||(v - u)'||_{L^p(w)}`.
pub fn gap(v: &DirichletFunction, u: &DirichletFunction, w: &WeightProfile, p: f64) -> Result<f64> {
    let diff = v.derivative.zip_with(&u.derivative, |a, b| a - b);
    let d = DirichletFunction::new(1.0, 0.0, diff, "difference")?;
    seminorm(&d, w, p)
}

fn classify_gaps(gaps: &[f64], tol: f64) -> ConvergenceVerdict {
    let Some(&last) = gaps.last() else {
        return ConvergenceVerdict::Undecided;
    };
    if last <= tol {
        return ConvergenceVerdict::Converging;
    }
    if gaps.len() >= PLATEAU_LENGTH {
        let tail = &gaps[gaps.len() - PLATEAU_LENGTH..];
        let hi = tail.iter().cloned().fold(f64::MIN, f64::max);
        let lo = tail.iter().cloned().fold(f64::MAX, f64::min);
        if hi - lo <= PLATEAU_SPREAD * hi {
            return ConvergenceVerdict::Stalling;
        }
        // Every step of the tail shrinks the gap by more than the plateau spread.
        if tail.windows(2).all(|w| w[1] < w[0] * (1.0 - PLATEAU_SPREAD)) {
            return ConvergenceVerdict::Converging;
        }
    }
    ConvergenceVerdict::Undecided
}

pub fn convergence_diagnostic(
    u: &DirichletFunction,
    construction: Construction,
    w: &WeightProfile,
    p: f64,
    schedule: &[u64],
    tol: f64,
) -> Result<Diagnostic> {
    check_exponent(p)?;
    if !schedule.windows(2).all(|s| s[0] < s[1]) {
        return Err(Error::InvalidArgument("schedule must be increasing".to_string()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let mut steps = Vec::with_capacity(schedule.len());
    for &n in schedule {
        let approx = construction.build(u, w, p, n)?;
        let (s_n, t_n) = approx.support();
        let g = gap(&approx.function, u, w, p)?;
        steps.push(ApproximationStep {
            n,
            s_n,
            t_n,
            gap: g,
            predicted_gap: approx.predicted_gap,
            approximant: approx.function,
        });
    }
    let gaps: Vec<f64> = steps.iter().map(|s| s.gap).collect();
    let deviations: Vec<f64> = steps
        .iter()
        .filter_map(|s| {
            s.predicted_gap.map(|pg| {
                if pg == 0.0 {
                    s.gap
                } else {
                    (s.gap - pg).abs() / pg
                }
            })
        })
        .collect();
    let max_dev = deviations.iter().cloned().reduce(f64::max);
    Ok(Diagnostic {
        verdict: classify_gaps(&gaps, tol),
        cross_check_passed: max_dev.is_none_or(|d| d <= CROSS_CHECK_TOL),
        max_cross_check_deviation: max_dev,
        steps,
    })
}

/// CSV with header `n,s_n,t_n,gap,predicted_gap,verdict`.
pub fn diagnostic_csv(d: &Diagnostic) -> String {
    let mut out = String::from("n,s_n,t_n,gap,predicted_gap,verdict\n");
    for s in &d.steps {
        let predicted = s.predicted_gap.map(|g| format!("{g:.16e}")).unwrap_or_default();
        out.push_str(&format!(
            "{},{:.16e},{:.16e},{:.16e},{},{:?}\n",
            s.n, s.s_n, s.t_n, s.gap, predicted, d.verdict
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::make_power;

    fn tent() -> DirichletFunction {
        let d = Derivative::piecewise_constant(vec![1.0, 2.0, 3.0], vec![1.0, -1.0]);
        DirichletFunction::new(1.0, 0.0, d, "tent").unwrap()
    }

    #[test]
    fn truncation_examples() {
        let u = tent();
        let t = truncate_sequence(&u, 4, Side::Zero).unwrap();
        for x in [0.5, 1.5, 2.0, 2.7, 3.5] {
            assert!((t.function.value_at(x).unwrap() - u.value_at(x).unwrap()).abs() < 1e-12);
        }
        let one = make_power(0.0);
        assert_eq!(gap(&t.function, &u, &one, 2.0).unwrap(), 0.0);

        let u = DirichletFunction::new(1.0, 1.0, Derivative::indicator(0.0, 1.0, 1.0), "ramp").unwrap();
        let t = truncate_sequence(&u, 2, Side::Zero).unwrap();
        assert_eq!(t.function.value_at(0.4).unwrap(), 0.0);
        assert!((t.function.value_at(0.75).unwrap() - 0.25).abs() < 1e-12);
        assert!((t.function.value_at(5.0).unwrap() - 0.5).abs() < 1e-12);
        let g = gap(&t.function, &u, &one, 2.0).unwrap();
        assert!((g * g - 0.5).abs() < 1e-10);

        assert!(truncate_sequence(&u, 1, Side::Zero).is_err());
        let m = truncate_sequence(&tent(), 4, Side::Infinity).unwrap();
        assert_eq!(m.function.value_at(4.0).unwrap(), 0.0);
    }

    #[test]
    fn caloric_examples() {
        let one = make_power(0.0);
        let u = DirichletFunction::constant(1.0);
        let a = caloric_extension(&u, &one, 2.0, CaloricSide::TailToInfinity, 1.0, 3.0).unwrap();
        for t in [1.0, 1.5, 2.5, 3.0] {
            assert!((a.function.value_at(t).unwrap() - (3.0 - t) / 2.0).abs() < 1e-12);
        }
        assert_eq!(a.function.value_at(7.0).unwrap(), 0.0);
        assert!((a.predicted_gap.unwrap().powi(2) - 0.5).abs() < 1e-14);
        assert_eq!(a.support(), (1.0, 3.0));

        let root = make_power(0.5);
        for k in 1..=6 {
            let h = 2f64.powi(k);
            let a = caloric_extension(&u, &root, 2.0, CaloricSide::TailToInfinity, 1.0, h).unwrap();
            let expected = 1.0 / (2.0 * h.sqrt() - 2.0);
            assert!((a.predicted_gap.unwrap().powi(2) / expected - 1.0).abs() < 1e-12);
        }

        let sq = make_power(2.0);
        let a = caloric_extension(&u, &sq, 2.0, CaloricSide::TailToInfinity, 1.0, 1e12).unwrap();
        assert!((a.predicted_gap.unwrap().powi(2) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn caloric_scales_nonunit_constants_and_checks_constancy() {
        let one = make_power(0.0);
        let u = DirichletFunction::new(1.0, 3.0, Derivative::indicator(0.5, 1.0, 2.0), "step").unwrap();
        let a = caloric_extension(&u, &one, 2.0, CaloricSide::TailToInfinity, 1.0, 5.0).unwrap();
        assert!((a.function.value_at(0.7).unwrap() - u.value_at(0.7).unwrap()).abs() < 1e-12);
        assert!((a.function.value_at(3.0).unwrap() - 1.5).abs() < 1e-12);
        assert!((a.predicted_gap.unwrap() - 3.0 / 2.0).abs() < 1e-12);
        let g = gap(&a.function, &u, &one, 2.0).unwrap();
        assert!((g / a.predicted_gap.unwrap() - 1.0).abs() < 1e-8);

        let err = caloric_extension(&u, &one, 2.0, CaloricSide::TailToInfinity, 0.75, 5.0).unwrap_err();
        assert!(matches!(err, Error::NotConstantBeyondCut { .. }));
        assert!(caloric_extension(&u, &one, 2.0, CaloricSide::TailToInfinity, 1.0, 0.5).is_err());

        let head = caloric_extension(&u, &one, 2.0, CaloricSide::HeadToZero, 0.5, 0.25).unwrap();
        assert_eq!(head.function.value_at(0.1).unwrap(), 0.0);
        assert!((head.function.value_at(0.5).unwrap() - 2.0).abs() < 1e-12);
        assert!((head.predicted_gap.unwrap() - 2.0 / 0.25f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn zero_mean_examples() {
        let u = tent();
        assert!(window_mean(&u, 4).unwrap().abs() < 1e-14);
        let z = zero_mean_truncation(&u, 4).unwrap();
        for x in [0.5, 1.5, 2.5, 3.9] {
            assert!((z.function.value_at(x).unwrap() - u.value_at(x).unwrap()).abs() < 1e-12);
        }

        let step = DirichletFunction::new(1.0, 0.0, Derivative::indicator(1.0, 2.0, 1.0), "step").unwrap();
        assert!((window_mean(&step, 4).unwrap() - 1.0 / 3.75).abs() < 1e-14);
        let z = zero_mean_truncation(&step, 4).unwrap();
        assert!(z.function.derivative.integral(0.1, 10.0, 1e-12).unwrap().abs() < 1e-12);
        assert_eq!(z.support(), (0.25, 4.0));
        assert!(zero_mean_truncation(&step, 0).is_err());
    }

    #[test]
    fn diagnostic_examples() {
        let u = DirichletFunction::constant(1.0);
        let schedule: Vec<u64> = (1..=10).map(|k| 1u64 << k).collect();
        let tail = Construction::Caloric {
            side: CaloricSide::TailToInfinity,
            cut: 1.0,
        };
        let d = convergence_diagnostic(&u, tail, &make_power(0.0), 2.0, &schedule, 1e-8).unwrap();
        assert_eq!(d.verdict, ConvergenceVerdict::Converging);
        assert!(d.cross_check_passed, "{:?}", d.max_cross_check_deviation);
        for s in &d.steps {
            assert!((s.gap - ((s.n - 1) as f64).powf(-0.5)).abs() < 1e-6);
        }

        let d = convergence_diagnostic(&u, tail, &make_power(2.0), 2.0, &schedule, 1e-8).unwrap();
        assert_eq!(d.verdict, ConvergenceVerdict::Stalling);
        assert!(d.cross_check_passed);

        let d = convergence_diagnostic(&tent(), Construction::Truncation(Side::Zero), &make_power(0.0), 2.0, &[4, 8, 16], 1e-8)
            .unwrap();
        assert_eq!(d.verdict, ConvergenceVerdict::Converging);
        assert!(d.steps.iter().all(|s| s.gap == 0.0));
        let csv = diagnostic_csv(&d);
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with("n,s_n,t_n,gap,predicted_gap,verdict\n4,"));

        assert!(convergence_diagnostic(&u, tail, &make_power(0.0), 2.0, &[4, 2], 1e-8).is_err());
    }
}
