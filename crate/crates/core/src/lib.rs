//! Numerical toolkit for the weighted Dirichlet space `D^{1,p}(R_+, w)`.
//!
//! Given a positive continuous weight `w` on `(0, inf)` and an exponent
//! `p > 1`, the crate decides integrability of the dual density
//! `sigma = w^{-1/(p-1)}` near each endpoint, classifies the closure of
//! compactly supported functions, computes traces with certified error
//! bounds, builds the weighted p-energy minimizers and the approximation
//! sequences that rest on them, and checks two-weight Hardy conditions.
//!
//! Modules:
//! - [`weights`]: weight profiles, the expression DSL, built-in families.
//! - [`quad`]: adaptive quadrature with a convergence verdict for improper integrals.
//! - [`classify`]: endpoint conditions and the four density regimes.
//! - [`space`]: Dirichlet functions, seminorms, traces, endpoint moduli.
//! - [`varmin`]: closed-form energy minimizers and a discrete oracle.
//! - [`approx`]: truncation, caloric extension and zero-mean approximants.
//! - [`hardy`]: Hardy transforms and boundedness conditions.

use std::fmt;

use serde::{Deserialize, Serialize};

pub mod approx;
pub mod classify;
mod error;
pub mod hardy;
pub mod quad;
pub mod space;
pub mod varmin;
pub mod weights;

pub use error::{Error, Result};

/// An endpoint of the half line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Zero,
    Infinity,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Side::Zero => f.write_str("0"),
            Side::Infinity => f.write_str("infinity"),
        }
    }
}

/// Three-valued answer used wherever a numerical decision may be undetermined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Ternary {
    Yes,
    No,
    Unknown,
}

/// Serializes non-finite floats as strings so that reports never lose an
/// infinite quantity to `null`.
pub(crate) fn serialize_extended_f64<S: serde::Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_f64(*x)
    } else if x.is_nan() {
        s.serialize_str("NaN")
    } else if *x > 0.0 {
        s.serialize_str("Infinity")
    } else {
        s.serialize_str("-Infinity")
    }
}

pub(crate) fn serialize_extended_f64_opt<S: serde::Serializer>(
    x: &Option<f64>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    match x {
        Some(v) => serialize_extended_f64(v, s),
        None => s.serialize_none(),
    }
}
