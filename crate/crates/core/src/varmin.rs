//! Weighted p-energy minimizers on an interval `[k, K]`.
//!
//! Among functions with `phi(k) = a, phi(K) = 0` the energy
//! `int_k^K |phi'|^p w` is minimized by
//! `phi(t) = a (int_t^K sigma) / (int_k^K sigma)`, and the mirror problem
//! `phi(k) = 0, phi(K) = a` by `a (int_k^t sigma) / (int_k^K sigma)`. Both
//! have minimal energy `|a|^p (int_k^K sigma)^{1-p}`. [`discrete_minimizer`]
//! solves the same problem over piecewise-linear functions as an
//! independent check.

use serde::Serialize;

use crate::classify::{sigma_error, sigma_fn};
use crate::quad::{self, Verdict};
use crate::space::{sigma_integral, Derivative};
use crate::weights::{check_exponent, WeightProfile};
use crate::{Error, Result};

const VARMIN_TOL: f64 = 1e-11;
const MAX_DESCENT_ITERATIONS: usize = 200;
const ARMIJO: f64 = 1e-4;
const GRADIENT_TOL: f64 = 1e-10;
const GRADIENT_TOL_ILL_CONDITIONED: f64 = 1e-6;
/// Below this exponent the flux `|x|^{p-1} sign x` loses Lipschitz regularity.
pub const ILL_CONDITIONED_P: f64 = 1.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConstraintSide {
    /// `phi(k) = a`, `phi(K) = 0`.
    LeftConstraint,
    /// `phi(k) = 0`, `phi(K) = a`.
    RightConstraint,
}

#[derive(Debug, Clone)]
pub struct MinimizerProblem {
    pub k: f64,
    pub big_k: f64,
    pub a: f64,
    pub side: ConstraintSide,
    pub p: f64,
    pub weight: WeightProfile,
}

impl MinimizerProblem {
    pub fn new(k: f64, big_k: f64, a: f64, side: ConstraintSide, p: f64, weight: WeightProfile) -> Result<Self> {
        check_exponent(p)?;
        if !(k > 0.0 && k < big_k && big_k.is_finite()) {
            return Err(Error::InvalidArgument(format!("need 0 < k < K < inf, got k = {k}, K = {big_k}")));
        }
        if a == 0.0 || !a.is_finite() {
            return Err(Error::InvalidArgument(format!("boundary value must be finite and nonzero, got {a}")));
        }
        Ok(Self {
            k,
            big_k,
            a,
            side,
            p,
            weight,
        })
    }

    fn boundary(&self) -> (f64, f64) {
        match self.side {
            ConstraintSide::LeftConstraint => (self.a, 0.0),
            ConstraintSide::RightConstraint => (0.0, self.a),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MinimizerSolution {
    pub problem: MinimizerProblem,
    pub minimal_energy: f64,
    /// `int_k^K sigma`.
    pub normalizer: f64,
}

fn normalizer(prob: &MinimizerProblem) -> Result<f64> {
    let out = sigma_integral(&prob.weight, prob.p, prob.k, prob.big_k)?;
    if out.verdict != Verdict::Converged {
        return Err(Error::Quadrature(format!(
            "integral of sigma over [{}, {}] not converged",
            prob.k, prob.big_k
        )));
    }
    Ok(out.value)
}

pub fn closed_form_minimizer(prob: &MinimizerProblem) -> Result<MinimizerSolution> {
    let n = normalizer(prob)?;
    Ok(MinimizerSolution {
        problem: prob.clone(),
        minimal_energy: prob.a.abs().powf(prob.p) * n.powf(1.0 - prob.p),
        normalizer: n,
    })
}

/// `|a|^p (int_k^K sigma)^{1-p}` without building the minimizer.
pub fn minimal_energy(prob: &MinimizerProblem) -> Result<f64> {
    Ok(prob.a.abs().powf(prob.p) * normalizer(prob)?.powf(1.0 - prob.p))
}

impl MinimizerSolution {
    /// `phi(t)` for `t` in `[k, K]`; boundary values are exact.
    pub fn evaluate(&self, t: f64) -> Result<f64> {
        let pr = &self.problem;
        if !(t >= pr.k && t <= pr.big_k) {
            return Err(Error::InvalidArgument(format!("t = {t} outside [{}, {}]", pr.k, pr.big_k)));
        }
        let (left, right) = pr.boundary();
        if t == pr.k {
            return Ok(left);
        }
        if t == pr.big_k {
            return Ok(right);
        }
        let partial = match pr.side {
            ConstraintSide::LeftConstraint => sigma_integral(&pr.weight, pr.p, t, pr.big_k)?,
            ConstraintSide::RightConstraint => sigma_integral(&pr.weight, pr.p, pr.k, t)?,
        };
        Ok(pr.a * partial.value / self.normalizer)
    }

    /// `phi'(t)`; zero outside `[k, K]`.
    pub fn derivative_at(&self, t: f64) -> f64 {
        let pr = &self.problem;
        if t < pr.k || t > pr.big_k {
            return 0.0;
        }
        let s = sigma_fn(&pr.weight, pr.p)(t);
        match pr.side {
            ConstraintSide::LeftConstraint => -pr.a * s / self.normalizer,
            ConstraintSide::RightConstraint => pr.a * s / self.normalizer,
        }
    }

    /// The derivative as a [`Derivative`] supported on `[k, K]`.
    pub fn derivative(&self) -> Derivative {
        let me = self.clone();
        Derivative::from_fn(move |t| me.derivative_at(t)).with_support(self.problem.k, self.problem.big_k)
    }

    /// `|phi'|^{p-1} sign(phi') w`, constant on `[k, K]` for the minimizer.
    pub fn euler_lagrange_flux(&self, t: f64) -> f64 {
        let d = self.derivative_at(t);
        d.abs().powf(self.problem.p - 1.0).copysign(d) * self.problem.weight.eval(t)
    }
}

/// `int_k^K |phi'|^p w`.
pub fn energy(
    phi_derivative: impl Fn(f64) -> f64,
    w: &WeightProfile,
    p: f64,
    k: f64,
    big_k: f64,
) -> Result<f64> {
    check_exponent(p)?;
    if !(k > 0.0 && k < big_k) {
        return Err(Error::InvalidArgument(format!("need 0 < k < K, got {k}, {big_k}")));
    }
    let out = quad::integrate(|t| phi_derivative(t).abs().powf(p) * w.eval(t), k, big_k, VARMIN_TOL)?;
    match out.verdict {
        Verdict::Converged => Ok(out.value),
        _ => Err(Error::Undetermined("energy")),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DiscreteSolution {
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
    pub energy: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
}

/// Thomas algorithm for `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]`.
fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i] * c[i - 1];
        c[i] = upper[i] / m;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

struct DiscreteEnergy {
    masses: Vec<f64>,
    h: f64,
    p: f64,
}

impl DiscreteEnergy {
    fn value(&self, phi: &[f64]) -> f64 {
        phi.windows(2)
            .zip(&self.masses)
            .map(|(w, m)| m * ((w[1] - w[0]) / self.h).abs().powf(self.p))
            .sum()
    }

    /// Gradient with respect to the interior nodes.
    fn gradient(&self, phi: &[f64]) -> Vec<f64> {
        let p = self.p;
        let flux: Vec<f64> = phi
            .windows(2)
            .zip(&self.masses)
            .map(|(w, m)| {
                let s = (w[1] - w[0]) / self.h;
                p * m * s.abs().powf(p - 1.0).copysign(s) / self.h
            })
            .collect();
        (1..phi.len() - 1).map(|j| flux[j - 1] - flux[j]).collect()
    }

    /// Tridiagonal Hessian (lower, diag, upper) on the interior nodes.
    fn hessian(&self, phi: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let p = self.p;
        let curv: Vec<f64> = phi
            .windows(2)
            .zip(&self.masses)
            .map(|(w, m)| {
                let s = ((w[1] - w[0]) / self.h).abs().max(1e-300);
                p * (p - 1.0) * m * s.powf(p - 2.0) / (self.h * self.h)
            })
            .collect();
        let n = phi.len() - 2;
        let mut lower = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for j in 0..n {
            diag[j] = curv[j] + curv[j + 1];
            if j > 0 {
                lower[j] = -curv[j];
            }
            if j + 1 < n {
                upper[j] = -curv[j + 1];
            }
        }
        (lower, diag, upper)
    }
}

fn max_abs(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Minimizes `sum_i |Delta phi_i / h|^p int_{cell i} w` over piecewise-linear
/// functions on a uniform grid of `n` nodes with the problem's boundary data.
pub fn discrete_minimizer(prob: &MinimizerProblem, n: usize) -> Result<DiscreteSolution> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 nodes, got {n}")));
    }
    let h = (prob.big_k - prob.k) / (n - 1) as f64;
    let nodes: Vec<f64> = (0..n)
        .map(|i| if i == n - 1 { prob.big_k } else { prob.k + h * i as f64 })
        .collect();
    let masses = nodes
        .windows(2)
        .map(|c| {
            let out = quad::integrate(|t| prob.weight.eval(t), c[0], c[1], 1e-13).map_err(sigma_error)?;
            if out.is_converged() {
                Ok(out.value)
            } else {
                Err(Error::Quadrature(format!("cell mass on [{}, {}]", c[0], c[1])))
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    let (left, right) = prob.boundary();
    let mut phi: Vec<f64> = (0..n)
        .map(|i| left + (right - left) * i as f64 / (n - 1) as f64)
        .collect();
    let objective = DiscreteEnergy { masses, h, p: prob.p };

    if prob.p == 2.0 {
        // Linear Euler-Lagrange system on the interior nodes.
        let m = &objective.masses;
        let inner = n - 2;
        let mut lower = vec![0.0; inner];
        let mut diag = vec![0.0; inner];
        let mut upper = vec![0.0; inner];
        let mut rhs = vec![0.0; inner];
        for j in 0..inner {
            diag[j] = m[j] + m[j + 1];
            if j > 0 {
                lower[j] = -m[j];
            } else {
                rhs[j] += m[0] * left;
            }
            if j + 1 < inner {
                upper[j] = -m[j + 1];
            } else {
                rhs[j] += m[j + 1] * right;
            }
        }
        let x = solve_tridiagonal(&lower, &diag, &upper, &rhs);
        phi[1..n - 1].copy_from_slice(&x);
        let g = objective.gradient(&phi);
        return Ok(DiscreteSolution {
            energy: objective.value(&phi),
            nodes,
            values: phi,
            iterations: 1,
            gradient_norm: max_abs(&g),
        });
    }

    let tol = if prob.p < ILL_CONDITIONED_P {
        GRADIENT_TOL_ILL_CONDITIONED
    } else {
        GRADIENT_TOL
    };
    let mut value = objective.value(&phi);
    let mut grad = objective.gradient(&phi);
    for iteration in 0..MAX_DESCENT_ITERATIONS {
        let gnorm = max_abs(&grad);
        if gnorm <= tol {
            return Ok(DiscreteSolution {
                nodes,
                values: phi,
                energy: value,
                iterations: iteration,
                gradient_norm: gnorm,
            });
        }
        let (lower, diag, upper) = objective.hessian(&phi);
        let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
        let mut dir = solve_tridiagonal(&lower, &diag, &upper, &neg);
        let mut slope: f64 = dir.iter().zip(&grad).map(|(d, g)| d * g).sum();
        if !(slope < 0.0) || dir.iter().any(|d| !d.is_finite()) {
            dir = neg;
            slope = -grad.iter().map(|g| g * g).sum::<f64>();
        }
        let mut step = 1.0;
        let mut trial = phi.clone();
        if -slope <= 64.0 * f64::EPSILON * value.abs() {
            // The decrease is below the resolution of the energy; the full
            // Newton step is kept only if it shrinks the gradient, otherwise
            // `phi` is stationary to rounding and `gnorm` is its residual.
            for (j, d) in dir.iter().enumerate() {
                trial[j + 1] = phi[j + 1] + d;
            }
            let g = objective.gradient(&trial);
            if max_abs(&g) >= gnorm {
                return Ok(DiscreteSolution {
                    nodes,
                    values: phi,
                    energy: value,
                    iterations: iteration,
                    gradient_norm: gnorm,
                });
            }
            value = objective.value(&trial);
            phi.clone_from(&trial);
            grad = g;
            continue;
        }
        let accepted = loop {
            for (j, d) in dir.iter().enumerate() {
                trial[j + 1] = phi[j + 1] + step * d;
            }
            let v = objective.value(&trial);
            if v <= value + ARMIJO * step * slope {
                break Some(v);
            }
            step *= 0.5;
            if step < 1e-20 {
                break None;
            }
        };
        let Some(v) = accepted else {
            return Err(Error::DescentNotConverged {
                gradient_norm: gnorm,
                iterations: iteration,
            });
        };
        phi.clone_from(&trial);
        value = v;
        grad = objective.gradient(&phi);
    }
    Err(Error::DescentNotConverged {
        gradient_norm: max_abs(&grad),
        iterations: MAX_DESCENT_ITERATIONS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::{make_power, make_two_exponent};
    use std::f64::consts::E;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    fn problem(w: WeightProfile, p: f64, k: f64, big_k: f64, a: f64, side: ConstraintSide) -> MinimizerProblem {
        MinimizerProblem::new(k, big_k, a, side, p, w).unwrap()
    }

    #[test]
    fn closed_form_examples() {
        let pr = problem(make_power(0.0), 2.0, 1.0, 3.0, 1.0, ConstraintSide::LeftConstraint);
        let sol = closed_form_minimizer(&pr).unwrap();
        assert!((sol.minimal_energy - 0.5).abs() < 1e-14);
        for t in [1.0, 1.5, 2.2, 3.0] {
            assert!((sol.evaluate(t).unwrap() - (3.0 - t) / 2.0).abs() < 1e-14);
        }

        let pr = problem(make_power(1.0), 2.0, 1.0, E, 1.0, ConstraintSide::LeftConstraint);
        let sol = closed_form_minimizer(&pr).unwrap();
        assert!(rel(sol.minimal_energy, 1.0) < 1e-14);
        for t in [1.2, 2.0, 2.5] {
            assert!((sol.evaluate(t).unwrap() - (1.0 - t.ln())).abs() < 1e-14);
        }

        let pr = problem(make_power(0.0), 3.0, 0.5, 2.5, 2.0, ConstraintSide::RightConstraint);
        assert!(rel(minimal_energy(&pr).unwrap(), 2.0) < 1e-14);
        let sol = closed_form_minimizer(&pr).unwrap();
        assert_eq!(sol.evaluate(0.5).unwrap(), 0.0);
        assert_eq!(sol.evaluate(2.5).unwrap(), 2.0);
        assert!(sol.evaluate(3.0).is_err());
    }

    #[test]
    fn boundary_values_are_exact_for_quadrature_weights() {
        let pr = problem(make_two_exponent(0.5, 1.5), 2.5, 0.3, 4.0, -1.7, ConstraintSide::LeftConstraint);
        let sol = closed_form_minimizer(&pr).unwrap();
        assert_eq!(sol.evaluate(0.3).unwrap(), -1.7);
        assert_eq!(sol.evaluate(4.0).unwrap(), 0.0);
    }

    #[test]
    fn energy_examples() {
        let one = make_power(0.0);
        assert_eq!(energy(|_| 0.0, &one, 2.0, 1.0, 3.0).unwrap(), 0.0);
        assert!((energy(|_| -0.5, &one, 2.0, 1.0, 3.0).unwrap() - 0.5).abs() < 1e-14);
        assert!(rel(energy(|t| -1.0 / t, &make_power(1.0), 2.0, 1.0, E).unwrap(), 1.0) < 1e-10);
    }

    #[test]
    fn minimal_energy_examples() {
        let one = make_power(0.0);
        let p1 = problem(one.clone(), 2.0, 1.0, 3.0, 1.0, ConstraintSide::LeftConstraint);
        assert!((minimal_energy(&p1).unwrap() - 0.5).abs() < 1e-14);
        let p2 = problem(one, 2.0, 1.0, 3.0, 2.0, ConstraintSide::LeftConstraint);
        assert_eq!(minimal_energy(&p2).unwrap() / minimal_energy(&p1).unwrap(), 4.0);
        let p3 = problem(make_power(1.0), 2.0, 1.0, E * E, 1.0, ConstraintSide::LeftConstraint);
        assert!(rel(minimal_energy(&p3).unwrap(), 0.5) < 1e-14);
    }

    #[test]
    fn discrete_examples() {
        let pr = problem(make_power(0.0), 2.0, 1.0, 3.0, 1.0, ConstraintSide::LeftConstraint);
        let d = discrete_minimizer(&pr, 64).unwrap();
        for (t, v) in d.nodes.iter().zip(&d.values) {
            assert!((v - (3.0 - t) / 2.0).abs() < 1e-8);
        }
        assert!((d.energy - 0.5).abs() < 1e-10);

        let pr = problem(make_power(1.0), 2.0, 1.0, E, 1.0, ConstraintSide::LeftConstraint);
        let gaps: Vec<f64> = [32, 64, 128]
            .iter()
            .map(|&n| discrete_minimizer(&pr, n).unwrap().energy - 1.0)
            .collect();
        assert!(gaps.iter().all(|g| *g > 0.0));
        for w in gaps.windows(2) {
            let ratio = w[0] / w[1];
            assert!((3.5..4.5).contains(&ratio), "gap ratio {ratio}");
        }

        let pr = problem(make_power(0.0), 3.0, 1.0, 2.0, 1.0, ConstraintSide::LeftConstraint);
        let d = discrete_minimizer(&pr, 64).unwrap();
        assert!((d.energy - 1.0).abs() < 1e-4);
        assert!(d.gradient_norm <= 1e-10);
    }

    #[test]
    fn discrete_general_p_converges() {
        for p in [1.1, 1.5, 3.0, 6.0] {
            let pr = problem(make_two_exponent(0.5, 1.5), p, 0.5, 3.0, 1.3, ConstraintSide::RightConstraint);
            let d = discrete_minimizer(&pr, 128).unwrap();
            let exact = minimal_energy(&pr).unwrap();
            assert!(d.energy >= exact * (1.0 - 1e-9), "p={p}");
            assert!(rel(d.energy, exact) < 1e-2, "p={p}: {} vs {exact}", d.energy);
        }
        assert!(discrete_minimizer(
            &problem(make_power(0.0), 2.0, 1.0, 2.0, 1.0, ConstraintSide::LeftConstraint),
            2
        )
        .is_err());
    }

    #[test]
    fn euler_lagrange_and_scaling() {
        let pr = problem(make_two_exponent(0.5, 1.5), 3.0, 0.4, 5.0, 2.0, ConstraintSide::LeftConstraint);
        let sol = closed_form_minimizer(&pr).unwrap();
        let c = sol.euler_lagrange_flux(1.0);
        for t in [0.4, 0.7, 2.0, 4.9] {
            assert!(rel(sol.euler_lagrange_flux(t), c) < 1e-12);
        }
        let unit = closed_form_minimizer(&MinimizerProblem { a: 1.0, ..pr.clone() }).unwrap();
        for t in [0.5, 1.0, 3.0] {
            assert!((sol.evaluate(t).unwrap() - 2.0 * unit.evaluate(t).unwrap()).abs() < 1e-13);
        }
        let e = energy(|t| sol.derivative_at(t), &pr.weight, pr.p, pr.k, pr.big_k).unwrap();
        assert!(rel(e, sol.minimal_energy) < 1e-6);
    }
}
