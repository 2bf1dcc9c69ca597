//! Confidence regions for the reconstructed fidelity.
//!
//! With `c = (N_c+1)^{d−1}`, the threshold `f̄` is the largest value such
//! that a Gaussian `μ(f)` of mean `f₀` and width `σ` puts mass at least
//! `1 − ε/(2c)` on `[f̄, min(2f₀ − f̄, 1)]`. The region is then
//! `[f̄ − λ², min(2f₀ − f̄ + λ², 1)]` with
//! `λ² = (2/N_c)(ln(2/ε) + 2 ln c)`.
//!
//! `c` overflows a double at realistic sizes (about 1e138 for d = 16,
//! N_c = 1e4), so everything is done with `ln c` and log-space tails.

use std::f64::consts::{LN_2, PI, SQRT_2};

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Default bisection half-width, in units of σ.
pub const BRACKET_SIGMAS: f64 = 20.0;
pub const THRESHOLD_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceSpec {
    pub epsilon: f64,
    pub sigma: f64,
    pub f0: f64,
    pub n_copies: u64,
    pub dim: usize,
}

impl ConfidenceSpec {
    pub fn new(epsilon: f64, sigma: f64, f0: f64, n_copies: u64, dim: usize) -> Result<Self> {
        let spec = Self {
            epsilon,
            sigma,
            f0,
            n_copies,
            dim,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: &str| {
            Err(Error::Config {
                field: field.into(),
                reason: reason.into(),
            })
        };
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad("epsilon", "must lie in (0, 1)");
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad("sigma", "must be > 0");
        }
        if !(self.f0 > 0.0 && self.f0 <= 1.0) {
            return bad("f0", "must lie in (0, 1]");
        }
        if self.n_copies == 0 {
            return bad("n_copies", "must be ≥ 1");
        }
        if self.dim == 0 {
            return bad("dim", "must be ≥ 1");
        }
        Ok(())
    }

    /// `ln c = (d − 1) ln(N_c + 1)`
    pub fn ln_c(&self) -> f64 {
        (self.dim as f64 - 1.0) * (self.n_copies as f64).ln_1p()
    }

    /// `ln(ε / 2c)`, the log of the tail mass allowed outside the interval.
    pub fn ln_tail_budget(&self) -> f64 {
        self.epsilon.ln() - LN_2 - self.ln_c()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceRegion {
    pub f_bar: f64,
    pub lambda_sq: f64,
    pub lower: f64,
    pub upper: f64,
}

impl ConfidenceRegion {
    pub fn contains(&self, f: f64) -> bool {
        self.lower <= f && f <= self.upper
    }
}

fn lambda_sq_raw(epsilon: f64, n_copies: f64, dim: f64) -> f64 {
    (2.0 / n_copies) * ((2.0 / epsilon).ln() + 2.0 * (dim - 1.0) * n_copies.ln_1p())
}

pub fn lambda_squared(spec: &ConfidenceSpec) -> f64 {
    lambda_sq_raw(spec.epsilon, spec.n_copies as f64, spec.dim as f64)
}

/// `ln erfc(x)`, accurate where `erfc` itself underflows.
pub fn ln_erfc(x: f64) -> f64 {
    if x < 5.0 {
        return erfc(x).ln();
    }
    // erfc(x) = e^{−x²}/√π · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + …))))
    let mut frac = x;
    for j in (1..=80).rev() {
        frac = x + (j as f64 / 2.0) / frac;
    }
    -x * x - 0.5 * PI.ln() - frac.ln()
}

/// `ln P(Z > z)` for a standard normal `Z`.
pub fn ln_upper_tail(z: f64) -> f64 {
    ln_erfc(z / SQRT_2) - LN_2
}

fn ln_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Log of the Gaussian mass outside `[f̄, min(2f₀ − f̄, 1)]`.
pub fn ln_mass_outside(spec: &ConfidenceSpec, f_bar: f64) -> f64 {
    let upper = (2.0 * spec.f0 - f_bar).min(1.0);
    let lower_tail = ln_upper_tail((spec.f0 - f_bar) / spec.sigma);
    let upper_tail = ln_upper_tail((upper - spec.f0) / spec.sigma);
    ln_add_exp(lower_tail, upper_tail)
}

/// Largest `f̄ ≤ f₀` meeting the mass requirement, by bisection.
///
/// The bracket starts at `[f₀ − 20σ, f₀]` and is widened in steps of `20σ`
/// if the lower end still leaves too much mass outside.
pub fn solve_threshold(spec: &ConfidenceSpec) -> Result<f64> {
    spec.validate()?;
    let budget = spec.ln_tail_budget();
    let cap_tail = ln_upper_tail((1.0 - spec.f0) / spec.sigma);
    if cap_tail > budget {
        return Err(Error::Infeasible(format!(
            "upper tail beyond 1 already holds mass e^{cap_tail:.3}, budget is e^{budget:.3}"
        )));
    }
    let excess = |f_bar: f64| ln_mass_outside(spec, f_bar) - budget;

    let mut hi = spec.f0;
    let mut lo = spec.f0 - BRACKET_SIGMAS * spec.sigma;
    while excess(lo) > 0.0 {
        hi = lo;
        lo -= BRACKET_SIGMAS * spec.sigma;
        if spec.f0 - lo > 1e4 * spec.sigma {
            return Err(Error::Infeasible("threshold bracket did not close".into()));
        }
    }
    while hi - lo > THRESHOLD_TOL {
        let mid = 0.5 * (lo + hi);
        if excess(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(lo)
}

/// Region around a given threshold, e.g. one taken from elsewhere.
pub fn region_with_threshold(spec: &ConfidenceSpec, f_bar: f64) -> ConfidenceRegion {
    let lambda_sq = lambda_squared(spec);
    ConfidenceRegion {
        f_bar,
        lambda_sq,
        lower: f_bar - lambda_sq,
        upper: (2.0 * spec.f0 - f_bar + lambda_sq).min(1.0),
    }
}

pub fn region(spec: &ConfidenceSpec) -> Result<ConfidenceRegion> {
    Ok(region_with_threshold(spec, solve_threshold(spec)?))
}

/// Percentage of fidelities inside the closed interval.
pub fn coverage_ratio(fidelities: &[f64], reg: &ConfidenceRegion) -> Result<f64> {
    if fidelities.is_empty() {
        return Err(Error::InvalidArgument("no fidelities for coverage".into()));
    }
    let inside = fidelities.iter().filter(|&&f| reg.contains(f)).count();
    Ok(100.0 * inside as f64 / fidelities.len() as f64)
}
