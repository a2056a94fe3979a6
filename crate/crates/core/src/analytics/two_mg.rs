//! Symmetric two-MG sharing policy: when one MG has a unit of excess and the
//! other a unit of deficit, the excess is sent across with probability `α`
//! and stored otherwise.

use serde::{Deserialize, Serialize};

use super::chain::geometric_p0;
use super::pmf::ExcessPmf;
use crate::error::{Error, Result};

/// Battery size used by the analytic two-MG model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Storage {
    Finite(usize),
    /// Closed-form limit; needs `a < d`.
    Infinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoMgPolicy {
    pub alpha: f64,
    pub a: f64,
    pub d: f64,
    pub storage: Storage,
    pub p_max: f64,
    pub q_max: f64,
}

impl TwoMgPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::validation("alpha", format!("must lie in [0, 1], got {}", self.alpha)));
        }
        ExcessPmf::three_point(self.a, self.d)?;
        for (field, v) in [("p_max", self.p_max), ("q_max", self.q_max)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::validation(field, format!("must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn with_alpha(self, alpha: f64) -> Self {
        Self { alpha, ..self }
    }
}

/// Effective per-MG excess after sharing:
/// `{-1: d(1 − αa), 0: 2αad + 1 − a − d, +1: a(1 − αd)}`.
pub fn two_mg_effective_pmf(a: f64, d: f64, alpha: f64) -> Result<ExcessPmf> {
    ExcessPmf::three_point(a, d)?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::validation("alpha", format!("must lie in [0, 1], got {alpha}")));
    }
    let down = d * (1.0 - alpha * a);
    let up = a * (1.0 - alpha * d);
    let stay = 2.0 * alpha * a * d + (1.0 - a - d);
    ExcessPmf::new(vec![down, stay, up])
}

/// Ratio `r = a(1 − αd) / (d(1 − αa))` of the effective birth-death chain.
pub fn effective_ratio(a: f64, d: f64, alpha: f64) -> f64 {
    a * (1.0 - alpha * d) / (d * (1.0 - alpha * a))
}

/// Steady-state grid-wide cost of the sharing policy:
/// `2αad·p_max + 2d(1 − αa)·π(0)·q_max`.
pub fn two_mg_cost(policy: &TwoMgPolicy) -> Result<f64> {
    policy.validate()?;
    let TwoMgPolicy { alpha, a, d, p_max, q_max, storage } = *policy;
    let exchange = 2.0 * alpha * a * d * p_max;
    let down = d * (1.0 - alpha * a);
    if down == 0.0 {
        return Ok(exchange);
    }
    let r = effective_ratio(a, d, alpha);
    let p0 = match storage {
        Storage::Finite(e_max) => geometric_p0(r, e_max),
        Storage::Infinite => {
            if a >= d {
                return Err(Error::validation(
                    "storage",
                    format!("infinite storage needs a < d for a stationary law, got a = {a}, d = {d}"),
                ));
            }
            1.0 - r
        }
    };
    Ok(exchange + 2.0 * down * p0 * q_max)
}

/// Grid step of the coarse α scan.
pub const ALPHA_GRID_STEP: f64 = 1e-3;
/// Final bracket width of the golden-section refinement.
pub const ALPHA_REFINE_TOL: f64 = 1e-6;

/// Minimises [`two_mg_cost`] over `α ∈ [0, 1]`; returns `(α*, Cost(α*))`.
///
/// Dense scan first, then golden-section search around the best grid point.
/// Near-ties resolve toward the smaller `α`.
pub fn optimize_alpha(family: &TwoMgPolicy) -> Result<(f64, f64)> {
    family.validate()?;
    let cost = |alpha: f64| two_mg_cost(&family.with_alpha(alpha));
    let steps = (1.0 / ALPHA_GRID_STEP).round() as usize;
    let mut best = (0.0, cost(0.0)?);
    let mut best_k = 0;
    for k in 1..=steps {
        let alpha = k as f64 / steps as f64;
        let c = cost(alpha)?;
        if strictly_better(c, best.1) {
            best = (alpha, c);
            best_k = k;
        }
    }

    let lo = best_k.saturating_sub(1) as f64 / steps as f64;
    let hi = (best_k + 1).min(steps) as f64 / steps as f64;
    let refined = golden_section(&cost, lo, hi)?;
    if strictly_better(refined.1, best.1) {
        best = refined;
    }
    Ok(best)
}

fn strictly_better(candidate: f64, incumbent: f64) -> bool {
    candidate < incumbent - 1e-12 * incumbent.abs().max(1e-300)
}

fn golden_section(f: &impl Fn(f64) -> Result<f64>, mut lo: f64, mut hi: f64) -> Result<(f64, f64)> {
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while hi - lo > ALPHA_REFINE_TOL {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2)?;
        }
    }
    let mid = 0.5 * (lo + hi);
    Ok((mid, f(mid)?))
}
