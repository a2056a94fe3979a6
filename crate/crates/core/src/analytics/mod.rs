//! Battery-level Markov chains, their stationary laws, and the closed-form
//! steady-state costs for a single MG and for the symmetric two-MG sharing
//! policy.

mod banded;
mod chain;
mod pmf;
mod two_mg;

pub use chain::{
    birth_death_closed_form, build_transition_matrix, single_mg_cost, stationary_distribution, StationaryModel,
    TransitionMatrix, DIRECT_SOLVE_MAX_STATES, ROW_SUM_TOL, UNIT_RATIO_TOL,
};
pub use pmf::{ExcessPmf, PMF_SUM_TOL};
pub use two_mg::{
    effective_ratio, optimize_alpha, two_mg_cost, two_mg_effective_pmf, Storage, TwoMgPolicy, ALPHA_GRID_STEP,
    ALPHA_REFINE_TOL,
};

/// `q·d·(1 − r)/(1 − r^{e_max+1})`: single-MG cost for `{-1: d, 0, +1: a}` arrivals.
pub fn single_mg_cost_closed_form(a: f64, d: f64, e_max: usize, q_max: f64) -> crate::Result<f64> {
    let pi = birth_death_closed_form(a, d, e_max)?;
    Ok(q_max * d * pi[0])
}
