//! Controllers mapping battery levels and slot data to a feasible decision.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{validate_decision, Capacities, GridScenario, MicrogridState, SlotDecision, SlotExogenous, EQ_TOL};
use crate::scenario::ControllerSpec;
use crate::slot::{build_slot_problem, recover_macro_draw, solve_slot, DEFAULT_SLOT_TOL};

/// Weight used when storage is disabled; any positive value gives the same
/// decisions since the battery terms vanish.
pub const STORAGE_FREE_V: f64 = 1.0;

/// Trade-off weight `V` and the battery shift `θ = b_s_max + V q_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovParams {
    pub v: f64,
    pub theta: f64,
}

/// Largest admissible weight `(e_max − y_max − b_s_max) / q_max`.
pub fn max_v(scenario: &GridScenario) -> Result<f64> {
    max_v_for(&scenario.caps, scenario.prices.q_max())
}

pub fn max_v_for(caps: &Capacities, q_max: f64) -> Result<f64> {
    let room = caps.e_max_mwh - caps.y_max_mwh - caps.b_s_max_mwh;
    if room <= 0.0 {
        return Err(Error::validation(
            "e_max_mwh",
            format!("capacity {} leaves no room above y_max + b_s_max", caps.e_max_mwh),
        ));
    }
    if !(q_max.is_finite() && q_max > 0.0) {
        return Err(Error::validation("macro_price", format!("q_max must be > 0, got {q_max}")));
    }
    Ok(room / q_max)
}

impl LyapunovParams {
    /// `θ` derived from `v`; `v` is checked against [`max_v`].
    pub fn new(scenario: &GridScenario, v: f64) -> Result<Self> {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::validation("v", format!("must be > 0, got {v}")));
        }
        if !scenario.caps.storage_disabled() {
            let bound = max_v(scenario)?;
            if v > bound * (1.0 + 1e-12) {
                return Err(Error::validation("v", format!("{v} exceeds the admissible maximum {bound}")));
            }
        }
        Ok(Self {
            v,
            theta: scenario.caps.b_s_max_mwh + v * scenario.prices.q_max(),
        })
    }

    /// `v` if given, otherwise the largest admissible weight.
    pub fn for_scenario(scenario: &GridScenario, v: Option<f64>) -> Result<Self> {
        let v = match v {
            Some(v) => v,
            None if scenario.caps.storage_disabled() => STORAGE_FREE_V,
            None => max_v(scenario)?,
        };
        Self::new(scenario, v)
    }
}

/// Drift-plus-penalty decision for one slot.
///
/// Solves the slot LP, closes the balance with the macro grid, and checks
/// that the result respects the battery bounds the weight choice guarantees.
pub fn lyapunov_decide(
    params: &LyapunovParams,
    scenario: &GridScenario,
    state: &MicrogridState,
    exo: &SlotExogenous,
) -> Result<SlotDecision> {
    let problem = build_slot_problem(params.v, params.theta, state, exo, &scenario.prices, &scenario.caps);
    let mut decision = solve_slot(&problem, DEFAULT_SLOT_TOL)?;
    decision.macro_draw = recover_macro_draw(&decision, exo)?;
    check_battery_guarantee(&scenario.caps, state, &decision)?;
    let report = validate_decision(&scenario.caps, state, exo, &decision);
    if !report.is_feasible() {
        return Err(Error::invariant(
            0,
            format!("infeasible decision {report}; state {:?}; excess {:?}; deficit {:?}", state.energy, exo.excess, exo.deficit),
        ));
    }
    Ok(decision)
}

/// A nearly full battery is never charged and a nearly empty one is never
/// discharged.
pub fn check_battery_guarantee(caps: &Capacities, state: &MicrogridState, decision: &SlotDecision) -> Result<()> {
    for (i, &e) in state.energy.iter().enumerate() {
        if e > caps.e_max_mwh - caps.y_max_mwh + EQ_TOL && decision.charge[i] > EQ_TOL {
            return Err(Error::invariant(
                0,
                format!(
                    "MG {i} charges {} with battery at {e} above e_max - y_max = {}",
                    decision.charge[i],
                    caps.e_max_mwh - caps.y_max_mwh
                ),
            ));
        }
        if e < caps.b_s_max_mwh - EQ_TOL && decision.self_discharge[i] > EQ_TOL {
            return Err(Error::invariant(
                0,
                format!(
                    "MG {i} discharges {} with battery at {e} below b_s_max = {}",
                    decision.self_discharge[i], caps.b_s_max_mwh
                ),
            ));
        }
    }
    Ok(())
}

/// Greedy baseline: store what fits, serve deficits from the battery, then
/// the macro grid; never exchange.
pub fn no_coop_decide(caps: &Capacities, state: &MicrogridState, exo: &SlotExogenous) -> SlotDecision {
    let n = exo.n();
    let mut d = SlotDecision::zeros(n);
    for i in 0..n {
        let e = state.energy[i];
        d.charge[i] = exo.excess[i].min(caps.y_max_mwh).min((caps.e_max_mwh - e).max(0.0));
        d.self_discharge[i] = exo.deficit[i].min(caps.b_s_max_mwh).min(e.max(0.0));
        d.macro_draw[i] = exo.deficit[i] - d.self_discharge[i];
    }
    d
}

/// Two-MG sharing: when one MG has excess and the other a deficit, the excess
/// is sent across with probability `alpha`; otherwise both act greedily.
/// Excess that does not fit the battery is discarded.
///
/// One uniform is drawn every slot so the stream stays aligned across `α`.
pub fn alpha_policy_decide<R: Rng + ?Sized>(
    alpha: f64,
    rng: &mut R,
    caps: &Capacities,
    state: &MicrogridState,
    exo: &SlotExogenous,
) -> Result<SlotDecision> {
    if exo.n() != 2 {
        return Err(Error::validation("n_mgs", format!("the sharing policy needs 2 MGs, got {}", exo.n())));
    }
    let u: f64 = rng.random();
    let mut d = no_coop_decide(caps, state, exo);
    let pair = if exo.excess[0] > 0.0 && exo.deficit[1] > 0.0 {
        Some((0, 1))
    } else if exo.excess[1] > 0.0 && exo.deficit[0] > 0.0 {
        Some((1, 0))
    } else {
        None
    };
    if let Some((from, to)) = pair {
        if u < alpha {
            let sent = exo.excess[from].min(exo.deficit[to]).min(caps.b_ex_max_mwh);
            d.set_sent(from, to, sent);
            // The sender keeps any leftover excess for its battery; the
            // receiver covers what is still missing as usual.
            let left = exo.excess[from] - sent;
            d.charge[from] = left.min(caps.y_max_mwh).min((caps.e_max_mwh - state.energy[from]).max(0.0));
            let missing = exo.deficit[to] - sent;
            d.self_discharge[to] = missing.min(caps.b_s_max_mwh).min(state.energy[to].max(0.0));
            d.macro_draw[to] = missing - d.self_discharge[to];
        }
    }
    Ok(d)
}

/// A controller bound to one scenario, owning whatever randomness it needs.
#[derive(Debug, Clone)]
pub enum Controller {
    Lyapunov(LyapunovParams),
    AlphaPolicy { alpha: f64, rng: ChaCha8Rng },
    NoCoop,
}

impl Controller {
    pub fn from_spec(spec: &ControllerSpec, scenario: &GridScenario, rng: ChaCha8Rng) -> Result<Self> {
        Ok(match *spec {
            ControllerSpec::Lyapunov { v } => Controller::Lyapunov(LyapunovParams::for_scenario(scenario, v)?),
            ControllerSpec::AlphaPolicy { alpha } => {
                if scenario.n_mgs() != 2 {
                    return Err(Error::validation("controller", "the sharing policy needs exactly 2 MGs"));
                }
                if !(0.0..=1.0).contains(&alpha) {
                    return Err(Error::validation("controller.alpha", format!("must lie in [0, 1], got {alpha}")));
                }
                Controller::AlphaPolicy { alpha, rng }
            }
            ControllerSpec::NoCoop => Controller::NoCoop,
        })
    }

    pub fn decide(&mut self, scenario: &GridScenario, state: &MicrogridState, exo: &SlotExogenous) -> Result<SlotDecision> {
        match self {
            Controller::Lyapunov(params) => lyapunov_decide(params, scenario, state, exo),
            Controller::AlphaPolicy { alpha, rng } => alpha_policy_decide(*alpha, rng, &scenario.caps, state, exo),
            Controller::NoCoop => Ok(no_coop_decide(&scenario.caps, state, exo)),
        }
    }

    /// Battery shift used by the drift bound; 0 for controllers without one.
    pub fn theta(&self) -> Option<f64> {
        match self {
            Controller::Lyapunov(p) => Some(p.theta),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Controller::Lyapunov(_) => "lyapunov",
            Controller::AlphaPolicy { .. } => "alpha_policy",
            Controller::NoCoop => "no_coop",
        }
    }
}
