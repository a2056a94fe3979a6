//! Per-slot dispatch linear program minimised by the drift-plus-penalty
//! controller.
//!
//! With `Ẽ_i = E_i − θ` the slot problem is
//!
//! ```text
//! min  Σ_i Ẽ_i Y_i  +  V Σ_i Σ_{j≠i} (p_ij − q_j) B_ij  −  Σ_i (Ẽ_i + V q_i) B_ii
//! s.t. Y_i + Σ_{j≠i} B_ij ≤ x̃_i          (source budget)
//!      B_ii + Σ_{j≠i} B_ji ≤ l̃_i         (sink budget)
//!      0 ≤ Y_i ≤ y_max, 0 ≤ B_ii ≤ b_s_max, 0 ≤ B_ij ≤ b_ex_max
//! ```
//!
//! which is a bounded transportation problem. [`solve_slot`] solves it as a
//! min-cost flow; [`brute_force_slot`] is an exhaustive grid oracle for tests.

mod flow;
mod oracle;

pub use flow::solve_slot;
pub use oracle::{brute_force_slot, BRUTE_FORCE_MAX_VARIABLES};

use crate::error::{Error, Result};
use crate::grid::{Capacities, MicrogridState, PriceTable, SlotDecision, SlotExogenous, EQ_TOL};

/// Default relative optimality tolerance for [`solve_slot`].
pub const DEFAULT_SLOT_TOL: f64 = 1e-9;

/// Coefficients, budgets and boxes of one slot LP.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotProblem {
    pub n: usize,
    /// `Ẽ_i`.
    pub charge_coeff: Vec<f64>,
    /// `−(Ẽ_i + V q_i)`.
    pub discharge_coeff: Vec<f64>,
    /// Row-major `V (p_ij − q_j)`; the diagonal is unused.
    pub exchange_coeff: Vec<f64>,
    /// `x̃_i`.
    pub source_budget: Vec<f64>,
    /// `l̃_i`.
    pub sink_budget: Vec<f64>,
    pub y_max: f64,
    pub b_s_max: f64,
    pub b_ex_max: f64,
}

impl SlotProblem {
    #[inline]
    pub fn exchange(&self, from: usize, to: usize) -> f64 {
        self.exchange_coeff[from * self.n + to]
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        let lens = [
            self.charge_coeff.len(),
            self.discharge_coeff.len(),
            self.source_budget.len(),
            self.sink_budget.len(),
        ];
        if lens.iter().any(|&l| l != n) || self.exchange_coeff.len() != n * n {
            return Err(Error::validation("slot problem", "inconsistent dimensions"));
        }
        let nonneg = self
            .source_budget
            .iter()
            .chain(&self.sink_budget)
            .chain([&self.y_max, &self.b_s_max, &self.b_ex_max]);
        if let Some(v) = nonneg.into_iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::validation("slot problem", format!("budgets and caps must be >= 0, got {v}")));
        }
        let coeffs = self.charge_coeff.iter().chain(&self.discharge_coeff).chain(&self.exchange_coeff);
        if coeffs.into_iter().any(|c| !c.is_finite()) {
            return Err(Error::validation("slot problem", "coefficients must be finite"));
        }
        Ok(())
    }

    /// LP objective of `decision` (macro draw ignored).
    pub fn objective(&self, decision: &SlotDecision) -> f64 {
        let mut total = 0.0;
        for i in 0..self.n {
            total += self.charge_coeff[i] * decision.charge[i];
            total += self.discharge_coeff[i] * decision.self_discharge[i];
            for j in (0..self.n).filter(|&j| j != i) {
                total += self.exchange(i, j) * decision.sent(i, j);
            }
        }
        total
    }

    /// Largest constraint violation of `decision` against the LP (0 if feasible).
    pub fn infeasibility(&self, decision: &SlotDecision) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.n {
            worst = worst.max(decision.charge[i] + decision.exported(i) - self.source_budget[i]);
            worst = worst.max(decision.self_discharge[i] + decision.imported(i) - self.sink_budget[i]);
            worst = worst.max(decision.charge[i] - self.y_max);
            worst = worst.max(decision.self_discharge[i] - self.b_s_max);
            worst = worst.max(-decision.charge[i]).max(-decision.self_discharge[i]);
            for j in (0..self.n).filter(|&j| j != i) {
                let b = decision.sent(i, j);
                worst = worst.max(b - self.b_ex_max).max(-b);
            }
        }
        worst
    }

    /// `Σ |c|` over every coefficient, used to bound grid-oracle error.
    pub fn coefficient_mass(&self) -> f64 {
        let mut s: f64 = self.charge_coeff.iter().chain(&self.discharge_coeff).map(|c| c.abs()).sum();
        for i in 0..self.n {
            for j in (0..self.n).filter(|&j| j != i) {
                s += self.exchange(i, j).abs();
            }
        }
        s
    }
}

/// Coefficients of the drift-plus-penalty slot LP for the current battery
/// levels and slot data.
pub fn build_slot_problem(
    v: f64,
    theta: f64,
    state: &MicrogridState,
    exo: &SlotExogenous,
    prices: &PriceTable,
    caps: &Capacities,
) -> SlotProblem {
    let n = exo.n();
    let shifted: Vec<f64> = state.energy.iter().map(|e| e - theta).collect();
    let mut exchange_coeff = vec![0.0; n * n];
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            exchange_coeff[i * n + j] = v * (prices.p(i, j) - prices.q(j));
        }
    }
    SlotProblem {
        n,
        discharge_coeff: (0..n).map(|i| -(shifted[i] + v * prices.q(i))).collect(),
        charge_coeff: shifted,
        exchange_coeff,
        source_budget: exo.excess.clone(),
        sink_budget: exo.deficit.clone(),
        y_max: caps.y_max_mwh,
        b_s_max: caps.b_s_max_mwh,
        b_ex_max: caps.b_ex_max_mwh,
    }
}

/// Macro-grid draw that closes each MG's balance:
/// `G_i = (l̃_i − B_ii − Σ_{j≠i} B_ji)^+`.
pub fn recover_macro_draw(decision: &SlotDecision, exo: &SlotExogenous) -> Result<Vec<f64>> {
    (0..exo.n())
        .map(|i| {
            let residual = exo.deficit[i] - decision.self_discharge[i] - decision.imported(i);
            if residual < -EQ_TOL {
                Err(Error::Solver(format!(
                    "MG {i} receives {} more than its deficit {}",
                    -residual, exo.deficit[i]
                )))
            } else {
                Ok(residual.max(0.0))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PriceTable;

    fn caps() -> Capacities {
        Capacities::new(10.0, 1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn coefficients_follow_the_drift_bound() {
        let prices = PriceTable::new(vec![0.0, 2.0, 2.0, 0.0], vec![2.0, 2.0]).unwrap();
        let theta = 3.0;
        let state = MicrogridState { energy: vec![theta, theta + 2.0] };
        let exo = SlotExogenous::from_split(vec![1.0, 0.0], vec![0.0, 1.0]).unwrap();
        let problem = build_slot_problem(1.0, theta, &state, &exo, &prices, &caps());
        assert_eq!(problem.charge_coeff[0], 0.0);
        assert_eq!(problem.discharge_coeff[1], -4.0);
        // p_ij = q_j: exchange ties with the macro grid.
        assert_eq!(problem.exchange(0, 1), 0.0);
        assert_eq!(problem.source_budget, vec![1.0, 0.0]);
        assert_eq!(problem.sink_budget, vec![0.0, 1.0]);
    }

    #[test]
    fn macro_draw_closes_the_balance() {
        let exo = SlotExogenous::from_split(vec![0.0], vec![1.0]).unwrap();
        let mut d = SlotDecision::zeros(1);
        d.self_discharge[0] = 1.0;
        assert_eq!(recover_macro_draw(&d, &exo).unwrap(), vec![0.0]);

        let exo = SlotExogenous::from_split(vec![0.0], vec![2.0]).unwrap();
        assert_eq!(recover_macro_draw(&SlotDecision::zeros(1), &exo).unwrap(), vec![2.0]);

        let exo = SlotExogenous::from_split(vec![0.3, 0.0], vec![0.0, 1.0]).unwrap();
        let mut d = SlotDecision::zeros(2);
        d.self_discharge[1] = 0.4;
        d.set_sent(0, 1, 0.3);
        let g = recover_macro_draw(&d, &exo).unwrap();
        assert!((g[1] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn oversupplied_sink_is_a_fault() {
        let exo = SlotExogenous::from_split(vec![0.0], vec![1.0]).unwrap();
        let mut d = SlotDecision::zeros(1);
        d.self_discharge[0] = 1.5;
        assert!(recover_macro_draw(&d, &exo).is_err());
    }
}
