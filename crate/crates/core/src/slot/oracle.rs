//! Exhaustive grid search over slot decisions; a reference for small instances.

use super::SlotProblem;
use crate::error::{Error, Result};
use crate::grid::SlotDecision;

/// Largest number of free variables [`brute_force_slot`] accepts.
pub const BRUTE_FORCE_MAX_VARIABLES: usize = 8;

#[derive(Debug, Clone, Copy)]
enum Var {
    Charge(usize),
    Discharge(usize),
    Exchange(usize, usize),
}

/// Minimiser of the slot LP over the grid `{0, h, 2h, ...}` on every variable.
///
/// Only variables that can be nonzero are enumerated; the rest are fixed at 0.
/// The returned objective is within `h · Σ|c|` of the true optimum. Ties keep
/// the first point found, which favours small values of earlier variables.
pub fn brute_force_slot(problem: &SlotProblem, grid_step: f64) -> Result<SlotDecision> {
    problem.validate()?;
    if !(grid_step.is_finite() && grid_step > 0.0) {
        return Err(Error::validation("grid_step", format!("must be > 0, got {grid_step}")));
    }
    let n = problem.n;
    let mut vars = Vec::new();
    for i in 0..n {
        if problem.source_budget[i] > 0.0 && problem.y_max > 0.0 {
            vars.push(Var::Charge(i));
        }
        if problem.sink_budget[i] > 0.0 && problem.b_s_max > 0.0 {
            vars.push(Var::Discharge(i));
        }
        for j in (0..n).filter(|&j| j != i) {
            if problem.source_budget[i] > 0.0 && problem.sink_budget[j] > 0.0 && problem.b_ex_max > 0.0 {
                vars.push(Var::Exchange(i, j));
            }
        }
    }
    if vars.len() > BRUTE_FORCE_MAX_VARIABLES {
        return Err(Error::validation(
            "slot problem",
            format!("{} free variables exceed the brute-force limit {BRUTE_FORCE_MAX_VARIABLES}", vars.len()),
        ));
    }

    let mut search = Search {
        problem,
        vars: &vars,
        step: grid_step,
        source_left: problem.source_budget.clone(),
        sink_left: problem.sink_budget.clone(),
        values: vec![0.0; vars.len()],
        best_values: vec![0.0; vars.len()],
        best: 0.0,
    };
    search.descend(0, 0.0);

    let mut decision = SlotDecision::zeros(n);
    for (var, &x) in vars.iter().zip(&search.best_values) {
        match *var {
            Var::Charge(i) => decision.charge[i] = x,
            Var::Discharge(i) => decision.self_discharge[i] = x,
            Var::Exchange(i, j) => decision.set_sent(i, j, x),
        }
    }
    Ok(decision)
}

struct Search<'a> {
    problem: &'a SlotProblem,
    vars: &'a [Var],
    step: f64,
    source_left: Vec<f64>,
    sink_left: Vec<f64>,
    values: Vec<f64>,
    best_values: Vec<f64>,
    best: f64,
}

impl Search<'_> {
    fn descend(&mut self, depth: usize, objective: f64) {
        if depth == self.vars.len() {
            if objective < self.best {
                self.best = objective;
                self.best_values.copy_from_slice(&self.values);
            }
            return;
        }
        let p = self.problem;
        let (cap, coeff, source, sink) = match self.vars[depth] {
            Var::Charge(i) => (p.y_max, p.charge_coeff[i], Some(i), None),
            Var::Discharge(i) => (p.b_s_max, p.discharge_coeff[i], None, Some(i)),
            Var::Exchange(i, j) => (p.b_ex_max, p.exchange(i, j), Some(i), Some(j)),
        };
        let mut upper = cap;
        if let Some(i) = source {
            upper = upper.min(self.source_left[i]);
        }
        if let Some(j) = sink {
            upper = upper.min(self.sink_left[j]);
        }
        let slack = 1e-12 * self.step;
        let points = ((upper + slack) / self.step).floor().max(0.0) as usize;
        for k in 0..=points {
            let x = k as f64 * self.step;
            self.values[depth] = x;
            if let Some(i) = source {
                self.source_left[i] -= x;
            }
            if let Some(j) = sink {
                self.sink_left[j] -= x;
            }
            self.descend(depth + 1, objective + coeff * x);
            if let Some(i) = source {
                self.source_left[i] += x;
            }
            if let Some(j) = sink {
                self.sink_left[j] += x;
            }
        }
        self.values[depth] = 0.0;
    }
}
