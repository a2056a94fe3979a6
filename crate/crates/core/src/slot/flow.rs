//! Successive-shortest-path min-cost flow on the slot transportation graph.
//!
//! Nodes: super source, super sink, one "excess" node and one "deficit" node
//! per MG. Arcs in insertion order:
//!
//! * source → deficit j, own-battery discharge `B_jj`
//! * excess i → deficit j, exchange `B_ij`
//! * excess i → sink, charging `Y_i`
//! * source → excess i (cap `x̃_i`) and deficit j → sink (cap `l̃_j`)
//!
//! Bellman-Ford scans arcs in that order with strict improvement, so among
//! equal-cost paths the earliest arc wins. Only strictly negative paths are
//! augmented. A second pass then fills own-battery moves whose coefficient is
//! exactly zero or below; zero-cost exchange is left idle.

use super::{SlotProblem, DEFAULT_SLOT_TOL};
use crate::error::{Error, Result};
use crate::grid::SlotDecision;

const SOURCE: usize = 0;
const SINK: usize = 1;

#[derive(Debug, Clone, Copy)]
enum Role {
    Discharge(usize),
    Exchange(usize, usize),
    Charge(usize),
    Supply,
    Demand,
}

#[derive(Debug, Clone, Copy)]
struct Arc {
    from: usize,
    to: usize,
    cap: f64,
    cost: f64,
}

struct Network {
    nodes: usize,
    /// Forward arc `2k`, its residual twin `2k + 1`.
    arcs: Vec<Arc>,
    roles: Vec<Role>,
}

impl Network {
    fn add(&mut self, from: usize, to: usize, cap: f64, cost: f64, role: Role) {
        if cap <= 0.0 {
            return;
        }
        self.arcs.push(Arc { from, to, cap, cost });
        self.arcs.push(Arc { from: to, to: from, cap: 0.0, cost: -cost });
        self.roles.push(role);
    }

    fn push(&mut self, arc: usize, amount: f64) {
        self.arcs[arc].cap -= amount;
        self.arcs[arc ^ 1].cap += amount;
    }

    fn flow(&self, k: usize) -> f64 {
        self.arcs[2 * k + 1].cap
    }

    /// Cheapest residual path from the source to the sink, as arc indices.
    fn shortest_path(&self, cap_eps: f64, cost_eps: f64) -> Result<Option<(f64, Vec<usize>)>> {
        let mut dist = vec![f64::INFINITY; self.nodes];
        let mut pred = vec![usize::MAX; self.nodes];
        dist[SOURCE] = 0.0;
        let mut settled = false;
        for _ in 0..self.nodes {
            let mut changed = false;
            for (e, arc) in self.arcs.iter().enumerate() {
                if arc.cap <= cap_eps || dist[arc.from] == f64::INFINITY {
                    continue;
                }
                let candidate = dist[arc.from] + arc.cost;
                if candidate < dist[arc.to] - cost_eps {
                    dist[arc.to] = candidate;
                    pred[arc.to] = e;
                    changed = true;
                }
            }
            if !changed {
                settled = true;
                break;
            }
        }
        if !settled {
            return Err(Error::Solver("negative residual cycle in slot network".into()));
        }
        if dist[SINK] == f64::INFINITY {
            return Ok(None);
        }
        let mut path = Vec::new();
        let mut node = SINK;
        while node != SOURCE {
            let e = pred[node];
            path.push(e);
            node = self.arcs[e].from;
            if path.len() > self.nodes {
                return Err(Error::Solver("cyclic predecessor chain in slot network".into()));
            }
        }
        path.reverse();
        Ok(Some((dist[SINK], path)))
    }
}

/// Optimal dispatch for one slot LP; the macro draw is left at zero.
///
/// `tolerance` is relative to the largest coefficient and bounds how negative
/// a path must be before it is augmented.
pub fn solve_slot(problem: &SlotProblem, tolerance: f64) -> Result<SlotDecision> {
    problem.validate()?;
    let tolerance = if tolerance.is_finite() && tolerance > 0.0 { tolerance } else { DEFAULT_SLOT_TOL };
    let n = problem.n;
    let excess = |i: usize| 2 + i;
    let deficit = |j: usize| 2 + n + j;

    let mut net = Network {
        nodes: 2 + 2 * n,
        arcs: Vec::with_capacity(2 * (n * n + 4 * n)),
        roles: Vec::with_capacity(n * n + 4 * n),
    };
    for j in 0..n {
        if problem.sink_budget[j] > 0.0 {
            net.add(SOURCE, deficit(j), problem.b_s_max, problem.discharge_coeff[j], Role::Discharge(j));
        }
    }
    for j in 0..n {
        for i in (0..n).filter(|&i| i != j) {
            if problem.source_budget[i] > 0.0 && problem.sink_budget[j] > 0.0 {
                net.add(excess(i), deficit(j), problem.b_ex_max, problem.exchange(i, j), Role::Exchange(i, j));
            }
        }
    }
    for i in 0..n {
        if problem.source_budget[i] > 0.0 {
            net.add(excess(i), SINK, problem.y_max, problem.charge_coeff[i], Role::Charge(i));
        }
    }
    for i in 0..n {
        net.add(SOURCE, excess(i), problem.source_budget[i], 0.0, Role::Supply);
    }
    for j in 0..n {
        net.add(deficit(j), SINK, problem.sink_budget[j], 0.0, Role::Demand);
    }

    let cap_scale = problem
        .source_budget
        .iter()
        .chain(&problem.sink_budget)
        .chain([&problem.y_max, &problem.b_s_max, &problem.b_ex_max])
        .fold(1.0_f64, |m, v| m.max(*v));
    let cost_scale = net.arcs.iter().fold(1.0_f64, |m, a| m.max(a.cost.abs()));
    let cap_eps = 1e-12 * cap_scale;
    let cost_eps = tolerance * 1e-3 * cost_scale;

    let max_rounds = 4 * net.arcs.len() + 16;
    let mut rounds = 0;
    while let Some((cost, path)) = net.shortest_path(cap_eps, cost_eps * 1e-3)? {
        if cost >= -cost_eps {
            break;
        }
        let amount = path.iter().map(|&e| net.arcs[e].cap).fold(f64::INFINITY, f64::min);
        for &e in &path {
            net.push(e, amount);
        }
        rounds += 1;
        if rounds > max_rounds {
            return Err(Error::Solver("slot flow did not converge".into()));
        }
    }

    // Zero-cost own-battery moves go toward action.
    let supply_arc = |net: &Network, node: usize, forward_from: bool| {
        net.roles
            .iter()
            .enumerate()
            .find(|(k, r)| {
                let a = net.arcs[2 * k];
                match r {
                    Role::Supply => forward_from && a.to == node,
                    Role::Demand => !forward_from && a.from == node,
                    _ => false,
                }
            })
            .map(|(k, _)| 2 * k)
    };
    for k in 0..net.roles.len() {
        match net.roles[k] {
            Role::Discharge(j) if problem.discharge_coeff[j] <= 0.0 => {
                if let Some(demand) = supply_arc(&net, deficit(j), false) {
                    let amount = net.arcs[2 * k].cap.min(net.arcs[demand].cap);
                    if amount > cap_eps {
                        net.push(2 * k, amount);
                        net.push(demand, amount);
                    }
                }
            }
            Role::Charge(i) if problem.charge_coeff[i] <= 0.0 => {
                if let Some(supply) = supply_arc(&net, excess(i), true) {
                    let amount = net.arcs[2 * k].cap.min(net.arcs[supply].cap);
                    if amount > cap_eps {
                        net.push(2 * k, amount);
                        net.push(supply, amount);
                    }
                }
            }
            _ => {}
        }
    }

    let mut decision = SlotDecision::zeros(n);
    let clean = |x: f64, cap: f64, coeff: f64| {
        if x <= cap_eps || coeff > 0.0 {
            0.0
        } else {
            x.min(cap)
        }
    };
    for (k, role) in net.roles.iter().enumerate() {
        let x = net.flow(k);
        match *role {
            Role::Discharge(j) => {
                decision.self_discharge[j] = clean(x, problem.b_s_max, problem.discharge_coeff[j]);
            }
            Role::Exchange(i, j) => {
                decision.set_sent(i, j, clean(x, problem.b_ex_max, problem.exchange(i, j)));
            }
            Role::Charge(i) => {
                decision.charge[i] = clean(x, problem.y_max, problem.charge_coeff[i]);
            }
            Role::Supply | Role::Demand => {}
        }
    }
    trim_budgets(problem, &mut decision);
    Ok(decision)
}

/// Removes floating-point overshoot of the source and sink budgets.
fn trim_budgets(problem: &SlotProblem, d: &mut SlotDecision) {
    let n = problem.n;
    for i in 0..n {
        let over = d.charge[i] + d.exported(i) - problem.source_budget[i];
        if over > 0.0 {
            d.charge[i] = (d.charge[i] - over).max(0.0);
        }
        let over = d.self_discharge[i] + d.imported(i) - problem.sink_budget[i];
        if over > 0.0 {
            d.self_discharge[i] = (d.self_discharge[i] - over).max(0.0);
        }
    }
}
