//! Physical quantities, feasibility rules, battery dynamics and cost
//! accounting shared by every other module.
//!
//! One slot is one hour, so MW and MWh-per-slot are numerically equal.
//! Energies are MWh, prices are money per MWh, distances are km.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::ArrivalSpec;

/// Absolute tolerance for equality constraints.
pub const EQ_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Per-slot battery and exchange limits, identical at every MG.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Capacities {
    pub e_max_mwh: f64,
    pub y_max_mwh: f64,
    pub b_s_max_mwh: f64,
    pub b_ex_max_mwh: f64,
}

impl Capacities {
    pub fn new(e_max: f64, y_max: f64, b_s_max: f64, b_ex_max: f64) -> Result<Self> {
        let caps = Self {
            e_max_mwh: e_max,
            y_max_mwh: y_max,
            b_s_max_mwh: b_s_max,
            b_ex_max_mwh: b_ex_max,
        };
        caps.validate()?;
        Ok(caps)
    }

    /// All-zero battery: the MG has no storage at all.
    pub fn storage_disabled(&self) -> bool {
        self.e_max_mwh == 0.0 && self.y_max_mwh == 0.0 && self.b_s_max_mwh == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("e_max_mwh", self.e_max_mwh),
            ("y_max_mwh", self.y_max_mwh),
            ("b_s_max_mwh", self.b_s_max_mwh),
            ("b_ex_max_mwh", self.b_ex_max_mwh),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::validation(field, format!("must be finite and >= 0, got {v}")));
            }
        }
        // A battery must be strictly larger than one full charge plus one
        // full discharge; the all-zero battery is the storage-free model.
        if !self.storage_disabled() && self.e_max_mwh <= self.y_max_mwh + self.b_s_max_mwh {
            return Err(Error::validation(
                "e_max_mwh",
                format!(
                    "capacity {} must exceed y_max + b_s_max = {}",
                    self.e_max_mwh,
                    self.y_max_mwh + self.b_s_max_mwh
                ),
            ));
        }
        Ok(())
    }
}

/// Exchange prices `p[i][j]` (row = sender) and macro-grid prices `q[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceTable {
    n: usize,
    exchange: Vec<f64>,
    macro_price: Vec<f64>,
}

impl PriceTable {
    /// `exchange` is row-major `n × n`; its diagonal is ignored and stored as 0.
    pub fn new(exchange: Vec<f64>, macro_price: Vec<f64>) -> Result<Self> {
        let n = macro_price.len();
        if exchange.len() != n * n {
            return Err(Error::validation(
                "exchange_price",
                format!("expected {} entries for {n} MGs, got {}", n * n, exchange.len()),
            ));
        }
        let mut exchange = exchange;
        for i in 0..n {
            exchange[i * n + i] = 0.0;
        }
        if let Some(v) = exchange.iter().chain(&macro_price).find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::validation("prices", format!("must be finite and >= 0, got {v}")));
        }
        Ok(Self { n, exchange, macro_price })
    }

    /// Same exchange price for every ordered pair and same macro price everywhere.
    pub fn uniform(n: usize, p: f64, q: f64) -> Result<Self> {
        Self::new(vec![p; n * n], vec![q; n])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn p(&self, from: usize, to: usize) -> f64 {
        self.exchange[from * self.n + to]
    }

    #[inline]
    pub fn q(&self, mg: usize) -> f64 {
        self.macro_price[mg]
    }

    pub fn p_max(&self) -> f64 {
        let mut m = 0.0_f64;
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    m = m.max(self.p(i, j));
                }
            }
        }
        m
    }

    pub fn q_max(&self) -> f64 {
        self.macro_price.iter().copied().fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self.p(i, j) == self.p(j, i)))
    }
}

/// Static description of one grid instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridScenario {
    /// MG coordinates in km; empty when prices are given directly.
    pub positions: Vec<Point>,
    pub macro_position: Option<Point>,
    pub prices: PriceTable,
    pub load_mw: Vec<f64>,
    pub caps: Capacities,
    pub arrival: ArrivalSpec,
    pub initial_energy_mwh: Vec<f64>,
}

impl GridScenario {
    /// Builds a scenario with empty batteries and checks every invariant.
    pub fn new(prices: PriceTable, load_mw: Vec<f64>, caps: Capacities, arrival: ArrivalSpec) -> Result<Self> {
        let n = prices.n();
        let scenario = Self {
            positions: Vec::new(),
            macro_position: None,
            prices,
            load_mw,
            caps,
            arrival,
            initial_energy_mwh: vec![0.0; n],
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn n_mgs(&self) -> usize {
        self.prices.n()
    }

    pub fn with_initial_energy(mut self, energy: Vec<f64>) -> Result<Self> {
        self.initial_energy_mwh = energy;
        self.validate()?;
        Ok(self)
    }

    pub fn initial_state(&self) -> MicrogridState {
        MicrogridState {
            energy: self.initial_energy_mwh.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_mgs();
        if n == 0 {
            return Err(Error::validation("n_mgs", "need at least one MG"));
        }
        self.caps.validate()?;
        self.arrival.validate()?;
        if self.load_mw.len() != n {
            return Err(Error::validation("load_mw", format!("expected {n} entries, got {}", self.load_mw.len())));
        }
        if let Some(l) = self.load_mw.iter().find(|l| !l.is_finite() || **l < 0.0) {
            return Err(Error::validation("load_mw", format!("must be finite and >= 0, got {l}")));
        }
        let lowest = self.arrival.min_excess_mwh();
        if let Some(l) = self.load_mw.iter().find(|l| **l + lowest < -EQ_TOL) {
            return Err(Error::validation(
                "load_mw",
                format!("load {l} is smaller than the largest possible deficit {}", -lowest),
            ));
        }
        if !self.positions.is_empty() && self.positions.len() != n {
            return Err(Error::validation("positions", format!("expected {n} points")));
        }
        if self.initial_energy_mwh.len() != n {
            return Err(Error::validation("initial_energy_mwh", format!("expected {n} entries")));
        }
        if let Some(e) = self
            .initial_energy_mwh
            .iter()
            .find(|e| !(0.0..=self.caps.e_max_mwh).contains(*e))
        {
            return Err(Error::validation(
                "initial_energy_mwh",
                format!("{e} outside [0, {}]", self.caps.e_max_mwh),
            ));
        }
        Ok(())
    }
}

/// Battery level of every MG.
#[derive(Debug, Clone, PartialEq)]
pub struct MicrogridState {
    pub energy: Vec<f64>,
}

impl MicrogridState {
    pub fn empty(n: usize) -> Self {
        Self { energy: vec![0.0; n] }
    }

    pub fn n(&self) -> usize {
        self.energy.len()
    }
}

/// One slot's realised harvest and load with the derived excess/deficit split.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotExogenous {
    pub harvest: Vec<f64>,
    pub load: Vec<f64>,
    pub excess: Vec<f64>,
    pub deficit: Vec<f64>,
}

impl SlotExogenous {
    pub fn new(harvest: Vec<f64>, load: Vec<f64>) -> Result<Self> {
        let (excess, deficit) = split_excess_deficit(&harvest, &load)?;
        Ok(Self { harvest, load, excess, deficit })
    }

    /// Builds a slot straight from excess/deficit budgets, with harvest and
    /// load reconstructed on a zero base load.
    pub fn from_split(excess: Vec<f64>, deficit: Vec<f64>) -> Result<Self> {
        if excess.len() != deficit.len() {
            return Err(Error::validation("excess", "length differs from deficit"));
        }
        if excess.iter().zip(&deficit).any(|(x, l)| *x > 0.0 && *l > 0.0) {
            return Err(Error::validation("excess", "an MG cannot have both excess and deficit"));
        }
        let harvest = excess.clone();
        let load = deficit.clone();
        let exo = Self::new(harvest, load)?;
        Ok(exo)
    }

    pub fn n(&self) -> usize {
        self.excess.len()
    }
}

/// Splits harvest minus load into its positive (excess) and negative
/// (deficit) parts.
pub fn split_excess_deficit(harvest: &[f64], load: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if harvest.len() != load.len() {
        return Err(Error::validation(
            "harvest",
            format!("length {} differs from load length {}", harvest.len(), load.len()),
        ));
    }
    for (field, values) in [("harvest", harvest), ("load", load)] {
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::validation(field, format!("must be finite and >= 0, got {v}")));
        }
    }
    let excess = harvest.iter().zip(load).map(|(x, l)| (x - l).max(0.0)).collect();
    let deficit = harvest.iter().zip(load).map(|(x, l)| (l - x).max(0.0)).collect();
    Ok((excess, deficit))
}

/// Control action for one slot. `exchange` is row-major `n × n` with
/// `exchange[i * n + j]` the energy sent from MG `i` to MG `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotDecision {
    pub charge: Vec<f64>,
    pub self_discharge: Vec<f64>,
    pub exchange: Vec<f64>,
    pub macro_draw: Vec<f64>,
}

impl SlotDecision {
    pub fn zeros(n: usize) -> Self {
        Self {
            charge: vec![0.0; n],
            self_discharge: vec![0.0; n],
            exchange: vec![0.0; n * n],
            macro_draw: vec![0.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.charge.len()
    }

    #[inline]
    pub fn sent(&self, from: usize, to: usize) -> f64 {
        self.exchange[from * self.n() + to]
    }

    #[inline]
    pub fn set_sent(&mut self, from: usize, to: usize, value: f64) {
        let n = self.n();
        self.exchange[from * n + to] = value;
    }

    /// Σ_{j≠i} B_ij.
    pub fn exported(&self, i: usize) -> f64 {
        (0..self.n()).filter(|&j| j != i).map(|j| self.sent(i, j)).sum()
    }

    /// Σ_{j≠i} B_ji.
    pub fn imported(&self, i: usize) -> f64 {
        (0..self.n()).filter(|&j| j != i).map(|j| self.sent(j, i)).sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let s = |v: &Vec<f64>| v.iter().map(|x| x * factor).collect();
        Self {
            charge: s(&self.charge),
            self_discharge: s(&self.self_discharge),
            exchange: s(&self.exchange),
            macro_draw: s(&self.macro_draw),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Constraint {
    /// Y_i + Σ B_ij ≤ x̃_i.
    SourceBudget { mg: usize },
    /// B_ii + Σ B_ji + G_i = l̃_i.
    Balance { mg: usize },
    /// B_ii ≤ min(E_i, b_s_max).
    DischargeLimit { mg: usize },
    /// Y_i ≤ min(e_max − E_i, y_max).
    ChargeLimit { mg: usize },
    /// B_ij ≤ b_ex_max.
    ExchangeCap { from: usize, to: usize },
    /// B_ij > 0 while MG i has no excess.
    ExchangeWithoutExcess { from: usize, to: usize },
    /// A variable below zero.
    Negative { mg: usize },
    /// A variable is NaN or infinite.
    NonFinite { mg: usize },
}

/// One violated constraint; `excess` is how far past the limit the decision went.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub constraint: Constraint,
    pub excess: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} violated by {:.3e}", self.constraint, self.excess)
    }
}

/// Every violated constraint of a candidate decision; empty iff feasible.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ViolationReport {
    pub violations: Vec<Violation>,
}

impl ViolationReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn contains(&self, pred: impl Fn(&Constraint) -> bool) -> bool {
        self.violations.iter().any(|v| pred(&v.constraint))
    }

    fn check(&mut self, constraint: Constraint, excess: f64) {
        if excess > EQ_TOL || excess.is_nan() {
            self.violations.push(Violation { constraint, excess });
        }
    }
}

impl fmt::Display for ViolationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "feasible");
        }
        let parts: Vec<String> = self.violations.iter().map(ToString::to_string).collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// Checks every per-slot feasibility rule of `decision`.
pub fn validate_decision(
    caps: &Capacities,
    state: &MicrogridState,
    exo: &SlotExogenous,
    decision: &SlotDecision,
) -> ViolationReport {
    let n = exo.n();
    let mut report = ViolationReport::default();
    debug_assert_eq!(state.n(), n);
    debug_assert_eq!(decision.n(), n);

    for i in 0..n {
        let own = [decision.charge[i], decision.self_discharge[i], decision.macro_draw[i]];
        let outgoing = (0..n).filter(|&j| j != i).map(|j| decision.sent(i, j));
        let all = own.iter().copied().chain(outgoing);
        let mut worst_negative = 0.0_f64;
        for v in all {
            if !v.is_finite() {
                report.violations.push(Violation {
                    constraint: Constraint::NonFinite { mg: i },
                    excess: f64::INFINITY,
                });
            } else {
                worst_negative = worst_negative.max(-v);
            }
        }
        report.check(Constraint::Negative { mg: i }, worst_negative);

        report.check(
            Constraint::SourceBudget { mg: i },
            decision.charge[i] + decision.exported(i) - exo.excess[i],
        );
        let served = decision.self_discharge[i] + decision.imported(i) + decision.macro_draw[i];
        report.check(Constraint::Balance { mg: i }, (served - exo.deficit[i]).abs());
        report.check(
            Constraint::DischargeLimit { mg: i },
            decision.self_discharge[i] - state.energy[i].min(caps.b_s_max_mwh),
        );
        report.check(
            Constraint::ChargeLimit { mg: i },
            decision.charge[i] - (caps.e_max_mwh - state.energy[i]).min(caps.y_max_mwh),
        );
        for j in (0..n).filter(|&j| j != i) {
            let b = decision.sent(i, j);
            report.check(Constraint::ExchangeCap { from: i, to: j }, b - caps.b_ex_max_mwh);
            if exo.excess[i] <= 0.0 {
                report.check(Constraint::ExchangeWithoutExcess { from: i, to: j }, b);
            }
        }
    }
    report
}

/// Advances every battery by one slot: `E' = E − B_ii + Y`.
///
/// No clipping is applied. A result outside `[0, e_max]` (beyond [`EQ_TOL`])
/// means the decision was never feasible and is reported as an invariant
/// fault.
pub fn battery_step(caps: &Capacities, state: &MicrogridState, decision: &SlotDecision) -> Result<MicrogridState> {
    let mut energy = Vec::with_capacity(state.n());
    for (i, e) in state.energy.iter().enumerate() {
        let next = e - decision.self_discharge[i] + decision.charge[i];
        if !(next >= -EQ_TOL && next <= caps.e_max_mwh + EQ_TOL) {
            return Err(Error::invariant(
                0,
                format!("battery {i} would move from {e} to {next}, outside [0, {}]", caps.e_max_mwh),
            ));
        }
        energy.push(next);
    }
    Ok(MicrogridState { energy })
}

/// Per-MG cost of one slot: `q_i G_i + Σ_{j≠i} p_ji B_ji` (the receiver pays).
pub fn slot_cost(decision: &SlotDecision, prices: &PriceTable) -> Vec<f64> {
    let n = decision.n();
    (0..n)
        .map(|i| {
            let imports: f64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| prices.p(j, i) * decision.sent(j, i))
                .sum();
            prices.q(i) * decision.macro_draw[i] + imports
        })
        .collect()
}

/// Running totals of cost and energy flows.
#[derive(Debug, Clone, PartialEq)]
pub struct CostLedger {
    pub last_slot_cost: Vec<f64>,
    pub cumulative_cost: Vec<f64>,
    pub macro_energy: Vec<f64>,
    /// Energy received from other MGs.
    pub imported_energy: Vec<f64>,
    /// Energy sent to other MGs.
    pub exported_energy: Vec<f64>,
    pub stored_energy: Vec<f64>,
    pub discharged_energy: Vec<f64>,
    pub slots: usize,
}

impl CostLedger {
    pub fn new(n: usize) -> Self {
        Self {
            last_slot_cost: vec![0.0; n],
            cumulative_cost: vec![0.0; n],
            macro_energy: vec![0.0; n],
            imported_energy: vec![0.0; n],
            exported_energy: vec![0.0; n],
            stored_energy: vec![0.0; n],
            discharged_energy: vec![0.0; n],
            slots: 0,
        }
    }

    /// Books one slot and returns its grid-wide cost.
    pub fn record(&mut self, decision: &SlotDecision, prices: &PriceTable) -> f64 {
        let costs = slot_cost(decision, prices);
        for (i, c) in costs.iter().enumerate() {
            self.cumulative_cost[i] += c;
            self.macro_energy[i] += decision.macro_draw[i];
            self.imported_energy[i] += decision.imported(i);
            self.exported_energy[i] += decision.exported(i);
            self.stored_energy[i] += decision.charge[i];
            self.discharged_energy[i] += decision.self_discharge[i];
        }
        let total = costs.iter().sum();
        self.last_slot_cost = costs;
        self.slots += 1;
        total
    }

    pub fn total_cost(&self) -> f64 {
        self.cumulative_cost.iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::ExcessPmf;

    fn caps() -> Capacities {
        Capacities::new(10.0, 1.0, 1.0, 1.0).unwrap()
    }

    fn unit_arrivals() -> ArrivalSpec {
        ArrivalSpec::Discrete {
            pmf: ExcessPmf::three_point(0.2, 0.5).unwrap(),
            unit_mwh: 1.0,
        }
    }

    #[test]
    fn split_matches_definition() {
        let (x, l) = split_excess_deficit(&[12.0], &[10.0]).unwrap();
        assert_eq!((x, l), (vec![2.0], vec![0.0]));
        let (x, l) = split_excess_deficit(&[10.0], &[10.0]).unwrap();
        assert_eq!((x, l), (vec![0.0], vec![0.0]));
        let (x, l) = split_excess_deficit(&[7.0, 13.0], &[10.0, 10.0]).unwrap();
        assert_eq!((x, l), (vec![0.0, 3.0], vec![3.0, 0.0]));
    }

    #[test]
    fn split_rejects_negative_and_ragged_input() {
        assert!(matches!(
            split_excess_deficit(&[-1.0], &[1.0]),
            Err(Error::Validation { .. })
        ));
        assert!(split_excess_deficit(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn zero_decision_with_deficit_breaks_balance() {
        let exo = SlotExogenous::from_split(vec![0.0], vec![1.0]).unwrap();
        let report = validate_decision(&caps(), &MicrogridState::empty(1), &exo, &SlotDecision::zeros(1));
        assert!(report.contains(|c| matches!(c, Constraint::Balance { mg: 0 })));
    }

    #[test]
    fn overdrawn_battery_is_flagged() {
        let state = MicrogridState { energy: vec![0.5] };
        let exo = SlotExogenous::from_split(vec![0.0], vec![2.0]).unwrap();
        let mut d = SlotDecision::zeros(1);
        d.self_discharge[0] = 1.5;
        d.macro_draw[0] = 0.5;
        let report = validate_decision(&caps(), &state, &exo, &d);
        assert!(report.contains(|c| matches!(c, Constraint::DischargeLimit { mg: 0 })));
    }

    #[test]
    fn hand_built_feasible_decision_passes() {
        let state = MicrogridState { energy: vec![3.0, 2.0] };
        let exo = SlotExogenous::from_split(vec![2.0, 0.0], vec![0.0, 1.5]).unwrap();
        let mut d = SlotDecision::zeros(2);
        d.charge[0] = 1.0;
        d.set_sent(0, 1, 0.75);
        d.self_discharge[1] = 0.5;
        d.macro_draw[1] = 0.25;
        let report = validate_decision(&caps(), &state, &exo, &d);
        assert!(report.is_feasible(), "{report}");
    }

    #[test]
    fn exchange_from_deficit_mg_is_flagged() {
        let state = MicrogridState { energy: vec![0.0, 0.0] };
        let exo = SlotExogenous::from_split(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let mut d = SlotDecision::zeros(2);
        d.set_sent(0, 1, 0.5);
        d.macro_draw[0] = 1.0;
        d.macro_draw[1] = 0.5;
        let report = validate_decision(&caps(), &state, &exo, &d);
        assert!(report.contains(|c| matches!(c, Constraint::ExchangeWithoutExcess { from: 0, to: 1 })));
    }

    #[test]
    fn battery_step_is_exact() {
        let c = caps();
        let mut d = SlotDecision::zeros(1);
        d.self_discharge[0] = 1.0;
        let next = battery_step(&c, &MicrogridState { energy: vec![5.0] }, &d).unwrap();
        assert_eq!(next.energy, vec![4.0]);

        let mut d = SlotDecision::zeros(1);
        d.charge[0] = 0.5;
        let next = battery_step(&c, &MicrogridState { energy: vec![0.0] }, &d).unwrap();
        assert_eq!(next.energy, vec![0.5]);

        let mut d = SlotDecision::zeros(1);
        d.charge[0] = c.y_max_mwh;
        let start = c.e_max_mwh - c.y_max_mwh;
        let next = battery_step(&c, &MicrogridState { energy: vec![start] }, &d).unwrap();
        assert_eq!(next.energy, vec![c.e_max_mwh]);
    }

    #[test]
    fn battery_step_faults_outside_range() {
        let mut d = SlotDecision::zeros(1);
        d.self_discharge[0] = 1.0;
        let err = battery_step(&caps(), &MicrogridState { energy: vec![0.5] }, &d).unwrap_err();
        assert!(matches!(err, Error::Invariant { .. }));
    }

    #[test]
    fn cost_is_booked_to_receiver() {
        let prices = PriceTable::new(vec![0.0, 1.0, 1.0, 0.0], vec![3.0, 3.0]).unwrap();
        let mut d = SlotDecision::zeros(2);
        d.set_sent(0, 1, 1.0);
        assert_eq!(slot_cost(&d, &prices), vec![0.0, 1.0]);

        let mut d = SlotDecision::zeros(2);
        d.macro_draw[0] = 1.0;
        assert_eq!(slot_cost(&d, &prices), vec![3.0, 0.0]);
        assert_eq!(slot_cost(&SlotDecision::zeros(2), &prices), vec![0.0, 0.0]);
    }

    #[test]
    fn capacity_assumption_is_enforced() {
        assert!(Capacities::new(2.0, 0.5, 0.5, 10.0).is_ok());
        assert!(Capacities::new(1.0, 1.0, 1.0, 1.0).is_err());
        assert!(Capacities::new(0.0, 0.0, 0.0, 1.0).unwrap().storage_disabled());
    }

    #[test]
    fn scenario_rejects_out_of_range_initial_energy() {
        let prices = PriceTable::uniform(1, 1.0, 1.0).unwrap();
        let s = GridScenario::new(prices, vec![10.0], caps(), unit_arrivals()).unwrap();
        assert!(s.clone().with_initial_energy(vec![11.0]).is_err());
        assert!(s.with_initial_energy(vec![10.0]).is_ok());
    }

    #[test]
    fn ledger_accumulates() {
        let prices = PriceTable::new(vec![0.0, 2.0, 2.0, 0.0], vec![3.0, 5.0]).unwrap();
        let mut ledger = CostLedger::new(2);
        let mut d = SlotDecision::zeros(2);
        d.set_sent(0, 1, 0.5);
        d.macro_draw[1] = 1.0;
        d.charge[0] = 0.25;
        assert_eq!(ledger.record(&d, &prices), 6.0);
        assert_eq!(ledger.record(&d, &prices), 6.0);
        assert_eq!(ledger.total_cost(), 12.0);
        assert_eq!(ledger.imported_energy, vec![0.0, 1.0]);
        assert_eq!(ledger.exported_energy, vec![1.0, 0.0]);
        assert_eq!(ledger.stored_energy, vec![0.5, 0.0]);
    }
}
