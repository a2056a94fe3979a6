use std::collections::VecDeque;

use super::banded::BandMatrix;
use super::pmf::ExcessPmf;
use crate::error::{Error, Result};

/// Largest chain solved by direct elimination; bigger chains use power iteration.
pub const DIRECT_SOLVE_MAX_STATES: usize = 10_001;

/// Tolerance on each row sum of a transition matrix.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Row-stochastic matrix whose nonzeros lie within `bandwidth` of the diagonal.
///
/// A battery chain fed by jumps of at most `M` units never moves more than
/// `M` states per slot, clipping included, so the band is `M` wide.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    n: usize,
    bandwidth: usize,
    data: Vec<f64>,
}

impl TransitionMatrix {
    fn zeros(n: usize, bandwidth: usize) -> Self {
        let bandwidth = bandwidth.min(n.saturating_sub(1));
        Self {
            n,
            bandwidth,
            data: vec![0.0; n * (2 * bandwidth + 1)],
        }
    }

    /// Wraps a dense row-stochastic matrix.
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::validation("matrix", "must be square and non-empty"));
        }
        let bandwidth = rows
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().enumerate().filter(|(_, v)| **v != 0.0).map(move |(j, _)| i.abs_diff(j)))
            .max()
            .unwrap_or(0);
        let mut m = Self::zeros(n, bandwidth);
        for (i, r) in rows.iter().enumerate() {
            for (j, v) in r.iter().enumerate() {
                if *v != 0.0 {
                    m.add(i, j, *v);
                }
            }
        }
        m.check_stochastic()?;
        Ok(m)
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        if i.abs_diff(j) > self.bandwidth || i >= self.n || j >= self.n {
            None
        } else {
            Some(i * (2 * self.bandwidth + 1) + (j + self.bandwidth - i))
        }
    }

    fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.slot(i, j).expect("entry outside band");
        self.data[k] += v;
    }

    pub fn n_states(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |k| self.data[k])
    }

    /// Column range that may hold nonzeros in row `i`.
    fn band(&self, i: usize) -> std::ops::RangeInclusive<usize> {
        i.saturating_sub(self.bandwidth)..=(i + self.bandwidth).min(self.n - 1)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.get(i, j)).collect()).collect()
    }

    fn check_stochastic(&self) -> Result<()> {
        for i in 0..self.n {
            let mut sum = 0.0;
            for j in self.band(i) {
                let v = self.get(i, j);
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::validation("matrix", format!("entry ({i}, {j}) = {v} is not a probability")));
                }
                sum += v;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::validation("matrix", format!("row {i} sums to {sum}")));
            }
        }
        Ok(())
    }

    /// `π P`.
    pub fn left_multiply(&self, pi: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (i, p) in pi.iter().enumerate() {
            if *p == 0.0 {
                continue;
            }
            for j in self.band(i) {
                out[j] += p * self.get(i, j);
            }
        }
        out
    }

    /// `‖πP − π‖_∞`.
    pub fn residual(&self, pi: &[f64]) -> f64 {
        self.left_multiply(pi)
            .iter()
            .zip(pi)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    fn successors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.band(i).filter(move |&j| self.get(i, j) > 0.0)
    }

    fn predecessors(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        self.band(j).filter(move |&i| self.get(i, j) > 0.0)
    }

    /// Breadth-first levels from state 0 along positive transitions.
    fn levels(&self, forward: bool) -> Vec<Option<usize>> {
        let mut level = vec![None; self.n];
        level[0] = Some(0);
        let mut queue = VecDeque::from([0]);
        while let Some(u) = queue.pop_front() {
            let next: Vec<usize> = if forward {
                self.successors(u).collect()
            } else {
                self.predecessors(u).collect()
            };
            for v in next {
                if level[v].is_none() {
                    level[v] = Some(level[u].unwrap() + 1);
                    queue.push_back(v);
                }
            }
        }
        level
    }

    /// Errors unless every state reaches every other state.
    pub fn check_irreducible(&self) -> Result<()> {
        for (forward, dir) in [(true, "reached from"), (false, "able to reach")] {
            if let Some(s) = self.levels(forward).iter().position(Option::is_none) {
                return Err(Error::Reducible(format!("state {s} is not {dir} state 0")));
            }
        }
        Ok(())
    }

    /// Period of an irreducible chain (1 = aperiodic).
    pub fn period(&self) -> usize {
        let level = self.levels(true);
        let mut g = 0usize;
        for u in 0..self.n {
            let Some(lu) = level[u] else { continue };
            for v in self.successors(u) {
                if let Some(lv) = level[v] {
                    g = gcd(g, (lu + 1).abs_diff(lv));
                }
            }
        }
        g.max(1)
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Transition matrix of the clipped random walk
/// `E' = min(max(E + X̃, 0), e_max)` over states `0..=e_max`.
pub fn build_transition_matrix(pmf: &ExcessPmf, e_max: usize) -> TransitionMatrix {
    let n = e_max + 1;
    let mut m = TransitionMatrix::zeros(n, pmf.max_jump());
    for s in 0..n {
        for (k, p) in pmf.support() {
            if p == 0.0 {
                continue;
            }
            let target = (s as i64 + k).clamp(0, e_max as i64) as usize;
            m.add(s, target, p);
        }
    }
    m
}

/// Solves `πP = π`, `Σπ = 1` for an irreducible aperiodic chain.
pub fn stationary_distribution(matrix: &TransitionMatrix) -> Result<Vec<f64>> {
    matrix.check_stochastic()?;
    matrix.check_irreducible()?;
    let period = matrix.period();
    if period > 1 {
        return Err(Error::Periodic(period));
    }
    let n = matrix.n_states();
    if n == 1 {
        return Ok(vec![1.0]);
    }
    let pi = if n <= DIRECT_SOLVE_MAX_STATES {
        // Mass piles up at one end when the drift is strong, so pinning the
        // other end loses everything to cancellation. Try both ends, then
        // re-pin at the heaviest state so every unknown is bounded by 1.
        let first = [0, n - 1]
            .into_iter()
            .filter_map(|pin| solve_pinned(matrix, pin).ok())
            .min_by(|a, b| matrix.residual(a).total_cmp(&matrix.residual(b)))
            .ok_or_else(|| Error::Solver("singular stationary system".into()))?;
        let peak = first
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let pi = solve_pinned(matrix, peak)?;
        if let Some(v) = pi.iter().find(|v| !v.is_finite() || **v < -1e-12) {
            return Err(Error::Solver(format!("stationary solve produced {v}")));
        }
        pi.into_iter().map(|v| v.max(0.0)).collect::<Vec<_>>()
    } else {
        power_iteration(matrix)?
    };
    let residual = matrix.residual(&pi);
    if residual > 1e-9 {
        return Err(Error::Solver(format!("stationary residual {residual:.3e} too large")));
    }
    Ok(pi)
}

/// Fixes `π(pin) = 1`, drops the balance equation of `pin`, solves the
/// remaining banded system, then normalises. Entries may come out
/// slightly negative; the caller decides.
fn solve_pinned(matrix: &TransitionMatrix, pin: usize) -> Result<Vec<f64>> {
    let n = matrix.n_states();
    let bw = matrix.bandwidth();
    let reduced = |s: usize| if s < pin { s } else { s - 1 };
    let mut a = BandMatrix::zeros(n - 1, bw, bw);
    let mut rhs = vec![0.0; n - 1];
    // Balance of state j: Σ_s π(s) P[s][j] − π(j) = 0.
    for j in (0..n).filter(|&j| j != pin) {
        let row = reduced(j);
        for s in matrix.band(j) {
            let coeff = matrix.get(s, j) - if s == j { 1.0 } else { 0.0 };
            if s == pin {
                rhs[row] -= coeff;
            } else if coeff != 0.0 {
                a.add(row, reduced(s), coeff);
            }
        }
    }
    let x = a.solve(rhs)?;
    let mut pi = Vec::with_capacity(n);
    for s in 0..n {
        pi.push(if s == pin { 1.0 } else { x[reduced(s)] });
    }
    if pi.iter().any(|v| !v.is_finite()) {
        return Err(Error::Solver("stationary solve is not finite".into()));
    }
    let total: f64 = pi.iter().sum();
    Ok(pi.into_iter().map(|v| v / total).collect())
}

fn power_iteration(matrix: &TransitionMatrix) -> Result<Vec<f64>> {
    let n = matrix.n_states();
    let mut pi = vec![1.0 / n as f64; n];
    for _ in 0..1_000_000 {
        let next = matrix.left_multiply(&pi);
        let delta = next.iter().zip(&pi).fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs()));
        pi = next;
        if delta < 1e-15 {
            let total: f64 = pi.iter().sum();
            return Ok(pi.into_iter().map(|v| v / total).collect());
        }
    }
    Err(Error::Solver("power iteration did not converge".into()))
}

/// Battery-level chain together with its stationary distribution.
#[derive(Debug, Clone)]
pub struct StationaryModel {
    pub pmf: ExcessPmf,
    pub e_max: usize,
    pub matrix: TransitionMatrix,
    pub pi: Vec<f64>,
}

impl StationaryModel {
    pub fn solve(pmf: &ExcessPmf, e_max: usize) -> Result<Self> {
        let matrix = build_transition_matrix(pmf, e_max);
        let pi = stationary_distribution(&matrix)?;
        Ok(Self {
            pmf: pmf.clone(),
            e_max,
            matrix,
            pi,
        })
    }

    /// Expected macro-grid cost per slot: `q Σ_i Σ_{j≤i} (i − j) d_i π(j)`.
    pub fn macro_cost(&self, q_max: f64) -> f64 {
        let mut cost = 0.0;
        for i in 1..=self.pmf.max_jump() {
            let d = self.pmf.deficit_prob(i);
            if d == 0.0 {
                continue;
            }
            for j in 0..=i.min(self.e_max) {
                cost += (i - j) as f64 * d * self.pi[j];
            }
        }
        q_max * cost
    }
}

/// Steady-state macro-grid cost of a single isolated MG.
pub fn single_mg_cost(pmf: &ExcessPmf, e_max: usize, q_max: f64) -> Result<f64> {
    if (1..=pmf.max_jump()).all(|i| pmf.deficit_prob(i) == 0.0) {
        return Ok(0.0);
    }
    Ok(StationaryModel::solve(pmf, e_max)?.macro_cost(q_max))
}

/// Ratios closer to 1 than this use the uniform limit.
pub const UNIT_RATIO_TOL: f64 = 1e-9;

/// Geometric stationary law of the `±1` birth-death chain with up-rate `a`
/// and down-rate `d`: `π(i) = r^i (1 − r) / (1 − r^{e_max+1})`, `r = a / d`.
pub fn birth_death_closed_form(a: f64, d: f64, e_max: usize) -> Result<Vec<f64>> {
    if !(a >= 0.0 && a.is_finite()) {
        return Err(Error::validation("a", format!("must be >= 0, got {a}")));
    }
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::validation("d", format!("must be > 0 for r = a/d, got {d}")));
    }
    Ok(geometric_law(a / d, e_max))
}

/// `π(i) ∝ r^i` over `0..=e_max`, evaluated without overflow for either `r < 1` or `r > 1`.
pub(crate) fn geometric_law(r: f64, e_max: usize) -> Vec<f64> {
    let n = e_max + 1;
    if (r - 1.0).abs() < UNIT_RATIO_TOL {
        return vec![1.0 / n as f64; n];
    }
    if r < 1.0 {
        let head = (1.0 - r) / (1.0 - r.powi(n as i32));
        (0..n).map(|i| head * r.powi(i as i32)).collect()
    } else {
        let s = 1.0 / r;
        let tail = (1.0 - s) / (1.0 - s.powi(n as i32));
        (0..n).map(|i| tail * s.powi((e_max - i) as i32)).collect()
    }
}

/// `π(0)` of [`geometric_law`].
pub(crate) fn geometric_p0(r: f64, e_max: usize) -> f64 {
    let n = e_max + 1;
    if (r - 1.0).abs() < UNIT_RATIO_TOL {
        1.0 / n as f64
    } else if r < 1.0 {
        (1.0 - r) / (1.0 - r.powi(n as i32))
    } else {
        let s = 1.0 / r;
        (1.0 - s) * s.powi(e_max as i32) / (1.0 - s.powi(n as i32))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn strong_drift_either_way() {
        for (a, d) in [(0.5, 0.1), (0.1, 0.5), (0.5, 0.2)] {
            let pmf = ExcessPmf::three_point(a, d).unwrap();
            let pi = stationary_distribution(&build_transition_matrix(&pmf, 50)).unwrap();
            close(&pi, &birth_death_closed_form(a, d, 50).unwrap(), 1e-12);
        }
    }

    #[test]
    fn three_point_chain_is_tridiagonal() {
        let (a, d) = (0.2, 0.5);
        let p = build_transition_matrix(&ExcessPmf::three_point(a, d).unwrap(), 2);
        let dense = p.to_dense();
        assert!((dense[0][0] - (1.0 - a)).abs() < 1e-15);
        assert_eq!(dense[0][1], a);
        assert_eq!(dense[0][2], 0.0);
        assert_eq!(dense[1][0], d);
        assert_eq!(dense[1][2], a);
        assert!((dense[2][2] - (1.0 - d)).abs() < 1e-15);
    }

    #[test]
    fn zero_jump_chain_is_identity() {
        let p = build_transition_matrix(&ExcessPmf::new(vec![1.0]).unwrap(), 3);
        for (i, row) in p.to_dense().iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert_eq!(*v, if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn clipping_collects_mass_at_the_floor() {
        let pmf = ExcessPmf::from_pairs(&[(-2, 0.3), (1, 0.7)]).unwrap();
        let p = build_transition_matrix(&pmf, 1).to_dense();
        // From 1: −2 clips to 0; +1 clips to 1. From 0: −2 clips to 0.
        assert_eq!(p[1][0], 0.3);
        assert_eq!(p[1][1], 0.7);
        assert_eq!(p[0][0], 0.3);
        assert_eq!(p[0][1], 0.7);
    }

    #[test]
    fn identity_chain_is_reducible() {
        let p = build_transition_matrix(&ExcessPmf::new(vec![1.0]).unwrap(), 2);
        assert!(matches!(stationary_distribution(&p), Err(Error::Reducible(_))));
    }

    #[test]
    fn alternating_chain_is_periodic() {
        let p = TransitionMatrix::from_dense(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(matches!(stationary_distribution(&p), Err(Error::Periodic(2))));
    }

    #[test]
    fn numeric_law_for_the_worked_example() {
        // r = 0.4: π ∝ (1, 0.4, 0.16) / 1.56.
        let expect = [1.0 / 1.56, 0.4 / 1.56, 0.16 / 1.56];
        let model = StationaryModel::solve(&ExcessPmf::three_point(0.2, 0.5).unwrap(), 2).unwrap();
        close(&model.pi, &expect, 1e-12);
        close(&birth_death_closed_form(0.2, 0.5, 2).unwrap(), &expect, 1e-15);
        assert!((model.pi[0] - 0.64103).abs() < 5e-6);
        assert!((model.pi[1] - 0.25641).abs() < 5e-6);
        assert!((model.pi[2] - 0.10256).abs() < 5e-6);
    }

    #[test]
    fn symmetric_chain_is_uniform() {
        let pi = stationary_distribution(&build_transition_matrix(&ExcessPmf::three_point(0.3, 0.3).unwrap(), 4)).unwrap();
        close(&pi, &[0.2; 5], 1e-12);
        close(&birth_death_closed_form(0.3, 0.3, 4).unwrap(), &[0.2; 5], 1e-15);
    }

    #[test]
    fn closed_form_edge_cases() {
        assert_eq!(birth_death_closed_form(0.2, 0.5, 0).unwrap(), vec![1.0]);
        assert!(birth_death_closed_form(0.2, 0.0, 3).is_err());
        // r > 1 evaluated from the top state without overflow.
        let pi = birth_death_closed_form(0.5, 0.1, 5000).unwrap();
        assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((pi[5000] - 0.8).abs() < 1e-12);
        assert_eq!(geometric_p0(5.0, 5000), 0.0);
    }

    #[test]
    fn wide_jumps_match_dense_power_iteration() {
        let pmf = ExcessPmf::from_pairs(&[(-3, 0.1), (-1, 0.3), (0, 0.2), (2, 0.4)]).unwrap();
        let model = StationaryModel::solve(&pmf, 9).unwrap();
        let mut pi = vec![0.1; 10];
        for _ in 0..5000 {
            pi = model.matrix.left_multiply(&pi);
        }
        close(&model.pi, &pi, 1e-12);
        assert!(model.matrix.residual(&model.pi) < 1e-14);
    }

    #[test]
    fn single_mg_cost_examples() {
        let pmf = ExcessPmf::three_point(0.2, 0.5).unwrap();
        assert!((single_mg_cost(&pmf, 0, 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((single_mg_cost(&pmf, 2, 1.0).unwrap() - 0.5 / 1.56).abs() < 1e-12);
        let no_deficit = ExcessPmf::three_point(0.4, 0.0).unwrap();
        assert_eq!(single_mg_cost(&no_deficit, 5, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn general_cost_sums_partial_shortfalls() {
        // Deficit of 2 w.p. 0.5, surplus of 1 w.p. 0.5, capacity 1.
        // Chain on {0, 1}: from 0 → 0 (½), 1 (½); from 1 → 0 (½), 1 (½).
        // π = (½, ½); shortfall: 2 at E=0, 1 at E=1 → cost = ½·½·2 + ½·½·1 = 0.75.
        let pmf = ExcessPmf::from_pairs(&[(-2, 0.5), (1, 0.5)]).unwrap();
        assert!((single_mg_cost(&pmf, 1, 1.0).unwrap() - 0.75).abs() < 1e-12);
    }
}
