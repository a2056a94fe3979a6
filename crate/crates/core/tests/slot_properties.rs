use mgcoop::grid::SlotDecision;
use mgcoop::scenario::{substream, StreamPurpose};
use mgcoop::selftest::{compare_with_oracle, random_slot_problem};
use mgcoop::slot::{solve_slot, SlotProblem, DEFAULT_SLOT_TOL};
use proptest::prelude::*;

fn problem(seed: u64) -> SlotProblem {
    random_slot_problem(&mut substream(seed, 0, StreamPurpose::Arrivals))
}

fn solve(p: &SlotProblem) -> SlotDecision {
    solve_slot(p, DEFAULT_SLOT_TOL).expect("solver succeeds on valid input")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn never_worse_than_grid_oracle(seed in any::<u64>()) {
        let gap = compare_with_oracle(&problem(seed)).unwrap();
        prop_assert!(gap.ok(), "{gap:?}");
    }

    #[test]
    fn decisions_are_feasible(seed in any::<u64>()) {
        let p = problem(seed);
        let d = solve(&p);
        prop_assert!(p.infeasibility(&d) <= 1e-9, "infeasibility {}", p.infeasibility(&d));
    }

    #[test]
    fn objective_never_positive(seed in any::<u64>()) {
        // Doing nothing is feasible and costs 0.
        let p = problem(seed);
        prop_assert!(p.objective(&solve(&p)) <= 1e-12);
    }

    #[test]
    fn positive_coefficients_stay_idle(seed in any::<u64>()) {
        let p = problem(seed);
        let d = solve(&p);
        for i in 0..p.n {
            if p.charge_coeff[i] > 0.0 {
                prop_assert_eq!(d.charge[i], 0.0);
            }
            if p.discharge_coeff[i] > 0.0 {
                prop_assert_eq!(d.self_discharge[i], 0.0);
            }
            for j in (0..p.n).filter(|&j| j != i) {
                if p.exchange(i, j) > 0.0 {
                    prop_assert_eq!(d.sent(i, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn objective_is_linear(seed in any::<u64>(), factor in 0.0f64..1.0) {
        let p = problem(seed);
        let d = solve(&p);
        let scaled = p.objective(&d.scaled(factor));
        prop_assert!((scaled - factor * p.objective(&d)).abs() <= 1e-12);
    }

    #[test]
    fn same_input_same_output(seed in any::<u64>()) {
        let p = problem(seed);
        prop_assert_eq!(solve(&p), solve(&p));
    }
}

#[test]
fn rejects_negative_budget() {
    let mut p = problem(1);
    p.source_budget[0] = -1.0;
    assert!(solve_slot(&p, DEFAULT_SLOT_TOL).is_err());
}
