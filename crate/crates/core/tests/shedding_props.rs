mod common;

use common::OracleLp;
use gridrel::shedding::{solve_shedding, SheddingStatus};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-6;

fn check_feasible(p: &gridrel::shedding::SheddingProblem, r: &gridrel::shedding::SheddingResult) {
    assert!(p.balance_residual(r) < TOL, "balance {}", p.balance_residual(r));
    for (k, n) in p.nodes.iter().enumerate() {
        assert!(r.shed[k] >= -TOL && r.shed[k] <= n.demand + TOL);
    }
    for (g, gen) in p.generators.iter().enumerate() {
        assert!(r.generation[g] >= gen.min - TOL && r.generation[g] <= gen.max + TOL);
    }
    for (l, line) in p.lines.iter().enumerate() {
        assert!(r.line_flow[l].abs() <= line.capacity + TOL);
    }
}

#[test]
fn matches_reference_lp_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut infeasible = 0;
    for case in 0..1000 {
        let p = common::random_shedding_problem(&mut rng);
        let r = solve_shedding(&p);
        match common::shedding_oracle(&p) {
            OracleLp::Optimal(v) => {
                assert_eq!(r.status, SheddingStatus::Optimal, "case {case}");
                assert!((r.objective - v).abs() < TOL, "case {case}: {} vs {v}", r.objective);
                check_feasible(&p, &r);
            }
            OracleLp::Infeasible => {
                infeasible += 1;
                assert_eq!(r.status, SheddingStatus::Infeasible, "case {case}");
            }
        }
    }
    // The generator makes some instances infeasible on purpose.
    assert!(infeasible > 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    // Raising a node's cost never lowers the optimum.
    #[test]
    fn optimum_is_monotone_in_cost(seed in any::<u64>(), bump in 0.0f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = common::random_shedding_problem(&mut rng);
        let base = solve_shedding(&p);
        prop_assume!(base.status == SheddingStatus::Optimal);
        let mut q = p.clone();
        let k = (seed as usize) % q.nodes.len();
        q.nodes[k].cost += bump;
        let raised = solve_shedding(&q);
        prop_assert!(raised.objective >= base.objective - TOL);
    }

    // Extra line capacity never raises the optimum.
    #[test]
    fn optimum_is_monotone_in_capacity(seed in any::<u64>(), factor in 1.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = common::random_shedding_problem(&mut rng);
        let base = solve_shedding(&p);
        prop_assume!(base.status == SheddingStatus::Optimal);
        let mut q = p.clone();
        for l in &mut q.lines {
            l.capacity *= factor;
        }
        let wider = solve_shedding(&q);
        prop_assert_eq!(wider.status, SheddingStatus::Optimal);
        prop_assert!(wider.objective <= base.objective + TOL);
    }

    #[test]
    fn solutions_are_feasible(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = common::random_shedding_problem(&mut rng);
        let r = solve_shedding(&p);
        if r.status == SheddingStatus::Optimal {
            check_feasible(&p, &r);
        }
    }
}
