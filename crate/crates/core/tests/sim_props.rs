use gridrel::indices::{self, CostTable};
use gridrel::io::scenario::{builtin_network, synthetic_costs, synthetic_profiles, Scenario};
use gridrel::model::{build_network, NetworkSpec};
use gridrel::sim::{HistoryLedger, Profiles, SimulationConfig, Simulator};
use gridrel::time::Duration;
use proptest::prelude::*;

fn feeder6() -> NetworkSpec {
    builtin_network("feeder6").unwrap().unwrap()
}

fn costs() -> CostTable {
    synthetic_costs()
}

fn config(seed: u64) -> SimulationConfig {
    SimulationConfig {
        master_seed: seed,
        iterations: 1,
        ..SimulationConfig::default()
    }
}

fn one_iteration(spec: &NetworkSpec, seed: u64, iteration: usize) -> HistoryLedger {
    let model = build_network(spec).unwrap();
    let profiles = Profiles::new();
    Simulator::new(&model, &profiles, &costs(), &config(seed))
        .unwrap()
        .run_iteration(iteration)
}

#[test]
fn ledger_totals_never_decrease() {
    let spec = Scenario::Case4.apply(builtin_network("ieee33").unwrap().unwrap());
    let model = build_network(&spec).unwrap();
    let mut profiles = Profiles::new();
    synthetic_profiles().add_to_profiles(&mut profiles, Duration::hours(1.0)).unwrap();
    let config = SimulationConfig {
        horizon: Duration::hours(3000.0),
        ..config(3)
    };
    let sim = Simulator::new(&model, &profiles, &costs(), &config).unwrap();
    for iteration in 0..3 {
        let mut rt = sim.initial_runtime(iteration);
        let mut ledger = HistoryLedger::new(&model, iteration, config.horizon);
        let mut previous = ledger.clone();
        while rt.step < config.steps() {
            sim.run_increment(&mut rt, &mut ledger);
            for (now, before) in ledger.load_points.iter().zip(&previous.load_points) {
                assert!(now.interruptions >= before.interruptions);
                assert!(now.outage >= before.outage);
                assert!(now.energy_not_supplied_mwh >= before.energy_not_supplied_mwh);
            }
            for (b, soc) in model.batteries.iter().zip(&rt.battery_soc) {
                assert!(*soc >= b.soc_min - 1e-9 && *soc <= b.soc_max + 1e-9);
            }
            previous.clone_from(&ledger);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // Failures do not depend on the loads, so ENS scales with them.
    #[test]
    fn ens_scales_with_load(seed in any::<u64>(), factor in 0.25f64..4.0) {
        let spec = feeder6();
        let mut scaled = spec.clone();
        for b in &mut scaled.buses {
            b.load_mw *= factor;
            b.load_mvar *= factor;
        }
        let a = indices::ens(&one_iteration(&spec, seed, 0));
        let b = indices::ens(&one_iteration(&scaled, seed, 0));
        prop_assert!((b - factor * a).abs() <= 1e-9 * (1.0 + b.abs()), "{} vs {}", b, factor * a);
    }

    // Customer-weighted averages ignore a common scale factor.
    #[test]
    fn frequency_and_duration_ignore_customer_scale(seed in any::<u64>(), factor in 2u32..50) {
        let spec = feeder6();
        let mut scaled = spec.clone();
        for b in &mut scaled.buses {
            b.customers *= factor;
        }
        let a = one_iteration(&spec, seed, 1);
        let b = one_iteration(&scaled, seed, 1);
        prop_assert!((indices::saifi(&a).unwrap() - indices::saifi(&b).unwrap()).abs() < 1e-12);
        prop_assert!((indices::saidi(&a).unwrap() - indices::saidi(&b).unwrap()).abs() < 1e-12);
    }
}
