use rayon::prelude::*;

use crate::indices::{self, AggregateReport, CostTable, IndexError, IndexReport};
use crate::model::NetworkModel;

use super::config::SimulationConfig;
use super::engine::{SimError, Simulator};
use super::ledger::HistoryLedger;
use super::profiles::Profiles;

#[derive(Debug, thiserror::Error)]
pub enum MonteCarloError {
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error(transparent)]
    Indices(#[from] IndexError),
    #[error("could not start worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloResult {
    /// One ledger per iteration, in iteration order.
    pub ledgers: Vec<HistoryLedger>,
    pub reports: Vec<IndexReport>,
    pub aggregate: AggregateReport,
}

/// Runs iterations `first..first + count` on `config.worker_count` threads.
/// The outcome does not depend on the number of workers: every iteration
/// has its own random streams and results are kept in iteration order.
pub fn run_range(
    sim: &Simulator<'_>,
    costs: &CostTable,
    first: usize,
    count: usize,
) -> Result<MonteCarloResult, MonteCarloError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(sim.config().worker_count)
        .build()
        .map_err(|e| MonteCarloError::Pool(e.to_string()))?;
    let ledgers: Vec<HistoryLedger> =
        pool.install(|| (first..first + count).into_par_iter().map(|i| sim.run_iteration(i)).collect());
    let reports = ledgers
        .iter()
        .map(|l| indices::report(l, costs))
        .collect::<Result<Vec<_>, _>>()?;
    let aggregate = indices::aggregate(&reports)?;
    Ok(MonteCarloResult {
        ledgers,
        reports,
        aggregate,
    })
}

pub fn run_monte_carlo(
    model: &NetworkModel,
    profiles: &Profiles,
    costs: &CostTable,
    config: &SimulationConfig,
) -> Result<MonteCarloResult, MonteCarloError> {
    let sim = Simulator::new(model, profiles, costs, config)?;
    run_range(&sim, costs, 0, config.iterations)
}
