//! Sequential Monte Carlo simulation.

pub mod config;
pub mod engine;
pub mod ledger;
pub mod montecarlo;
pub mod profiles;

pub use config::{ComponentRef, ScriptedFault, SimulationConfig};
pub use engine::{SimError, Simulator, SystemRuntime};
pub use ledger::HistoryLedger;
pub use montecarlo::{run_monte_carlo, MonteCarloResult};
pub use profiles::Profiles;
