use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{BusIdx, LineIdx};
use crate::reliability::SectioningPolicy;
use crate::time::Duration;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("increment must be positive")]
    ZeroIncrement,
    #[error("increment {increment} does not divide horizon {horizon}")]
    IncrementDoesNotDivide { increment: Duration, horizon: Duration },
    #[error("at least one iteration is required")]
    NoIterations,
    #[error("at least one worker is required")]
    NoWorkers,
}

/// A component the simulation can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "index")]
pub enum ComponentRef {
    Line(LineIdx),
    Transformer(BusIdx),
    IntelligentSwitch(usize),
    Sensor(usize),
    ControllerHardware,
    ControllerSoftware,
}

/// A failure forced at a given time in scripted mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScriptedFault {
    /// Offset from the start of the iteration; rounded down to an increment.
    pub at: Duration,
    pub component: ComponentRef,
    /// Replaces the component's repair time (or sampled recovery) when set.
    pub repair_time: Option<Duration>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub increment: Duration,
    pub horizon: Duration,
    pub iterations: usize,
    pub master_seed: u64,
    pub sectioning: SectioningPolicy,
    #[serde(skip)]
    pub worker_count: usize,
    pub loadflow_tolerance: f64,
    pub loadflow_max_iterations: usize,
    /// When non-empty, replaces stochastic failure draws.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scripted_faults: Vec<ScriptedFault>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            increment: Duration::hours(1.0),
            horizon: Duration::years(1.0),
            iterations: 1000,
            master_seed: 0,
            sectioning: SectioningPolicy::default(),
            worker_count: 1,
            loadflow_tolerance: crate::loadflow::DEFAULT_TOLERANCE,
            loadflow_max_iterations: crate::loadflow::DEFAULT_MAX_ITERATIONS,
            scripted_faults: Vec::new(),
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.increment.millis() <= 0 {
            return Err(ConfigError::ZeroIncrement);
        }
        if self.horizon.exact_div(self.increment).is_none() {
            return Err(ConfigError::IncrementDoesNotDivide {
                increment: self.increment,
                horizon: self.horizon,
            });
        }
        if self.iterations == 0 {
            return Err(ConfigError::NoIterations);
        }
        if self.worker_count == 0 {
            return Err(ConfigError::NoWorkers);
        }
        Ok(())
    }

    pub fn steps(&self) -> i64 {
        self.horizon.exact_div(self.increment).unwrap_or(0)
    }

    pub fn is_scripted(&self) -> bool {
        !self.scripted_faults.is_empty()
    }
}
