//! Stochastic component behaviour: failure draws, the Working / Failed /
//! UnderRepair state machine, multi-phase ICT recovery and sectioning time.
//!
//! Timers in [`ComponentState`] are measured from the start of the increment
//! the state is in effect for. A phase is only considered in effect for an
//! increment when it covers that whole increment; shorter phases are passed
//! through within the increment, and their remainder carries into the next
//! phase. Outage durations observed at increment resolution are therefore the
//! true durations rounded down to a multiple of the increment.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Battery, LineIdx, NetworkModel, SwitchKind};
use crate::time::Duration;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReliabilityError {
    #[error("failure rate must be non-negative and finite, got {0}")]
    InvalidRate(f64),
    #[error("repair time must be positive when the failure rate is positive")]
    MissingRepairTime,
    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("increment must be positive")]
    InvalidIncrement,
    #[error("unknown line index {0}")]
    UnknownLine(LineIdx),
}

/// Failure rate (failures per year) and mean repair duration of a component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityParams {
    pub failure_rate: f64,
    pub repair_time: Duration,
}

impl ReliabilityParams {
    pub const NEVER_FAILS: ReliabilityParams = ReliabilityParams {
        failure_rate: 0.0,
        repair_time: Duration::ZERO,
    };

    pub fn new(failure_rate: f64, repair_time: Duration) -> Result<Self, ReliabilityError> {
        let params = ReliabilityParams {
            failure_rate,
            repair_time,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), ReliabilityError> {
        if !self.failure_rate.is_finite() || self.failure_rate < 0.0 {
            return Err(ReliabilityError::InvalidRate(self.failure_rate));
        }
        if self.failure_rate > 0.0 && self.repair_time.millis() <= 0 {
            return Err(ReliabilityError::MissingRepairTime);
        }
        Ok(())
    }
}

/// Recovery phases for sensors and controller software failures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepairPhases {
    pub new_signal_time: Duration,
    pub reboot_time: Duration,
    pub manual_repair_time: Duration,
    pub p_new_signal_success: f64,
    pub p_reboot_success: f64,
}

impl RepairPhases {
    pub fn validate(&self) -> Result<(), ReliabilityError> {
        for p in [self.p_new_signal_success, self.p_reboot_success] {
            if !(0.0..=1.0).contains(&p) {
                return Err(ReliabilityError::InvalidProbability(p));
            }
        }
        Ok(())
    }

    /// Longest possible recovery: every automatic phase fails.
    pub fn worst_case(&self) -> Duration {
        self.new_signal_time + self.reboot_time + self.manual_repair_time
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    Working,
    Failed,
    UnderRepair,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentState {
    pub mode: Mode,
    /// Time left until repair starts. `None` while a failure is latent
    /// (not yet discovered).
    pub remaining_until_repair_starts: Option<Duration>,
    pub remaining_repair: Duration,
}

impl Default for ComponentState {
    fn default() -> Self {
        Self::WORKING
    }
}

impl ComponentState {
    pub const WORKING: ComponentState = ComponentState {
        mode: Mode::Working,
        remaining_until_repair_starts: None,
        remaining_repair: Duration::ZERO,
    };

    /// A freshly failed component whose failure has not been discovered yet.
    pub const LATENT: ComponentState = ComponentState {
        mode: Mode::Failed,
        remaining_until_repair_starts: None,
        remaining_repair: Duration::ZERO,
    };

    pub fn failed(until_repair: Duration) -> Self {
        ComponentState {
            mode: Mode::Failed,
            remaining_until_repair_starts: Some(until_repair),
            remaining_repair: Duration::ZERO,
        }
    }

    pub fn under_repair(remaining: Duration) -> Self {
        ComponentState {
            mode: Mode::UnderRepair,
            remaining_until_repair_starts: None,
            remaining_repair: remaining,
        }
    }

    pub fn is_working(&self) -> bool {
        self.mode == Mode::Working
    }

    pub fn is_latent(&self) -> bool {
        self.mode == Mode::Failed && self.remaining_until_repair_starts.is_none()
    }

    /// True while a timer is running, i.e. the state changes on its own.
    pub fn is_ticking(&self) -> bool {
        match self.mode {
            Mode::Working => false,
            Mode::Failed => self.remaining_until_repair_starts.is_some(),
            Mode::UnderRepair => true,
        }
    }

    /// Marks a failure as discovered: repair starts after `until_repair`.
    /// Phases shorter than `dt` collapse within the current increment.
    pub fn discover(self, until_repair: Duration, params: &ReliabilityParams, dt: Duration) -> Self {
        if self.mode != Mode::Failed {
            return self;
        }
        ComponentState::failed(until_repair).settle(params, dt)
    }

    /// Moves through every phase that ends inside the current increment.
    fn settle(mut self, params: &ReliabilityParams, dt: Duration) -> Self {
        if self.mode == Mode::Failed {
            match self.remaining_until_repair_starts {
                Some(r) if r < dt => {
                    self = ComponentState::under_repair(r + params.repair_time);
                }
                _ => return self,
            }
        }
        if self.mode == Mode::UnderRepair && self.remaining_repair < dt {
            self = ComponentState::WORKING;
        }
        self
    }

    /// Advances one increment. `fails` is the outcome of this increment's
    /// failure draw and is only consulted while the component is working.
    pub fn advance(self, params: &ReliabilityParams, dt: Duration, fails: bool) -> Self {
        match self.mode {
            Mode::Working => {
                if fails {
                    ComponentState::LATENT
                } else {
                    self
                }
            }
            Mode::Failed => match self.remaining_until_repair_starts {
                None => self,
                Some(r) => ComponentState::failed(r - dt).settle(params, dt),
            },
            Mode::UnderRepair => {
                ComponentState::under_repair(self.remaining_repair - dt).settle(params, dt)
            }
        }
    }
}

/// Probability that a component with `rate` failures/year fails within `dt`,
/// `1 - exp(-rate * dt)` with `dt` in years.
pub fn failure_probability(rate: f64, dt: Duration) -> Result<f64, ReliabilityError> {
    if !rate.is_finite() || rate < 0.0 {
        return Err(ReliabilityError::InvalidRate(rate));
    }
    if dt.millis() <= 0 {
        return Err(ReliabilityError::InvalidIncrement);
    }
    Ok(-(-rate * dt.as_years()).exp_m1())
}

/// One increment of the component state machine with a Bernoulli failure
/// draw. A new failure is left latent; the caller decides when it is
/// discovered (see [`ComponentState::discover`]).
pub fn draw_status<R: Rng + ?Sized>(
    state: ComponentState,
    params: &ReliabilityParams,
    dt: Duration,
    rng: &mut R,
) -> ComponentState {
    let fails = state.is_working()
        && params.failure_rate > 0.0
        && rng.random::<f64>() < failure_probability(params.failure_rate, dt).unwrap_or(0.0);
    state.advance(params, dt, fails)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RepairOutcome {
    NewSignal,
    Reboot,
    Manual,
}

/// Draws the recovery path of a sensor or controller-software failure.
pub fn ict_repair_duration<R: Rng + ?Sized>(
    phases: &RepairPhases,
    rng: &mut R,
) -> (Duration, RepairOutcome) {
    let mut repair = phases.new_signal_time;
    if rng.random::<f64>() < phases.p_new_signal_success {
        return (repair, RepairOutcome::NewSignal);
    }
    repair += phases.reboot_time;
    if rng.random::<f64>() < phases.p_reboot_success {
        return (repair, RepairOutcome::Reboot);
    }
    (repair + phases.manual_repair_time, RepairOutcome::Manual)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectioningPolicy {
    pub automated: Duration,
    pub manual: Duration,
}

impl Default for SectioningPolicy {
    fn default() -> Self {
        SectioningPolicy {
            automated: Duration::minutes(5.0),
            manual: Duration::hours(1.0),
        }
    }
}

/// Working/failed view of the ICT components at one instant.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IctStatus {
    pub controller_working: bool,
    /// Indexed like `model.ict.sensors`.
    pub sensors_working: Vec<bool>,
    /// Indexed like `model.ict.intelligent_switches`.
    pub switches_working: Vec<bool>,
}

impl IctStatus {
    pub fn all_working(model: &NetworkModel) -> Self {
        IctStatus {
            controller_working: model.ict.controller.is_some(),
            sensors_working: vec![true; model.ict.sensors.len()],
            switches_working: vec![true; model.ict.intelligent_switches.len()],
        }
    }
}

/// ICT elements a fault on a line calls upon.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IctDemand {
    pub sensor: Option<usize>,
    pub switches: Vec<usize>,
    /// False when some required element does not exist at all.
    pub complete: bool,
}

/// The sensor on the faulted line and the intelligent switches on every
/// disconnector bounding its section.
pub fn ict_demand(model: &NetworkModel, fault_line: LineIdx) -> Result<IctDemand, ReliabilityError> {
    let line = model
        .lines
        .get(fault_line)
        .ok_or(ReliabilityError::UnknownLine(fault_line))?;
    let mut demand = IctDemand {
        sensor: line.sensor,
        switches: Vec::new(),
        complete: model.ict.controller.is_some() && line.sensor.is_some(),
    };
    if let Some(impact) = model.fault_impact(fault_line) {
        for &sw in &impact.bounding {
            let gear = &model.switchgear[sw];
            if gear.kind != SwitchKind::Disconnector {
                continue;
            }
            match gear.intelligent_switch {
                Some(isw) => demand.switches.push(isw),
                None => demand.complete = false,
            }
        }
    }
    Ok(demand)
}

/// Time from breaker opening until the faulted section is isolated:
/// automated when the controller, the line's sensor and every isolating
/// intelligent switch work, manual otherwise.
pub fn sectioning_time(
    model: &NetworkModel,
    fault_line: LineIdx,
    ict_status: &IctStatus,
    policy: &SectioningPolicy,
) -> Result<Duration, ReliabilityError> {
    let demand = ict_demand(model, fault_line)?;
    let automated = demand.complete
        && ict_status.controller_working
        && demand
            .sensor
            .is_some_and(|s| ict_status.sensors_working.get(s).copied().unwrap_or(false))
        && demand
            .switches
            .iter()
            .all(|&s| ict_status.switches_working.get(s).copied().unwrap_or(false));
    Ok(if automated {
        policy.automated
    } else {
        policy.manual
    })
}

/// Uniform state of charge between the battery's limits.
pub fn draw_battery_soc<R: Rng + ?Sized>(battery: &Battery, rng: &mut R) -> f64 {
    if battery.soc_max <= battery.soc_min {
        return battery.soc_min;
    }
    battery.soc_min + (battery.soc_max - battery.soc_min) * rng.random::<f64>()
}
