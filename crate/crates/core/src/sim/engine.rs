//! One Monte Carlo iteration, increment by increment.
//!
//! Each increment: set loads and production from the profiles, advance every
//! component's state, and, while any line or transformer is out, rebuild the
//! switching state, split the network into sub-systems, dispatch batteries,
//! run the load flow and the shedding problem, and book interruptions and
//! energy not supplied into the ledger.
//!
//! Failure draws use one random stream per component. Instead of a Bernoulli
//! draw every increment, the number of increments until the next failure is
//! drawn from the matching geometric distribution, which lets the loop skip
//! over stretches where nothing happens.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::indices::CostTable;
use crate::loadflow::{self, Branch, LoadFlowProblem};
use crate::model::{Battery, BusIdx, LineIdx, NetworkModel, SwitchIdx, SwitchState};
use crate::reliability::{
    self, ict_demand, ict_repair_duration, ComponentState, IctDemand, IctStatus, Mode,
    ReliabilityParams, RepairPhases,
};
use crate::shedding::{self, SheddingStatus, SourceBound, SubsystemInput};
use crate::time::Duration;

use super::config::{ComponentRef, ConfigError, ScriptedFault, SimulationConfig};
use super::ledger::{ComponentEvent, EventKind, HistoryLedger};
use super::profiles::Profiles;

const SHED_TOL: f64 = 1e-9;
const OVERLOAD_MARGIN: f64 = 1.01;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{owner} `{id}` uses unknown profile `{profile}`")]
    MissingProfile {
        owner: &'static str,
        id: String,
        profile: String,
    },
    #[error("no cost given for load category `{0}`")]
    MissingCost(String),
    #[error("scripted fault refers to a component that does not exist: {0:?}")]
    UnknownComponent(ComponentRef),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Discovery {
    /// Discovered as soon as it fails.
    Immediate,
    /// Discovered when called upon during sectioning.
    OnDemand,
    /// Discovered when the breaker trips; repair starts after sectioning.
    Sectioning,
}

#[derive(Debug, Clone)]
struct ComponentInfo {
    reference: ComponentRef,
    params: ReliabilityParams,
    phases: Option<RepairPhases>,
    discovery: Discovery,
}

/// Switch operated by fault isolation or restoration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SwitchingAction {
    pub switch: SwitchIdx,
    pub state: SwitchState,
}

/// Charge and discharge limits of a battery over one increment, in MW.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryLimits {
    pub charge: f64,
    pub discharge: f64,
}

pub fn battery_limits(battery: &Battery, soc: f64, dt: Duration) -> BatteryLimits {
    let hours = dt.as_hours();
    let energy_out = ((soc - battery.soc_min) * battery.capacity_mwh / hours).max(0.0);
    let energy_in = ((battery.soc_max - soc) * battery.capacity_mwh / hours).max(0.0);
    BatteryLimits {
        charge: battery.inverter_capacity_mw.min(energy_in),
        discharge: battery.inverter_capacity_mw.min(energy_out),
    }
}

/// Battery power for one increment: positive discharges, negative charges.
/// `balance` is local generation minus demand in the battery's sub-system.
/// Grid-connected batteries stay idle.
pub fn update_battery_demand(battery: &Battery, soc: f64, islanded: bool, balance: f64, dt: Duration) -> f64 {
    if !islanded {
        return 0.0;
    }
    let limits = battery_limits(battery, soc, dt);
    if balance < 0.0 {
        limits.discharge.min(-balance)
    } else {
        -limits.charge.min(balance)
    }
}

/// New state of charge after delivering `power` MW for `dt`.
pub fn apply_battery_power(battery: &Battery, soc: f64, power: f64, dt: Duration) -> f64 {
    (soc - power * dt.as_hours() / battery.capacity_mwh).clamp(battery.soc_min, battery.soc_max)
}

/// Mutable state of one iteration.
#[derive(Debug, Clone)]
pub struct SystemRuntime {
    pub step: i64,
    /// Component states; lines come first, in line index order.
    pub states: Vec<ComponentState>,
    pub switch_positions: Vec<SwitchState>,
    pub battery_soc: Vec<f64>,
    battery_islanded: Vec<bool>,
    effective: Vec<ReliabilityParams>,
    next_failure: Vec<i64>,
    rngs: Vec<ChaCha8Rng>,
    battery_rngs: Vec<ChaCha8Rng>,
    active_events: Vec<LineEvent>,
    unattributed: Vec<bool>,
}

impl SystemRuntime {
    pub fn line_state(&self, line: LineIdx) -> ComponentState {
        self.states[line]
    }
}

#[derive(Debug, Clone)]
struct LineEvent {
    line: LineIdx,
    counted: Vec<bool>,
}

fn stream_rng(master_seed: u64, tag: u64, index: u64, iteration: usize) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&master_seed.to_le_bytes());
    seed[8..16].copy_from_slice(&tag.to_le_bytes());
    seed[16..24].copy_from_slice(&index.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(iteration as u64);
    rng
}

fn component_tag(c: ComponentRef) -> (u64, u64) {
    match c {
        ComponentRef::Line(i) => (1, i as u64),
        ComponentRef::Transformer(i) => (2, i as u64),
        ComponentRef::IntelligentSwitch(i) => (3, i as u64),
        ComponentRef::Sensor(i) => (4, i as u64),
        ComponentRef::ControllerHardware => (5, 0),
        ComponentRef::ControllerSoftware => (6, 0),
    }
}

/// Model, inputs and precomputed lookups shared by every iteration.
#[derive(Debug, Clone)]
pub struct Simulator<'a> {
    model: &'a NetworkModel,
    profiles: &'a Profiles,
    config: SimulationConfig,
    shed_cost: Vec<f64>,
    components: Vec<ComponentInfo>,
    transformer_comp: Vec<Option<usize>>,
    switch_comp: Vec<usize>,
    sensor_comp: Vec<usize>,
    controller_comps: Option<(usize, usize)>,
    load_point_slot: Vec<Option<usize>>,
    is_root: Vec<bool>,
    root_capacity: Vec<f64>,
    ict_demands: Vec<IctDemand>,
    scripted: BTreeMap<i64, Vec<(usize, Option<Duration>)>>,
}

impl<'a> Simulator<'a> {
    pub fn new(
        model: &'a NetworkModel,
        profiles: &'a Profiles,
        costs: &CostTable,
        config: &SimulationConfig,
    ) -> Result<Self, SimError> {
        config.validate()?;
        for bus in &model.buses {
            if let Some(p) = bus.load.as_ref().and_then(|l| l.profile.as_ref()) {
                if profiles.get(p).is_none() {
                    return Err(SimError::MissingProfile {
                        owner: "bus",
                        id: bus.id.clone(),
                        profile: p.clone(),
                    });
                }
            }
        }
        for unit in &model.production {
            if let Some(p) = &unit.profile {
                if profiles.get(p).is_none() {
                    return Err(SimError::MissingProfile {
                        owner: "production unit",
                        id: unit.id.clone(),
                        profile: p.clone(),
                    });
                }
            }
        }
        let steps = config.steps() as usize;
        for name in profiles.names() {
            let len = profiles.get(name).map_or(0, |v| v.len());
            if len > 0 && len < steps {
                log::warn!("profile `{name}` covers {len} of {steps} increments and wraps around");
            }
        }

        let mut shed_cost = vec![0.0; model.buses.len()];
        for (b, bus) in model.buses.iter().enumerate() {
            if let Some(cat) = bus.load.as_ref().and_then(|l| l.category.as_ref()) {
                shed_cost[b] = *costs.get(cat).ok_or_else(|| SimError::MissingCost(cat.clone()))?;
            }
        }

        let mut components = Vec::new();
        for (i, line) in model.lines.iter().enumerate() {
            components.push(ComponentInfo {
                reference: ComponentRef::Line(i),
                params: line.reliability,
                phases: None,
                discovery: Discovery::Sectioning,
            });
        }
        let mut transformer_comp = vec![None; model.buses.len()];
        for (b, bus) in model.buses.iter().enumerate() {
            if let Some(params) = bus.transformer_reliability {
                transformer_comp[b] = Some(components.len());
                components.push(ComponentInfo {
                    reference: ComponentRef::Transformer(b),
                    params,
                    phases: None,
                    discovery: Discovery::Immediate,
                });
            }
        }
        let mut switch_comp = Vec::new();
        for (i, s) in model.ict.intelligent_switches.iter().enumerate() {
            switch_comp.push(components.len());
            components.push(ComponentInfo {
                reference: ComponentRef::IntelligentSwitch(i),
                params: s.reliability,
                phases: None,
                discovery: Discovery::OnDemand,
            });
        }
        let mut sensor_comp = Vec::new();
        for (i, s) in model.ict.sensors.iter().enumerate() {
            sensor_comp.push(components.len());
            components.push(ComponentInfo {
                reference: ComponentRef::Sensor(i),
                params: s.reliability,
                phases: Some(s.phase_times),
                discovery: Discovery::OnDemand,
            });
        }
        let controller_comps = model.ict.controller.as_ref().map(|c| {
            let hw = components.len();
            components.push(ComponentInfo {
                reference: ComponentRef::ControllerHardware,
                params: c.hardware_reliability,
                phases: None,
                discovery: Discovery::Immediate,
            });
            components.push(ComponentInfo {
                reference: ComponentRef::ControllerSoftware,
                params: c.software_reliability,
                phases: Some(c.phase_times),
                discovery: Discovery::Immediate,
            });
            (hw, hw + 1)
        });

        let mut load_point_slot = vec![None; model.buses.len()];
        let mut slot = 0;
        for (b, bus) in model.buses.iter().enumerate() {
            if bus.is_load_point() {
                load_point_slot[b] = Some(slot);
                slot += 1;
            }
        }
        let mut is_root = vec![false; model.buses.len()];
        let mut root_capacity = vec![0.0; model.buses.len()];
        for ds in &model.distribution_systems {
            is_root[ds.root] = true;
            root_capacity[ds.root] = ds.source_capacity_mw;
        }
        let ict_demands = (0..model.lines.len())
            .map(|l| ict_demand(model, l).unwrap_or_default())
            .collect();

        let mut sim = Simulator {
            model,
            profiles,
            config: config.clone(),
            shed_cost,
            components,
            transformer_comp,
            switch_comp,
            sensor_comp,
            controller_comps,
            load_point_slot,
            is_root,
            root_capacity,
            ict_demands,
            scripted: BTreeMap::new(),
        };
        for fault in &config.scripted_faults {
            let c = sim
                .component_index(fault.component)
                .ok_or(SimError::UnknownComponent(fault.component))?;
            let step = fault.at.millis().div_euclid(config.increment.millis());
            sim.scripted.entry(step).or_default().push((c, fault.repair_time));
        }
        Ok(sim)
    }

    pub fn model(&self) -> &NetworkModel {
        self.model
    }

    pub fn config(&self) -> &SimulationConfig {
        &self.config
    }

    fn component_index(&self, c: ComponentRef) -> Option<usize> {
        match c {
            ComponentRef::Line(i) => (i < self.model.lines.len()).then_some(i),
            ComponentRef::Transformer(b) => self.transformer_comp.get(b).copied().flatten(),
            ComponentRef::IntelligentSwitch(i) => self.switch_comp.get(i).copied(),
            ComponentRef::Sensor(i) => self.sensor_comp.get(i).copied(),
            ComponentRef::ControllerHardware => self.controller_comps.map(|c| c.0),
            ComponentRef::ControllerSoftware => self.controller_comps.map(|c| c.1),
        }
    }

    /// Fresh runtime for an iteration: everything working, switches normal,
    /// battery charge drawn at random.
    pub fn initial_runtime(&self, iteration: usize) -> SystemRuntime {
        let seed = self.config.master_seed;
        let rngs: Vec<ChaCha8Rng> = self
            .components
            .iter()
            .map(|c| {
                let (tag, idx) = component_tag(c.reference);
                stream_rng(seed, tag, idx, iteration)
            })
            .collect();
        let mut battery_rngs: Vec<ChaCha8Rng> = (0..self.model.batteries.len())
            .map(|i| stream_rng(seed, 7, i as u64, iteration))
            .collect();
        let battery_soc = self
            .model
            .batteries
            .iter()
            .zip(battery_rngs.iter_mut())
            .map(|(b, rng)| reliability::draw_battery_soc(b, rng))
            .collect();
        let mut rt = SystemRuntime {
            step: 0,
            states: vec![ComponentState::WORKING; self.components.len()],
            switch_positions: self.model.normal_switch_states(),
            battery_soc,
            battery_islanded: vec![false; self.model.batteries.len()],
            effective: self.components.iter().map(|c| c.params).collect(),
            next_failure: vec![i64::MAX; self.components.len()],
            rngs,
            battery_rngs,
            active_events: Vec::new(),
            unattributed: vec![false; self.load_point_slot.iter().flatten().count()],
        };
        if !self.config.is_scripted() {
            for c in 0..self.components.len() {
                self.schedule_failure(&mut rt, c, -1);
            }
        }
        rt
    }

    /// Draws the increment of the next failure of a component that is
    /// working at `step`; failures can occur from `step + 1` on.
    fn schedule_failure(&self, rt: &mut SystemRuntime, c: usize, step: i64) {
        let rate = self.components[c].params.failure_rate;
        if rate <= 0.0 || self.config.is_scripted() {
            rt.next_failure[c] = i64::MAX;
            return;
        }
        let hazard = rate * self.config.increment.as_years();
        let u: f64 = rt.rngs[c].random();
        let wait = (-(1.0 - u).ln() / hazard).ceil().max(1.0);
        rt.next_failure[c] = if wait >= (i64::MAX / 4) as f64 {
            i64::MAX
        } else {
            step.saturating_add(wait as i64)
        };
    }

    fn log(&self, ledger: &mut HistoryLedger, step: i64, c: usize, kind: EventKind) {
        ledger.events.push(ComponentEvent {
            time: self.config.increment * step,
            component: self.components[c].reference,
            kind,
        });
    }

    fn ict_status(&self, rt: &SystemRuntime) -> IctStatus {
        IctStatus {
            controller_working: self
                .controller_comps
                .is_some_and(|(hw, sw)| rt.states[hw].is_working() && rt.states[sw].is_working()),
            sensors_working: self.sensor_comp.iter().map(|&c| rt.states[c].is_working()).collect(),
            switches_working: self.switch_comp.iter().map(|&c| rt.states[c].is_working()).collect(),
        }
    }

    /// Discovers a failed component with repair starting after `until_repair`.
    fn discover(&self, rt: &mut SystemRuntime, c: usize, until_repair: Duration, forced: Option<Duration>) {
        if !rt.states[c].is_latent() {
            return;
        }
        let info = &self.components[c];
        if let Some(r) = forced {
            rt.effective[c].repair_time = r;
        } else if let Some(phases) = &info.phases {
            rt.effective[c].repair_time = ict_repair_duration(phases, &mut rt.rngs[c]).0;
        } else {
            rt.effective[c].repair_time = info.params.repair_time;
        }
        rt.states[c] = rt.states[c].discover(until_repair, &rt.effective[c], self.config.increment);
    }

    fn after_change(&self, rt: &mut SystemRuntime, ledger: &mut HistoryLedger, c: usize, step: i64) {
        if rt.states[c].is_working() {
            self.log(ledger, step, c, EventKind::Restored);
            self.schedule_failure(rt, c, step);
        }
    }

    fn electrical_fault_present(&self, rt: &SystemRuntime) -> bool {
        let nl = self.model.lines.len();
        rt.states[..nl].iter().any(|s| !s.is_working())
            || self
                .transformer_comp
                .iter()
                .flatten()
                .any(|&c| !rt.states[c].is_working())
    }

    fn quiescent(&self, rt: &SystemRuntime) -> bool {
        !rt.states.iter().any(|s| s.is_ticking()) && !self.electrical_fault_present(rt)
    }

    fn next_event_step(&self, rt: &SystemRuntime, from: i64) -> i64 {
        if self.config.is_scripted() {
            self.scripted.range(from..).next().map_or(i64::MAX, |(&k, _)| k)
        } else {
            rt.next_failure.iter().copied().min().unwrap_or(i64::MAX).max(from)
        }
    }

    /// Advances the runtime by one increment.
    pub fn run_increment(&self, rt: &mut SystemRuntime, ledger: &mut HistoryLedger) {
        let step = rt.step;
        let dt = self.config.increment;
        let mut forced: BTreeMap<usize, Option<Duration>> = BTreeMap::new();

        // Timers of failed and repairing components.
        for c in 0..self.components.len() {
            if rt.states[c].is_ticking() {
                rt.states[c] = rt.states[c].advance(&rt.effective[c], dt, false);
                self.after_change(rt, ledger, c, step);
            }
        }

        // New failures.
        if self.config.is_scripted() {
            if let Some(list) = self.scripted.get(&step) {
                for &(c, repair) in list {
                    if rt.states[c].is_working() {
                        rt.states[c] = rt.states[c].advance(&rt.effective[c], dt, true);
                        forced.insert(c, repair);
                        self.log(ledger, step, c, EventKind::Failure);
                    }
                }
            }
        } else {
            for c in 0..self.components.len() {
                if rt.next_failure[c] == step && rt.states[c].is_working() {
                    rt.states[c] = rt.states[c].advance(&rt.effective[c], dt, true);
                    rt.next_failure[c] = i64::MAX;
                    self.log(ledger, step, c, EventKind::Failure);
                }
            }
        }

        // Immediate discovery.
        let mut new_transformer_faults = Vec::new();
        for c in 0..self.components.len() {
            if self.components[c].discovery == Discovery::Immediate && rt.states[c].is_latent() {
                let f = forced.get(&c).copied().flatten();
                self.discover(rt, c, Duration::ZERO, f);
                if let ComponentRef::Transformer(b) = self.components[c].reference {
                    new_transformer_faults.push(b);
                }
                self.after_change(rt, ledger, c, step);
            }
        }

        // Line faults: the breaker trips and sectioning starts.
        for l in 0..self.model.lines.len() {
            if !rt.states[l].is_latent() {
                continue;
            }
            let status = self.ict_status(rt);
            let t_c = reliability::sectioning_time(self.model, l, &status, &self.config.sectioning)
                .unwrap_or(self.config.sectioning.manual);
            let demand = &self.ict_demands[l];
            if demand.complete && status.controller_working {
                let called: Vec<usize> = demand
                    .sensor
                    .map(|s| self.sensor_comp[s])
                    .into_iter()
                    .chain(demand.switches.iter().map(|&s| self.switch_comp[s]))
                    .collect();
                for c in called {
                    if rt.states[c].is_latent() {
                        let f = forced.get(&c).copied().flatten();
                        self.discover(rt, c, Duration::ZERO, f);
                        self.after_change(rt, ledger, c, step);
                    }
                }
            }
            let f = forced.get(&l).copied().flatten();
            self.discover(rt, l, t_c, f);
            if self.model.fault_impact(l).is_some() {
                rt.active_events.push(LineEvent {
                    line: l,
                    counted: vec![false; rt.unattributed.len()],
                });
            }
            if rt.states[l].is_working() {
                self.after_change(rt, ledger, l, step);
            }
        }

        if self.electrical_fault_present(rt) {
            self.account(rt, ledger, step, &new_transformer_faults);
        } else {
            rt.battery_islanded.iter_mut().for_each(|f| *f = false);
            rt.switch_positions = self.model.normal_switch_states();
        }
        rt.active_events.retain(|e| !rt.states[e.line].is_working());
        rt.step += 1;
    }

    /// Switch positions implied by the line states.
    fn target_positions(&self, rt: &SystemRuntime) -> Vec<SwitchState> {
        let mut positions = self.model.normal_switch_states();
        for l in 0..self.model.lines.len() {
            let Some(impact) = self.model.fault_impact(l) else {
                continue;
            };
            match rt.states[l].mode {
                Mode::Working => {}
                Mode::Failed => positions[impact.breaker] = SwitchState::Open,
                Mode::UnderRepair => {
                    for &s in &impact.bounding {
                        positions[s] = SwitchState::Open;
                    }
                }
            }
        }
        positions
    }

    fn account(&self, rt: &mut SystemRuntime, ledger: &mut HistoryLedger, step: i64, new_transformer_faults: &[BusIdx]) {
        let model = self.model;
        let nb = model.buses.len();
        let nl = model.lines.len();
        let dt = self.config.increment;
        let hours = dt.as_hours();

        isolate_and_restore_with(self, rt);
        let failed: Vec<bool> = rt.states[..nl].iter().map(|s| !s.is_working()).collect();
        let mut blackout = vec![false; nb];
        for l in 0..nl {
            if rt.states[l].mode == Mode::Failed {
                if let Some(impact) = model.fault_impact(l) {
                    for &b in &impact.zone {
                        blackout[b] = true;
                    }
                }
            }
        }
        let transformer_out: Vec<bool> = (0..nb)
            .map(|b| self.transformer_comp[b].is_some_and(|c| !rt.states[c].is_working()))
            .collect();

        let mut demand_p = vec![0.0; nb];
        let mut demand_q = vec![0.0; nb];
        for (b, bus) in model.buses.iter().enumerate() {
            if let Some(load) = &bus.load {
                let f = self.profiles.factor(load.profile.as_deref(), step);
                demand_p[b] = load.peak_mw * f;
                demand_q[b] = load.peak_mvar * f;
            }
        }
        let mut served_p = demand_p.clone();
        for b in 0..nb {
            if transformer_out[b] {
                served_p[b] = 0.0;
            }
        }
        let available: Vec<f64> = model
            .production
            .iter()
            .map(|u| u.max_output * self.profiles.factor(u.profile.as_deref(), step))
            .collect();

        let mut dead = vec![false; nb];
        let mut shed = vec![0.0; nb];
        let mut islanded_now = vec![false; model.batteries.len()];
        let sets = crate::model::connected_components(model, &rt.switch_positions, &failed);
        for set in &sets {
            if set.iter().any(|&b| blackout[b]) {
                set.iter().for_each(|&b| dead[b] = true);
                continue;
            }
            let root = set.iter().copied().find(|&b| self.is_root[b]);
            let has_local = set
                .iter()
                .any(|&b| !model.buses[b].production.is_empty() || model.buses[b].battery.is_some());
            if root.is_none() && !has_local {
                set.iter().for_each(|&b| dead[b] = true);
                continue;
            }
            let sub = SubsystemSolve {
                sim: self,
                set,
                root,
                failed: &failed,
                served_p: &served_p,
                demand_q: &demand_q,
                available: &available,
            };
            let outcome = sub.solve(rt, &mut islanded_now, ledger);
            for (k, &b) in set.iter().enumerate() {
                shed[b] = outcome[k];
            }
        }
        for (j, flag) in rt.battery_islanded.iter_mut().enumerate() {
            *flag = islanded_now[j];
        }

        // Ledger.
        let mut covered = vec![false; nb];
        let interrupted: Vec<bool> = (0..nb)
            .map(|b| {
                dead[b] || transformer_out[b] || (served_p[b] > 0.0 && shed[b] >= served_p[b] * (1.0 - 1e-9))
            })
            .collect();
        for event in &mut rt.active_events {
            let Some(impact) = model.fault_impact(event.line) else {
                continue;
            };
            let candidates = match rt.states[event.line].mode {
                Mode::Failed => &impact.zone,
                Mode::UnderRepair => &impact.isolated,
                Mode::Working => continue,
            };
            for &b in candidates {
                covered[b] = true;
                if let Some(slot) = self.load_point_slot[b] {
                    if interrupted[b] && !event.counted[slot] {
                        event.counted[slot] = true;
                        ledger.load_points[slot].interruptions += 1;
                    }
                }
            }
        }
        for &b in new_transformer_faults {
            if let Some(slot) = self.load_point_slot[b] {
                ledger.load_points[slot].interruptions += 1;
            }
        }
        for b in 0..nb {
            let Some(slot) = self.load_point_slot[b] else {
                continue;
            };
            let record = &mut ledger.load_points[slot];
            if interrupted[b] {
                if !covered[b] && !transformer_out[b] && !rt.unattributed[slot] {
                    record.interruptions += 1;
                }
                rt.unattributed[slot] = !covered[b] && !transformer_out[b];
                record.outage += dt;
                record.energy_not_supplied_mwh += demand_p[b] * hours;
            } else {
                rt.unattributed[slot] = false;
                if shed[b] > SHED_TOL {
                    record.energy_not_supplied_mwh += shed[b] * hours;
                    record.partial_shed_mwh += shed[b] * hours;
                }
            }
        }
    }

    /// Runs one full iteration from a fresh runtime.
    pub fn run_iteration(&self, iteration: usize) -> HistoryLedger {
        let mut rt = self.initial_runtime(iteration);
        let mut ledger = HistoryLedger::new(self.model, iteration, self.config.horizon);
        let steps = self.config.steps();
        while rt.step < steps {
            if self.quiescent(&rt) {
                let next = self.next_event_step(&rt, rt.step);
                if next >= steps {
                    break;
                }
                rt.step = next;
            }
            self.run_increment(&mut rt, &mut ledger);
        }
        ledger.finalize(self.model);
        ledger
    }
}

/// Brings the switch positions in line with the line states and returns the
/// operations performed, in switch id order.
pub fn isolate_and_restore(sim: &Simulator<'_>, rt: &mut SystemRuntime) -> Vec<SwitchingAction> {
    isolate_and_restore_with(sim, rt)
}

fn isolate_and_restore_with(sim: &Simulator<'_>, rt: &mut SystemRuntime) -> Vec<SwitchingAction> {
    let target = sim.target_positions(rt);
    let actions = target
        .iter()
        .zip(&rt.switch_positions)
        .enumerate()
        .filter(|(_, (t, c))| t != c)
        .map(|(s, (t, _))| SwitchingAction { switch: s, state: *t })
        .collect();
    rt.switch_positions = target;
    actions
}

struct SubsystemSolve<'s, 'a> {
    sim: &'s Simulator<'a>,
    set: &'s [BusIdx],
    root: Option<BusIdx>,
    failed: &'s [bool],
    served_p: &'s [f64],
    demand_q: &'s [f64],
    available: &'s [f64],
}

impl SubsystemSolve<'_, '_> {
    fn lines(&self, rt: &SystemRuntime) -> Vec<LineIdx> {
        let model = self.sim.model;
        let mut inside = vec![false; model.buses.len()];
        for &b in self.set {
            inside[b] = true;
        }
        (0..model.lines.len())
            .filter(|&l| {
                let line = &model.lines[l];
                !self.failed[l]
                    && inside[line.from_bus]
                    && inside[line.to_bus]
                    && line
                        .switchgear
                        .iter()
                        .all(|&s| rt.switch_positions[s] == SwitchState::Closed)
            })
            .collect()
    }

    fn loadflow(&self, lines: &[LineIdx], slack: BusIdx, net_p: &[f64], net_q: &[f64]) -> Option<loadflow::LoadFlowSolution> {
        let model = self.sim.model;
        let mut local = vec![usize::MAX; model.buses.len()];
        for (k, &b) in self.set.iter().enumerate() {
            local[b] = k;
        }
        let problem = LoadFlowProblem {
            slack: local[slack],
            slack_voltage: model.slack_voltage,
            net_p_mw: self.set.iter().map(|&b| net_p[b]).collect(),
            net_q_mvar: self.set.iter().map(|&b| net_q[b]).collect(),
            branches: lines
                .iter()
                .map(|&l| Branch {
                    line: l,
                    from: local[model.lines[l].from_bus],
                    to: local[model.lines[l].to_bus],
                    resistance: model.lines[l].resistance,
                    reactance: model.lines[l].reactance,
                })
                .collect(),
            base_mva: model.base_mva,
            base_kv: model.base_kv,
        };
        let cfg = &self.sim.config;
        loadflow::solve_fbs(&problem, cfg.loadflow_tolerance, cfg.loadflow_max_iterations).ok()
    }

    /// Returns the shed power per bus of the set.
    fn solve(&self, rt: &mut SystemRuntime, islanded_now: &mut [bool], ledger: &mut HistoryLedger) -> Vec<f64> {
        let sim = self.sim;
        let model = sim.model;
        let nb = model.buses.len();
        let dt = sim.config.increment;
        let lines = self.lines(rt);

        // Sources.
        let mut sources = Vec::new();
        let mut battery_source = Vec::new();
        let total_demand: f64 = self.set.iter().map(|&b| self.served_p[b]).sum();
        if let Some(root) = self.root {
            let cap = sim.root_capacity[root];
            let cap = if cap.is_finite() { cap } else { 10.0 * (total_demand + 1.0) };
            sources.push(SourceBound { bus: root, min: -cap, max: cap });
        }
        for &b in self.set {
            for &u in &model.buses[b].production {
                let avail = self.available[u];
                sources.push(SourceBound {
                    bus: b,
                    min: model.production[u].min_output.min(avail),
                    max: avail,
                });
            }
        }
        if self.root.is_none() {
            for &b in self.set {
                if let Some(j) = model.buses[b].battery {
                    let battery = &model.batteries[j];
                    if !rt.battery_islanded[j] {
                        rt.battery_soc[j] = reliability::draw_battery_soc(battery, &mut rt.battery_rngs[j]);
                    }
                    islanded_now[j] = true;
                    let limits = battery_limits(battery, rt.battery_soc[j], dt);
                    battery_source.push((sources.len(), j));
                    sources.push(SourceBound {
                        bus: b,
                        min: -limits.charge,
                        max: limits.discharge,
                    });
                }
            }
        }

        // Grid-connected with nothing violated: nothing to shed.
        let mut net_p = vec![0.0; nb];
        let mut net_q = vec![0.0; nb];
        for &b in self.set {
            net_p[b] = self.served_p[b];
            net_q[b] = if self.served_p[b] > 0.0 { self.demand_q[b] } else { 0.0 };
        }
        if let Some(root) = self.root {
            for &b in self.set {
                for &u in &model.buses[b].production {
                    net_p[b] -= self.available[u];
                }
            }
            if let Some(sol) = self.loadflow(&lines, root, &net_p, &net_q) {
                if !sol.converged {
                    ledger.loadflow_failures += 1;
                }
                let cap = sim.root_capacity[root];
                let within_lines = lines
                    .iter()
                    .zip(&sol.line_active_flow)
                    .all(|(&l, f)| f.abs() <= model.lines[l].capacity);
                if sol.converged && within_lines && sol.slack_p_mw.abs() <= cap {
                    return vec![0.0; self.set.len()];
                }
            }
        }

        // Shedding problem, with one tightening pass on overloads.
        let mut scale = vec![1.0; model.lines.len()];
        let mut outcome = None;
        for pass in 0..2 {
            let input = SubsystemInput {
                buses: self.set,
                demand_mw: self.served_p,
                shed_cost: &sim.shed_cost,
                sources: &sources,
                switch_states: &rt.switch_positions,
                failed_lines: self.failed,
                capacity_scale: &scale,
            };
            let (mut problem, line_ids) = shedding::build_shedding_problem(model, &input);
            for &(g, _) in &battery_source {
                problem.generators[g].storage = true;
            }
            let result = shedding::solve_shedding(&problem);
            if result.status == SheddingStatus::Infeasible {
                ledger.shedding_failures += 1;
            }

            // Confirming load flow with the dispatch applied; the largest
            // source takes the slack.
            let slack = match self.root {
                Some(r) => r,
                None => {
                    let best = (0..sources.len()).max_by(|&a, &b| {
                        result.generation[a]
                            .total_cmp(&result.generation[b])
                            .then(b.cmp(&a))
                    });
                    best.map_or(self.set[0], |g| sources[g].bus)
                }
            };
            let mut p = vec![0.0; nb];
            let mut q = vec![0.0; nb];
            for (k, &b) in self.set.iter().enumerate() {
                let served = self.served_p[b] - result.shed[k];
                p[b] = served;
                q[b] = if self.served_p[b] > 0.0 {
                    self.demand_q[b] * served / self.served_p[b]
                } else {
                    0.0
                };
            }
            for (g, s) in sources.iter().enumerate() {
                p[s.bus] -= result.generation[g];
            }
            let mut overloaded = false;
            if let Some(sol) = self.loadflow(&line_ids, slack, &p, &q) {
                if !sol.converged {
                    ledger.loadflow_failures += 1;
                }
                for (i, &l) in line_ids.iter().enumerate() {
                    let cap = model.lines[l].capacity;
                    let flow = sol.line_active_flow[i].abs();
                    if flow > cap * OVERLOAD_MARGIN {
                        scale[l] *= cap / flow;
                        overloaded = true;
                    }
                }
            }
            let done = !overloaded || pass == 1;
            outcome = Some(result);
            if done {
                break;
            }
        }
        let result = outcome.expect("at least one pass");
        for &(g, j) in &battery_source {
            rt.battery_soc[j] = apply_battery_power(&model.batteries[j], rt.battery_soc[j], result.generation[g], dt);
        }
        result.shed
    }
}

/// Convenience wrapper building a simulator for a single iteration.
pub fn run_iteration(
    model: &NetworkModel,
    profiles: &Profiles,
    costs: &CostTable,
    config: &SimulationConfig,
    iteration: usize,
) -> Result<HistoryLedger, SimError> {
    Ok(Simulator::new(model, profiles, costs, config)?.run_iteration(iteration))
}

/// Shorthand for a scripted fault on a line.
pub fn scripted_line_fault(model: &NetworkModel, line_id: &str, at: Duration) -> Option<ScriptedFault> {
    Some(ScriptedFault {
        at,
        component: ComponentRef::Line(model.line_index(line_id)?),
        repair_time: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::chain;
    use crate::model::{build_network, NetworkSpec, ProductionSpec};

    fn scripted(spec: &NetworkSpec, line: &str, at_h: f64) -> (NetworkModel, SimulationConfig) {
        let model = build_network(spec).unwrap();
        let config = SimulationConfig {
            horizon: Duration::hours(48.0),
            scripted_faults: vec![scripted_line_fault(&model, line, Duration::hours(at_h)).unwrap()],
            ..SimulationConfig::default()
        };
        (model, config)
    }

    fn outages(ledger: &HistoryLedger) -> Vec<(String, f64, u64)> {
        ledger
            .load_points
            .iter()
            .map(|l| (l.id.clone(), l.outage_hours(), l.interruptions))
            .collect()
    }

    fn run(model: &NetworkModel, config: &SimulationConfig) -> HistoryLedger {
        run_iteration(model, &Profiles::new(), &CostTable::new(), config, 0).unwrap()
    }

    #[test]
    fn mid_feeder_fault_timeline() {
        let (model, config) = scripted(&chain(4), "L2", 10.0);
        let ledger = run(&model, &config);
        assert_eq!(
            outages(&ledger),
            vec![("B2".into(), 1.0, 1), ("B3".into(), 5.0, 1), ("B4".into(), 5.0, 1)]
        );
        // 0.1 MW per load point.
        let ens: f64 = ledger.load_points.iter().map(|l| l.energy_not_supplied_mwh).sum();
        assert!((ens - 1.1).abs() < 1e-9);
    }

    #[test]
    fn leaf_fault_timeline() {
        let (model, config) = scripted(&chain(4), "L3", 0.0);
        let ledger = run(&model, &config);
        assert_eq!(
            outages(&ledger),
            vec![("B2".into(), 1.0, 1), ("B3".into(), 1.0, 1), ("B4".into(), 5.0, 1)]
        );
    }

    #[test]
    fn automated_sectioning_shortens_upstream_outage() {
        let (model, mut config) = scripted(&chain(4), "L2", 3.0);
        config.sectioning.manual = Duration::minutes(5.0);
        let ledger = run(&model, &config);
        let hours: Vec<f64> = ledger.load_points.iter().map(|l| l.outage_hours()).collect();
        assert_eq!(hours, vec![0.0, 4.0, 4.0]);
    }

    #[test]
    fn local_generation_supplies_the_island() {
        let mut spec = chain(4);
        spec.production.push(ProductionSpec {
            id: "G1".into(),
            bus: "B4".into(),
            min_mw: 0.0,
            max_mw: 1.0,
            profile: None,
        });
        let (model, config) = scripted(&spec, "L1", 5.0);
        let ledger = run(&model, &config);
        // Blacked out while the breaker is open, islanded after sectioning.
        let hours: Vec<f64> = ledger.load_points.iter().map(|l| l.outage_hours()).collect();
        assert_eq!(hours, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn zero_rates_give_an_empty_ledger() {
        let mut spec = chain(5);
        spec.lines.iter_mut().for_each(|l| l.reliability = None);
        let model = build_network(&spec).unwrap();
        let ledger = run(&model, &SimulationConfig::default());
        assert!(ledger.events.is_empty());
        for lp in &ledger.load_points {
            assert_eq!((lp.interruptions, lp.outage, lp.energy_not_supplied_mwh), (0, Duration::ZERO, 0.0));
        }
    }

    #[test]
    fn iterations_are_reproducible() {
        let model = build_network(&chain(6)).unwrap();
        let config = SimulationConfig {
            horizon: Duration::years(20.0),
            master_seed: 7,
            ..SimulationConfig::default()
        };
        let profiles = Profiles::new();
        let sim = Simulator::new(&model, &profiles, &CostTable::new(), &config).unwrap();
        assert_eq!(sim.run_iteration(3), sim.run_iteration(3));
        assert_ne!(sim.run_iteration(3).events, sim.run_iteration(4).events);
    }

    #[test]
    fn failure_count_matches_the_rate() {
        // One line at 50/yr with 1 h sectioning and 4 h repair: available
        // for 1 - 50 * 5 / 8760 of the year.
        let mut spec = chain(2);
        spec.lines[0].reliability = Some(ReliabilityParams::new(50.0, Duration::hours(4.0)).unwrap());
        let model = build_network(&spec).unwrap();
        let profiles = Profiles::new();
        let sim = Simulator::new(&model, &profiles, &CostTable::new(), &SimulationConfig::default()).unwrap();
        let n = 1000;
        let total: u64 = (0..n).map(|i| sim.run_iteration(i).load_points[0].interruptions).sum();
        let mean = total as f64 / n as f64;
        // Per-increment probability 1 - exp(-50/8760).
        let p = 1.0 - (-50.0f64 / 8760.0).exp();
        let expected = 8760.0 * p / (1.0 + 5.0 * p);
        assert!((mean - expected).abs() < 4.0 * (expected / n as f64).sqrt(), "{mean} vs {expected}");
    }

    #[test]
    fn battery_bounds() {
        let b = Battery {
            id: "S".into(),
            bus: 0,
            capacity_mwh: 1.0,
            inverter_capacity_mw: 0.5,
            soc_min: 0.1,
            soc_max: 1.0,
            soc: 0.5,
        };
        let h = Duration::hours(1.0);
        assert!((battery_limits(&b, 0.55, h).discharge - 0.45).abs() < 1e-12);
        assert_eq!(battery_limits(&b, 1.0, h).discharge, 0.5);
        assert!((battery_limits(&b, 0.9, h).charge - 0.1).abs() < 1e-12);
        assert_eq!(battery_limits(&b, 0.1, h).discharge, 0.0);
        assert_eq!(update_battery_demand(&b, 0.5, false, -1.0, h), 0.0);
        assert!((update_battery_demand(&b, 0.5, true, -0.2, h) - 0.2).abs() < 1e-12);
        assert!((update_battery_demand(&b, 0.95, true, 0.3, h) + 0.05).abs() < 1e-12);
        assert!((apply_battery_power(&b, 0.5, 0.2, h) - 0.3).abs() < 1e-12);
    }
}
