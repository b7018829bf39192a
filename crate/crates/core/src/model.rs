//! Static network data model and topology queries.
//!
//! A [`NetworkSpec`] is the loosely typed description read from a network
//! file (string references, optional fields). [`build_network`] validates it
//! into an immutable [`NetworkModel`] with resolved indices, per-component
//! reliability data and the precomputed radial topology used by the
//! simulation.
//!
//! All component lists are sorted by id, so index order is lexicographic id
//! order throughout the crate.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::reliability::{ReliabilityParams, RepairPhases};

pub type BusIdx = usize;
pub type LineIdx = usize;
pub type SwitchIdx = usize;

// ---------------------------------------------------------------------------
// Input description
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    Distribution,
    Microgrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SwitchKind {
    Disconnector,
    Breaker,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LineEnd {
    From,
    To,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SwitchState {
    Open,
    Closed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub id: String,
    pub kind: SystemKind,
    /// Feeding bus, required for distribution systems.
    pub root: Option<String>,
    /// Capacity of the upstream grid connection in MW.
    pub source_capacity_mw: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusSpec {
    pub id: String,
    pub system: String,
    pub customers: u32,
    pub load_mw: f64,
    pub load_mvar: f64,
    pub profile: Option<String>,
    pub category: Option<String>,
    pub transformer: Option<ReliabilityParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineSpec {
    pub id: String,
    pub from: String,
    pub to: String,
    pub r_pu: f64,
    pub x_pu: f64,
    pub capacity_mw: f64,
    pub reliability: Option<ReliabilityParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchgearSpec {
    pub id: String,
    pub kind: SwitchKind,
    pub line: String,
    pub end: LineEnd,
    pub normal: SwitchState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductionSpec {
    pub id: String,
    pub bus: String,
    pub min_mw: f64,
    pub max_mw: f64,
    pub profile: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatterySpec {
    pub id: String,
    pub bus: String,
    pub capacity_mwh: f64,
    pub inverter_mw: f64,
    pub soc_min: f64,
    pub soc_max: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ControllerSpec {
    pub hardware: Option<ReliabilityParams>,
    pub software_rate: Option<f64>,
    pub software_phases: Option<RepairPhases>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorSpec {
    pub id: String,
    pub line: String,
    pub rate: Option<f64>,
    pub phases: Option<RepairPhases>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntelligentSwitchSpec {
    pub id: String,
    pub disconnector: String,
    pub reliability: Option<ReliabilityParams>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IctSpec {
    pub controller: Option<ControllerSpec>,
    pub sensors: Vec<SensorSpec>,
    pub switches: Vec<IntelligentSwitchSpec>,
}

/// Per-class reliability data applied where a component gives none.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReliabilityDefaults {
    pub line: Option<ReliabilityParams>,
    pub transformer: Option<ReliabilityParams>,
    pub intelligent_switch: Option<ReliabilityParams>,
    pub sensor_rate: Option<f64>,
    pub sensor_phases: Option<RepairPhases>,
    pub controller_hardware: Option<ReliabilityParams>,
    pub controller_software_rate: Option<f64>,
    pub controller_software_phases: Option<RepairPhases>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub power_system_id: String,
    pub base_mva: f64,
    pub base_kv: f64,
    pub slack_voltage: f64,
    pub systems: Vec<SystemSpec>,
    pub buses: Vec<BusSpec>,
    pub lines: Vec<LineSpec>,
    pub switchgear: Vec<SwitchgearSpec>,
    pub production: Vec<ProductionSpec>,
    pub batteries: Vec<BatterySpec>,
    pub ict: IctSpec,
    pub defaults: ReliabilityDefaults,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        NetworkSpec {
            power_system_id: "PS".into(),
            base_mva: 10.0,
            base_kv: 12.66,
            slack_voltage: 1.0,
            systems: Vec::new(),
            buses: Vec::new(),
            lines: Vec::new(),
            switchgear: Vec::new(),
            production: Vec::new(),
            batteries: Vec::new(),
            ict: IctSpec::default(),
            defaults: ReliabilityDefaults::default(),
        }
    }
}

impl NetworkSpec {
    /// Drops every ICT component.
    pub fn without_ict(mut self) -> Self {
        self.ict = IctSpec::default();
        self
    }

    /// Drops production units and batteries.
    pub fn without_generation(mut self) -> Self {
        self.production.clear();
        self.batteries.clear();
        self
    }
}

// ---------------------------------------------------------------------------
// Validated model
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SystemRef {
    Distribution(usize),
    Microgrid(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionSystem {
    pub id: String,
    pub root: BusIdx,
    pub source_capacity_mw: f64,
    pub breaker: SwitchIdx,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Microgrid {
    pub id: String,
    /// Disconnector on the line joining the microgrid to its parent system.
    pub link: SwitchIdx,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Load {
    pub peak_mw: f64,
    pub peak_mvar: f64,
    pub profile: Option<String>,
    pub category: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: String,
    pub system: SystemRef,
    pub customers: u32,
    pub load: Option<Load>,
    pub production: Vec<usize>,
    pub battery: Option<usize>,
    pub transformer_reliability: Option<ReliabilityParams>,
}

impl Bus {
    /// Buses with customers or demand are tracked as load points.
    pub fn is_load_point(&self) -> bool {
        self.customers > 0 || self.load.as_ref().is_some_and(|l| l.peak_mw > 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub id: String,
    pub from_bus: BusIdx,
    pub to_bus: BusIdx,
    pub resistance: f64,
    pub reactance: f64,
    pub capacity: f64,
    pub reliability: ReliabilityParams,
    pub sensor: Option<usize>,
    pub switchgear: Vec<SwitchIdx>,
}

impl Line {
    pub fn bus_at(&self, end: LineEnd) -> BusIdx {
        match end {
            LineEnd::From => self.from_bus,
            LineEnd::To => self.to_bus,
        }
    }

    pub fn end_at(&self, bus: BusIdx) -> Option<LineEnd> {
        if bus == self.from_bus {
            Some(LineEnd::From)
        } else if bus == self.to_bus {
            Some(LineEnd::To)
        } else {
            None
        }
    }

    pub fn other_end(&self, bus: BusIdx) -> BusIdx {
        if bus == self.from_bus {
            self.to_bus
        } else {
            self.from_bus
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Switchgear {
    pub id: String,
    pub kind: SwitchKind,
    pub host_line: LineIdx,
    pub position_in_line: LineEnd,
    pub normal_state: SwitchState,
    pub intelligent_switch: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProductionUnit {
    pub id: String,
    pub bus: BusIdx,
    pub min_output: f64,
    pub max_output: f64,
    pub profile: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Battery {
    pub id: String,
    pub bus: BusIdx,
    pub capacity_mwh: f64,
    pub inverter_capacity_mw: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub soc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Controller {
    pub hardware_reliability: ReliabilityParams,
    /// Only the failure rate is used; recovery follows `phase_times`.
    pub software_reliability: ReliabilityParams,
    pub phase_times: RepairPhases,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sensor {
    pub id: String,
    pub line: LineIdx,
    pub reliability: ReliabilityParams,
    pub phase_times: RepairPhases,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntelligentSwitch {
    pub id: String,
    pub disconnector: SwitchIdx,
    pub reliability: ReliabilityParams,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IctSystem {
    pub controller: Option<Controller>,
    pub sensors: Vec<Sensor>,
    pub intelligent_switches: Vec<IntelligentSwitch>,
}

impl IctSystem {
    pub fn is_empty(&self) -> bool {
        self.controller.is_none() && self.sensors.is_empty() && self.intelligent_switches.is_empty()
    }
}

/// What a fault on one line does to its feeder, assuming no other fault.
#[derive(Debug, Clone, PartialEq)]
pub struct FaultImpact {
    /// Circuit breaker that trips for the fault.
    pub breaker: SwitchIdx,
    /// Buses de-energized while the breaker is open.
    pub zone: Vec<BusIdx>,
    /// Lines of the faulted section (the line plus neighbours reachable
    /// without crossing switchgear).
    pub section: Vec<LineIdx>,
    /// Switchgear opened to isolate the section, in id order.
    pub bounding: Vec<SwitchIdx>,
    /// Buses still without grid supply after isolation, until repair.
    pub isolated: Vec<BusIdx>,
}

#[derive(Debug, Clone, PartialEq, Default)]
struct Topology {
    normally_closed: Vec<bool>,
    incident: Vec<Vec<LineIdx>>,
    parent_line: Vec<Option<LineIdx>>,
    tree_root: Vec<Option<BusIdx>>,
    child_bus: Vec<Option<BusIdx>>,
    children: Vec<Vec<LineIdx>>,
    fault_impacts: Vec<Option<FaultImpact>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    pub power_system_id: String,
    pub base_mva: f64,
    pub base_kv: f64,
    pub slack_voltage: f64,
    pub distribution_systems: Vec<DistributionSystem>,
    pub microgrids: Vec<Microgrid>,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub switchgear: Vec<Switchgear>,
    pub production: Vec<ProductionUnit>,
    pub batteries: Vec<Battery>,
    pub ict: IctSystem,
    bus_ids: BTreeMap<String, BusIdx>,
    line_ids: BTreeMap<String, LineIdx>,
    topology: Topology,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("duplicate {kind} id `{id}`")]
    DuplicateId { kind: &'static str, id: String },
    #[error("{kind} `{id}` references unknown {target} `{reference}`")]
    DanglingReference {
        kind: &'static str,
        id: String,
        target: &'static str,
        reference: String,
    },
    #[error("line `{0}` connects a bus to itself")]
    SelfLoop(String),
    #[error("non-radial topology: normally closed line `{0}` closes a loop")]
    NonRadial(String),
    #[error("bus `{0}` is not fed from any distribution system root")]
    Unfed(String),
    #[error("buses `{0}` and `{1}` are fed from two roots at once")]
    MultipleRoots(String, String),
    #[error("distribution system `{0}` is not connected with all switches closed")]
    Disconnected(String),
    #[error("distribution system `{0}` has no circuit breaker at its root")]
    MissingCircuitBreaker(String),
    #[error("distribution system `{0}` has more than one circuit breaker")]
    ExtraCircuitBreaker(String),
    #[error("circuit breaker `{0}` is not at a feeder root")]
    MisplacedBreaker(String),
    #[error("line `{0}` is not protected by any circuit breaker")]
    UnprotectedLine(String),
    #[error("intelligent switch `{0}` must sit on a disconnector")]
    IntelligentBreaker(String),
    #[error("microgrid `{0}` is not joined to its parent by a disconnector")]
    MicrogridLink(String),
    #[error("bus `{0}` has more than one battery")]
    MultipleBatteries(String),
    #[error("{kind} `{id}`: {reason}")]
    InvalidValue {
        kind: &'static str,
        id: String,
        reason: String,
    },
    #[error("{kind} `{id}` is missing `{field}`")]
    MissingField {
        kind: &'static str,
        id: String,
        field: &'static str,
    },
}

/// All violations found while validating a [`NetworkSpec`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ValidationErrors(pub Vec<ModelError>);

impl fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} validation error(s)", self.0.len())?;
        for e in &self.0 {
            write!(f, "\n  - {e}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TopologyError {
    #[error("line {0} is not part of a feeder tree")]
    NotInTree(LineIdx),
}

fn check_unique<'a>(
    kind: &'static str,
    ids: impl Iterator<Item = &'a str>,
    errors: &mut Vec<ModelError>,
) {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            errors.push(ModelError::DuplicateId {
                kind,
                id: id.to_string(),
            });
        }
    }
}

fn index_of(ids: &[&str]) -> BTreeMap<String, usize> {
    ids.iter().enumerate().map(|(i, id)| (id.to_string(), i)).collect()
}

fn check_params(kind: &'static str, id: &str, params: &ReliabilityParams, errors: &mut Vec<ModelError>) {
    if let Err(e) = params.validate() {
        errors.push(ModelError::InvalidValue {
            kind,
            id: id.to_string(),
            reason: e.to_string(),
        });
    }
}

fn check_phases(kind: &'static str, id: &str, phases: &RepairPhases, errors: &mut Vec<ModelError>) {
    if let Err(e) = phases.validate() {
        errors.push(ModelError::InvalidValue {
            kind,
            id: id.to_string(),
            reason: e.to_string(),
        });
    }
}

struct Resolver<'a> {
    errors: &'a mut Vec<ModelError>,
}

impl Resolver<'_> {
    fn get(
        &mut self,
        map: &BTreeMap<String, usize>,
        kind: &'static str,
        id: &str,
        target: &'static str,
        reference: &str,
    ) -> Option<usize> {
        let found = map.get(reference).copied();
        if found.is_none() {
            self.errors.push(ModelError::DanglingReference {
                kind,
                id: id.to_string(),
                target,
                reference: reference.to_string(),
            });
        }
        found
    }
}

/// Validates a network description into an immutable model.
pub fn build_network(spec: &NetworkSpec) -> Result<NetworkModel, ValidationErrors> {
    let mut errors = Vec::new();

    let mut systems = spec.systems.clone();
    let mut buses = spec.buses.clone();
    let mut lines = spec.lines.clone();
    let mut gear = spec.switchgear.clone();
    let mut production = spec.production.clone();
    let mut batteries = spec.batteries.clone();
    let mut sensors = spec.ict.sensors.clone();
    let mut iswitches = spec.ict.switches.clone();
    systems.sort_by(|a, b| a.id.cmp(&b.id));
    buses.sort_by(|a, b| a.id.cmp(&b.id));
    lines.sort_by(|a, b| a.id.cmp(&b.id));
    gear.sort_by(|a, b| a.id.cmp(&b.id));
    production.sort_by(|a, b| a.id.cmp(&b.id));
    batteries.sort_by(|a, b| a.id.cmp(&b.id));
    sensors.sort_by(|a, b| a.id.cmp(&b.id));
    iswitches.sort_by(|a, b| a.id.cmp(&b.id));

    check_unique("system", systems.iter().map(|s| s.id.as_str()), &mut errors);
    check_unique("bus", buses.iter().map(|s| s.id.as_str()), &mut errors);
    check_unique("line", lines.iter().map(|s| s.id.as_str()), &mut errors);
    check_unique("switchgear", gear.iter().map(|s| s.id.as_str()), &mut errors);
    check_unique("production unit", production.iter().map(|s| s.id.as_str()), &mut errors);
    check_unique("battery", batteries.iter().map(|s| s.id.as_str()), &mut errors);
    check_unique("sensor", sensors.iter().map(|s| s.id.as_str()), &mut errors);
    check_unique("intelligent switch", iswitches.iter().map(|s| s.id.as_str()), &mut errors);
    if !errors.is_empty() {
        return Err(ValidationErrors(errors));
    }

    let bus_ids = index_of(&buses.iter().map(|b| b.id.as_str()).collect::<Vec<_>>());
    let line_ids = index_of(&lines.iter().map(|l| l.id.as_str()).collect::<Vec<_>>());
    let gear_ids = index_of(&gear.iter().map(|g| g.id.as_str()).collect::<Vec<_>>());

    let dist_specs: Vec<&SystemSpec> = systems
        .iter()
        .filter(|s| s.kind == SystemKind::Distribution)
        .collect();
    let mg_specs: Vec<&SystemSpec> = systems
        .iter()
        .filter(|s| s.kind == SystemKind::Microgrid)
        .collect();
    let mut system_refs = BTreeMap::new();
    for (i, s) in dist_specs.iter().enumerate() {
        system_refs.insert(s.id.clone(), SystemRef::Distribution(i));
    }
    for (i, s) in mg_specs.iter().enumerate() {
        system_refs.insert(s.id.clone(), SystemRef::Microgrid(i));
    }

    let mut r = Resolver { errors: &mut errors };

    // Buses.
    let mut model_buses = Vec::with_capacity(buses.len());
    for b in &buses {
        let system = match system_refs.get(&b.system) {
            Some(s) => *s,
            None => {
                r.errors.push(ModelError::DanglingReference {
                    kind: "bus",
                    id: b.id.clone(),
                    target: "system",
                    reference: b.system.clone(),
                });
                SystemRef::Distribution(0)
            }
        };
        if !(b.load_mw >= 0.0) || !b.load_mvar.is_finite() {
            r.errors.push(ModelError::InvalidValue {
                kind: "bus",
                id: b.id.clone(),
                reason: "load must be non-negative".into(),
            });
        }
        let load = (b.load_mw > 0.0 || b.load_mvar != 0.0 || b.profile.is_some()).then(|| Load {
            peak_mw: b.load_mw,
            peak_mvar: b.load_mvar,
            profile: b.profile.clone(),
            category: b.category.clone(),
        });
        let mut bus = Bus {
            id: b.id.clone(),
            system,
            customers: b.customers,
            load,
            production: Vec::new(),
            battery: None,
            transformer_reliability: b.transformer,
        };
        if bus.transformer_reliability.is_none() && bus.is_load_point() {
            bus.transformer_reliability = spec.defaults.transformer;
        }
        if let Some(t) = &bus.transformer_reliability {
            check_params("bus transformer", &b.id, t, r.errors);
        }
        model_buses.push(bus);
    }

    // Lines.
    let mut model_lines = Vec::with_capacity(lines.len());
    for l in &lines {
        let from = r.get(&bus_ids, "line", &l.id, "bus", &l.from);
        let to = r.get(&bus_ids, "line", &l.id, "bus", &l.to);
        if from.is_some() && from == to {
            r.errors.push(ModelError::SelfLoop(l.id.clone()));
        }
        if !(l.capacity_mw > 0.0) {
            r.errors.push(ModelError::InvalidValue {
                kind: "line",
                id: l.id.clone(),
                reason: "capacity must be positive".into(),
            });
        }
        if !(l.r_pu >= 0.0) || !(l.x_pu >= 0.0) {
            r.errors.push(ModelError::InvalidValue {
                kind: "line",
                id: l.id.clone(),
                reason: "impedance must be non-negative".into(),
            });
        }
        let reliability = l
            .reliability
            .or(spec.defaults.line)
            .unwrap_or(ReliabilityParams::NEVER_FAILS);
        check_params("line", &l.id, &reliability, r.errors);
        model_lines.push(Line {
            id: l.id.clone(),
            from_bus: from.unwrap_or(0),
            to_bus: to.unwrap_or(0),
            resistance: l.r_pu,
            reactance: l.x_pu,
            capacity: l.capacity_mw,
            reliability,
            sensor: None,
            switchgear: Vec::new(),
        });
    }

    // Switchgear.
    let mut model_gear = Vec::with_capacity(gear.len());
    for (gi, g) in gear.iter().enumerate() {
        let line = r.get(&line_ids, "switchgear", &g.id, "line", &g.line);
        if let Some(li) = line {
            model_lines[li].switchgear.push(gi);
        }
        model_gear.push(Switchgear {
            id: g.id.clone(),
            kind: g.kind,
            host_line: line.unwrap_or(0),
            position_in_line: g.end,
            normal_state: g.normal,
            intelligent_switch: None,
        });
    }

    // Production and batteries.
    let mut model_prod = Vec::with_capacity(production.len());
    for (pi, p) in production.iter().enumerate() {
        let bus = r.get(&bus_ids, "production unit", &p.id, "bus", &p.bus);
        if !(p.min_mw >= 0.0 && p.min_mw <= p.max_mw) {
            r.errors.push(ModelError::InvalidValue {
                kind: "production unit",
                id: p.id.clone(),
                reason: "need 0 <= min <= max".into(),
            });
        }
        if let Some(b) = bus {
            model_buses[b].production.push(pi);
        }
        model_prod.push(ProductionUnit {
            id: p.id.clone(),
            bus: bus.unwrap_or(0),
            min_output: p.min_mw,
            max_output: p.max_mw,
            profile: p.profile.clone(),
        });
    }
    let mut model_batteries = Vec::with_capacity(batteries.len());
    for (bi, b) in batteries.iter().enumerate() {
        let bus = r.get(&bus_ids, "battery", &b.id, "bus", &b.bus);
        let ok = 0.0 <= b.soc_min && b.soc_min <= b.soc_max && b.soc_max <= 1.0;
        if !ok || !(b.inverter_mw > 0.0) || !(b.capacity_mwh > 0.0) {
            r.errors.push(ModelError::InvalidValue {
                kind: "battery",
                id: b.id.clone(),
                reason: "need 0 <= soc_min <= soc_max <= 1 and positive capacities".into(),
            });
        }
        if let Some(bus) = bus {
            if model_buses[bus].battery.replace(bi).is_some() {
                r.errors.push(ModelError::MultipleBatteries(model_buses[bus].id.clone()));
            }
        }
        model_batteries.push(Battery {
            id: b.id.clone(),
            bus: bus.unwrap_or(0),
            capacity_mwh: b.capacity_mwh,
            inverter_capacity_mw: b.inverter_mw,
            soc_min: b.soc_min,
            soc_max: b.soc_max,
            soc: b.soc_max,
        });
    }

    // ICT.
    let controller = spec.ict.controller.as_ref().map(|c| {
        let hardware = c
            .hardware
            .or(spec.defaults.controller_hardware)
            .unwrap_or(ReliabilityParams::NEVER_FAILS);
        let rate = c
            .software_rate
            .or(spec.defaults.controller_software_rate)
            .unwrap_or(0.0);
        let phases = c.software_phases.or(spec.defaults.controller_software_phases);
        if rate > 0.0 && phases.is_none() {
            r.errors.push(ModelError::MissingField {
                kind: "controller",
                id: "controller".into(),
                field: "software phases",
            });
        }
        let phases = phases.unwrap_or(RepairPhases {
            new_signal_time: crate::time::Duration::ZERO,
            reboot_time: crate::time::Duration::ZERO,
            manual_repair_time: crate::time::Duration::ZERO,
            p_new_signal_success: 1.0,
            p_reboot_success: 1.0,
        });
        check_params("controller", "hardware", &hardware, r.errors);
        check_phases("controller", "software", &phases, r.errors);
        Controller {
            hardware_reliability: hardware,
            software_reliability: ReliabilityParams {
                failure_rate: rate,
                repair_time: phases.worst_case(),
            },
            phase_times: phases,
        }
    });
    let mut model_sensors = Vec::with_capacity(sensors.len());
    for (si, s) in sensors.iter().enumerate() {
        let line = r.get(&line_ids, "sensor", &s.id, "line", &s.line);
        let rate = s.rate.or(spec.defaults.sensor_rate).unwrap_or(0.0);
        let phases = s.phases.or(spec.defaults.sensor_phases);
        if rate > 0.0 && phases.is_none() {
            r.errors.push(ModelError::MissingField {
                kind: "sensor",
                id: s.id.clone(),
                field: "repair phases",
            });
        }
        let phases = phases.unwrap_or(RepairPhases {
            new_signal_time: crate::time::Duration::ZERO,
            reboot_time: crate::time::Duration::ZERO,
            manual_repair_time: crate::time::Duration::ZERO,
            p_new_signal_success: 1.0,
            p_reboot_success: 1.0,
        });
        check_phases("sensor", &s.id, &phases, r.errors);
        if !(rate >= 0.0) {
            r.errors.push(ModelError::InvalidValue {
                kind: "sensor",
                id: s.id.clone(),
                reason: "negative failure rate".into(),
            });
        }
        if let Some(li) = line {
            if model_lines[li].sensor.replace(si).is_some() {
                r.errors.push(ModelError::InvalidValue {
                    kind: "line",
                    id: model_lines[li].id.clone(),
                    reason: "more than one sensor".into(),
                });
            }
        }
        model_sensors.push(Sensor {
            id: s.id.clone(),
            line: line.unwrap_or(0),
            reliability: ReliabilityParams {
                failure_rate: rate,
                repair_time: phases.worst_case(),
            },
            phase_times: phases,
        });
    }
    let mut model_iswitches = Vec::with_capacity(iswitches.len());
    for (ii, s) in iswitches.iter().enumerate() {
        let sw = r.get(&gear_ids, "intelligent switch", &s.id, "switchgear", &s.disconnector);
        let reliability = s
            .reliability
            .or(spec.defaults.intelligent_switch)
            .unwrap_or(ReliabilityParams::NEVER_FAILS);
        check_params("intelligent switch", &s.id, &reliability, r.errors);
        if let Some(g) = sw {
            if model_gear[g].kind != SwitchKind::Disconnector {
                r.errors.push(ModelError::IntelligentBreaker(s.id.clone()));
            }
            model_gear[g].intelligent_switch = Some(ii);
        }
        model_iswitches.push(IntelligentSwitch {
            id: s.id.clone(),
            disconnector: sw.unwrap_or(0),
            reliability,
        });
    }

    // Systems.
    let mut distribution_systems = Vec::new();
    for s in &dist_specs {
        let root = match &s.root {
            Some(root) => r.get(&bus_ids, "system", &s.id, "bus", root),
            None => {
                r.errors.push(ModelError::MissingField {
                    kind: "system",
                    id: s.id.clone(),
                    field: "root",
                });
                None
            }
        };
        distribution_systems.push(DistributionSystem {
            id: s.id.clone(),
            root: root.unwrap_or(0),
            source_capacity_mw: s.source_capacity_mw.unwrap_or(f64::INFINITY),
            breaker: usize::MAX,
        });
    }
    let microgrids: Vec<Microgrid> = mg_specs
        .iter()
        .map(|s| Microgrid {
            id: s.id.clone(),
            link: usize::MAX,
        })
        .collect();

    if !errors.is_empty() {
        return Err(ValidationErrors(errors));
    }

    let mut model = NetworkModel {
        power_system_id: spec.power_system_id.clone(),
        base_mva: spec.base_mva,
        base_kv: spec.base_kv,
        slack_voltage: spec.slack_voltage,
        distribution_systems,
        microgrids,
        buses: model_buses,
        lines: model_lines,
        switchgear: model_gear,
        production: model_prod,
        batteries: model_batteries,
        ict: IctSystem {
            controller,
            sensors: model_sensors,
            intelligent_switches: model_iswitches,
        },
        bus_ids,
        line_ids,
        topology: Topology::default(),
    };
    model.build_topology(&mut errors);
    if errors.is_empty() {
        Ok(model)
    } else {
        Err(ValidationErrors(errors))
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false if `a` and `b` were already joined.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        // Keep the smaller index as representative for stable output.
        if ra < rb {
            self.parent[rb] = ra;
        } else {
            self.parent[ra] = rb;
        }
        true
    }
}

fn group_sets(uf: &mut UnionFind, n: usize) -> Vec<Vec<BusIdx>> {
    let mut groups: BTreeMap<usize, Vec<BusIdx>> = BTreeMap::new();
    for b in 0..n {
        let root = uf.find(b);
        groups.entry(root).or_default().push(b);
    }
    let mut sets: Vec<Vec<BusIdx>> = groups.into_values().collect();
    sets.sort_by_key(|s| s[0]);
    sets
}

impl NetworkModel {
    pub fn bus_index(&self, id: &str) -> Option<BusIdx> {
        self.bus_ids.get(id).copied()
    }

    pub fn line_index(&self, id: &str) -> Option<LineIdx> {
        self.line_ids.get(id).copied()
    }

    pub fn switch_index(&self, id: &str) -> Option<SwitchIdx> {
        self.switchgear.iter().position(|s| s.id == id)
    }

    pub fn normal_switch_states(&self) -> Vec<SwitchState> {
        self.switchgear.iter().map(|s| s.normal_state).collect()
    }

    pub fn is_normally_closed(&self, line: LineIdx) -> bool {
        self.topology.normally_closed[line]
    }

    pub fn incident_lines(&self, bus: BusIdx) -> &[LineIdx] {
        &self.topology.incident[bus]
    }

    /// Root bus of the feeder tree containing `bus`.
    pub fn feeder_root(&self, bus: BusIdx) -> Option<BusIdx> {
        self.topology.tree_root[bus]
    }

    /// Downstream end of a normally closed line.
    pub fn child_bus(&self, line: LineIdx) -> Option<BusIdx> {
        self.topology.child_bus[line]
    }

    pub fn parent_line(&self, bus: BusIdx) -> Option<LineIdx> {
        self.topology.parent_line[bus]
    }

    pub fn fault_impact(&self, line: LineIdx) -> Option<&FaultImpact> {
        self.topology.fault_impacts.get(line).and_then(|f| f.as_ref())
    }

    /// Distribution system whose root feeds `bus`.
    pub fn feeding_system(&self, bus: BusIdx) -> Option<usize> {
        let root = self.feeder_root(bus)?;
        self.distribution_systems.iter().position(|d| d.root == root)
    }

    /// Switchgear at one end of a line; a disconnector wins over a breaker
    /// sharing the same end.
    pub fn switch_at(&self, line: LineIdx, end: LineEnd) -> Option<SwitchIdx> {
        self.lines[line]
            .switchgear
            .iter()
            .copied()
            .filter(|&s| self.switchgear[s].position_in_line == end)
            .min_by_key(|&s| self.switchgear[s].kind != SwitchKind::Disconnector)
    }

    pub fn has_active_components(&self) -> bool {
        !self.production.is_empty() || !self.batteries.is_empty() || !self.ict.is_empty()
    }

    fn build_topology(&mut self, errors: &mut Vec<ModelError>) {
        let nb = self.buses.len();
        let nl = self.lines.len();
        let normally_closed: Vec<bool> = self
            .lines
            .iter()
            .map(|l| {
                l.switchgear
                    .iter()
                    .all(|&s| self.switchgear[s].normal_state == SwitchState::Closed)
            })
            .collect();
        let mut incident = vec![Vec::new(); nb];
        for (li, l) in self.lines.iter().enumerate() {
            if normally_closed[li] {
                incident[l.from_bus].push(li);
                incident[l.to_bus].push(li);
            }
        }

        // Radiality of the normally closed graph.
        let mut uf = UnionFind::new(nb);
        for (li, l) in self.lines.iter().enumerate() {
            if normally_closed[li] && !uf.union(l.from_bus, l.to_bus) {
                errors.push(ModelError::NonRadial(l.id.clone()));
            }
        }
        if !errors.is_empty() {
            return;
        }

        // Root each tree at its distribution system's feeding bus.
        let mut tree_root: Vec<Option<BusIdx>> = vec![None; nb];
        let mut parent_line: Vec<Option<LineIdx>> = vec![None; nb];
        let mut child_bus: Vec<Option<BusIdx>> = vec![None; nl];
        let mut children: Vec<Vec<LineIdx>> = vec![Vec::new(); nb];
        for ds in &self.distribution_systems {
            if let Some(other) = tree_root[ds.root] {
                errors.push(ModelError::MultipleRoots(
                    self.buses[other].id.clone(),
                    self.buses[ds.root].id.clone(),
                ));
                continue;
            }
            let mut queue = VecDeque::from([ds.root]);
            tree_root[ds.root] = Some(ds.root);
            while let Some(b) = queue.pop_front() {
                for &li in &incident[b] {
                    if parent_line[b] == Some(li) {
                        continue;
                    }
                    let next = self.lines[li].other_end(b);
                    if tree_root[next].is_some() {
                        continue;
                    }
                    tree_root[next] = Some(ds.root);
                    parent_line[next] = Some(li);
                    child_bus[li] = Some(next);
                    children[b].push(li);
                    queue.push_back(next);
                }
            }
        }
        for (b, bus) in self.buses.iter().enumerate() {
            if tree_root[b].is_none() {
                errors.push(ModelError::Unfed(bus.id.clone()));
            }
        }

        // Connectivity of each distribution system with ties closed.
        let mut all_closed = UnionFind::new(nb);
        for l in &self.lines {
            all_closed.union(l.from_bus, l.to_bus);
        }
        for (di, ds) in self.distribution_systems.iter().enumerate() {
            let root = all_closed.find(ds.root);
            let disconnected = self
                .buses
                .iter()
                .enumerate()
                .any(|(b, bus)| bus.system == SystemRef::Distribution(di) && all_closed.find(b) != root);
            if disconnected {
                errors.push(ModelError::Disconnected(ds.id.clone()));
            }
        }

        // Circuit breakers.
        for (si, sw) in self.switchgear.iter().enumerate() {
            if sw.kind != SwitchKind::Breaker {
                continue;
            }
            let line = &self.lines[sw.host_line];
            let owner = self
                .distribution_systems
                .iter()
                .position(|d| d.root == line.from_bus || d.root == line.to_bus);
            match owner {
                Some(d) if normally_closed[sw.host_line] => {
                    if self.distribution_systems[d].breaker != usize::MAX {
                        errors.push(ModelError::ExtraCircuitBreaker(
                            self.distribution_systems[d].id.clone(),
                        ));
                    }
                    self.distribution_systems[d].breaker = si;
                }
                _ => errors.push(ModelError::MisplacedBreaker(sw.id.clone())),
            }
        }
        for ds in &self.distribution_systems {
            if ds.breaker == usize::MAX {
                errors.push(ModelError::MissingCircuitBreaker(ds.id.clone()));
            }
        }

        // Microgrid links: the tree line entering the microgrid from outside.
        for (mi, mg) in self.microgrids.iter_mut().enumerate() {
            let link = self.lines.iter().enumerate().find_map(|(li, l)| {
                let child = child_bus[li]?;
                let parent = l.other_end(child);
                (self.buses[child].system == SystemRef::Microgrid(mi)
                    && self.buses[parent].system != SystemRef::Microgrid(mi))
                .then_some(li)
            });
            let sw = link.and_then(|li| {
                self.lines[li]
                    .switchgear
                    .iter()
                    .copied()
                    .find(|&s| self.switchgear[s].kind == SwitchKind::Disconnector)
            });
            match sw {
                Some(s) => mg.link = s,
                None => errors.push(ModelError::MicrogridLink(mg.id.clone())),
            }
        }
        if !errors.is_empty() {
            return;
        }

        self.topology = Topology {
            normally_closed,
            incident,
            parent_line,
            tree_root,
            child_bus,
            children,
            fault_impacts: Vec::new(),
        };

        let mut impacts = Vec::with_capacity(nl);
        for li in 0..nl {
            match self.compute_fault_impact(li) {
                Ok(i) => impacts.push(i),
                Err(e) => {
                    errors.push(e);
                    impacts.push(None);
                }
            }
        }
        self.topology.fault_impacts = impacts;
    }

    fn protecting_breaker(&self, line: LineIdx) -> Option<SwitchIdx> {
        let mut current = line;
        loop {
            if let Some(&s) = self.lines[current]
                .switchgear
                .iter()
                .find(|&&s| self.switchgear[s].kind == SwitchKind::Breaker)
            {
                return Some(s);
            }
            let child = self.topology.child_bus[current]?;
            let upstream = self.lines[current].other_end(child);
            current = self.topology.parent_line[upstream]?;
        }
    }

    fn compute_fault_impact(&self, line: LineIdx) -> Result<Option<FaultImpact>, ModelError> {
        if !self.topology.normally_closed[line] {
            return Ok(None);
        }
        let breaker = self
            .protecting_breaker(line)
            .ok_or_else(|| ModelError::UnprotectedLine(self.lines[line].id.clone()))?;
        let zone = self
            .downstream_buses(self.switchgear[breaker].host_line)
            .expect("breaker line is in the tree");

        // Grow the section until switchgear is met in every direction.
        let mut in_section = vec![false; self.lines.len()];
        let mut section = vec![line];
        let mut bounding = BTreeSet::new();
        in_section[line] = true;
        let mut stack = vec![line];
        while let Some(m) = stack.pop() {
            for end in [LineEnd::From, LineEnd::To] {
                if let Some(sw) = self.switch_at(m, end) {
                    bounding.insert(sw);
                    continue;
                }
                let bus = self.lines[m].bus_at(end);
                for &n in &self.topology.incident[bus] {
                    if n == m || in_section[n] {
                        continue;
                    }
                    let n_end = self.lines[n].end_at(bus).expect("incident line");
                    if let Some(sw) = self.switch_at(n, n_end) {
                        bounding.insert(sw);
                    } else {
                        in_section[n] = true;
                        section.push(n);
                        stack.push(n);
                    }
                }
            }
        }
        section.sort_unstable();

        // Buses without supply once the bounding switchgear is open.
        let mut open = vec![false; self.lines.len()];
        open[line] = true;
        for &s in &bounding {
            open[self.switchgear[s].host_line] = true;
        }
        let root = self.topology.tree_root[self.lines[line].from_bus].expect("fed bus");
        let reached = self.reachable(root, &open);
        let isolated = zone.iter().copied().filter(|&b| !reached[b]).collect();

        Ok(Some(FaultImpact {
            breaker,
            zone,
            section,
            bounding: bounding.into_iter().collect(),
            isolated,
        }))
    }

    fn reachable(&self, start: BusIdx, removed: &[bool]) -> Vec<bool> {
        let mut seen = vec![false; self.buses.len()];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(b) = queue.pop_front() {
            for &li in &self.topology.incident[b] {
                if removed[li] {
                    continue;
                }
                let next = self.lines[li].other_end(b);
                if !seen[next] {
                    seen[next] = true;
                    queue.push_back(next);
                }
            }
        }
        seen
    }

    /// Buses fed through `line` when its feeder is energized from the root,
    /// in index order.
    pub fn downstream_buses(&self, line: LineIdx) -> Result<Vec<BusIdx>, TopologyError> {
        let child = self
            .topology
            .child_bus
            .get(line)
            .copied()
            .flatten()
            .ok_or(TopologyError::NotInTree(line))?;
        let mut out = vec![child];
        let mut i = 0;
        while i < out.len() {
            let b = out[i];
            for &li in &self.topology.children[b] {
                out.push(self.topology.child_bus[li].expect("child line"));
            }
            i += 1;
        }
        out.sort_unstable();
        Ok(out)
    }
}

/// Partitions all buses into the sets joined by lines that are not failed and
/// whose switchgear is closed. Sets are sorted internally and ordered by their
/// lowest bus index.
pub fn connected_components(
    model: &NetworkModel,
    switch_states: &[SwitchState],
    failed_lines: &[bool],
) -> Vec<Vec<BusIdx>> {
    let mut uf = UnionFind::new(model.buses.len());
    for (li, line) in model.lines.iter().enumerate() {
        if failed_lines.get(li).copied().unwrap_or(false) {
            continue;
        }
        let closed = line
            .switchgear
            .iter()
            .all(|&s| switch_states[s] == SwitchState::Closed);
        if closed {
            uf.union(line.from_bus, line.to_bus);
        }
    }
    group_sets(&mut uf, model.buses.len())
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use crate::time::Duration;

    pub fn bus(id: &str, customers: u32, load_mw: f64) -> BusSpec {
        BusSpec {
            id: id.into(),
            system: "D1".into(),
            customers,
            load_mw,
            load_mvar: 0.0,
            profile: None,
            category: None,
            transformer: None,
        }
    }

    pub fn line(id: &str, from: &str, to: &str) -> LineSpec {
        LineSpec {
            id: id.into(),
            from: from.into(),
            to: to.into(),
            r_pu: 0.01,
            x_pu: 0.01,
            capacity_mw: 10.0,
            reliability: Some(ReliabilityParams::new(0.07, Duration::hours(4.0)).unwrap()),
        }
    }

    pub fn switch(id: &str, kind: SwitchKind, line: &str, end: LineEnd) -> SwitchgearSpec {
        SwitchgearSpec {
            id: id.into(),
            kind,
            line: line.into(),
            end,
            normal: SwitchState::Closed,
        }
    }

    /// Chain B1-B2-...-Bn, breaker at B1 and disconnectors at both ends of
    /// every other line.
    pub fn chain(n: usize) -> NetworkSpec {
        let mut spec = NetworkSpec {
            systems: vec![SystemSpec {
                id: "D1".into(),
                kind: SystemKind::Distribution,
                root: Some("B1".into()),
                source_capacity_mw: Some(100.0),
            }],
            ..NetworkSpec::default()
        };
        spec.buses.push(bus("B1", 0, 0.0));
        for i in 2..=n {
            spec.buses.push(bus(&format!("B{i}"), 1, 0.1));
            let l = format!("L{}", i - 1);
            spec.lines.push(line(&l, &format!("B{}", i - 1), &format!("B{i}")));
            if i == 2 {
                spec.switchgear.push(switch("CB1", SwitchKind::Breaker, &l, LineEnd::From));
            } else {
                spec.switchgear
                    .push(switch(&format!("D{l}a"), SwitchKind::Disconnector, &l, LineEnd::From));
            }
            spec.switchgear
                .push(switch(&format!("D{l}b"), SwitchKind::Disconnector, &l, LineEnd::To));
        }
        spec
    }
}
