use serde::{Deserialize, Serialize};

use crate::model::{BusIdx, NetworkModel, SystemRef};
use crate::time::Duration;

use super::config::ComponentRef;

/// Accumulated history of one load point over an iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadPointRecord {
    pub bus: BusIdx,
    pub id: String,
    pub customers: u32,
    pub category: Option<String>,
    pub interruptions: u64,
    pub outage: Duration,
    pub energy_not_supplied_mwh: f64,
    /// Energy lost to partial shedding only (already part of the total).
    pub partial_shed_mwh: f64,
}

impl LoadPointRecord {
    pub fn outage_hours(&self) -> f64 {
        self.outage.as_hours()
    }
}

/// Per-system totals over its load points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemRecord {
    pub id: String,
    pub customers: u64,
    pub customer_interruptions: u64,
    pub customer_hours: f64,
    pub energy_not_supplied_mwh: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Failure,
    Restored,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentEvent {
    pub time: Duration,
    pub component: ComponentRef,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryLedger {
    pub iteration: usize,
    pub horizon: Duration,
    pub load_points: Vec<LoadPointRecord>,
    pub systems: Vec<SystemRecord>,
    pub events: Vec<ComponentEvent>,
    /// Load-flow runs that hit the iteration limit.
    pub loadflow_failures: u64,
    /// Shedding problems reported infeasible (handled by full shedding).
    pub shedding_failures: u64,
}

impl HistoryLedger {
    pub fn new(model: &NetworkModel, iteration: usize, horizon: Duration) -> Self {
        let load_points = model
            .buses
            .iter()
            .enumerate()
            .filter(|(_, b)| b.is_load_point())
            .map(|(i, b)| LoadPointRecord {
                bus: i,
                id: b.id.clone(),
                customers: b.customers,
                category: b.load.as_ref().and_then(|l| l.category.clone()),
                interruptions: 0,
                outage: Duration::ZERO,
                energy_not_supplied_mwh: 0.0,
                partial_shed_mwh: 0.0,
            })
            .collect();
        let mut systems: Vec<SystemRecord> = model
            .distribution_systems
            .iter()
            .map(|d| d.id.clone())
            .chain(model.microgrids.iter().map(|m| m.id.clone()))
            .map(|id| SystemRecord {
                id,
                customers: 0,
                customer_interruptions: 0,
                customer_hours: 0.0,
                energy_not_supplied_mwh: 0.0,
            })
            .collect();
        for b in model.buses.iter().filter(|b| b.is_load_point()) {
            systems[system_slot(model, b.system)].customers += u64::from(b.customers);
        }
        HistoryLedger {
            iteration,
            horizon,
            load_points,
            systems,
            events: Vec::new(),
            loadflow_failures: 0,
            shedding_failures: 0,
        }
    }

    /// Fills the per-system totals from the load-point records.
    pub fn finalize(&mut self, model: &NetworkModel) {
        for s in &mut self.systems {
            s.customer_interruptions = 0;
            s.customer_hours = 0.0;
            s.energy_not_supplied_mwh = 0.0;
        }
        for lp in &self.load_points {
            let s = &mut self.systems[system_slot(model, model.buses[lp.bus].system)];
            s.customer_interruptions += lp.interruptions * u64::from(lp.customers);
            s.customer_hours += lp.outage_hours() * f64::from(lp.customers);
            s.energy_not_supplied_mwh += lp.energy_not_supplied_mwh;
        }
    }
}

fn system_slot(model: &NetworkModel, system: SystemRef) -> usize {
    match system {
        SystemRef::Distribution(d) => d,
        SystemRef::Microgrid(m) => model.distribution_systems.len() + m,
    }
}
