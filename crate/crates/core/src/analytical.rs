//! Closed-form reliability indices for passive radial networks.
//!
//! Every line failure interrupts all load points in its breaker zone. Load
//! points the isolation cuts off stay out for sectioning plus repair; the
//! rest of the zone is back after sectioning. A transformer failure only
//! affects its own bus, for its repair time.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::indices::{caidi, CostTable};
use crate::model::NetworkModel;
use crate::reliability::SectioningPolicy;
use crate::sim::Profiles;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalyticalError {
    #[error("closed-form evaluation needs a passive network; found {0}")]
    ActiveComponents(&'static str),
    #[error("the system serves no customers")]
    NoCustomers,
    #[error("no cost given for load category `{0}`")]
    MissingCost(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticalLoadPoint {
    pub id: String,
    pub customers: u32,
    /// Failures per year.
    pub lambda: f64,
    /// Outage hours per year.
    pub outage_hours: f64,
    pub mean_duration: Option<f64>,
    pub ens_mwh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticalReport {
    pub load_points: Vec<AnalyticalLoadPoint>,
    pub saifi: f64,
    pub saidi: f64,
    pub caidi: Option<f64>,
    pub ens_mwh: f64,
    pub cens: Option<f64>,
}

/// Evaluates the network with manual sectioning. `mean_loads` holds the
/// average demand per bus in MW, indexed like `model.buses`.
pub fn analytical_indices(
    model: &NetworkModel,
    mean_loads: &[f64],
    sectioning: &SectioningPolicy,
    costs: Option<&CostTable>,
) -> Result<AnalyticalReport, AnalyticalError> {
    if !model.production.is_empty() {
        return Err(AnalyticalError::ActiveComponents("production units"));
    }
    if !model.batteries.is_empty() {
        return Err(AnalyticalError::ActiveComponents("batteries"));
    }
    if !model.ict.is_empty() {
        return Err(AnalyticalError::ActiveComponents("ICT components"));
    }
    let nb = model.buses.len();
    let mut lambda = vec![0.0; nb];
    let mut outage = vec![0.0; nb];
    let section_h = sectioning.manual.as_hours();
    for (l, line) in model.lines.iter().enumerate() {
        let rate = line.reliability.failure_rate;
        let Some(impact) = model.fault_impact(l) else {
            continue;
        };
        if rate == 0.0 {
            continue;
        }
        let repair_h = line.reliability.repair_time.as_hours();
        let mut isolated = vec![false; nb];
        for &b in &impact.isolated {
            isolated[b] = true;
        }
        for &b in &impact.zone {
            lambda[b] += rate;
            outage[b] += rate * if isolated[b] { section_h + repair_h } else { section_h };
        }
    }
    for (b, bus) in model.buses.iter().enumerate() {
        if let Some(t) = bus.transformer_reliability {
            lambda[b] += t.failure_rate;
            outage[b] += t.failure_rate * t.repair_time.as_hours();
        }
    }

    let mut load_points = Vec::new();
    let mut customers = 0.0;
    let (mut ci, mut ch, mut ens, mut cost) = (0.0, 0.0, 0.0, 0.0);
    for (b, bus) in model.buses.iter().enumerate() {
        if !bus.is_load_point() {
            continue;
        }
        let n = f64::from(bus.customers);
        let e = outage[b] * mean_loads[b];
        customers += n;
        ci += lambda[b] * n;
        ch += outage[b] * n;
        ens += e;
        if let Some(costs) = costs {
            if let Some(cat) = bus.load.as_ref().and_then(|l| l.category.as_ref()) {
                cost += e * costs.get(cat).ok_or_else(|| AnalyticalError::MissingCost(cat.clone()))?;
            }
        }
        load_points.push(AnalyticalLoadPoint {
            id: bus.id.clone(),
            customers: bus.customers,
            lambda: lambda[b],
            outage_hours: outage[b],
            mean_duration: (lambda[b] > 0.0).then(|| outage[b] / lambda[b]),
            ens_mwh: e,
        });
    }
    if customers == 0.0 {
        return Err(AnalyticalError::NoCustomers);
    }
    let saifi = ci / customers;
    let saidi = ch / customers;
    Ok(AnalyticalReport {
        load_points,
        saifi,
        saidi,
        caidi: caidi(saidi, saifi),
        ens_mwh: ens,
        cens: costs.map(|_| cost),
    })
}

/// Peak demand per bus, for use as `mean_loads` with flat profiles.
pub fn peak_loads(model: &NetworkModel) -> Vec<f64> {
    model
        .buses
        .iter()
        .map(|b| b.load.as_ref().map_or(0.0, |l| l.peak_mw))
        .collect()
}

/// Mean demand per bus over the first `steps` increments of its profile.
/// Buses without a profile use their peak.
pub fn mean_loads(model: &NetworkModel, profiles: &Profiles, steps: i64) -> Vec<f64> {
    model
        .buses
        .iter()
        .map(|b| match &b.load {
            None => 0.0,
            Some(load) if load.profile.is_none() || steps <= 0 => load.peak_mw,
            Some(load) => {
                let name = load.profile.as_deref();
                let total: f64 = (0..steps).map(|k| profiles.factor(name, k)).sum();
                load.peak_mw * total / steps as f64
            }
        })
        .collect()
}
