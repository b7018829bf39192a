//! Reliability indices from iteration ledgers, and their distribution over
//! Monte Carlo iterations.
//!
//! All per-iteration values are normalized to one year of simulated time.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::ledger::HistoryLedger;

/// Interruption cost per MWh by load category.
pub type CostTable = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IndexError {
    #[error("no cost given for load category `{0}`")]
    MissingCost(String),
    #[error("the system serves no customers")]
    NoCustomers,
    #[error("no reports to aggregate")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadPointIndices {
    pub id: String,
    pub customers: u32,
    /// Interruptions per year.
    pub lambda: f64,
    /// Outage hours per year.
    pub outage_hours: f64,
    /// Mean outage duration, absent without interruptions.
    pub mean_duration: Option<f64>,
    pub ens_mwh: f64,
    pub cens: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexReport {
    pub ens_mwh: f64,
    pub cens: f64,
    pub saifi: f64,
    pub saidi: f64,
    pub caidi: Option<f64>,
    pub load_points: Vec<LoadPointIndices>,
}

fn years(ledger: &HistoryLedger) -> f64 {
    ledger.horizon.as_years()
}

/// Energy not supplied per year, in MWh.
pub fn ens(ledger: &HistoryLedger) -> f64 {
    ledger.load_points.iter().map(|l| l.energy_not_supplied_mwh).sum::<f64>() / years(ledger)
}

fn category_cost(costs: &CostTable, category: Option<&String>) -> Result<f64, IndexError> {
    match category {
        None => Ok(0.0),
        Some(c) => costs.get(c).copied().ok_or_else(|| IndexError::MissingCost(c.clone())),
    }
}

/// Cost of energy not supplied per year.
pub fn cens(ledger: &HistoryLedger, costs: &CostTable) -> Result<f64, IndexError> {
    let mut total = 0.0;
    for lp in &ledger.load_points {
        total += lp.energy_not_supplied_mwh * category_cost(costs, lp.category.as_ref())?;
    }
    Ok(total / years(ledger))
}

fn customers(ledger: &HistoryLedger) -> Result<f64, IndexError> {
    let n: u64 = ledger.load_points.iter().map(|l| u64::from(l.customers)).sum();
    if n == 0 {
        Err(IndexError::NoCustomers)
    } else {
        Ok(n as f64)
    }
}

pub fn saifi(ledger: &HistoryLedger) -> Result<f64, IndexError> {
    let n = customers(ledger)?;
    let ci: f64 = ledger
        .load_points
        .iter()
        .map(|l| l.interruptions as f64 * f64::from(l.customers))
        .sum();
    Ok(ci / n / years(ledger))
}

pub fn saidi(ledger: &HistoryLedger) -> Result<f64, IndexError> {
    let n = customers(ledger)?;
    let ch: f64 = ledger
        .load_points
        .iter()
        .map(|l| l.outage_hours() * f64::from(l.customers))
        .sum();
    Ok(ch / n / years(ledger))
}

/// SAIDI over SAIFI; absent when there were no interruptions.
pub fn caidi(saidi: f64, saifi: f64) -> Option<f64> {
    (saifi > 0.0).then(|| saidi / saifi)
}

pub fn report(ledger: &HistoryLedger, costs: &CostTable) -> Result<IndexReport, IndexError> {
    let y = years(ledger);
    let saifi = saifi(ledger)?;
    let saidi = saidi(ledger)?;
    let mut load_points = Vec::with_capacity(ledger.load_points.len());
    for lp in &ledger.load_points {
        let lambda = lp.interruptions as f64 / y;
        let outage_hours = lp.outage_hours() / y;
        let cost = category_cost(costs, lp.category.as_ref())?;
        load_points.push(LoadPointIndices {
            id: lp.id.clone(),
            customers: lp.customers,
            lambda,
            outage_hours,
            mean_duration: (lambda > 0.0).then(|| outage_hours / lambda),
            ens_mwh: lp.energy_not_supplied_mwh / y,
            cens: lp.energy_not_supplied_mwh * cost / y,
        });
    }
    Ok(IndexReport {
        ens_mwh: ens(ledger),
        cens: cens(ledger, costs)?,
        saifi,
        saidi,
        caidi: caidi(saidi, saifi),
        load_points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Statistics {
    pub mean: f64,
    /// Sample standard deviation (zero for a single value).
    pub std: f64,
    pub p5: f64,
    pub p50: f64,
    pub p95: f64,
}

/// Linear-interpolation percentile of sorted values.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl Statistics {
    /// Order-independent: values are sorted before any arithmetic.
    pub fn of(values: &[f64]) -> Option<Statistics> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let std = if v.len() > 1 {
            (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Statistics {
            mean,
            std,
            p5: percentile(&v, 0.05),
            p50: percentile(&v, 0.5),
            p95: percentile(&v, 0.95),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub iterations: usize,
    pub ens_mwh: Statistics,
    pub cens: Statistics,
    pub saifi: Statistics,
    pub saidi: Statistics,
    /// Spread over iterations with at least one interruption.
    pub caidi: Option<Statistics>,
    /// Mean SAIDI over mean SAIFI.
    pub caidi_of_means: Option<f64>,
    /// Load-point indices averaged over iterations.
    pub mean: IndexReport,
}

pub fn aggregate(reports: &[IndexReport]) -> Result<AggregateReport, IndexError> {
    let first = reports.first().ok_or(IndexError::Empty)?;
    let column = |f: &dyn Fn(&IndexReport) -> f64| -> Statistics {
        Statistics::of(&reports.iter().map(f).collect::<Vec<_>>()).expect("non-empty")
    };
    let ens_mwh = column(&|r| r.ens_mwh);
    let cens = column(&|r| r.cens);
    let saifi = column(&|r| r.saifi);
    let saidi = column(&|r| r.saidi);
    let caidis: Vec<f64> = reports.iter().filter_map(|r| r.caidi).collect();

    let load_points = first
        .load_points
        .iter()
        .enumerate()
        .map(|(i, lp)| {
            let lambda = column(&|r| r.load_points[i].lambda).mean;
            let outage_hours = column(&|r| r.load_points[i].outage_hours).mean;
            LoadPointIndices {
                id: lp.id.clone(),
                customers: lp.customers,
                lambda,
                outage_hours,
                mean_duration: (lambda > 0.0).then(|| outage_hours / lambda),
                ens_mwh: column(&|r| r.load_points[i].ens_mwh).mean,
                cens: column(&|r| r.load_points[i].cens).mean,
            }
        })
        .collect();
    Ok(AggregateReport {
        iterations: reports.len(),
        caidi: Statistics::of(&caidis),
        caidi_of_means: caidi(saidi.mean, saifi.mean),
        mean: IndexReport {
            ens_mwh: ens_mwh.mean,
            cens: cens.mean,
            saifi: saifi.mean,
            saidi: saidi.mean,
            caidi: caidi(saidi.mean, saifi.mean),
            load_points,
        },
        ens_mwh,
        cens,
        saifi,
        saidi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::ledger::LoadPointRecord;
    use crate::time::Duration;

    fn record(id: &str, customers: u32, interruptions: u64, hours: f64, ens: f64, cat: &str) -> LoadPointRecord {
        LoadPointRecord {
            bus: 0,
            id: id.into(),
            customers,
            category: Some(cat.into()),
            interruptions,
            outage: Duration::hours(hours),
            energy_not_supplied_mwh: ens,
            partial_shed_mwh: 0.0,
        }
    }

    fn ledger(points: Vec<LoadPointRecord>) -> HistoryLedger {
        HistoryLedger {
            iteration: 0,
            horizon: Duration::years(1.0),
            load_points: points,
            systems: vec![],
            events: vec![],
            loadflow_failures: 0,
            shedding_failures: 0,
        }
    }

    fn costs() -> CostTable {
        CostTable::from([("a".to_string(), 10.0), ("b".to_string(), 25.0)])
    }

    #[test]
    fn ens_and_cens_sums() {
        assert_eq!(ens(&ledger(vec![record("x", 1, 0, 0.0, 0.0, "a")])), 0.0);
        let one = ledger(vec![record("x", 1, 1, 4.0, 0.4, "a")]);
        assert!((ens(&one) - 0.4).abs() < 1e-12);
        assert!((cens(&one, &costs()).unwrap() - 4.0).abs() < 1e-12);
        let two = ledger(vec![record("x", 1, 1, 4.0, 0.4, "a"), record("y", 1, 1, 2.0, 1.0, "b")]);
        assert!((ens(&two) - 1.4).abs() < 1e-12);
        assert!((cens(&two, &costs()).unwrap() - 29.0).abs() < 1e-12);
        let bad = ledger(vec![record("x", 1, 1, 4.0, 0.4, "zzz")]);
        assert_eq!(cens(&bad, &costs()), Err(IndexError::MissingCost("zzz".into())));
    }

    #[test]
    fn frequency_and_duration() {
        let mut l = ledger(vec![record("x", 2, 1, 3.0, 0.0, "a")]);
        l.horizon = Duration::years(2.0);
        assert!((saifi(&l).unwrap() - 0.5).abs() < 1e-12);
        assert!((saidi(&l).unwrap() - 1.5).abs() < 1e-12);
        assert_eq!(saifi(&ledger(vec![record("x", 0, 1, 1.0, 0.0, "a")])), Err(IndexError::NoCustomers));
    }

    #[test]
    fn caidi_is_the_quotient() {
        assert!((caidi(9.9317, 5.4205).unwrap() - 1.8322).abs() < 5e-4);
        assert!((caidi(3.61, 0.248).unwrap() - 14.55).abs() < 1e-2);
        assert_eq!(caidi(0.0, 0.0), None);
    }

    #[test]
    fn aggregate_statistics() {
        let r = |e: f64| IndexReport {
            ens_mwh: e,
            cens: 0.0,
            saifi: 1.0,
            saidi: 2.0,
            caidi: Some(2.0),
            load_points: vec![],
        };
        let one = aggregate(&[r(1.0)]).unwrap();
        assert_eq!(one.ens_mwh.mean, 1.0);
        assert_eq!(one.ens_mwh.std, 0.0);
        let two = aggregate(&[r(1.0), r(3.0)]).unwrap();
        assert_eq!(two.ens_mwh.mean, 2.0);
        assert!((two.ens_mwh.std - 2f64.sqrt()).abs() < 1e-12);
        let a = aggregate(&[r(1.0), r(5.0), r(3.0)]).unwrap();
        let b = aggregate(&[r(3.0), r(1.0), r(5.0)]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.ens_mwh.p50, 3.0);
        assert!(matches!(aggregate(&[]), Err(IndexError::Empty)));
    }
}
