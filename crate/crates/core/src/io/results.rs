//! Result files of a simulation run.
//!
//! * `iterations.csv`: `iteration,ens_mwh,cens,saifi,saidi,caidi`, one row per
//!   iteration in iteration order; `caidi` is empty without interruptions.
//! * `summary.csv`: `index,mean,std,p5,p50,p95` for ens_mwh, cens, saifi,
//!   saidi and caidi.
//! * `load_points.csv`: `id,customers,lambda,outage_hours,mean_duration,ens_mwh,cens`,
//!   averaged over iterations (per year).
//! * `metadata.json`: seed, configuration and modelling assumptions.
//!
//! Numbers are written in their shortest round-trip form, so equal results
//! give byte-identical files.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::indices::{AggregateReport, IndexReport, Statistics};
use crate::model::NetworkModel;
use crate::sim::SimulationConfig;
use crate::time::Duration;

#[derive(Debug, Error)]
pub enum ResultsError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub const ITERATIONS_HEADER: [&str; 6] = ["iteration", "ens_mwh", "cens", "saifi", "saidi", "caidi"];
pub const SUMMARY_HEADER: [&str; 6] = ["index", "mean", "std", "p5", "p50", "p95"];
pub const LOAD_POINTS_HEADER: [&str; 7] = [
    "id",
    "customers",
    "lambda",
    "outage_hours",
    "mean_duration",
    "ens_mwh",
    "cens",
];

/// Recovery-phase success probabilities of one ICT class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IctAssumption {
    pub class: String,
    pub p_new_signal_success: f64,
    pub p_reboot_success: f64,
}

/// Modelling choices that shape the numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assumptions {
    pub ict_recovery: Vec<IctAssumption>,
    pub partial_shed_rule: String,
    pub outage_quantization: String,
    pub battery_soc: String,
    pub breakers_fail: bool,
}

impl Assumptions {
    pub fn for_model(model: &NetworkModel) -> Self {
        let mut ict_recovery = Vec::new();
        if let Some(c) = &model.ict.controller {
            ict_recovery.push(IctAssumption {
                class: "controller_software".into(),
                p_new_signal_success: c.phase_times.p_new_signal_success,
                p_reboot_success: c.phase_times.p_reboot_success,
            });
        }
        if let Some(s) = model.ict.sensors.first() {
            ict_recovery.push(IctAssumption {
                class: "sensor".into(),
                p_new_signal_success: s.phase_times.p_new_signal_success,
                p_reboot_success: s.phase_times.p_reboot_success,
            });
        }
        Assumptions {
            ict_recovery,
            partial_shed_rule: "partial shedding adds energy not supplied but no interruption or outage time".into(),
            outage_quantization: "phases shorter than one increment end within the increment they start in".into(),
            battery_soc: "uniform between minimum and maximum on each transition into island operation".into(),
            breakers_fail: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub tool_version: String,
    pub network: String,
    pub scenario: Option<String>,
    pub master_seed: u64,
    pub iterations: usize,
    pub increment: Duration,
    pub horizon: Duration,
    pub config: SimulationConfig,
    pub assumptions: Assumptions,
    pub loadflow_failures: u64,
    pub shedding_failures: u64,
}

fn num(v: f64) -> String {
    v.to_string()
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ResultsError + '_ {
    move |source| ResultsError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn iterations_csv(reports: &[IndexReport], first_iteration: usize) -> Result<String, ResultsError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(ITERATIONS_HEADER)?;
    for (i, r) in reports.iter().enumerate() {
        w.write_record([
            (first_iteration + i).to_string(),
            num(r.ens_mwh),
            num(r.cens),
            num(r.saifi),
            num(r.saidi),
            opt(r.caidi),
        ])?;
    }
    finish(w)
}

pub fn summary_csv(aggregate: &AggregateReport) -> Result<String, ResultsError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SUMMARY_HEADER)?;
    let rows: [(&str, Option<&Statistics>); 5] = [
        ("ens_mwh", Some(&aggregate.ens_mwh)),
        ("cens", Some(&aggregate.cens)),
        ("saifi", Some(&aggregate.saifi)),
        ("saidi", Some(&aggregate.saidi)),
        ("caidi", aggregate.caidi.as_ref()),
    ];
    for (name, s) in rows {
        match s {
            Some(s) => w.write_record([name.to_string(), num(s.mean), num(s.std), num(s.p5), num(s.p50), num(s.p95)])?,
            None => w.write_record([name, "", "", "", "", ""])?,
        }
    }
    finish(w)
}

pub fn load_points_csv(aggregate: &AggregateReport) -> Result<String, ResultsError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(LOAD_POINTS_HEADER)?;
    for lp in &aggregate.mean.load_points {
        w.write_record([
            lp.id.clone(),
            lp.customers.to_string(),
            num(lp.lambda),
            num(lp.outage_hours),
            opt(lp.mean_duration),
            num(lp.ens_mwh),
            num(lp.cens),
        ])?;
    }
    finish(w)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String, ResultsError> {
    let bytes = w.into_inner().map_err(|e| ResultsError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Writes the four result files into `out_dir`, creating it if needed.
pub fn write_results(
    reports: &[IndexReport],
    aggregate: &AggregateReport,
    metadata: &RunMetadata,
    out_dir: &Path,
) -> Result<(), ResultsError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let files = [
        ("iterations.csv", iterations_csv(reports, 0)?),
        ("summary.csv", summary_csv(aggregate)?),
        ("load_points.csv", load_points_csv(aggregate)?),
        ("metadata.json", serde_json::to_string_pretty(metadata)? + "\n"),
    ];
    for (name, content) in files {
        let path = out_dir.join(name);
        fs::write(&path, content).map_err(io_err(&path))?;
    }
    Ok(())
}

pub fn read_metadata(path: &Path) -> Result<RunMetadata, ResultsError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(serde_json::from_str(&text)?)
}
