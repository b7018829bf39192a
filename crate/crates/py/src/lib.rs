//! Python bindings: load a network, run the Monte Carlo simulation or the
//! closed-form evaluation, and get plain dictionaries back.

use std::path::Path;

use gridrel::analytical::{analytical_indices, mean_loads};
use gridrel::indices::{self, CostTable, IndexReport};
use gridrel::io::netfile::{parse_network, read_network_file, serialize_network};
use gridrel::io::scenario::{builtin_network, synthetic_costs, synthetic_profiles, Scenario};
use gridrel::io::timeseries::{read_costs_file, read_series_file, SeriesKind, SeriesTable};
use gridrel::model::{build_network, NetworkModel, NetworkSpec};
use gridrel::reliability::SectioningPolicy;
use gridrel::sim::{run_monte_carlo, Profiles, SimulationConfig};
use gridrel::time::Duration;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A validated network plus the series and costs it is simulated with.
#[pyclass(module = "gridrel_py", frozen)]
struct Network {
    name: String,
    spec: NetworkSpec,
    model: NetworkModel,
    series: Vec<SeriesTable>,
    costs: CostTable,
}

impl Network {
    fn create(name: String, spec: NetworkSpec, scenario: Option<&str>, series: Vec<SeriesTable>) -> PyResult<Self> {
        let spec = match scenario {
            Some(s) => s.parse::<Scenario>().map_err(value_err)?.apply(spec),
            None => spec,
        };
        let model = build_network(&spec).map_err(value_err)?;
        Ok(Network {
            name,
            spec,
            model,
            series,
            costs: synthetic_costs(),
        })
    }

    fn profiles(&self, increment: Duration) -> PyResult<Profiles> {
        let mut profiles = Profiles::new();
        for table in &self.series {
            table.add_to_profiles(&mut profiles, increment).map_err(value_err)?;
        }
        Ok(profiles)
    }
}

fn report_dict<'py>(py: Python<'py>, r: &IndexReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("ens_mwh", r.ens_mwh)?;
    d.set_item("cens", r.cens)?;
    d.set_item("saifi", r.saifi)?;
    d.set_item("saidi", r.saidi)?;
    d.set_item("caidi", r.caidi)?;
    Ok(d)
}

#[pymethods]
impl Network {
    /// A bundled network ("ieee33" or "feeder6"), optionally reduced to one
    /// of the case presets "case1".."case4".
    #[staticmethod]
    #[pyo3(signature = (name, scenario=None))]
    fn builtin(name: &str, scenario: Option<&str>) -> PyResult<Self> {
        let spec = builtin_network(name)
            .ok_or_else(|| value_err(format!("unknown bundled network `{name}`")))?
            .map_err(value_err)?;
        let series = if name == "ieee33" { vec![synthetic_profiles()] } else { Vec::new() };
        Network::create(format!("builtin:{name}"), spec, scenario, series)
    }

    /// Reads a network file, with optional load and production series and
    /// an interruption cost table.
    #[staticmethod]
    #[pyo3(signature = (path, scenario=None, loads=None, production=None, costs=None))]
    fn from_file(
        path: &str,
        scenario: Option<&str>,
        loads: Option<&str>,
        production: Option<&str>,
        costs: Option<&str>,
    ) -> PyResult<Self> {
        let spec = read_network_file(Path::new(path)).map_err(value_err)?;
        let mut series = Vec::new();
        for (p, kind) in [(loads, SeriesKind::Load), (production, SeriesKind::Production)] {
            if let Some(p) = p {
                series.push(read_series_file(Path::new(p), kind).map_err(value_err)?);
            }
        }
        let mut net = Network::create(path.to_string(), spec, scenario, series)?;
        if let Some(c) = costs {
            net.costs = read_costs_file(Path::new(c)).map_err(value_err)?;
        }
        Ok(net)
    }

    /// Parses network text in the same format as `from_file`.
    #[staticmethod]
    #[pyo3(signature = (text, scenario=None))]
    fn parse(text: &str, scenario: Option<&str>) -> PyResult<Self> {
        let spec = parse_network(text).map_err(value_err)?;
        Network::create("<text>".into(), spec, scenario, Vec::new())
    }

    #[getter]
    fn name(&self) -> &str {
        &self.name
    }

    #[getter]
    fn bus_ids(&self) -> Vec<String> {
        self.model.buses.iter().map(|b| b.id.clone()).collect()
    }

    #[getter]
    fn line_ids(&self) -> Vec<String> {
        self.model.lines.iter().map(|l| l.id.clone()).collect()
    }

    #[getter]
    fn customers(&self) -> u64 {
        self.model.buses.iter().map(|b| u64::from(b.customers)).sum()
    }

    /// The network in file format.
    fn to_text(&self) -> String {
        serialize_network(&self.spec)
    }

    /// Runs the Monte Carlo simulation. Returns the mean indices, their
    /// spread, per-iteration values and per-load-point means.
    #[pyo3(signature = (iterations=1000, seed=0, workers=1, increment_hours=1.0, horizon_hours=8760.0, sectioning_hours=1.0))]
    fn simulate<'py>(
        &self,
        py: Python<'py>,
        iterations: usize,
        seed: u64,
        workers: usize,
        increment_hours: f64,
        horizon_hours: f64,
        sectioning_hours: f64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let config = SimulationConfig {
            increment: Duration::hours(increment_hours),
            horizon: Duration::hours(horizon_hours),
            iterations,
            master_seed: seed,
            worker_count: workers,
            sectioning: SectioningPolicy {
                manual: Duration::hours(sectioning_hours),
                ..SectioningPolicy::default()
            },
            ..SimulationConfig::default()
        };
        config.validate().map_err(value_err)?;
        let profiles = self.profiles(config.increment)?;
        let result = py
            .detach(|| run_monte_carlo(&self.model, &profiles, &self.costs, &config))
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;

        let agg = &result.aggregate;
        let out = report_dict(py, &agg.mean)?;
        out.set_item("iterations", agg.iterations)?;
        out.set_item("caidi_of_means", agg.caidi_of_means)?;
        let spread = PyDict::new(py);
        for (name, s) in [
            ("ens_mwh", &agg.ens_mwh),
            ("cens", &agg.cens),
            ("saifi", &agg.saifi),
            ("saidi", &agg.saidi),
        ] {
            let d = PyDict::new(py);
            d.set_item("mean", s.mean)?;
            d.set_item("std", s.std)?;
            d.set_item("p5", s.p5)?;
            d.set_item("p50", s.p50)?;
            d.set_item("p95", s.p95)?;
            spread.set_item(name, d)?;
        }
        out.set_item("spread", spread)?;
        let per_iteration = result
            .reports
            .iter()
            .map(|r| report_dict(py, r))
            .collect::<PyResult<Vec<_>>>()?;
        out.set_item("per_iteration", per_iteration)?;
        let load_points = PyDict::new(py);
        for lp in &agg.mean.load_points {
            let d = PyDict::new(py);
            d.set_item("customers", lp.customers)?;
            d.set_item("lambda", lp.lambda)?;
            d.set_item("outage_hours", lp.outage_hours)?;
            d.set_item("ens_mwh", lp.ens_mwh)?;
            load_points.set_item(&lp.id, d)?;
        }
        out.set_item("load_points", load_points)?;
        Ok(out)
    }

    /// Closed-form indices; only passive networks qualify.
    #[pyo3(signature = (sectioning_hours=1.0, horizon_hours=8760.0))]
    fn analytical<'py>(
        &self,
        py: Python<'py>,
        sectioning_hours: f64,
        horizon_hours: f64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let policy = SectioningPolicy {
            manual: Duration::hours(sectioning_hours),
            ..SectioningPolicy::default()
        };
        let increment = Duration::hours(1.0);
        let steps = (horizon_hours.max(0.0)).floor() as i64;
        let loads = mean_loads(&self.model, &self.profiles(increment)?, steps);
        let r = analytical_indices(&self.model, &loads, &policy, Some(&self.costs)).map_err(value_err)?;
        let d = PyDict::new(py);
        d.set_item("saifi", r.saifi)?;
        d.set_item("saidi", r.saidi)?;
        d.set_item("caidi", r.caidi)?;
        d.set_item("ens_mwh", r.ens_mwh)?;
        d.set_item("cens", r.cens)?;
        let lps = PyDict::new(py);
        for lp in &r.load_points {
            let e = PyDict::new(py);
            e.set_item("customers", lp.customers)?;
            e.set_item("lambda", lp.lambda)?;
            e.set_item("outage_hours", lp.outage_hours)?;
            e.set_item("ens_mwh", lp.ens_mwh)?;
            lps.set_item(&lp.id, e)?;
        }
        d.set_item("load_points", lps)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!(
            "Network({:?}, buses={}, lines={})",
            self.name,
            self.model.buses.len(),
            self.model.lines.len()
        )
    }
}

/// Average interruption duration from SAIDI and SAIFI; None when SAIFI is 0.
#[pyfunction]
fn caidi(saidi: f64, saifi: f64) -> Option<f64> {
    indices::caidi(saidi, saifi)
}

#[pymodule]
fn gridrel_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Network>()?;
    m.add_function(wrap_pyfunction!(caidi, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
