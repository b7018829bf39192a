//! Command-line driver.
//!
//! Exit codes: 0 success, 1 usage error, 2 invalid input (network, profiles,
//! configuration), 3 runtime failure (I/O, simulation).

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::analytical::{analytical_indices, mean_loads, AnalyticalReport};
use crate::indices::{caidi, CostTable};
use crate::io::netfile::{read_network_file, serialize_network, NetFileError};
use crate::io::results::{write_results, Assumptions, RunMetadata};
use crate::io::scenario::{builtin_network, builtin_network_text, synthetic_costs, synthetic_profiles, Scenario};
use crate::io::timeseries::{read_costs_file, read_series_file, write_series_csv, SeriesKind, TimeSeriesError};
use crate::model::{build_network, NetworkModel, NetworkSpec};
use crate::reliability::SectioningPolicy;
use crate::sim::{run_monte_carlo, MonteCarloResult, Profiles, SimulationConfig};
use crate::time::{Duration, TimeUnit};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "gridrel", version, about = "Reliability assessment of active distribution networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte Carlo simulation; writes result files.
    Simulate(RunArgs),
    /// Closed-form indices of a passive network.
    Analytical(RunArgs),
    /// Compares simulation with the closed-form indices.
    Validate(RunArgs),
    /// Writes a bundled network file.
    ExportCase {
        /// Bundled network name (ieee33, feeder6).
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Writes the synthetic load and wind profiles as CSV.
    ExportProfiles {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args, Clone)]
struct RunArgs {
    /// Network file, or `builtin:ieee33` / `builtin:feeder6`.
    #[arg(long, default_value = "builtin:ieee33")]
    network: String,
    /// Load profiles CSV (per-unit multipliers of peak demand).
    #[arg(long)]
    loads: Option<PathBuf>,
    /// Production profiles CSV (per-unit multipliers of rated output).
    #[arg(long)]
    production: Option<PathBuf>,
    /// Interruption costs CSV (`category,cost` per MWh).
    #[arg(long)]
    costs: Option<PathBuf>,
    #[arg(long, default_value = "1 h")]
    increment: Duration,
    #[arg(long, default_value = "1 yr")]
    horizon: Duration,
    #[arg(long, default_value_t = 1000)]
    iterations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    workers: Option<usize>,
    /// Manual sectioning time.
    #[arg(long, default_value = "1 h")]
    sectioning: Duration,
    /// Case preset: case1..case4, or `all`.
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

#[derive(Debug)]
enum Failure {
    Invalid(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Invalid(_) => EXIT_INVALID,
            Failure::Runtime(_) => EXIT_RUNTIME,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Invalid(m) | Failure::Runtime(m) => m,
        }
    }
}

fn invalid(e: impl std::fmt::Display) -> Failure {
    Failure::Invalid(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn from_series(e: TimeSeriesError) -> Failure {
    match e {
        TimeSeriesError::Io { .. } => runtime(e),
        _ => invalid(e),
    }
}

/// Network, profiles and costs for one run.
struct Inputs {
    name: String,
    spec: NetworkSpec,
    profiles: Profiles,
    costs: CostTable,
    steps: i64,
}

fn load_inputs(args: &RunArgs) -> Result<Inputs, Failure> {
    let builtin = args.network.strip_prefix("builtin:");
    let spec = match builtin {
        Some(name) => builtin_network(name)
            .ok_or_else(|| invalid(format!("unknown bundled network `{name}`")))?
            .map_err(invalid)?,
        None => read_network_file(Path::new(&args.network)).map_err(|e| match e {
            NetFileError::Io { .. } => runtime(e),
            NetFileError::Parse { .. } => invalid(e),
        })?,
    };

    let mut profiles = Profiles::new();
    let steps = args
        .horizon
        .exact_div(args.increment)
        .filter(|_| args.increment.millis() > 0)
        .ok_or_else(|| invalid(format!("increment {} does not divide horizon {}", args.increment, args.horizon)))?;
    if builtin == Some("ieee33") && args.loads.is_none() && args.production.is_none() {
        synthetic_profiles()
            .add_to_profiles(&mut profiles, args.increment)
            .map_err(from_series)?;
    }
    for (path, kind) in [(&args.loads, SeriesKind::Load), (&args.production, SeriesKind::Production)] {
        if let Some(path) = path {
            read_series_file(path, kind)
                .and_then(|t| t.add_to_profiles(&mut profiles, args.increment))
                .map_err(from_series)?;
        }
    }
    let costs = match &args.costs {
        Some(path) => read_costs_file(path).map_err(from_series)?,
        None => synthetic_costs(),
    };
    Ok(Inputs {
        name: args.network.clone(),
        spec,
        profiles,
        costs,
        steps,
    })
}

fn scenarios(arg: &Option<String>) -> Result<Vec<Option<Scenario>>, Failure> {
    match arg.as_deref() {
        None => Ok(vec![None]),
        Some("all") => Ok(Scenario::ALL.into_iter().map(Some).collect()),
        Some(s) => Ok(vec![Some(s.parse::<Scenario>().map_err(invalid)?)]),
    }
}

fn model_for(inputs: &Inputs, scenario: Option<Scenario>) -> Result<NetworkModel, Failure> {
    let spec = match scenario {
        Some(s) => s.apply(inputs.spec.clone()),
        None => inputs.spec.clone(),
    };
    build_network(&spec).map_err(invalid)
}

fn config_for(args: &RunArgs) -> Result<SimulationConfig, Failure> {
    let config = SimulationConfig {
        increment: args.increment,
        horizon: args.horizon,
        iterations: args.iterations,
        master_seed: args.seed,
        sectioning: SectioningPolicy {
            manual: args.sectioning,
            ..SectioningPolicy::default()
        },
        worker_count: args
            .workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
        ..SimulationConfig::default()
    };
    config.validate().map_err(invalid)?;
    Ok(config)
}

fn simulate_one(inputs: &Inputs, model: &NetworkModel, config: &SimulationConfig) -> Result<MonteCarloResult, Failure> {
    run_monte_carlo(model, &inputs.profiles, &inputs.costs, config).map_err(|e| match e {
        crate::sim::montecarlo::MonteCarloError::Pool(_) => runtime(e),
        _ => invalid(e),
    })
}

fn analytical_for(inputs: &Inputs, model: &NetworkModel, args: &RunArgs) -> Result<AnalyticalReport, Failure> {
    let policy = SectioningPolicy {
        manual: args.sectioning,
        ..SectioningPolicy::default()
    };
    analytical_indices(model, &mean_loads(model, &inputs.profiles, inputs.steps), &policy, Some(&inputs.costs)).map_err(invalid)
}

fn out_dir(args: &RunArgs, scenario: Option<Scenario>) -> PathBuf {
    match scenario {
        Some(s) if args.scenario.as_deref() == Some("all") => args.out.join(s.to_string()),
        _ => args.out.clone(),
    }
}

fn label(scenario: Option<Scenario>) -> String {
    scenario.map_or_else(|| "network".to_string(), |s| s.to_string())
}

fn cmd_simulate(args: &RunArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let inputs = load_inputs(args)?;
    let config = config_for(args)?;
    for scenario in scenarios(&args.scenario)? {
        let model = model_for(&inputs, scenario)?;
        let result = simulate_one(&inputs, &model, &config)?;
        let metadata = RunMetadata {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            network: inputs.name.clone(),
            scenario: scenario.map(|s| s.to_string()),
            master_seed: config.master_seed,
            iterations: config.iterations,
            increment: config.increment,
            horizon: config.horizon,
            config: config.clone(),
            assumptions: Assumptions::for_model(&model),
            loadflow_failures: result.ledgers.iter().map(|l| l.loadflow_failures).sum(),
            shedding_failures: result.ledgers.iter().map(|l| l.shedding_failures).sum(),
        };
        let dir = out_dir(args, scenario);
        write_results(&result.reports, &result.aggregate, &metadata, &dir).map_err(runtime)?;
        let m = &result.aggregate.mean;
        let _ = writeln!(
            out,
            "{}: ENS {:.4} MWh/yr  CENS {:.1}  SAIFI {:.4}  SAIDI {:.4}  CAIDI {}  -> {}",
            label(scenario),
            m.ens_mwh,
            m.cens,
            m.saifi,
            m.saidi,
            m.caidi.map_or("-".into(), |c| format!("{c:.4}")),
            dir.display()
        );
    }
    Ok(())
}

fn cmd_analytical(args: &RunArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let inputs = load_inputs(args)?;
    for scenario in scenarios(&args.scenario)? {
        let model = model_for(&inputs, scenario)?;
        let r = analytical_for(&inputs, &model, args)?;
        let _ = writeln!(out, "{}", label(scenario));
        let _ = writeln!(out, "{:<8} {:>10} {:>12} {:>10}", "bus", "lambda", "U [h/yr]", "r [h]");
        for lp in &r.load_points {
            let _ = writeln!(
                out,
                "{:<8} {:>10.4} {:>12.4} {:>10}",
                lp.id,
                lp.lambda,
                lp.outage_hours,
                lp.mean_duration.map_or("-".into(), |d| format!("{d:.4}"))
            );
        }
        let _ = writeln!(
            out,
            "SAIFI {:.4}  SAIDI {:.4}  CAIDI {}  ENS {:.4} MWh/yr",
            r.saifi,
            r.saidi,
            r.caidi.map_or("-".into(), |c| format!("{c:.4}")),
            r.ens_mwh
        );
    }
    Ok(())
}

/// Percent difference of the simulated value from the closed-form one.
pub fn percent_difference(analytical: f64, simulated: f64) -> Option<f64> {
    (analytical != 0.0).then(|| 100.0 * (simulated - analytical) / analytical)
}

fn cmd_validate(args: &RunArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let inputs = load_inputs(args)?;
    let config = config_for(args)?;
    for scenario in scenarios(&args.scenario)? {
        let model = model_for(&inputs, scenario)?;
        let a = analytical_for(&inputs, &model, args)?;
        let sim = simulate_one(&inputs, &model, &config)?.aggregate.mean;
        let _ = writeln!(out, "{} ({} iterations)", label(scenario), config.iterations);
        let _ = writeln!(
            out,
            "{:<8} {:>12} {:>12} {:>16}",
            "Index", "Analytical", "Simulation", "Difference [%]"
        );
        let rows = [
            ("SAIFI", Some(a.saifi), Some(sim.saifi)),
            ("SAIDI", Some(a.saidi), Some(sim.saidi)),
            ("CAIDI", a.caidi, caidi(sim.saidi, sim.saifi)),
            ("ENS", Some(a.ens_mwh), Some(sim.ens_mwh)),
        ];
        for (name, av, sv) in rows {
            let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
            let diff = match (av, sv) {
                (Some(x), Some(y)) => percent_difference(x, y).map_or("-".into(), |d| format!("{d:.2}")),
                _ => "-".into(),
            };
            let _ = writeln!(out, "{:<8} {:>12} {:>12} {:>16}", name, fmt(av), fmt(sv), diff);
        }
    }
    Ok(())
}

fn write_or_print(path: &Option<PathBuf>, text: &str, out: &mut dyn Write) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| runtime(format!("{}: {e}", p.display()))),
        None => out.write_all(text.as_bytes()).map_err(runtime),
    }
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate(a) => cmd_simulate(&a, out),
        Command::Analytical(a) => cmd_analytical(&a, out),
        Command::Validate(a) => cmd_validate(&a, out),
        Command::ExportCase { name, out: path } => {
            // Round-trip through the parser so the export is canonical.
            let text = builtin_network_text(&name).ok_or_else(|| invalid(format!("unknown bundled network `{name}`")))?;
            let spec = crate::io::netfile::parse_network(text).map_err(invalid)?;
            write_or_print(&path, &serialize_network(&spec), out)
        }
        Command::ExportProfiles { out: path } => {
            let text = write_series_csv(&synthetic_profiles(), TimeUnit::Hour).map_err(runtime)?;
            write_or_print(&path, &text, out)
        }
    }
}

/// Runs the command line, writing normal output to `out` and diagnostics to
/// `err`. Returns the process exit code.
pub fn run_cli_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_USAGE;
            }
            let _ = write!(out, "{}", e.render());
            return EXIT_OK;
        }
    };
    match dispatch(cli, out) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message());
            f.code()
        }
    }
}

pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_cli_with(args, &mut std::io::stdout(), &mut std::io::stderr())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run_cli_with(std::iter::once("gridrel").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors() {
        assert_eq!(run(&[]).0, EXIT_USAGE);
        assert_eq!(run(&["simulate", "--iterations", "many"]).0, EXIT_USAGE);
        assert_eq!(run(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn invalid_inputs() {
        let (code, _, err) = run(&["simulate", "--network", "builtin:nowhere"]);
        assert_eq!(code, EXIT_INVALID);
        assert!(err.contains("nowhere"));
        assert_eq!(run(&["simulate", "--scenario", "case9"]).0, EXIT_INVALID);
        assert_eq!(run(&["simulate", "--increment", "7 h"]).0, EXIT_INVALID);
        // The full case has production and ICT.
        assert_eq!(run(&["analytical", "--network", "builtin:ieee33"]).0, EXIT_INVALID);
        assert_eq!(run(&["simulate", "--network", "/no/such/file.net"]).0, EXIT_RUNTIME);
    }

    #[test]
    fn analytical_feeder() {
        let (code, out, _) = run(&["analytical", "--network", "builtin:feeder6"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("SAIFI 10.5000  SAIDI 28.3333"), "{out}");
        assert!(out.contains("ENS 42.5000"), "{out}");
    }

    #[test]
    fn validate_table() {
        let (code, out, _) = run(&["validate", "--network", "builtin:feeder6", "--iterations", "50", "--workers", "2"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("Difference [%]"));
        for row in ["SAIFI", "SAIDI", "CAIDI", "ENS"] {
            assert!(out.lines().any(|l| l.starts_with(row)), "{row} missing:\n{out}");
        }
    }

    #[test]
    fn percent() {
        assert_eq!(percent_difference(2.0, 2.1).map(|d| (d * 1e9).round() / 1e9), Some(5.0));
        assert_eq!(percent_difference(0.0, 1.0), None);
    }
}
