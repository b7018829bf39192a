//! Bundled networks, synthetic input data and the four case presets.
//!
//! The load and wind series below stand in for measured data. They are
//! generated from closed formulas and a fixed seed, so every run sees the
//! same year:
//!
//! * load multiplier = seasonal factor x daily shape, never above 1. The
//!   seasonal factor is `0.8 + 0.2 cos(2 pi (day - 15) / 365)` (winter peak);
//!   the daily shape depends on the category and on weekdays.
//! * wind: hourly wind speed from an AR(1) process (mean 7 m/s, lag-one
//!   correlation 0.95, standard deviation 3 m/s) through a power curve with
//!   cut-in 3 m/s, rated 12 m/s and cut-out 25 m/s.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::indices::CostTable;
use crate::model::NetworkSpec;
use crate::time::Duration;

use super::netfile::{parse_network, ParseError};
use super::timeseries::{SeriesKind, SeriesTable};

const IEEE33: &str = include_str!("../../data/ieee33.net");
const FEEDER6: &str = include_str!("../../data/feeder6.net");

pub const BUILTIN_NETWORKS: [&str; 2] = ["ieee33", "feeder6"];

/// Text of a bundled network file.
pub fn builtin_network_text(name: &str) -> Option<&'static str> {
    match name {
        "ieee33" => Some(IEEE33),
        "feeder6" => Some(FEEDER6),
        _ => None,
    }
}

pub fn builtin_network(name: &str) -> Option<Result<NetworkSpec, ParseError>> {
    builtin_network_text(name).map(parse_network)
}

/// Interruption cost per MWh for the bundled load categories.
pub fn synthetic_costs() -> CostTable {
    CostTable::from([
        ("residential".to_string(), 15_000.0),
        ("commercial".to_string(), 100_000.0),
        ("industrial".to_string(), 60_000.0),
    ])
}

const WIND_SEED: u64 = 2021;

fn seasonal(day: usize) -> f64 {
    0.8 + 0.2 * (2.0 * std::f64::consts::PI * (day as f64 - 15.0) / 365.0).cos()
}

fn bump(h: f64, centre: f64, width: f64) -> f64 {
    (-((h - centre) / width).powi(2)).exp()
}

fn daily(category: &str, hour: usize, weekday: bool) -> f64 {
    let h = hour as f64 + 0.5;
    let v = match category {
        "residential" => 0.6 + 0.2 * bump(h, 8.0, 2.0) + 0.4 * bump(h, 18.5, 2.5),
        "commercial" if weekday => 0.4 + 0.6 * bump(h, 13.0, 4.0),
        "commercial" => 0.4 + 0.1 * bump(h, 13.0, 4.0),
        _ if weekday => 0.7 + 0.3 * bump(h, 14.0, 6.0),
        _ => 0.6 + 0.1 * bump(h, 14.0, 6.0),
    };
    v.min(1.0)
}

/// Per-unit output of the wind turbine at a given wind speed.
pub fn wind_power_curve(speed: f64) -> f64 {
    const CUT_IN: f64 = 3.0;
    const RATED: f64 = 12.0;
    const CUT_OUT: f64 = 25.0;
    if !(CUT_IN..CUT_OUT).contains(&speed) {
        0.0
    } else if speed >= RATED {
        1.0
    } else {
        (speed.powi(3) - CUT_IN.powi(3)) / (RATED.powi(3) - CUT_IN.powi(3))
    }
}

/// One hourly year of load multipliers per category and wind output.
pub fn synthetic_profiles() -> SeriesTable {
    let hours = 8760;
    let mut table = SeriesTable {
        kind: SeriesKind::Load,
        start: Duration::ZERO,
        step: Duration::hours(1.0),
        columns: Default::default(),
    };
    for cat in ["residential", "commercial", "industrial"] {
        let values = (0..hours)
            .map(|t| {
                let day = t / 24;
                // Day 0 is a Monday.
                let weekday = day % 7 < 5;
                seasonal(day) * daily(cat, t % 24, weekday)
            })
            .collect();
        table.columns.insert(cat.to_string(), values);
    }

    let (mean, phi, std) = (7.0, 0.95, 3.0);
    let noise = std * (1.0f64 - phi * phi).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(WIND_SEED);
    let mut speed = mean;
    let wind = (0..hours)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            speed = (mean + phi * (speed - mean) + noise * z).max(0.0);
            wind_power_curve(speed)
        })
        .collect();
    table.columns.insert("wind".to_string(), wind);
    table
}

/// The four case presets, applied as overlays on one network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scenario {
    /// No ICT, no production or storage.
    Case1,
    /// Production and storage, no ICT.
    Case2,
    /// ICT, no production or storage.
    Case3,
    /// ICT, production and storage.
    Case4,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [Scenario::Case1, Scenario::Case2, Scenario::Case3, Scenario::Case4];

    pub fn has_ict(self) -> bool {
        matches!(self, Scenario::Case3 | Scenario::Case4)
    }

    pub fn has_generation(self) -> bool {
        matches!(self, Scenario::Case2 | Scenario::Case4)
    }

    pub fn apply(self, mut spec: NetworkSpec) -> NetworkSpec {
        if !self.has_ict() {
            spec = spec.without_ict();
        }
        if !self.has_generation() {
            spec = spec.without_generation();
        }
        spec
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = match self {
            Scenario::Case1 => 1,
            Scenario::Case2 => 2,
            Scenario::Case3 => 3,
            Scenario::Case4 => 4,
        };
        write!(f, "case{n}")
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::ALL
            .into_iter()
            .find(|c| c.to_string() == s)
            .ok_or_else(|| format!("unknown scenario `{s}` (expected case1..case4)"))
    }
}
