//! Plain-text network files.
//!
//! A file is a list of sections. Each non-empty line inside a section is one
//! record of whitespace-separated `key=value` tokens; values containing
//! spaces are double-quoted (`repair="4 h"`). `#` starts a comment outside
//! quotes.
//!
//! ```text
//! [system]
//! kind=power id=PS base_mva=10 base_kv=12.66
//! kind=distribution id=D1 root=B1 capacity=100
//!
//! [buses]
//! id=B1 system=D1
//! id=B2 system=D1 customers=50 load_mw=0.5 category=residential
//!
//! [lines]
//! id=L1 from=B1 to=B2 r_ohm=0.0922 x_ohm=0.047 capacity=10 rate=0.07 repair="4 h"
//!
//! [switchgear]
//! id=CB1 kind=breaker line=L1 end=from
//! ```
//!
//! Sections: `[system]`, `[buses]`, `[lines]`, `[switchgear]`,
//! `[production]`, `[batteries]`, `[ict]` (records with
//! `kind=controller|sensor|switch`) and `[reliability]` (class defaults,
//! `class=line|transformer|intelligent_switch|sensor|controller_hardware|controller_software`).
//! Line impedances are given in p.u. (`r`, `x`) or in ohms (`r_ohm`, `x_ohm`),
//! converted with the system bases. Every duration carries a unit.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::Path;

use thiserror::Error;

use crate::loadflow::ohms_to_pu;
use crate::model::{
    BatterySpec, BusSpec, ControllerSpec, IntelligentSwitchSpec, LineEnd, LineSpec, NetworkSpec,
    ProductionSpec, SensorSpec, SwitchKind, SwitchState, SwitchgearSpec, SystemKind, SystemSpec,
};
use crate::reliability::{ReliabilityParams, RepairPhases};
use crate::time::Duration;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unknown section `[{0}]`")]
    UnknownSection(String),
    #[error("record outside of any section")]
    NoSection,
    #[error("missing required field `{0}`")]
    MissingField(String),
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("field `{field}`: invalid value `{value}`")]
    BadValue { field: String, value: String },
    #[error("duplicate field `{0}`")]
    DuplicateField(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Error)]
pub enum NetFileError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse { path: String, source: ParseError },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    System,
    Buses,
    Lines,
    Switchgear,
    Production,
    Batteries,
    Ict,
    Reliability,
}

impl Section {
    fn from_name(name: &str) -> Option<Section> {
        Some(match name {
            "system" => Section::System,
            "buses" => Section::Buses,
            "lines" => Section::Lines,
            "switchgear" => Section::Switchgear,
            "production" => Section::Production,
            "batteries" => Section::Batteries,
            "ict" => Section::Ict,
            "reliability" => Section::Reliability,
            _ => return None,
        })
    }
}

/// Splits a record into `key=value` pairs.
fn tokenize(text: &str) -> Result<Vec<(String, String)>, ParseErrorKind> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    loop {
        while chars.peek().is_some_and(|c| c.is_whitespace()) {
            chars.next();
        }
        match chars.peek() {
            None | Some('#') => break,
            _ => {}
        }
        let mut key = String::new();
        while let Some(&c) = chars.peek() {
            if c == '=' || c.is_whitespace() {
                break;
            }
            key.push(c);
            chars.next();
        }
        if chars.next() != Some('=') || key.is_empty() {
            return Err(ParseErrorKind::Syntax(format!("expected key=value near `{key}`")));
        }
        let mut value = String::new();
        if chars.peek() == Some(&'"') {
            chars.next();
            loop {
                match chars.next() {
                    None => return Err(ParseErrorKind::Syntax("unterminated quote".into())),
                    Some('"') => break,
                    Some('\\') => match chars.next() {
                        Some(c @ ('"' | '\\')) => value.push(c),
                        _ => return Err(ParseErrorKind::Syntax("bad escape in quoted value".into())),
                    },
                    Some(c) => value.push(c),
                }
            }
            if chars.peek().is_some_and(|c| !c.is_whitespace() && *c != '#') {
                return Err(ParseErrorKind::Syntax("missing space after quoted value".into()));
            }
        } else {
            while let Some(&c) = chars.peek() {
                if c.is_whitespace() || c == '#' {
                    break;
                }
                if c == '"' || c == '=' {
                    return Err(ParseErrorKind::Syntax(format!("unexpected `{c}` in value of `{key}`")));
                }
                value.push(c);
                chars.next();
            }
        }
        out.push((key, value));
    }
    Ok(out)
}

struct Record {
    line: usize,
    fields: BTreeMap<String, String>,
}

impl Record {
    fn err(&self, kind: ParseErrorKind) -> ParseError {
        ParseError { line: self.line, kind }
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.fields.remove(key)
    }

    fn req(&mut self, key: &str) -> Result<String, ParseError> {
        self.take(key)
            .ok_or_else(|| self.err(ParseErrorKind::MissingField(key.into())))
    }

    fn parse_value<T: std::str::FromStr>(&self, key: &str, value: String) -> Result<T, ParseError> {
        value.parse().map_err(|_| {
            self.err(ParseErrorKind::BadValue {
                field: key.into(),
                value,
            })
        })
    }

    fn opt<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>, ParseError> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => self.parse_value(key, v).map(Some),
        }
    }

    fn num<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, ParseError> {
        let v = self.req(key)?;
        self.parse_value(key, v)
    }

    fn choice<T: Copy>(&mut self, key: &str, options: &[(&str, T)], default: Option<T>) -> Result<T, ParseError> {
        match self.take(key) {
            None => default.ok_or_else(|| self.err(ParseErrorKind::MissingField(key.into()))),
            Some(v) => options
                .iter()
                .find(|(name, _)| *name == v)
                .map(|&(_, t)| t)
                .ok_or_else(|| {
                    self.err(ParseErrorKind::BadValue {
                        field: key.into(),
                        value: v,
                    })
                }),
        }
    }

    /// Failure rate and repair time given as `<prefix>rate` and `<prefix>repair`.
    fn params(&mut self, rate_key: &str, repair_key: &str) -> Result<Option<ReliabilityParams>, ParseError> {
        let rate: Option<f64> = self.opt(rate_key)?;
        let repair: Option<Duration> = self.opt(repair_key)?;
        match (rate, repair) {
            (None, None) => Ok(None),
            (Some(failure_rate), Some(repair_time)) => Ok(Some(ReliabilityParams {
                failure_rate,
                repair_time,
            })),
            (Some(_), None) => Err(self.err(ParseErrorKind::MissingField(repair_key.into()))),
            (None, Some(_)) => Err(self.err(ParseErrorKind::MissingField(rate_key.into()))),
        }
    }

    fn phases(&mut self) -> Result<Option<RepairPhases>, ParseError> {
        const KEYS: [&str; 5] = ["signal_time", "reboot_time", "manual_time", "p_signal", "p_reboot"];
        if !KEYS.iter().any(|k| self.fields.contains_key(*k)) {
            return Ok(None);
        }
        Ok(Some(RepairPhases {
            new_signal_time: self.num("signal_time")?,
            reboot_time: self.num("reboot_time")?,
            manual_repair_time: self.num("manual_time")?,
            p_new_signal_success: self.num("p_signal")?,
            p_reboot_success: self.num("p_reboot")?,
        }))
    }

    fn finish(self) -> Result<(), ParseError> {
        match self.fields.into_keys().next() {
            None => Ok(()),
            Some(k) => Err(ParseError {
                line: self.line,
                kind: ParseErrorKind::UnknownField(k),
            }),
        }
    }
}

enum Impedance {
    PerUnit(f64),
    Ohm(f64),
}

/// Parses network file text.
pub fn parse_network(text: &str) -> Result<NetworkSpec, ParseError> {
    let mut spec = NetworkSpec::default();
    let mut section = None;
    let mut impedances = Vec::new();
    let mut unassigned = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('[') {
            let name = rest
                .split('#')
                .next()
                .unwrap_or("")
                .trim_end()
                .strip_suffix(']')
                .ok_or(ParseError {
                    line: line_no,
                    kind: ParseErrorKind::Syntax("unterminated section header".into()),
                })?
                .trim();
            section = Some(Section::from_name(name).ok_or(ParseError {
                line: line_no,
                kind: ParseErrorKind::UnknownSection(name.into()),
            })?);
            continue;
        }
        let tokens = tokenize(trimmed).map_err(|kind| ParseError { line: line_no, kind })?;
        let mut rec = Record {
            line: line_no,
            fields: BTreeMap::new(),
        };
        for (k, v) in tokens {
            if rec.fields.contains_key(&k) {
                return Err(rec.err(ParseErrorKind::DuplicateField(k)));
            }
            rec.fields.insert(k, v);
        }
        let Some(section) = section else {
            return Err(rec.err(ParseErrorKind::NoSection));
        };
        match section {
            Section::System => parse_system(&mut spec, &mut rec)?,
            Section::Buses => {
                let system = rec.take("system");
                if system.is_none() {
                    unassigned.push(spec.buses.len());
                }
                let bus = BusSpec {
                    id: rec.req("id")?,
                    system: system.unwrap_or_default(),
                    customers: rec.opt("customers")?.unwrap_or(0),
                    load_mw: rec.opt("load_mw")?.unwrap_or(0.0),
                    load_mvar: rec.opt("load_mvar")?.unwrap_or(0.0),
                    profile: rec.take("profile"),
                    category: rec.take("category"),
                    transformer: rec.params("transformer_rate", "transformer_repair")?,
                };
                spec.buses.push(bus);
            }
            Section::Lines => {
                let impedance = |rec: &mut Record, pu: &str, ohm: &str| -> Result<Impedance, ParseError> {
                    match (rec.opt::<f64>(pu)?, rec.opt::<f64>(ohm)?) {
                        (Some(v), None) => Ok(Impedance::PerUnit(v)),
                        (None, Some(v)) => Ok(Impedance::Ohm(v)),
                        (None, None) => Ok(Impedance::PerUnit(0.0)),
                        (Some(_), Some(_)) => Err(rec.err(ParseErrorKind::DuplicateField(format!("{pu}/{ohm}")))),
                    }
                };
                let id = rec.req("id")?;
                let from = rec.req("from")?;
                let to = rec.req("to")?;
                let r = impedance(&mut rec, "r", "r_ohm")?;
                let x = impedance(&mut rec, "x", "x_ohm")?;
                spec.lines.push(LineSpec {
                    id,
                    from,
                    to,
                    r_pu: 0.0,
                    x_pu: 0.0,
                    capacity_mw: rec.opt("capacity")?.unwrap_or(f64::INFINITY),
                    reliability: rec.params("rate", "repair")?,
                });
                impedances.push((r, x));
            }
            Section::Switchgear => {
                let sw = SwitchgearSpec {
                    id: rec.req("id")?,
                    kind: rec.choice(
                        "kind",
                        &[("breaker", SwitchKind::Breaker), ("disconnector", SwitchKind::Disconnector)],
                        None,
                    )?,
                    line: rec.req("line")?,
                    end: rec.choice("end", &[("from", LineEnd::From), ("to", LineEnd::To)], None)?,
                    normal: rec.choice(
                        "normal",
                        &[("closed", SwitchState::Closed), ("open", SwitchState::Open)],
                        Some(SwitchState::Closed),
                    )?,
                };
                spec.switchgear.push(sw);
            }
            Section::Production => {
                let unit = ProductionSpec {
                    id: rec.req("id")?,
                    bus: rec.req("bus")?,
                    min_mw: rec.opt("min_mw")?.unwrap_or(0.0),
                    max_mw: rec.num("max_mw")?,
                    profile: rec.take("profile"),
                };
                spec.production.push(unit);
            }
            Section::Batteries => {
                let b = BatterySpec {
                    id: rec.req("id")?,
                    bus: rec.req("bus")?,
                    capacity_mwh: rec.num("capacity_mwh")?,
                    inverter_mw: rec.num("inverter_mw")?,
                    soc_min: rec.opt("soc_min")?.unwrap_or(0.0),
                    soc_max: rec.opt("soc_max")?.unwrap_or(1.0),
                };
                spec.batteries.push(b);
            }
            Section::Ict => parse_ict(&mut spec, &mut rec)?,
            Section::Reliability => parse_defaults(&mut spec, &mut rec)?,
        }
        rec.finish()?;
    }

    // A lone system is implied for buses that name none.
    if spec.systems.len() == 1 {
        let id = spec.systems[0].id.clone();
        for b in unassigned {
            spec.buses[b].system = id.clone();
        }
    }
    for (line, (r, x)) in spec.lines.iter_mut().zip(impedances) {
        let to_pu = |z: Impedance| match z {
            Impedance::PerUnit(v) => v,
            Impedance::Ohm(v) => ohms_to_pu(v, spec.base_kv, spec.base_mva),
        };
        line.r_pu = to_pu(r);
        line.x_pu = to_pu(x);
    }
    Ok(spec)
}

fn parse_system(spec: &mut NetworkSpec, rec: &mut Record) -> Result<(), ParseError> {
    let kind = rec.choice("kind", &[("power", 0), ("distribution", 1), ("microgrid", 2)], None)?;
    let id = rec.req("id")?;
    match kind {
        0 => {
            spec.power_system_id = id;
            if let Some(v) = rec.opt("base_mva")? {
                spec.base_mva = v;
            }
            if let Some(v) = rec.opt("base_kv")? {
                spec.base_kv = v;
            }
            if let Some(v) = rec.opt("slack_voltage")? {
                spec.slack_voltage = v;
            }
        }
        1 => spec.systems.push(SystemSpec {
            id,
            kind: SystemKind::Distribution,
            root: Some(rec.req("root")?),
            source_capacity_mw: rec.opt("capacity")?,
        }),
        _ => spec.systems.push(SystemSpec {
            id,
            kind: SystemKind::Microgrid,
            root: None,
            source_capacity_mw: None,
        }),
    }
    Ok(())
}

fn parse_ict(spec: &mut NetworkSpec, rec: &mut Record) -> Result<(), ParseError> {
    match rec.choice("kind", &[("controller", 0), ("sensor", 1), ("switch", 2)], None)? {
        0 => {
            spec.ict.controller = Some(ControllerSpec {
                hardware: rec.params("hardware_rate", "hardware_repair")?,
                software_rate: rec.opt("software_rate")?,
                software_phases: rec.phases()?,
            });
        }
        1 => spec.ict.sensors.push(SensorSpec {
            id: rec.req("id")?,
            line: rec.req("line")?,
            rate: rec.opt("rate")?,
            phases: rec.phases()?,
        }),
        _ => spec.ict.switches.push(IntelligentSwitchSpec {
            id: rec.req("id")?,
            disconnector: rec.req("disconnector")?,
            reliability: rec.params("rate", "repair")?,
        }),
    }
    Ok(())
}

fn parse_defaults(spec: &mut NetworkSpec, rec: &mut Record) -> Result<(), ParseError> {
    let class = rec.req("class")?;
    let d = &mut spec.defaults;
    match class.as_str() {
        "line" => d.line = rec.params("rate", "repair")?,
        "transformer" => d.transformer = rec.params("rate", "repair")?,
        "intelligent_switch" => d.intelligent_switch = rec.params("rate", "repair")?,
        "controller_hardware" => d.controller_hardware = rec.params("rate", "repair")?,
        "sensor" => {
            d.sensor_rate = rec.opt("rate")?;
            d.sensor_phases = rec.phases()?;
        }
        "controller_software" => {
            d.controller_software_rate = rec.opt("rate")?;
            d.controller_software_phases = rec.phases()?;
        }
        _ => {
            return Err(rec.err(ParseErrorKind::BadValue {
                field: "class".into(),
                value: class,
            }))
        }
    }
    Ok(())
}

pub fn read_network_file(path: &Path) -> Result<NetworkSpec, NetFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| NetFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_network(&text).map_err(|source| NetFileError::Parse {
        path: path.display().to_string(),
        source,
    })
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

fn quote(value: &str) -> String {
    let plain = !value.is_empty()
        && !value
            .chars()
            .any(|c| c.is_whitespace() || matches!(c, '"' | '\\' | '#' | '='));
    if plain {
        value.to_string()
    } else {
        format!("\"{}\"", value.replace('\\', "\\\\").replace('"', "\\\""))
    }
}

struct RecordWriter(String);

impl RecordWriter {
    fn new() -> Self {
        RecordWriter(String::new())
    }

    fn field(&mut self, key: &str, value: impl fmt::Display) -> &mut Self {
        if !self.0.is_empty() {
            self.0.push(' ');
        }
        let _ = write!(self.0, "{key}={}", quote(&value.to_string()));
        self
    }

    fn opt(&mut self, key: &str, value: Option<impl fmt::Display>) -> &mut Self {
        if let Some(v) = value {
            self.field(key, v);
        }
        self
    }

    fn params(&mut self, rate: &str, repair: &str, p: Option<ReliabilityParams>) -> &mut Self {
        if let Some(p) = p {
            self.field(rate, p.failure_rate).field(repair, p.repair_time);
        }
        self
    }

    fn phases(&mut self, p: Option<RepairPhases>) -> &mut Self {
        if let Some(p) = p {
            self.field("signal_time", p.new_signal_time)
                .field("reboot_time", p.reboot_time)
                .field("manual_time", p.manual_repair_time)
                .field("p_signal", p.p_new_signal_success)
                .field("p_reboot", p.p_reboot_success);
        }
        self
    }

    fn line(&mut self, out: &mut String) {
        out.push_str(&self.0);
        out.push('\n');
        self.0.clear();
    }
}

/// Writes a spec in the network file format. Parsing the output gives back
/// an equal spec.
pub fn serialize_network(spec: &NetworkSpec) -> String {
    let mut out = String::new();
    let mut w = RecordWriter::new();
    out.push_str("[system]\n");
    w.field("kind", "power")
        .field("id", &spec.power_system_id)
        .field("base_mva", spec.base_mva)
        .field("base_kv", spec.base_kv)
        .field("slack_voltage", spec.slack_voltage)
        .line(&mut out);
    for s in &spec.systems {
        match s.kind {
            SystemKind::Distribution => {
                w.field("kind", "distribution")
                    .field("id", &s.id)
                    .field("root", s.root.as_deref().unwrap_or_default())
                    .opt("capacity", s.source_capacity_mw);
            }
            SystemKind::Microgrid => {
                w.field("kind", "microgrid").field("id", &s.id);
            }
        }
        w.line(&mut out);
    }

    out.push_str("\n[buses]\n");
    for b in &spec.buses {
        w.field("id", &b.id)
            .field("system", &b.system)
            .field("customers", b.customers)
            .field("load_mw", b.load_mw)
            .field("load_mvar", b.load_mvar)
            .opt("profile", b.profile.as_ref())
            .opt("category", b.category.as_ref())
            .params("transformer_rate", "transformer_repair", b.transformer)
            .line(&mut out);
    }

    out.push_str("\n[lines]\n");
    for l in &spec.lines {
        w.field("id", &l.id)
            .field("from", &l.from)
            .field("to", &l.to)
            .field("r", l.r_pu)
            .field("x", l.x_pu)
            .field("capacity", l.capacity_mw)
            .params("rate", "repair", l.reliability)
            .line(&mut out);
    }

    out.push_str("\n[switchgear]\n");
    for s in &spec.switchgear {
        w.field("id", &s.id)
            .field(
                "kind",
                match s.kind {
                    SwitchKind::Breaker => "breaker",
                    SwitchKind::Disconnector => "disconnector",
                },
            )
            .field("line", &s.line)
            .field(
                "end",
                match s.end {
                    LineEnd::From => "from",
                    LineEnd::To => "to",
                },
            )
            .field(
                "normal",
                match s.normal {
                    SwitchState::Closed => "closed",
                    SwitchState::Open => "open",
                },
            )
            .line(&mut out);
    }

    if !spec.production.is_empty() {
        out.push_str("\n[production]\n");
        for p in &spec.production {
            w.field("id", &p.id)
                .field("bus", &p.bus)
                .field("min_mw", p.min_mw)
                .field("max_mw", p.max_mw)
                .opt("profile", p.profile.as_ref())
                .line(&mut out);
        }
    }
    if !spec.batteries.is_empty() {
        out.push_str("\n[batteries]\n");
        for b in &spec.batteries {
            w.field("id", &b.id)
                .field("bus", &b.bus)
                .field("capacity_mwh", b.capacity_mwh)
                .field("inverter_mw", b.inverter_mw)
                .field("soc_min", b.soc_min)
                .field("soc_max", b.soc_max)
                .line(&mut out);
        }
    }

    let ict = &spec.ict;
    if ict.controller.is_some() || !ict.sensors.is_empty() || !ict.switches.is_empty() {
        out.push_str("\n[ict]\n");
        if let Some(c) = &ict.controller {
            w.field("kind", "controller")
                .params("hardware_rate", "hardware_repair", c.hardware)
                .opt("software_rate", c.software_rate)
                .phases(c.software_phases)
                .line(&mut out);
        }
        for s in &ict.sensors {
            w.field("kind", "sensor")
                .field("id", &s.id)
                .field("line", &s.line)
                .opt("rate", s.rate)
                .phases(s.phases)
                .line(&mut out);
        }
        for s in &ict.switches {
            w.field("kind", "switch")
                .field("id", &s.id)
                .field("disconnector", &s.disconnector)
                .params("rate", "repair", s.reliability)
                .line(&mut out);
        }
    }

    let d = &spec.defaults;
    let mut defaults = String::new();
    for (class, p) in [
        ("line", d.line),
        ("transformer", d.transformer),
        ("intelligent_switch", d.intelligent_switch),
        ("controller_hardware", d.controller_hardware),
    ] {
        if p.is_some() {
            w.field("class", class).params("rate", "repair", p).line(&mut defaults);
        }
    }
    for (class, rate, phases) in [
        ("sensor", d.sensor_rate, d.sensor_phases),
        ("controller_software", d.controller_software_rate, d.controller_software_phases),
    ] {
        if rate.is_some() || phases.is_some() {
            w.field("class", class).opt("rate", rate).phases(phases).line(&mut defaults);
        }
    }
    if !defaults.is_empty() {
        out.push_str("\n[reliability]\n");
        out.push_str(&defaults);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_network;

    const MINIMAL: &str = r#"
# two buses, one line
[system]
kind=distribution id=D1 root=B1 capacity=5

[buses]
id=B1
id=B2 customers=10 load_mw=0.5 category="residential"

[lines]
id=L1 from=B1 to=B2 r=0.01 x=0.02 capacity=3 rate=0.07 repair="4 h"

[switchgear]
id=CB1 kind=breaker line=L1 end=from   # feeder breaker
"#;

    #[test]
    fn minimal_file() {
        let spec = parse_network(MINIMAL).unwrap();
        assert_eq!(spec.buses.len(), 2);
        assert_eq!(spec.lines.len(), 1);
        assert_eq!(spec.buses[1].system, "D1");
        assert_eq!(spec.lines[0].reliability.unwrap().repair_time, Duration::hours(4.0));
        assert!(build_network(&spec).is_ok());
    }

    #[test]
    fn ohm_impedances_use_the_bases() {
        let text = "[system]\nkind=power id=P base_mva=10 base_kv=10\n[lines]\nid=L from=A to=B r_ohm=10 x_ohm=5\n";
        let spec = parse_network(text).unwrap();
        assert!((spec.lines[0].r_pu - 1.0).abs() < 1e-12);
        assert!((spec.lines[0].x_pu - 0.5).abs() < 1e-12);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases = [
            ("[buses]\nid=B1\n[nodes]\n", 3, ParseErrorKind::UnknownSection("nodes".into())),
            ("[lines]\nid=L1 from=A\n", 2, ParseErrorKind::MissingField("to".into())),
            ("id=B1\n", 1, ParseErrorKind::NoSection),
            ("[buses]\n\nid=B1 colour=red\n", 3, ParseErrorKind::UnknownField("colour".into())),
            (
                "[buses]\nid=B1 customers=many\n",
                2,
                ParseErrorKind::BadValue {
                    field: "customers".into(),
                    value: "many".into(),
                },
            ),
            ("[lines]\nid=L1 from=A to=B rate=1 repair=4\n", 2, ParseErrorKind::BadValue {
                field: "repair".into(),
                value: "4".into(),
            }),
        ];
        for (text, line, kind) in cases {
            assert_eq!(parse_network(text), Err(ParseError { line, kind }), "{text}");
        }
        assert!(matches!(
            parse_network("[buses]\nid=\"B1\n"),
            Err(ParseError {
                line: 2,
                kind: ParseErrorKind::Syntax(_)
            })
        ));
    }

    #[test]
    fn duplicate_bus_is_named_on_validation() {
        let text = MINIMAL.replace("id=B2 customers", "id=B1 customers");
        let err = build_network(&parse_network(&text).unwrap()).unwrap_err();
        assert!(err.to_string().contains("B1"), "{err}");
    }

    #[test]
    fn quoting() {
        assert_eq!(quote("B1"), "B1");
        assert_eq!(quote("a b"), "\"a b\"");
        assert_eq!(quote("x\"y"), "\"x\\\"y\"");
        assert_eq!(tokenize(r#"a="x\"y" b=2"#).unwrap(), vec![("a".into(), "x\"y".into()), ("b".into(), "2".into())]);
    }
}
