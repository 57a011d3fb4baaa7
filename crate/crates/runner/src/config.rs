//! Scenario configuration: flat `key = value` text, `#` comments, optional
//! `[physics]`, `[numerics]` and `[output]` sections. `scenario` sits at the
//! top level; every other key may appear in its own section or unsectioned.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { key: String, line: usize },
    #[error("line {line}: unknown section `[{section}]`")]
    UnknownSection { section: String, line: usize },
    #[error("line {line}: key `{key}` belongs in [{expected}], not [{found}]")]
    WrongSection { key: String, expected: &'static str, found: String, line: usize },
    #[error("key `{key}` given twice (lines {first} and {second})")]
    Duplicate { key: String, first: usize, second: usize },
    #[error("line {line}: `{key}` must be {requirement}, got {value}")]
    OutOfRange { key: String, value: String, requirement: &'static str, line: usize },
    #[error("line {line}: cannot parse `{value}` for `{key}`: {reason}")]
    Invalid { key: String, value: String, reason: String, line: usize },
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { text: String, line: usize },
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("`gamma` and `dipole` both set (lines {gamma_line} and {dipole_line}); give one")]
    Conflict { gamma_line: usize, dipole_line: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Scenario {
    SendDesign,
    SendRoundtrip,
    ReceiveRoundtrip,
    Table1,
    EmissionDecay,
    BoundState,
    FieldMovie,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::SendDesign,
        Scenario::SendRoundtrip,
        Scenario::ReceiveRoundtrip,
        Scenario::Table1,
        Scenario::EmissionDecay,
        Scenario::BoundState,
        Scenario::FieldMovie,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::SendDesign => "send-design",
            Scenario::SendRoundtrip => "send-roundtrip",
            Scenario::ReceiveRoundtrip => "receive-roundtrip",
            Scenario::Table1 => "table1",
            Scenario::EmissionDecay => "emission-decay",
            Scenario::BoundState => "bound-state",
            Scenario::FieldMovie => "field-movie",
        }
    }

    fn strong_coupling(self) -> bool {
        matches!(self, Scenario::BoundState | Scenario::FieldMovie)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Scenario::ALL.iter().map(|s| s.name()).collect();
                format!("expected one of {}", names.join(", "))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
    Both,
}

impl OutputFormat {
    pub fn csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }

    pub fn json(self) -> bool {
        matches!(self, OutputFormat::Json | OutputFormat::Both)
    }
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            "both" => Ok(OutputFormat::Both),
            _ => Err("expected csv, json or both".into()),
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
            OutputFormat::Both => "both",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Physics {
    /// Cut-off frequency, meV.
    pub omega0: f64,
    /// Transition (ε32 or ω10) minus cut-off, meV.
    pub detuning: f64,
    /// Spectral width of the sech target, meV.
    pub sigma0: f64,
    /// Markovian rate one meV above the cut-off, meV. Fixes the coupling.
    pub gamma: f64,
    /// Excited-level leakage γ', meV.
    pub leak_rate: f64,
    /// Sender-receiver distance, µm.
    pub length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Numerics {
    /// Integration step override, ps.
    pub dt: Option<f64>,
    /// k-grid spacing override, 1/µm.
    pub dk: Option<f64>,
    /// Half-width of the design window override, ps.
    pub window: Option<f64>,
    /// End of the emission window, ps.
    pub t_end: Option<f64>,
    /// Spacing of output samples for emission traces, ps.
    pub sample_dt: f64,
    /// Upper limit of the branch-cut integral, meV above the cut-off.
    pub spectral_cutoff: Option<f64>,
    /// Time the field snapshots start from, ps.
    pub release_time: f64,
    pub frame_step: f64,
    pub frame_count: usize,
    /// Right edge of the snapshot x-grid, µm.
    pub x_max: f64,
    pub dx: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputSettings {
    pub format: OutputFormat,
    pub half_res_check: bool,
    /// Longest CSV time series; longer ones are written at a stride.
    pub max_rows: usize,
}

/// Where a resolved value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Default,
    Config(usize),
    Override,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub physics: Physics,
    pub numerics: Numerics,
    pub output: OutputSettings,
    /// Source of every key that has a value, by key name.
    pub sources: BTreeMap<&'static str, Source>,
    /// Dipole moment, if the coupling was given that way.
    pub dipole: Option<f64>,
}

#[derive(Clone, Copy)]
enum Kind {
    Positive,
    NonNegative,
    Count,
    Bool,
    Format,
}

struct KeySpec {
    name: &'static str,
    section: &'static str,
    kind: Kind,
}

const KEYS: &[KeySpec] = &[
    KeySpec { name: "omega0", section: "physics", kind: Kind::Positive },
    KeySpec { name: "detuning", section: "physics", kind: Kind::Positive },
    KeySpec { name: "sigma0", section: "physics", kind: Kind::Positive },
    KeySpec { name: "gamma", section: "physics", kind: Kind::Positive },
    KeySpec { name: "dipole", section: "physics", kind: Kind::Positive },
    KeySpec { name: "leak_rate", section: "physics", kind: Kind::NonNegative },
    KeySpec { name: "length", section: "physics", kind: Kind::NonNegative },
    KeySpec { name: "dt", section: "numerics", kind: Kind::Positive },
    KeySpec { name: "dk", section: "numerics", kind: Kind::Positive },
    KeySpec { name: "window", section: "numerics", kind: Kind::Positive },
    KeySpec { name: "t_end", section: "numerics", kind: Kind::Positive },
    KeySpec { name: "sample_dt", section: "numerics", kind: Kind::Positive },
    KeySpec { name: "spectral_cutoff", section: "numerics", kind: Kind::Positive },
    KeySpec { name: "release_time", section: "numerics", kind: Kind::NonNegative },
    KeySpec { name: "frame_step", section: "numerics", kind: Kind::Positive },
    KeySpec { name: "frame_count", section: "numerics", kind: Kind::Count },
    KeySpec { name: "x_max", section: "numerics", kind: Kind::Positive },
    KeySpec { name: "dx", section: "numerics", kind: Kind::Positive },
    KeySpec { name: "format", section: "output", kind: Kind::Format },
    KeySpec { name: "half_res_check", section: "output", kind: Kind::Bool },
    KeySpec { name: "max_rows", section: "output", kind: Kind::Count },
];

const SECTIONS: [&str; 3] = ["physics", "numerics", "output"];

/// Keys a sweep may vary.
pub fn numeric_keys() -> impl Iterator<Item = &'static str> {
    KEYS.iter()
        .filter(|k| matches!(k.kind, Kind::Positive | Kind::NonNegative | Kind::Count))
        .map(|k| k.name)
}

fn lookup(name: &str) -> Option<&'static KeySpec> {
    KEYS.iter().find(|k| k.name == name)
}

#[derive(Debug, Clone, Copy)]
enum Value {
    Num(f64),
    Count(usize),
    Bool(bool),
    Format(OutputFormat),
}

fn parse_value(key: &KeySpec, raw: &str, line: usize) -> Result<Value, ConfigError> {
    let invalid = |reason: String| ConfigError::Invalid {
        key: key.name.into(),
        value: raw.into(),
        reason,
        line,
    };
    match key.kind {
        Kind::Positive | Kind::NonNegative => {
            let v: f64 = raw.parse().map_err(|e: std::num::ParseFloatError| invalid(e.to_string()))?;
            let ok = v.is_finite() && if matches!(key.kind, Kind::Positive) { v > 0.0 } else { v >= 0.0 };
            if !ok {
                let requirement = if matches!(key.kind, Kind::Positive) { "positive" } else { "non-negative" };
                return Err(ConfigError::OutOfRange { key: key.name.into(), value: raw.into(), requirement, line });
            }
            Ok(Value::Num(v))
        }
        Kind::Count => {
            let v: i64 = raw.parse().map_err(|e: std::num::ParseIntError| invalid(e.to_string()))?;
            if v <= 0 {
                return Err(ConfigError::OutOfRange {
                    key: key.name.into(),
                    value: raw.into(),
                    requirement: "a positive integer",
                    line,
                });
            }
            Ok(Value::Count(v as usize))
        }
        Kind::Bool => match raw {
            "true" => Ok(Value::Bool(true)),
            "false" => Ok(Value::Bool(false)),
            _ => Err(invalid("expected true or false".into())),
        },
        Kind::Format => raw.parse().map(Value::Format).map_err(invalid),
    }
}

/// Raw assignments collected from a config body, before defaults.
#[derive(Debug, Clone, Default)]
struct Assignments {
    scenario: Option<(Scenario, usize)>,
    values: BTreeMap<&'static str, (Value, usize)>,
}

fn strip_comment(line: &str) -> &str {
    line.split('#').next().unwrap_or("").trim()
}

fn collect(text: &str) -> Result<Assignments, ConfigError> {
    let mut out = Assignments::default();
    let mut section: Option<String> = None;
    let mut scenario_line = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = strip_comment(raw);
        if body.is_empty() {
            continue;
        }
        if let Some(name) = body.strip_prefix('[').and_then(|b| b.strip_suffix(']')) {
            let name = name.trim();
            if !SECTIONS.contains(&name) {
                return Err(ConfigError::UnknownSection { section: name.into(), line });
            }
            section = Some(name.into());
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim().trim_matches('"')))
            .filter(|(k, _)| !k.is_empty())
            .ok_or_else(|| ConfigError::Syntax { text: body.into(), line })?;
        if key == "scenario" {
            if let Some(found) = &section {
                return Err(ConfigError::WrongSection { key: key.into(), expected: "top level", found: found.clone(), line });
            }
            if out.scenario.is_some() {
                return Err(ConfigError::Duplicate { key: key.into(), first: scenario_line, second: line });
            }
            let sc = value.parse().map_err(|reason| ConfigError::Invalid {
                key: key.into(),
                value: value.into(),
                reason,
                line,
            })?;
            out.scenario = Some((sc, line));
            scenario_line = line;
            continue;
        }
        let spec = lookup(key).ok_or_else(|| ConfigError::UnknownKey { key: key.into(), line })?;
        if let Some(found) = &section {
            if found != spec.section {
                return Err(ConfigError::WrongSection { key: key.into(), expected: spec.section, found: found.clone(), line });
            }
        }
        if let Some((_, first)) = out.values.get(spec.name) {
            return Err(ConfigError::Duplicate { key: key.into(), first: *first, second: line });
        }
        out.values.insert(spec.name, (parse_value(spec, value, line)?, line));
    }
    Ok(out)
}

impl ScenarioConfig {
    /// Canonical parameters for `scenario`: 1.5 eV cut-off, transition 1 meV
    /// above it, 0.27 meV rate (4.37 meV for the strong-coupling scenarios),
    /// σ0 = 0.08 meV, no leakage, receiver 20 µm away.
    pub fn defaults(scenario: Scenario) -> Self {
        let gamma = if scenario.strong_coupling() { 4.37 } else { 0.27 };
        let t_end = match scenario {
            Scenario::EmissionDecay => Some(10.0),
            Scenario::BoundState => Some(20.0),
            _ => None,
        };
        ScenarioConfig {
            scenario,
            physics: Physics {
                omega0: 1.5e6,
                detuning: 1.0,
                sigma0: 0.08,
                gamma,
                leak_rate: 0.0,
                length: 20.0,
            },
            numerics: Numerics {
                t_end,
                sample_dt: 0.01,
                release_time: 10.0,
                frame_step: 5.0,
                frame_count: 4,
                x_max: 20.0,
                ..Numerics::default()
            },
            output: OutputSettings { format: OutputFormat::Both, half_res_check: false, max_rows: 20_000 },
            sources: BTreeMap::new(),
            dipole: None,
        }
    }

    /// Apply one key (already validated) to the config.
    fn apply(&mut self, key: &'static str, value: Value, source: Source) {
        let num = |v: Value| match v {
            Value::Num(x) => x,
            Value::Count(n) => n as f64,
            _ => unreachable!("validated as numeric"),
        };
        match key {
            "omega0" => self.physics.omega0 = num(value),
            "detuning" => self.physics.detuning = num(value),
            "sigma0" => self.physics.sigma0 = num(value),
            "gamma" => self.physics.gamma = num(value),
            "dipole" => {
                let p = num(value);
                self.dipole = Some(p);
                self.physics.gamma = wqed_core::units::rate_for_dipole(p);
                self.sources.insert("gamma", source);
            }
            "leak_rate" => self.physics.leak_rate = num(value),
            "length" => self.physics.length = num(value),
            "dt" => self.numerics.dt = Some(num(value)),
            "dk" => self.numerics.dk = Some(num(value)),
            "window" => self.numerics.window = Some(num(value)),
            "t_end" => self.numerics.t_end = Some(num(value)),
            "sample_dt" => self.numerics.sample_dt = num(value),
            "spectral_cutoff" => self.numerics.spectral_cutoff = Some(num(value)),
            "release_time" => self.numerics.release_time = num(value),
            "frame_step" => self.numerics.frame_step = num(value),
            "frame_count" => {
                if let Value::Count(n) = value {
                    self.numerics.frame_count = n;
                }
            }
            "x_max" => self.numerics.x_max = num(value),
            "dx" => self.numerics.dx = Some(num(value)),
            "format" => {
                if let Value::Format(f) = value {
                    self.output.format = f;
                }
            }
            "half_res_check" => {
                if let Value::Bool(b) = value {
                    self.output.half_res_check = b;
                }
            }
            "max_rows" => {
                if let Value::Count(n) = value {
                    self.output.max_rows = n;
                }
            }
            _ => unreachable!("unknown keys are rejected while parsing"),
        }
        self.sources.insert(key, source);
    }

    /// Set a numeric key from its textual value, as a sweep does.
    pub fn set(&mut self, key: &str, raw: &str) -> Result<(), ConfigError> {
        let spec = lookup(key).ok_or_else(|| ConfigError::UnknownKey { key: key.into(), line: 0 })?;
        let value = parse_value(spec, raw, 0)?;
        if spec.name == "gamma" {
            self.dipole = None;
        }
        self.apply(spec.name, value, Source::Override);
        Ok(())
    }

    pub fn source(&self, key: &str) -> Source {
        self.sources.get(key).copied().unwrap_or(Source::Default)
    }
}

/// Parse a config body. `scenario` is required; everything else defaults.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let raw = collect(text)?;
    let (scenario, line) = raw.scenario.ok_or(ConfigError::Missing("scenario"))?;
    if let (Some((_, g)), Some((_, d))) = (raw.values.get("gamma"), raw.values.get("dipole")) {
        return Err(ConfigError::Conflict { gamma_line: *g, dipole_line: *d });
    }
    let mut cfg = ScenarioConfig::defaults(scenario);
    cfg.sources.insert("scenario", Source::Config(line));
    for (key, (value, line)) in raw.values {
        cfg.apply(key, value, Source::Config(line));
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_and_comments() {
        let cfg = parse_config(
            "# sending node\nscenario = send-roundtrip\n\n[physics]\nsigma0 = 0.008  # narrow\nleak_rate=0.0027\n[output]\nformat = json\n",
        )
        .unwrap();
        assert_eq!(cfg.scenario, Scenario::SendRoundtrip);
        assert_eq!(cfg.physics.sigma0, 0.008);
        assert_eq!(cfg.physics.leak_rate, 0.0027);
        assert_eq!(cfg.output.format, OutputFormat::Json);
        assert_eq!(cfg.source("sigma0"), Source::Config(5));
        assert_eq!(cfg.source("detuning"), Source::Default);
    }

    #[test]
    fn dipole_sets_the_rate() {
        let cfg = parse_config("scenario = bound-state\ndipole = 300\n").unwrap();
        assert!((cfg.physics.gamma - 4.32).abs() < 1e-12);
        assert_eq!(cfg.dipole, Some(300.0));
        assert!(matches!(
            parse_config("scenario = bound-state\ngamma = 4\ndipole = 300\n"),
            Err(ConfigError::Conflict { gamma_line: 2, dipole_line: 3 })
        ));
    }

    #[test]
    fn keys_in_the_wrong_section_are_rejected() {
        let err = parse_config("scenario = table1\n[numerics]\nsigma0 = 0.08\n").unwrap_err();
        assert!(matches!(err, ConfigError::WrongSection { line: 3, .. }));
        let err = parse_config("[physics]\nscenario = table1\n").unwrap_err();
        assert!(matches!(err, ConfigError::WrongSection { line: 2, .. }));
    }

    #[test]
    fn malformed_lines() {
        assert!(matches!(parse_config("scenario\n"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(parse_config("scenario = x\n"), Err(ConfigError::Invalid { line: 1, .. })));
        assert!(matches!(parse_config("[plots]\n"), Err(ConfigError::UnknownSection { line: 1, .. })));
        assert!(matches!(
            parse_config("scenario = table1\nframe_count = 2.5\n"),
            Err(ConfigError::Invalid { line: 2, .. })
        ));
    }

    #[test]
    fn sweep_override_is_validated() {
        let mut cfg = ScenarioConfig::defaults(Scenario::Table1);
        cfg.set("leak_rate", "0.01").unwrap();
        assert_eq!(cfg.source("leak_rate"), Source::Override);
        assert!(cfg.set("sigma0", "-2").is_err());
        assert!(cfg.set("colour", "1").is_err());
    }
}
