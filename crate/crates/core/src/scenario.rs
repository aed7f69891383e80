//! Scenario files: a TOML document describing one simulation.
//!
//! ```toml
//! [system]            # decay rates in kHz, all default to 0
//! gamma13 = 10.0
//! gamma23 = 10.0
//! gamma12 = 0.0
//! Gamma31 = 5.0
//! Gamma32 = 5.0
//! Gamma12 = 0.0
//!
//! [grid]              # defaults: 680 kHz FWHM, 10 kHz spacing, 161 groups
//! fwhm = 680.0
//! spacing = 10.0
//! count = 161
//!
//! [pulse.D]           # one table per pulse; D, R, B1, B2 imply their transition
//! rabi = 5.0          # Ω/2π in MHz (required)
//! area = "pi/2"       # units of π: "3pi", "pi/2", 0.5 ... (or `duration` in μs)
//! time = 5.0          # pulse center in μs (required)
//! phase = 0.0         # rad
//! transition = "13"   # required for custom labels: "13" or "23"
//!
//! [integrator]
//! dt_pulse = 0.0005
//! dt_free = 0.01
//! method = "rk4"
//!
//! [output]
//! cadence = 0.01      # sample spacing of S(t), μs
//! t_end = 65.0        # optional; defaults to 5 μs past the expected echo
//! coherences = [-40.0, 40.0]   # detunings (kHz) whose ρ13 is written out
//!
//! [scan]              # optional; used by `scan` when no --param is given
//! param = "pulse.B2.area"
//! values = ["1pi", "2pi", "3pi"]
//! ```
//!
//! Unknown sections or keys are errors. A run manifest is a scenario file
//! with every default resolved plus a `[manifest]` table, so it can be fed
//! straight back in.

use std::fmt::Write as _;

use toml::{Table, Value};

use crate::bloch::{SystemParams, Transition};
use crate::ensemble::{build_grid, DetuningGrid, DEFAULT_CADENCE};
use crate::error::{Error, Result};
use crate::integrator::{IntegratorConfig, Method};
use crate::protocol::{build_sequence, PulseEvent, PulseLength, PulseSequence};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub fwhm: f64,
    pub spacing: f64,
    pub count: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            fwhm: 680.0,
            spacing: 10.0,
            count: 161,
        }
    }
}

impl GridSpec {
    pub fn build(&self) -> Result<DetuningGrid> {
        build_grid(self.fwhm, self.spacing, self.count)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputSpec {
    pub cadence: f64,
    pub t_end: Option<f64>,
    /// Detunings (kHz) whose coherence is written to the time series.
    pub coherences: Vec<f64>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            cadence: DEFAULT_CADENCE,
            t_end: None,
            coherences: Vec::new(),
        }
    }
}

/// A scenario parameter that a scan can vary.
#[derive(Clone, Debug, PartialEq)]
pub enum ParamPath {
    PulseArea(String),
    PulseTime(String),
    PulseRabi(String),
    PulsePhase(String),
    PulseDuration(String),
    /// Hold time between lock and unlock: moves B2 to B1 + value.
    Storage,
    /// A decay rate, by its scenario key.
    System(String),
}

impl ParamPath {
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split('.').collect();
        let bad = || Error::scenario("scan.param", format!("unrecognised parameter path `{s}`"));
        match parts.as_slice() {
            ["storage"] => Ok(ParamPath::Storage),
            ["system", name] if SYSTEM_KEYS.contains(name) => Ok(ParamPath::System(name.to_string())),
            ["pulse", label, field] => {
                let l = label.to_string();
                match *field {
                    "area" => Ok(ParamPath::PulseArea(l)),
                    "time" => Ok(ParamPath::PulseTime(l)),
                    "rabi" => Ok(ParamPath::PulseRabi(l)),
                    "phase" => Ok(ParamPath::PulsePhase(l)),
                    "duration" => Ok(ParamPath::PulseDuration(l)),
                    _ => Err(bad()),
                }
            }
            _ => Err(bad()),
        }
    }

    /// True if changing this parameter changes the two-pulse reference echo.
    pub fn affects_reference(&self) -> bool {
        match self {
            ParamPath::PulseArea(l)
            | ParamPath::PulseTime(l)
            | ParamPath::PulseRabi(l)
            | ParamPath::PulsePhase(l)
            | ParamPath::PulseDuration(l) => l == "D" || l == "R",
            ParamPath::Storage => false,
            ParamPath::System(name) => name != "gamma12",
        }
    }

    fn pulse_label(&self) -> Option<&str> {
        match self {
            ParamPath::PulseArea(l)
            | ParamPath::PulseTime(l)
            | ParamPath::PulseRabi(l)
            | ParamPath::PulsePhase(l)
            | ParamPath::PulseDuration(l) => Some(l),
            _ => None,
        }
    }
}

impl std::fmt::Display for ParamPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParamPath::PulseArea(l) => write!(f, "pulse.{l}.area"),
            ParamPath::PulseTime(l) => write!(f, "pulse.{l}.time"),
            ParamPath::PulseRabi(l) => write!(f, "pulse.{l}.rabi"),
            ParamPath::PulsePhase(l) => write!(f, "pulse.{l}.phase"),
            ParamPath::PulseDuration(l) => write!(f, "pulse.{l}.duration"),
            ParamPath::Storage => write!(f, "storage"),
            ParamPath::System(n) => write!(f, "system.{n}"),
        }
    }
}

/// One parameter and the values to sweep it over.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanSpec {
    pub param: ParamPath,
    pub values: Vec<f64>,
}

impl ScanSpec {
    pub fn new(param: ParamPath, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::scenario("scan.values", "at least one value is required"));
        }
        Ok(Self { param, values })
    }

    /// Parses a comma-separated value list such as `1pi,2pi,3pi` or `15,30`.
    pub fn parse(param: &str, values: &str) -> Result<Self> {
        let param = ParamPath::parse(param)?;
        let values = values
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                parse_number_or_area(s, matches!(param, ParamPath::PulseArea(_)))
                    .ok_or_else(|| Error::scenario("scan.values", format!("cannot parse `{s}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(param, values)
    }
}

fn parse_number_or_area(s: &str, area: bool) -> Option<f64> {
    if area {
        parse_area(s)
    } else {
        s.parse::<f64>().ok()
    }
}

/// Parses a pulse area written in units of π: `pi`, `3pi`, `pi/2`,
/// `3pi/2`, `0.5pi`, `3*pi`, `2π`, or a bare number (already in units of π).
pub fn parse_area(s: &str) -> Option<f64> {
    let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let s = s.replace('π', "pi").to_ascii_lowercase();
    if let Ok(x) = s.parse::<f64>() {
        return Some(x);
    }
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.to_string(), d.parse::<f64>().ok()?),
        None => (s.clone(), 1.0),
    };
    let coef = num.strip_suffix("pi")?;
    let coef = coef.strip_suffix('*').unwrap_or(coef);
    let c = if coef.is_empty() { 1.0 } else { coef.parse::<f64>().ok()? };
    let v = c / den;
    v.is_finite().then_some(v)
}

/// Fully resolved simulation description.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub system: SystemParams,
    pub grid: GridSpec,
    pub pulses: Vec<PulseEvent>,
    pub integrator: IntegratorConfig,
    pub output: OutputSpec,
    pub scan: Option<ScanSpec>,
}

const SYSTEM_KEYS: [&str; 6] = ["gamma13", "gamma23", "gamma12", "Gamma31", "Gamma32", "Gamma12"];

fn check_keys(table: &Table, section: &str, allowed: &[&str]) -> Result<()> {
    for k in table.keys() {
        if !allowed.contains(&k.as_str()) {
            let key = if section.is_empty() { k.clone() } else { format!("{section}.{k}") };
            return Err(Error::scenario(key, "unknown key"));
        }
    }
    Ok(())
}

fn sub_table<'a>(root: &'a Table, key: &str) -> Result<Option<&'a Table>> {
    match root.get(key) {
        None => Ok(None),
        Some(Value::Table(t)) => Ok(Some(t)),
        Some(_) => Err(Error::scenario(key, "expected a table")),
    }
}

fn get_f64(t: &Table, section: &str, key: &str) -> Result<Option<f64>> {
    let path = format!("{section}.{key}");
    match t.get(key) {
        None => Ok(None),
        Some(Value::Float(x)) => Ok(Some(*x)),
        Some(Value::Integer(i)) => Ok(Some(*i as f64)),
        Some(_) => Err(Error::scenario(path, "expected a number")),
    }
}

fn non_negative(v: f64, path: &str) -> Result<f64> {
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::scenario(path, format!("must be a finite number >= 0, got {v}")))
    }
}

fn positive(v: f64, path: &str) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::scenario(path, format!("must be a finite number > 0, got {v}")))
    }
}

fn parse_pulse(label: &str, t: &Table) -> Result<PulseEvent> {
    let section = format!("pulse.{label}");
    check_keys(t, &section, &["transition", "rabi", "area", "duration", "time", "phase"])?;

    let transition = match t.get("transition") {
        None => PulseEvent::standard_transition(label).ok_or_else(|| {
            Error::scenario(format!("{section}.transition"), "required for a custom pulse label")
        })?,
        Some(Value::String(s)) if s == "13" => Transition::Opt13,
        Some(Value::String(s)) if s == "23" => Transition::Opt23,
        Some(Value::Integer(13)) => Transition::Opt13,
        Some(Value::Integer(23)) => Transition::Opt23,
        Some(v) => {
            return Err(Error::scenario(
                format!("{section}.transition"),
                format!("expected \"13\" or \"23\", got {v}"),
            ))
        }
    };

    let rabi_path = format!("{section}.rabi");
    let rabi = get_f64(t, &section, "rabi")?
        .ok_or_else(|| Error::scenario(&rabi_path, "missing required key"))?;
    let rabi = non_negative(rabi, &rabi_path)?;

    let time_path = format!("{section}.time");
    let time = get_f64(t, &section, "time")?
        .ok_or_else(|| Error::scenario(&time_path, "missing required key"))?;
    if !time.is_finite() {
        return Err(Error::scenario(time_path, "must be finite"));
    }

    let area_path = format!("{section}.area");
    let length = match (t.get("area"), t.get("duration")) {
        (Some(_), Some(_)) => {
            return Err(Error::scenario(section, "give either `area` or `duration`, not both"))
        }
        (None, None) => return Err(Error::scenario(area_path, "missing required key (or `duration`)")),
        (Some(v), None) => {
            let a = match v {
                Value::String(s) => parse_area(s)
                    .ok_or_else(|| Error::scenario(&area_path, format!("cannot parse area `{s}`")))?,
                Value::Float(x) => *x,
                Value::Integer(i) => *i as f64,
                _ => return Err(Error::scenario(area_path, "expected a number or a string like \"3pi\"")),
            };
            let a = non_negative(a, &area_path)?;
            if a > 0.0 && rabi == 0.0 {
                return Err(Error::scenario(rabi_path, "a pulse with non-zero area needs rabi > 0"));
            }
            PulseLength::Area(a)
        }
        (None, Some(_)) => {
            let p = format!("{section}.duration");
            let d = get_f64(t, &section, "duration")?.unwrap();
            PulseLength::Duration(non_negative(d, &p)?)
        }
    };
    let phase = get_f64(t, &section, "phase")?.unwrap_or(0.0);

    Ok(PulseEvent {
        label: label.to_string(),
        transition,
        rabi,
        length,
        time,
        phase,
    })
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let root: Table = text.parse().map_err(|e: toml::de::Error| {
        Error::scenario("<document>", e.message().to_string())
    })?;
    check_keys(&root, "", &["system", "grid", "pulse", "integrator", "output", "scan", "manifest"])?;

    let mut system = SystemParams::default();
    if let Some(t) = sub_table(&root, "system")? {
        check_keys(t, "system", &SYSTEM_KEYS)?;
        let set = |key: &str, slot: &mut f64| -> Result<()> {
            if let Some(v) = get_f64(t, "system", key)? {
                *slot = non_negative(v, &format!("system.{key}"))?;
            }
            Ok(())
        };
        set("gamma13", &mut system.gamma13)?;
        set("gamma23", &mut system.gamma23)?;
        set("gamma12", &mut system.gamma12)?;
        set("Gamma31", &mut system.big_gamma31)?;
        set("Gamma32", &mut system.big_gamma32)?;
        set("Gamma12", &mut system.big_gamma12)?;
    }

    let mut grid = GridSpec::default();
    if let Some(t) = sub_table(&root, "grid")? {
        check_keys(t, "grid", &["fwhm", "spacing", "count"])?;
        if let Some(v) = get_f64(t, "grid", "fwhm")? {
            grid.fwhm = positive(v, "grid.fwhm")?;
        }
        if let Some(v) = get_f64(t, "grid", "spacing")? {
            grid.spacing = positive(v, "grid.spacing")?;
        }
        match t.get("count") {
            None => {}
            Some(Value::Integer(n)) if *n > 0 && n % 2 == 1 => grid.count = *n as usize,
            Some(v) => return Err(Error::scenario("grid.count", format!("must be a positive odd integer, got {v}"))),
        }
    }

    let mut pulses = Vec::new();
    let pulse_tables = sub_table(&root, "pulse")?
        .ok_or_else(|| Error::scenario("pulse", "at least one [pulse.<label>] table is required"))?;
    for (label, v) in pulse_tables {
        let Value::Table(t) = v else {
            return Err(Error::scenario(format!("pulse.{label}"), "expected a table"));
        };
        pulses.push(parse_pulse(label, t)?);
    }
    if pulses.is_empty() {
        return Err(Error::scenario("pulse", "at least one pulse is required"));
    }

    let mut integrator = IntegratorConfig::default();
    if let Some(t) = sub_table(&root, "integrator")? {
        check_keys(t, "integrator", &["dt_pulse", "dt_free", "method"])?;
        if let Some(v) = get_f64(t, "integrator", "dt_pulse")? {
            integrator.dt_pulse = positive(v, "integrator.dt_pulse")?;
        }
        if let Some(v) = get_f64(t, "integrator", "dt_free")? {
            integrator.dt_free = positive(v, "integrator.dt_free")?;
        }
        match t.get("method") {
            None => {}
            Some(Value::String(s)) if s.eq_ignore_ascii_case("rk4") => integrator.method = Method::Rk4,
            Some(v) => return Err(Error::scenario("integrator.method", format!("unsupported method {v}"))),
        }
    }

    let mut output = OutputSpec::default();
    if let Some(t) = sub_table(&root, "output")? {
        check_keys(t, "output", &["cadence", "t_end", "coherences"])?;
        if let Some(v) = get_f64(t, "output", "cadence")? {
            output.cadence = positive(v, "output.cadence")?;
        }
        if let Some(v) = get_f64(t, "output", "t_end")? {
            output.t_end = Some(positive(v, "output.t_end")?);
        }
        match t.get("coherences") {
            None => {}
            Some(Value::Array(a)) => {
                for v in a {
                    match v {
                        Value::Float(x) => output.coherences.push(*x),
                        Value::Integer(i) => output.coherences.push(*i as f64),
                        _ => return Err(Error::scenario("output.coherences", "expected numbers (kHz)")),
                    }
                }
            }
            Some(_) => return Err(Error::scenario("output.coherences", "expected an array")),
        }
    }

    let scan = match sub_table(&root, "scan")? {
        None => None,
        Some(t) => {
            check_keys(t, "scan", &["param", "values"])?;
            let param = match t.get("param") {
                Some(Value::String(s)) => ParamPath::parse(s)?,
                _ => return Err(Error::scenario("scan.param", "missing or not a string")),
            };
            let is_area = matches!(param, ParamPath::PulseArea(_));
            let Some(Value::Array(a)) = t.get("values") else {
                return Err(Error::scenario("scan.values", "missing or not an array"));
            };
            let values = a
                .iter()
                .map(|v| match v {
                    Value::Float(x) => Some(*x),
                    Value::Integer(i) => Some(*i as f64),
                    Value::String(s) => parse_number_or_area(s, is_area),
                    _ => None,
                })
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| Error::scenario("scan.values", "cannot parse value list"))?;
            Some(ScanSpec::new(param, values)?)
        }
    };

    if let Some(t) = sub_table(&root, "manifest")? {
        check_keys(t, "manifest", &["tool", "version", "command"])?;
    }

    let scenario = Scenario {
        system,
        grid,
        pulses,
        integrator,
        output,
        scan,
    };
    scenario.validate()?;
    Ok(scenario)
}

fn fmt_f64(x: f64) -> String {
    // `{:?}` keeps a trailing `.0` so TOML reads the value back as a float,
    // and prints the shortest representation that round-trips exactly.
    format!("{x:?}")
}

fn fmt_list(xs: &[f64]) -> String {
    let items: Vec<String> = xs.iter().map(|&x| fmt_f64(x)).collect();
    format!("[{}]", items.join(", "))
}

impl Scenario {
    /// Builds the pulse sequence, applying `output.t_end` when given.
    pub fn sequence(&self) -> Result<PulseSequence> {
        let seq = build_sequence(self.pulses.clone())?;
        match self.output.t_end {
            Some(t) => seq.with_end(t),
            None => Ok(seq),
        }
    }

    pub fn detuning_grid(&self) -> Result<DetuningGrid> {
        self.grid.build()
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.integrator
            .validate()
            .map_err(|e| Error::scenario("integrator", e.to_string()))?;
        let grid = self.detuning_grid().map_err(|e| Error::scenario("grid", e.to_string()))?;
        for &d in &self.output.coherences {
            if grid.index_of(d).is_none() {
                return Err(Error::scenario(
                    "output.coherences",
                    format!("detuning {d} kHz is not on the grid"),
                ));
            }
        }
        let seq = self.sequence()?;
        for p in seq.pulses() {
            self.integrator
                .check_drives(&[p.drive()])
                .map_err(|e| Error::scenario(format!("pulse.{}.rabi", p.label), e.to_string()))?;
        }
        if let Some(scan) = &self.scan {
            self.check_scan(scan)?;
        }
        Ok(())
    }

    pub fn pulse(&self, label: &str) -> Option<&PulseEvent> {
        self.pulses.iter().find(|p| p.label == label)
    }

    fn pulse_mut(&mut self, label: &str) -> Result<&mut PulseEvent> {
        self.pulses
            .iter_mut()
            .find(|p| p.label == label)
            .ok_or_else(|| Error::scenario("scan.param", format!("no pulse labelled `{label}`")))
    }

    /// Checks that a scan's parameter exists in this scenario.
    pub fn check_scan(&self, scan: &ScanSpec) -> Result<()> {
        if let Some(l) = scan.param.pulse_label() {
            if self.pulse(l).is_none() {
                return Err(Error::scenario("scan.param", format!("no pulse labelled `{l}`")));
            }
        }
        if scan.param == ParamPath::Storage && (self.pulse("B1").is_none() || self.pulse("B2").is_none()) {
            return Err(Error::scenario("scan.param", "`storage` needs both B1 and B2"));
        }
        Ok(())
    }

    /// Copy of the scenario with `param` set to `value`. The window end is
    /// cleared so it follows the modified sequence.
    pub fn with_param(&self, param: &ParamPath, value: f64) -> Result<Scenario> {
        let mut s = self.clone();
        s.scan = None;
        s.output.t_end = None;
        match param {
            ParamPath::PulseArea(l) => s.pulse_mut(l)?.length = PulseLength::Area(value),
            ParamPath::PulseDuration(l) => s.pulse_mut(l)?.length = PulseLength::Duration(value),
            ParamPath::PulseTime(l) => s.pulse_mut(l)?.time = value,
            ParamPath::PulseRabi(l) => s.pulse_mut(l)?.rabi = value,
            ParamPath::PulsePhase(l) => s.pulse_mut(l)?.phase = value,
            ParamPath::Storage => {
                let b1 = s.pulse("B1").map(|p| p.time).ok_or_else(|| {
                    Error::scenario("scan.param", "`storage` needs a B1 pulse")
                })?;
                s.pulse_mut("B2")?.time = b1 + value;
            }
            ParamPath::System(name) => {
                let slot = match name.as_str() {
                    "gamma13" => &mut s.system.gamma13,
                    "gamma23" => &mut s.system.gamma23,
                    "gamma12" => &mut s.system.gamma12,
                    "Gamma31" => &mut s.system.big_gamma31,
                    "Gamma32" => &mut s.system.big_gamma32,
                    "Gamma12" => &mut s.system.big_gamma12,
                    _ => return Err(Error::scenario("scan.param", format!("unknown rate `{name}`"))),
                };
                *slot = value;
            }
        }
        Ok(s)
    }

    /// The two-pulse reference: the same D and R, same decays except γ12 = 0,
    /// no locking pulses.
    pub fn reference(&self) -> Result<Scenario> {
        let d = self.pulse("D").ok_or_else(|| Error::scenario("pulse.D", "reference needs a D pulse"))?;
        let r = self.pulse("R").ok_or_else(|| Error::scenario("pulse.R", "reference needs an R pulse"))?;
        let mut s = self.clone();
        s.pulses = vec![d.clone(), r.clone()];
        s.system.gamma12 = 0.0;
        s.output.t_end = None;
        s.output.coherences.clear();
        s.scan = None;
        Ok(s)
    }

    /// Serializes with every default resolved. `extra` is appended verbatim.
    pub fn to_toml(&self, resolved_end: Option<f64>) -> String {
        let mut out = String::new();
        let s = &self.system;
        let _ = writeln!(out, "[system]");
        for (k, v) in s.named_rates() {
            let _ = writeln!(out, "{k} = {}", fmt_f64(v));
        }
        let _ = writeln!(out, "\n[grid]\nfwhm = {}\nspacing = {}\ncount = {}", fmt_f64(self.grid.fwhm), fmt_f64(self.grid.spacing), self.grid.count);
        let _ = writeln!(
            out,
            "\n[integrator]\ndt_pulse = {}\ndt_free = {}\nmethod = \"rk4\"",
            fmt_f64(self.integrator.dt_pulse),
            fmt_f64(self.integrator.dt_free)
        );
        let _ = writeln!(out, "\n[output]\ncadence = {}", fmt_f64(self.output.cadence));
        if let Some(t) = resolved_end.or(self.output.t_end) {
            let _ = writeln!(out, "t_end = {}", fmt_f64(t));
        }
        let _ = writeln!(out, "coherences = {}", fmt_list(&self.output.coherences));
        for p in &self.pulses {
            let tr = match p.transition {
                Transition::Opt13 => "13",
                Transition::Opt23 => "23",
            };
            let _ = writeln!(out, "\n[pulse.{}]\ntransition = \"{tr}\"\nrabi = {}", toml_key(&p.label), fmt_f64(p.rabi));
            match p.length {
                PulseLength::Area(a) => {
                    let _ = writeln!(out, "area = {}", fmt_f64(a));
                }
                PulseLength::Duration(d) => {
                    let _ = writeln!(out, "duration = {}", fmt_f64(d));
                }
            }
            let _ = writeln!(out, "time = {}\nphase = {}", fmt_f64(p.time), fmt_f64(p.phase));
        }
        if let Some(scan) = &self.scan {
            let _ = writeln!(out, "\n[scan]\nparam = \"{}\"\nvalues = {}", scan.param, fmt_list(&scan.values));
        }
        out
    }
}

fn toml_key(label: &str) -> String {
    if label.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
        label.to_string()
    } else {
        format!("{label:?}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[pulse.D]
rabi = 5.0
area = "pi/2"
time = 5.0

[pulse.R]
rabi = 5.0
area = "pi"
time = 10.0
"#;

    pub(crate) const FIG1: &str = r#"
[system]
gamma13 = 10.0
gamma23 = 10.0
gamma12 = 0.0
Gamma31 = 5.0
Gamma32 = 5.0

[pulse.D]
rabi = 5.0
area = "pi/2"
time = 5.0

[pulse.R]
rabi = 5.0
area = "pi"
time = 10.0

[pulse.B1]
rabi = 5.0
area = "pi"
time = 10.1

[pulse.B2]
rabi = 5
area = "3pi"
time = 55
"#;

    #[test]
    fn area_strings() {
        assert_eq!(parse_area("pi"), Some(1.0));
        assert_eq!(parse_area("3pi"), Some(3.0));
        assert_eq!(parse_area("pi/2"), Some(0.5));
        assert_eq!(parse_area("3pi/2"), Some(1.5));
        assert_eq!(parse_area("0.05 pi"), Some(0.05));
        assert_eq!(parse_area("3*pi"), Some(3.0));
        assert_eq!(parse_area("2π"), Some(2.0));
        assert_eq!(parse_area("0.5"), Some(0.5));
        assert_eq!(parse_area("three pi"), None);
        assert_eq!(parse_area("pi/0"), None);
    }

    #[test]
    fn minimal_file_gets_defaults() {
        let s = parse_scenario(MINIMAL).unwrap();
        assert_eq!(s.system, SystemParams::default());
        assert_eq!(s.grid, GridSpec::default());
        assert_eq!(s.integrator, IntegratorConfig::default());
        assert_eq!(s.output, OutputSpec::default());
        assert_eq!(s.pulses.len(), 2);
        let seq = s.sequence().unwrap();
        assert_eq!(seq.times().conventional_echo(), Some(15.0));
        assert_eq!(s.pulse("D").unwrap().transition, Transition::Opt13);
    }

    #[test]
    fn baseline_file() {
        let s = parse_scenario(FIG1).unwrap();
        assert_eq!(
            s.system,
            SystemParams {
                gamma13: 10.0,
                gamma23: 10.0,
                gamma12: 0.0,
                big_gamma31: 5.0,
                big_gamma32: 5.0,
                big_gamma12: 0.0
            }
        );
        let b2 = s.pulse("B2").unwrap();
        assert_eq!(b2.transition, Transition::Opt23);
        assert_eq!(b2.area(), 3.0);
        assert_eq!(b2.time, 55.0);
        let seq = s.sequence().unwrap();
        assert!((seq.times().locked_echo().unwrap() - 59.9).abs() < 1e-12);
    }

    #[test]
    fn negative_rabi_names_key() {
        let text = MINIMAL.replacen("rabi = 5.0", "rabi = -1", 1);
        match parse_scenario(&text) {
            Err(Error::Scenario { key, .. }) => assert_eq!(key, "pulse.D.rabi"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_errors() {
        let text = format!("{MINIMAL}\n[system]\ngamma99 = 1.0\n");
        match parse_scenario(&text) {
            Err(Error::Scenario { key, .. }) => assert_eq!(key, "system.gamma99"),
            other => panic!("unexpected {other:?}"),
        }
        let text = MINIMAL.replacen("time = 5.0", "time = 5.0\nwidth = 2", 1);
        assert!(matches!(parse_scenario(&text), Err(Error::Scenario { key, .. }) if key == "pulse.D.width"));
        assert!(matches!(parse_scenario(&format!("{MINIMAL}\n[extras]\n")), Err(Error::Scenario { key, .. }) if key == "extras"));
    }

    #[test]
    fn missing_pulse_fields() {
        let text = MINIMAL.replacen("time = 5.0", "", 1);
        assert!(matches!(parse_scenario(&text), Err(Error::Scenario { key, .. }) if key == "pulse.D.time"));
        let text = "[pulse.X]\nrabi = 1.0\narea = 1\ntime = 1.0\n";
        assert!(matches!(parse_scenario(text), Err(Error::Scenario { key, .. }) if key == "pulse.X.transition"));
    }

    #[test]
    fn negative_rate_rejected() {
        let text = format!("{MINIMAL}\n[system]\nGamma31 = -5.0\n");
        assert!(matches!(parse_scenario(&text), Err(Error::Scenario { key, .. }) if key == "system.Gamma31"));
    }

    #[test]
    fn off_grid_coherence_rejected() {
        let text = format!("{MINIMAL}\n[output]\ncoherences = [45.0]\n");
        assert!(matches!(parse_scenario(&text), Err(Error::Scenario { key, .. }) if key == "output.coherences"));
        let text = format!("{MINIMAL}\n[output]\ncoherences = [-40, 40.0]\n");
        assert!(parse_scenario(&text).is_ok());
    }

    #[test]
    fn serialization_round_trips() {
        let mut s = parse_scenario(FIG1).unwrap();
        s.output.coherences = vec![-40.0, 40.0];
        s.scan = Some(ScanSpec::parse("pulse.B2.area", "1pi, 2pi,3pi").unwrap());
        let text = s.to_toml(None);
        let back = parse_scenario(&text).unwrap();
        assert_eq!(back, s);
        let with_end = parse_scenario(&s.to_toml(Some(64.9))).unwrap();
        assert_eq!(with_end.output.t_end, Some(64.9));
    }

    #[test]
    fn scan_paths() {
        let s = parse_scenario(FIG1).unwrap();
        let st = s.with_param(&ParamPath::Storage, 30.0).unwrap();
        assert!((st.pulse("B2").unwrap().time - 40.1).abs() < 1e-12);
        let a = s.with_param(&ParamPath::PulseArea("B2".into()), 7.0).unwrap();
        assert_eq!(a.pulse("B2").unwrap().area(), 7.0);
        let g = s.with_param(&ParamPath::System("gamma12".into()), 20.0).unwrap();
        assert_eq!(g.system.gamma12, 20.0);
        assert!(s.with_param(&ParamPath::PulseTime("B3".into()), 1.0).is_err());
        assert!(ParamPath::parse("pulse.B2.colour").is_err());
        assert!(ParamPath::parse("system.gamma99").is_err());
        assert!(ScanSpec::parse("storage", "").is_err());
        assert_eq!(ScanSpec::parse("storage", "15, 30").unwrap().values, vec![15.0, 30.0]);
        assert!(ParamPath::PulseArea("D".into()).affects_reference());
        assert!(!ParamPath::Storage.affects_reference());
        assert!(!ParamPath::System("gamma12".into()).affects_reference());
    }

    #[test]
    fn reference_drops_lock_pulses() {
        let mut s = parse_scenario(FIG1).unwrap();
        s.system.gamma12 = 20.0;
        let r = s.reference().unwrap();
        assert_eq!(r.pulses.len(), 2);
        assert_eq!(r.system.gamma12, 0.0);
        assert_eq!(r.system.gamma13, 10.0);
    }
}
