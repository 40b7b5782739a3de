//! TOML experiment plans.
//!
//! Parsing walks the document by hand so that every problem is reported with
//! its key path (`system.ports`, `variant[1].users`, ...) and all problems are
//! collected before returning.

use std::path::PathBuf;

use toml::{Table, Value};

use crate::config::{PhaseDesign, Protocol, SystemConfig};
use crate::error::{Error, FieldError, Result};
use crate::modulation::Modulation;
use crate::receivers::TalsOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReceiverKind {
    PfTals,
    NpfTals,
    PerfectCsi,
    PilotAssisted,
}

impl ReceiverKind {
    pub fn name(self) -> &'static str {
        match self {
            ReceiverKind::PfTals => "pf_tals",
            ReceiverKind::NpfTals => "npf_tals",
            ReceiverKind::PerfectCsi => "perfect_csi_baseline",
            ReceiverKind::PilotAssisted => "pilot_assisted_baseline",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "pf_tals" => ReceiverKind::PfTals,
            "npf_tals" => ReceiverKind::NpfTals,
            "perfect_csi" | "perfect_csi_baseline" => ReceiverKind::PerfectCsi,
            "pilot_assisted" | "pilot_assisted_baseline" => ReceiverKind::PilotAssisted,
            _ => return None,
        })
    }

    fn default_for(protocol: Protocol) -> Self {
        match protocol {
            Protocol::P1 => ReceiverKind::PfTals,
            Protocol::P2 => ReceiverKind::NpfTals,
        }
    }
}

impl std::str::FromStr for ReceiverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s).ok_or_else(|| Error::Usage(format!("unknown receiver {s:?}")))
    }
}

impl std::fmt::Display for ReceiverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A named set of system overrides run against the same experiment settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub name: String,
    pub system: SystemConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub base: SystemConfig,
    pub snr_grid: Vec<f64>,
    pub trials: usize,
    pub receiver: ReceiverKind,
    pub output_path: PathBuf,
    pub master_seed: u64,
    pub tals: TalsOptions,
    pub variants: Vec<Variant>,
}

impl ExperimentPlan {
    pub fn new(base: SystemConfig, receiver: ReceiverKind, snr_grid: Vec<f64>, trials: usize) -> Self {
        Self {
            base,
            snr_grid,
            trials,
            receiver,
            output_path: PathBuf::from("results.csv"),
            master_seed: 0,
            tals: TalsOptions::default(),
            variants: Vec::new(),
        }
    }

    /// Re-checks every invariant, e.g. after command-line overrides.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        collect(&mut errs, self.base.validate());
        check_receiver(&mut errs, "experiment.receiver", self.receiver, self.base.protocol);
        for (idx, v) in self.variants.iter().enumerate() {
            let before = errs.len();
            collect(&mut errs, v.system.validate());
            for e in &mut errs[before..] {
                e.path = e.path.replace("system.", &format!("variant[{idx}]."));
            }
            check_receiver(&mut errs, &format!("variant[{idx}].protocol"), self.receiver, v.system.protocol);
        }
        check_snr_grid(&mut errs, &self.snr_grid);
        if self.trials == 0 {
            errs.push(fe("experiment.trials", "must be at least 1"));
        }
        collect(&mut errs, self.tals.validate());
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }

    /// The configurations to run, each with its output file. A plan without
    /// variants runs its base system into `output_path`; otherwise every
    /// variant runs into `<stem>-<name>.<ext>` next to it.
    pub fn runs(&self) -> Vec<(String, SystemConfig, PathBuf)> {
        if self.variants.is_empty() {
            return vec![("base".into(), self.base.clone(), self.output_path.clone())];
        }
        self.variants
            .iter()
            .map(|v| (v.name.clone(), v.system.clone(), variant_path(&self.output_path, &v.name)))
            .collect()
    }
}

fn variant_path(output: &std::path::Path, name: &str) -> PathBuf {
    let stem = output
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "results".into());
    let file = match output.extension() {
        Some(ext) => format!("{stem}-{name}.{}", ext.to_string_lossy()),
        None => format!("{stem}-{name}"),
    };
    output.with_file_name(file)
}

fn fe(path: impl Into<String>, message: impl Into<String>) -> FieldError {
    FieldError {
        path: path.into(),
        message: message.into(),
    }
}

fn collect(errs: &mut Vec<FieldError>, r: Result<()>) {
    if let Err(Error::Validation(v)) = r {
        errs.extend(v);
    }
}

fn check_receiver(errs: &mut Vec<FieldError>, path: &str, r: ReceiverKind, p: Protocol) {
    let ok = match r {
        ReceiverKind::PfTals => p == Protocol::P1,
        ReceiverKind::NpfTals => p == Protocol::P2,
        _ => true,
    };
    if !ok {
        errs.push(fe(path, format!("receiver {r} does not apply to protocol {p}")));
    }
}

fn check_snr_grid(errs: &mut Vec<FieldError>, grid: &[f64]) {
    if grid.is_empty() {
        errs.push(fe("experiment.snr_db", "must list at least one SNR"));
    }
    if grid.iter().any(|s| s.is_nan() || *s == f64::NEG_INFINITY) {
        errs.push(fe("experiment.snr_db", "values must be numbers or +inf"));
    } else if grid.windows(2).any(|w| w[0] >= w[1]) {
        errs.push(fe("experiment.snr_db", "must be strictly increasing"));
    }
}

/// Reads typed values out of one TOML table, remembering which keys were
/// consumed and recording every problem against its full path.
struct Section<'a> {
    prefix: String,
    table: Option<&'a Table>,
    used: Vec<&'static str>,
}

impl<'a> Section<'a> {
    fn new(prefix: impl Into<String>, table: Option<&'a Table>) -> Self {
        Self {
            prefix: prefix.into(),
            table,
            used: Vec::new(),
        }
    }

    fn path(&self, key: &str) -> String {
        format!("{}.{key}", self.prefix)
    }

    fn raw(&mut self, key: &'static str) -> Option<&'a Value> {
        self.used.push(key);
        self.table.and_then(|t| t.get(key))
    }

    fn has(&self, key: &str) -> bool {
        self.table.is_some_and(|t| t.contains_key(key))
    }

    fn usize(&mut self, key: &'static str, errs: &mut Vec<FieldError>) -> Option<usize> {
        let path = self.path(key);
        match self.raw(key)? {
            Value::Integer(v) if *v >= 0 => Some(*v as usize),
            Value::Integer(_) => {
                errs.push(fe(path, "must be non-negative"));
                None
            }
            other => {
                errs.push(fe(path, format!("expected an integer, found {}", other.type_str())));
                None
            }
        }
    }

    fn u64(&mut self, key: &'static str, errs: &mut Vec<FieldError>) -> Option<u64> {
        self.usize(key, errs).map(|v| v as u64)
    }

    fn f64(&mut self, key: &'static str, errs: &mut Vec<FieldError>) -> Option<f64> {
        let path = self.path(key);
        match self.raw(key)? {
            Value::Float(v) => Some(*v),
            Value::Integer(v) => Some(*v as f64),
            other => {
                errs.push(fe(path, format!("expected a number, found {}", other.type_str())));
                None
            }
        }
    }

    fn str(&mut self, key: &'static str, errs: &mut Vec<FieldError>) -> Option<&'a str> {
        let path = self.path(key);
        match self.raw(key)? {
            Value::String(s) => Some(s.as_str()),
            other => {
                errs.push(fe(path, format!("expected a string, found {}", other.type_str())));
                None
            }
        }
    }

    fn f64_list(&mut self, key: &'static str, errs: &mut Vec<FieldError>) -> Option<Vec<f64>> {
        let path = self.path(key);
        match self.raw(key)? {
            Value::Array(items) => {
                let mut out = Vec::with_capacity(items.len());
                for (i, v) in items.iter().enumerate() {
                    match v {
                        Value::Float(f) => out.push(*f),
                        Value::Integer(n) => out.push(*n as f64),
                        other => {
                            errs.push(fe(
                                format!("{path}[{i}]"),
                                format!("expected a number, found {}", other.type_str()),
                            ));
                            return None;
                        }
                    }
                }
                Some(out)
            }
            Value::Float(f) => Some(vec![*f]),
            Value::Integer(n) => Some(vec![*n as f64]),
            other => {
                errs.push(fe(path, format!("expected a list of numbers, found {}", other.type_str())));
                None
            }
        }
    }

    fn parsed<T>(
        &mut self,
        key: &'static str,
        errs: &mut Vec<FieldError>,
        allowed: &str,
        parse: impl Fn(&str) -> Option<T>,
    ) -> Option<T> {
        let path = self.path(key);
        let s = self.str(key, errs)?;
        let v = parse(s);
        if v.is_none() {
            errs.push(fe(path, format!("unknown value {s:?}, expected one of {allowed}")));
        }
        v
    }

    fn finish(self, errs: &mut Vec<FieldError>) {
        if let Some(t) = self.table {
            for key in t.keys() {
                if !self.used.contains(&key.as_str()) {
                    errs.push(fe(self.path(key), "unknown key"));
                }
            }
        }
    }
}

fn parse_protocol(s: &str) -> Option<Protocol> {
    match s {
        "P1" | "p1" => Some(Protocol::P1),
        "P2" | "p2" => Some(Protocol::P2),
        _ => None,
    }
}

fn parse_modulation(s: &str) -> Option<Modulation> {
    match s {
        "bpsk" => Some(Modulation::Bpsk),
        "qpsk" => Some(Modulation::Qpsk),
        "qam16" => Some(Modulation::Qam16),
        _ => None,
    }
}

fn parse_design(s: &str) -> Option<PhaseDesign> {
    match s {
        "dft" => Some(PhaseDesign::Dft),
        "random" => Some(PhaseDesign::Random),
        _ => None,
    }
}

const DIM_KEYS: [&str; 6] = ["active_antennas", "ports", "ris_elements", "users", "blocks", "symbols"];

/// Reads the system keys of one section on top of `base` (or from scratch).
fn read_system(
    sec: &mut Section<'_>,
    base: Option<&SystemConfig>,
    errs: &mut Vec<FieldError>,
    warnings: &mut Vec<String>,
) -> Option<SystemConfig> {
    let before = errs.len();
    let protocol = sec
        .parsed("protocol", errs, "P1, P2", parse_protocol)
        .or(base.map(|b| b.protocol));
    let mut dims = [0usize; 6];
    for (slot, key) in dims.iter_mut().zip(DIM_KEYS) {
        let fallback = base.map(|b| match key {
            "active_antennas" => b.active_antennas,
            "ports" => b.ports,
            "ris_elements" => b.ris_elements,
            "users" => b.users,
            "blocks" => b.blocks,
            _ => b.symbols,
        });
        match sec.usize(key, errs).or(fallback) {
            Some(v) => *slot = v,
            None if base.is_none() && !sec.has(key) => errs.push(fe(sec.path(key), "required")),
            None => {}
        }
    }
    let slots_given = sec.has("slots");
    let slots = sec.usize("slots", errs);
    let modulation = sec
        .parsed("modulation", errs, "bpsk, qpsk, qam16", parse_modulation)
        .or(base.map(|b| b.modulation))
        .unwrap_or_default();
    let theta_design = sec
        .parsed("theta_design", errs, "dft, random", parse_design)
        .or(base.map(|b| b.theta_design))
        .unwrap_or_default();
    let coding_design = sec
        .parsed("coding_design", errs, "dft, random", parse_design)
        .or(base.map(|b| b.coding_design))
        .unwrap_or_default();

    let protocol = match protocol {
        Some(p) => p,
        None => {
            if base.is_none() && !sec.has("protocol") {
                errs.push(fe(sec.path("protocol"), "required"));
            }
            return None;
        }
    };
    let slots = match protocol {
        Protocol::P1 => match slots.or(base.filter(|b| b.protocol == Protocol::P1).map(|b| b.slots)) {
            Some(p) => p,
            None => {
                if !slots_given {
                    errs.push(fe(sec.path("slots"), "required for protocol P1"));
                }
                return None;
            }
        },
        Protocol::P2 => {
            if slots_given {
                warnings.push(format!("{} is ignored under protocol P2", sec.path("slots")));
            }
            1
        }
    };
    if errs.len() != before {
        return None;
    }
    let [m, n, nr, k, i, t] = dims;
    let cfg = SystemConfig {
        modulation,
        theta_design,
        coding_design,
        ..SystemConfig::new(protocol, m, n, nr, k, i, slots, t)
    };
    // Dimension invariants are reported with this section's prefix.
    if let Err(Error::Validation(v)) = cfg.validate() {
        errs.extend(v.into_iter().map(|mut e| {
            e.path = e.path.replace("system.", &format!("{}.", sec.prefix));
            e
        }));
        return None;
    }
    Some(cfg)
}

/// Parses and fully validates a plan, returning it with any warnings.
pub fn parse_plan(text: &str) -> Result<(ExperimentPlan, Vec<String>)> {
    let doc: Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::field("<document>", e.message().to_string()))?;
    let mut errs = Vec::new();
    let mut warnings = Vec::new();

    let table_of = |key: &str, errs: &mut Vec<FieldError>| -> Option<&Table> {
        match doc.get(key) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(other) => {
                errs.push(fe(key, format!("expected a table, found {}", other.type_str())));
                None
            }
        }
    };

    for key in doc.keys() {
        if !["system", "experiment", "receiver", "variant"].contains(&key.as_str()) {
            errs.push(fe(key.clone(), "unknown section"));
        }
    }

    let system_table = table_of("system", &mut errs);
    if system_table.is_none() && !doc.contains_key("system") {
        errs.push(fe("system", "required section"));
    }
    let mut sys = Section::new("system", system_table);
    let base = read_system(&mut sys, None, &mut errs, &mut warnings);
    sys.finish(&mut errs);

    let mut exp = Section::new("experiment", table_of("experiment", &mut errs));
    let receiver = exp.parsed(
        "receiver",
        &mut errs,
        "pf_tals, npf_tals, perfect_csi_baseline, pilot_assisted_baseline",
        ReceiverKind::parse,
    );
    let snr_grid = exp.f64_list("snr_db", &mut errs);
    if snr_grid.is_none() && !exp.has("snr_db") {
        errs.push(fe("experiment.snr_db", "required"));
    }
    let trials = exp.usize("trials", &mut errs);
    if trials.is_none() && !exp.has("trials") {
        errs.push(fe("experiment.trials", "required"));
    }
    let master_seed = exp.u64("master_seed", &mut errs).unwrap_or(0);
    let output = exp.str("output", &mut errs).unwrap_or("results.csv");
    exp.finish(&mut errs);

    let mut rcv = Section::new("receiver", table_of("receiver", &mut errs));
    let defaults = TalsOptions::default();
    let tals = TalsOptions {
        delta: rcv.f64("delta", &mut errs).unwrap_or(defaults.delta),
        max_iters: rcv.usize("max_iters", &mut errs).unwrap_or(defaults.max_iters),
        pinv_rel_tol: rcv.f64("pinv_rel_tol", &mut errs).unwrap_or(defaults.pinv_rel_tol),
        init: defaults.init,
    };
    rcv.finish(&mut errs);

    let mut variants = Vec::new();
    match doc.get("variant") {
        None => {}
        Some(Value::Array(items)) => {
            for (idx, item) in items.iter().enumerate() {
                let Value::Table(t) = item else {
                    errs.push(fe(format!("variant[{idx}]"), "expected a table"));
                    continue;
                };
                let mut sec = Section::new(format!("variant[{idx}]"), Some(t));
                let name = sec.str("name", &mut errs).map(str::to_owned);
                if name.is_none() && !t.contains_key("name") {
                    errs.push(fe(format!("variant[{idx}].name"), "required"));
                }
                let cfg = base
                    .as_ref()
                    .and_then(|b| read_system(&mut sec, Some(b), &mut errs, &mut warnings));
                sec.finish(&mut errs);
                if let Some(n) = &name {
                    let valid = !n.is_empty()
                        && n.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
                    if !valid {
                        errs.push(fe(format!("variant[{idx}].name"), "use letters, digits, '-' or '_'"));
                    } else if variants.iter().any(|v: &Variant| &v.name == n) {
                        errs.push(fe(format!("variant[{idx}].name"), "duplicate name"));
                    }
                }
                if let (Some(name), Some(system)) = (name, cfg) {
                    variants.push(Variant { name, system });
                }
            }
        }
        Some(_) => errs.push(fe("variant", "expected [[variant]] tables")),
    }

    if !errs.is_empty() {
        return Err(Error::Validation(errs));
    }
    let base = base.expect("no errors implies a base config");
    let plan = ExperimentPlan {
        receiver: receiver.unwrap_or(ReceiverKind::default_for(base.protocol)),
        base,
        snr_grid: snr_grid.unwrap_or_default(),
        trials: trials.unwrap_or(0),
        output_path: PathBuf::from(output),
        master_seed,
        tals,
        variants,
    };
    plan.validate()?;
    Ok((plan, warnings))
}

/// Parses a plan and returns only its resolved base system.
pub fn validate_config(text: &str) -> Result<(SystemConfig, Vec<String>)> {
    parse_plan(text).map(|(p, w)| (p.base, w))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[system]
protocol = "P2"
active_antennas = 4
ports = 6
ris_elements = 4
users = 2
blocks = 8
symbols = 20

[experiment]
snr_db = [0, 10]
trials = 2
"#;

    fn paths(err: Error) -> Vec<String> {
        match err {
            Error::Validation(v) => v.into_iter().map(|e| e.path).collect(),
            other => panic!("expected validation error, got {other}"),
        }
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let (plan, warnings) = parse_plan(MINIMAL).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(plan.base, SystemConfig::p2(4, 6, 4, 2, 8, 20));
        assert_eq!(plan.receiver, ReceiverKind::NpfTals);
        assert_eq!(plan.snr_grid, [0.0, 10.0]);
        assert_eq!(plan.master_seed, 0);
        assert_eq!(plan.output_path, PathBuf::from("results.csv"));
        assert_eq!(plan.tals, TalsOptions::default());
    }

    #[test]
    fn m_greater_than_n_names_both_fields() {
        let text = MINIMAL.replace("active_antennas = 4", "active_antennas = 12").replace("ports = 6", "ports = 10");
        let p = paths(parse_plan(&text).unwrap_err());
        assert!(p.iter().any(|p| p.contains("system.active_antennas") && p.contains("system.ports")), "{p:?}");
    }

    #[test]
    fn slots_under_p2_warns() {
        let text = MINIMAL.replace("blocks = 8", "blocks = 8\nslots = 4");
        let (_, warnings) = parse_plan(&text).unwrap();
        assert_eq!(warnings, ["system.slots is ignored under protocol P2"]);
    }

    #[test]
    fn p1_requires_slots() {
        let text = MINIMAL.replace("\"P2\"", "\"P1\"");
        assert_eq!(paths(parse_plan(&text).unwrap_err()), ["system.slots"]);
    }

    #[test]
    fn unknown_keys_and_type_errors_carry_paths() {
        let text = MINIMAL.replace("users = 2", "users = \"two\"\ncolour = 1") + "\n[extra]\n";
        let mut p = paths(parse_plan(&text).unwrap_err());
        p.sort();
        assert_eq!(p, ["extra", "system.colour", "system.users"]);
    }

    #[test]
    fn grid_and_receiver_checks() {
        let text = MINIMAL.replace("snr_db = [0, 10]", "snr_db = [10, 0]\nreceiver = \"pf_tals\"");
        let mut p = paths(parse_plan(&text).unwrap_err());
        p.sort();
        assert_eq!(p, ["experiment.receiver", "experiment.snr_db"]);
        let text = MINIMAL.replace("snr_db = [0, 10]", "snr_db = [0, inf]");
        assert_eq!(parse_plan(&text).unwrap().0.snr_grid, [0.0, f64::INFINITY]);
    }

    #[test]
    fn variants_override_the_base() {
        let text = format!(
            "{MINIMAL}\n[[variant]]\nname = \"k4\"\nusers = 4\n\n[[variant]]\nname = \"long\"\nblocks = 4\nsymbols = 40\nbogus = 1\n"
        );
        assert_eq!(paths(parse_plan(&text).unwrap_err()), ["variant[1].bogus"]);
        let text = text.replace("bogus = 1\n", "");
        let (plan, _) = parse_plan(&text).unwrap();
        assert_eq!(plan.variants.len(), 2);
        assert_eq!(plan.variants[0].system.users, 4);
        assert_eq!(plan.variants[1].system.blocks, 4);
        assert_eq!(plan.variants[1].system.symbols, 40);
        let runs = plan.runs();
        assert_eq!(runs[1].2, PathBuf::from("results-long.csv"));
    }

    #[test]
    fn malformed_toml_is_a_validation_error() {
        assert_eq!(paths(parse_plan("[system\n").unwrap_err()), ["<document>"]);
    }
}
