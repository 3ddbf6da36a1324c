//! Experiment configuration: TOML text in, validated [`ExperimentConfig`] out.
//!
//! Validation collects every problem it finds instead of stopping at the
//! first, and each [`Diagnostic`] points at the section, key and line it
//! refers to. The schema is documented in `docs/config.md`.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use hhc_core::diagnostics::{manufactured_problem, ManufacturedId, ManufacturedParams};
use hhc_core::grid::{GridSpec, StaggeredGrid};
use hhc_core::schemes::{
    stability_warnings, time_grid, ReducedOperator, Regularizer, SchemeConfig, SchemeFamily, SchemeKind, SourceSplit,
    StartOrder,
};
use thiserror::Error;
use toml::{Table, Value};

pub const DEFAULT_SIGMA: f64 = 0.5;
pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_STEPS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Run,
    Converge,
    StabilityScan,
    Equivalence,
    Bench,
}

impl Command {
    pub const ALL: [Command; 5] =
        [Command::Run, Command::Converge, Command::StabilityScan, Command::Equivalence, Command::Bench];

    pub fn id(self) -> &'static str {
        match self {
            Command::Run => "run",
            Command::Converge => "converge",
            Command::StabilityScan => "stability-scan",
            Command::Equivalence => "equivalence",
            Command::Bench => "bench",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Command::ALL.into_iter().find(|c| c.id() == s).ok_or_else(|| format!("unknown command `{s}`"))
    }
}

/// How a convergence ladder refines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Refinement {
    /// Halve `h` and `τ` together.
    SpaceTime,
    /// Keep the grid and halve `τ` only.
    Time,
}

impl Refinement {
    pub fn id(self) -> &'static str {
        match self {
            Refinement::SpaceTime => "space-time",
            Refinement::Time => "time",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeSettings {
    pub kind: SchemeKind,
    pub sigma: f64,
    pub tau: f64,
    pub tol: f64,
    pub start: StartOrder,
    pub source_split: SourceSplit,
    pub reduced_operator: ReducedOperator,
    pub regularizer: Regularizer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergeSettings {
    pub levels: usize,
    pub refine: Refinement,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanSettings {
    pub ratios: Vec<f64>,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSettings {
    pub kinds: Vec<SchemeKind>,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceSettings {
    pub kinds: Vec<SchemeKind>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub command: Command,
    /// Whether the file named its command (the CLI then insists they agree).
    pub command_declared: bool,
    pub grid: GridSpec<f64>,
    pub problem: ManufacturedId,
    pub params: ManufacturedParams<f64>,
    pub scheme: SchemeSettings,
    pub override_stability: bool,
    pub output_dir: PathBuf,
    pub snapshot: bool,
    pub converge: ConvergeSettings,
    pub scan: ScanSettings,
    pub bench: BenchSettings,
    pub equivalence: EquivalenceSettings,
}

impl ExperimentConfig {
    pub fn final_time(&self) -> f64 {
        self.params.final_time
    }

    /// Core scheme configuration for `kind` with the configured options.
    pub fn scheme_config(&self, kind: SchemeKind) -> SchemeConfig<f64> {
        let s = &self.scheme;
        let mut cfg = SchemeConfig::new(kind, s.sigma, s.tau).with_tol(s.tol).with_override(self.override_stability);
        cfg.start = s.start;
        cfg.source_split = s.source_split;
        cfg.reduced_operator = s.reduced_operator;
        cfg.regularizer = s.regularizer;
        cfg
    }

    /// Conditions of the configured run that the parameters do not meet.
    pub fn stability_warnings(&self) -> hhc_core::Result<Vec<String>> {
        let grid = StaggeredGrid::new(self.grid)?;
        let problem = manufactured_problem(self.problem, &grid, &self.params)?;
        let (_, tau) = time_grid(self.final_time(), self.scheme.tau)?;
        let cfg = SchemeConfig { tau, ..self.scheme_config(self.scheme.kind) };
        Ok(stability_warnings(&cfg, &grid, &problem.coefficients, self.final_time())
            .into_iter()
            .map(|w| w.to_string())
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagnosticKind {
    Syntax,
    UnknownSection,
    UnknownKey,
    Missing,
    WrongType,
    InvalidValue,
    Range,
    Stability,
}

impl DiagnosticKind {
    fn label(self) -> &'static str {
        match self {
            DiagnosticKind::Syntax => "syntax error",
            DiagnosticKind::UnknownSection => "unknown section",
            DiagnosticKind::UnknownKey => "unknown key",
            DiagnosticKind::Missing => "missing key",
            DiagnosticKind::WrongType => "wrong type",
            DiagnosticKind::InvalidValue => "invalid value",
            DiagnosticKind::Range => "range violation",
            DiagnosticKind::Stability => "stability warning",
        }
    }
}

/// One problem found in a config file.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    /// Section name, empty for top-level keys.
    pub section: String,
    pub key: Option<String>,
    /// 1-based line, when the offending text exists in the file.
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(line) = self.line {
            write!(f, "line {line}: ")?;
        }
        write!(f, "{}", self.kind.label())?;
        let section = if self.section.is_empty() { String::new() } else { format!("[{}]", self.section) };
        match (&self.key, section.is_empty()) {
            (Some(k), true) => write!(f, " at `{k}`")?,
            (Some(k), false) => write!(f, " at {section} `{k}`")?,
            (None, false) => write!(f, " in {section}")?,
            (None, true) => {}
        }
        write!(f, ": {}", self.message)
    }
}

#[derive(Debug, Error)]
#[error("{}", render(.diagnostics))]
pub struct ConfigError {
    pub diagnostics: Vec<Diagnostic>,
}

fn render(diags: &[Diagnostic]) -> String {
    let lines: Vec<String> = diags.iter().map(|d| d.to_string()).collect();
    format!(
        "invalid config ({} problem{}):\n  {}",
        diags.len(),
        if diags.len() == 1 { "" } else { "s" },
        lines.join("\n  ")
    )
}

/// A validated config and the warnings that do not prevent parsing.
#[derive(Debug, Clone)]
pub struct Parsed {
    pub config: ExperimentConfig,
    pub warnings: Vec<Diagnostic>,
}

const SECTIONS: &[(&str, &[&str])] = &[
    ("", &["command", "final_time"]),
    ("grid", &["n1", "n2", "l1", "l2"]),
    ("problem", &["id", "omega"]),
    ("coefficients", &["nu", "capacity", "conductivity"]),
    (
        "scheme",
        &[
            "kind",
            "p",
            "sigma",
            "tau",
            "tol",
            "start",
            "source_split",
            "reduced_operator",
            "regularizer",
            "override_stability",
        ],
    ),
    ("output", &["dir", "snapshot"]),
    ("converge", &["levels", "refine"]),
    ("scan", &["ratios", "steps"]),
    ("bench", &["kinds", "steps"]),
    ("equivalence", &["kinds"]),
];

/// Finds the line of a section header or of a key inside a section.
struct Locator<'a> {
    text: &'a str,
}

impl Locator<'_> {
    fn section_line(&self, section: &str) -> Option<usize> {
        self.text.lines().position(|l| header_name(l).as_deref() == Some(section)).map(|i| i + 1)
    }

    fn key_line(&self, section: &str, key: &str) -> Option<usize> {
        let mut current = String::new();
        for (i, line) in self.text.lines().enumerate() {
            if let Some(name) = header_name(line) {
                current = name;
                continue;
            }
            let trimmed = line.trim_start();
            if current == section {
                if let Some(rest) = trimmed.strip_prefix(key) {
                    let rest = rest.trim_start();
                    if rest.starts_with('=') {
                        return Some(i + 1);
                    }
                }
            }
        }
        None
    }

    fn line_of_offset(&self, offset: usize) -> usize {
        self.text[..offset.min(self.text.len())].matches('\n').count() + 1
    }
}

fn header_name(line: &str) -> Option<String> {
    let t = line.trim();
    let inner = t.strip_prefix('[')?.split(']').next()?;
    if inner.starts_with('[') {
        return None;
    }
    Some(inner.trim().to_string())
}

/// Reads typed values out of one section while recording diagnostics.
struct Reader<'a> {
    loc: &'a Locator<'a>,
    diags: Vec<Diagnostic>,
}

impl Reader<'_> {
    fn push(&mut self, kind: DiagnosticKind, section: &str, key: Option<&str>, message: String) {
        let line = match key {
            Some(k) => self.loc.key_line(section, k).or_else(|| self.loc.section_line(section)),
            None => self.loc.section_line(section),
        };
        self.diags.push(Diagnostic { kind, section: section.to_string(), key: key.map(str::to_string), line, message });
    }

    fn float(&mut self, t: &Table, section: &str, key: &str) -> Option<f64> {
        match t.get(key)? {
            Value::Float(v) => Some(*v),
            Value::Integer(v) => Some(*v as f64),
            other => {
                self.push(
                    DiagnosticKind::WrongType,
                    section,
                    Some(key),
                    format!("expected a number, found {}", other.type_str()),
                );
                None
            }
        }
    }

    fn positive(&mut self, t: &Table, section: &str, key: &str) -> Option<f64> {
        let v = self.float(t, section, key)?;
        if !(v > 0.0) || !v.is_finite() {
            self.push(DiagnosticKind::Range, section, Some(key), format!("{v} out of range (must be > 0)"));
            return None;
        }
        Some(v)
    }

    fn count(&mut self, t: &Table, section: &str, key: &str, min: i64) -> Option<usize> {
        match t.get(key)? {
            Value::Integer(v) if *v >= min => Some(*v as usize),
            Value::Integer(v) => {
                self.push(DiagnosticKind::Range, section, Some(key), format!("{v} out of range (must be >= {min})"));
                None
            }
            other => {
                self.push(
                    DiagnosticKind::WrongType,
                    section,
                    Some(key),
                    format!("expected an integer, found {}", other.type_str()),
                );
                None
            }
        }
    }

    fn boolean(&mut self, t: &Table, section: &str, key: &str) -> Option<bool> {
        match t.get(key)? {
            Value::Boolean(b) => Some(*b),
            other => {
                self.push(
                    DiagnosticKind::WrongType,
                    section,
                    Some(key),
                    format!("expected a boolean, found {}", other.type_str()),
                );
                None
            }
        }
    }

    fn string(&mut self, t: &Table, section: &str, key: &str) -> Option<String> {
        match t.get(key)? {
            Value::String(s) => Some(s.clone()),
            other => {
                self.push(
                    DiagnosticKind::WrongType,
                    section,
                    Some(key),
                    format!("expected a string, found {}", other.type_str()),
                );
                None
            }
        }
    }

    fn choice<E: Copy>(&mut self, t: &Table, section: &str, key: &str, options: &[(&str, E)]) -> Option<E> {
        let s = self.string(t, section, key)?;
        let found = options.iter().find(|(name, _)| *name == s).map(|(_, v)| *v);
        if found.is_none() {
            let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
            self.push(
                DiagnosticKind::InvalidValue,
                section,
                Some(key),
                format!("`{s}` is not one of {}", names.join(", ")),
            );
        }
        found
    }

    fn kind(&mut self, s: &str, section: &str, key: &str) -> Option<SchemeKind> {
        match s.parse::<SchemeKind>() {
            Ok(k) => Some(k),
            Err(_) => {
                let names: Vec<&str> = SchemeKind::ALL.iter().map(|k| k.id()).collect();
                self.push(
                    DiagnosticKind::InvalidValue,
                    section,
                    Some(key),
                    format!("unknown scheme kind `{s}` (known: {})", names.join(", ")),
                );
                None
            }
        }
    }

    fn kinds(&mut self, t: &Table, section: &str, key: &str) -> Option<Vec<SchemeKind>> {
        let Value::Array(items) = t.get(key)? else {
            self.push(DiagnosticKind::WrongType, section, Some(key), "expected an array of scheme kinds".into());
            return None;
        };
        let mut out = Vec::new();
        for item in items {
            match item {
                Value::String(s) => out.push(self.kind(s, section, key)?),
                other => {
                    self.push(
                        DiagnosticKind::WrongType,
                        section,
                        Some(key),
                        format!("expected a string, found {}", other.type_str()),
                    );
                    return None;
                }
            }
        }
        if out.is_empty() {
            self.push(DiagnosticKind::Range, section, Some(key), "needs at least one scheme kind".into());
            return None;
        }
        Some(out)
    }

    fn floats(&mut self, t: &Table, section: &str, key: &str) -> Option<Vec<f64>> {
        let Value::Array(items) = t.get(key)? else {
            self.push(DiagnosticKind::WrongType, section, Some(key), "expected an array of numbers".into());
            return None;
        };
        let mut out = Vec::new();
        for item in items {
            match item {
                Value::Float(v) => out.push(*v),
                Value::Integer(v) => out.push(*v as f64),
                other => {
                    self.push(
                        DiagnosticKind::WrongType,
                        section,
                        Some(key),
                        format!("expected a number, found {}", other.type_str()),
                    );
                    return None;
                }
            }
        }
        Some(out)
    }
}

fn empty() -> Table {
    Table::new()
}

/// Parses and validates a config.
///
/// Defaults: `σ = 0.5`, `tol = 1e-10`, `τ = T/100`, unit lengths, problem
/// `m1` with `ν = c = k = 1` and `ω = π`.
pub fn parse_config(text: &str) -> Result<Parsed, ConfigError> {
    let loc = Locator { text };
    let root: Table = match text.parse() {
        Ok(t) => t,
        Err(e) => {
            let e: toml::de::Error = e;
            let line = e.span().map(|s| loc.line_of_offset(s.start));
            return Err(ConfigError {
                diagnostics: vec![Diagnostic {
                    kind: DiagnosticKind::Syntax,
                    section: String::new(),
                    key: None,
                    line,
                    message: e.message().to_string(),
                }],
            });
        }
    };
    let mut r = Reader { loc: &loc, diags: Vec::new() };

    for (key, value) in &root {
        match (value, SECTIONS.iter().find(|(s, _)| s == key)) {
            (Value::Table(t), Some((name, keys))) => {
                for k in t.keys() {
                    if !keys.contains(&k.as_str()) {
                        r.push(
                            DiagnosticKind::UnknownKey,
                            name,
                            Some(k),
                            format!("expected one of {}", keys.join(", ")),
                        );
                    }
                }
            }
            (Value::Table(_), None) => {
                r.push(DiagnosticKind::UnknownSection, key, None, format!("`[{key}]` is not part of the schema"))
            }
            (_, Some(_)) => r.push(DiagnosticKind::WrongType, "", Some(key), format!("`{key}` must be a section")),
            (_, None) if !SECTIONS[0].1.contains(&key.as_str()) => r.push(
                DiagnosticKind::UnknownKey,
                "",
                Some(key),
                format!("expected one of {} or a section", SECTIONS[0].1.join(", ")),
            ),
            _ => {}
        }
    }
    let section = |name: &str| match root.get(name) {
        Some(Value::Table(t)) => t.clone(),
        _ => empty(),
    };

    let command = match r.string(&root, "", "command") {
        Some(s) => match s.parse::<Command>() {
            Ok(c) => Some(c),
            Err(msg) => {
                r.push(DiagnosticKind::InvalidValue, "", Some("command"), msg);
                None
            }
        },
        None => None,
    };
    if !root.contains_key("final_time") {
        r.push(DiagnosticKind::Missing, "", Some("final_time"), "the final time T is required".into());
    }
    let final_time = r.positive(&root, "", "final_time");

    let grid = section("grid");
    if !root.contains_key("grid") {
        r.push(DiagnosticKind::Missing, "grid", None, "a [grid] section with n1 and n2 is required".into());
    }
    let mut n = [None, None];
    for (slot, key) in n.iter_mut().zip(["n1", "n2"]) {
        if root.contains_key("grid") && !grid.contains_key(key) {
            r.push(DiagnosticKind::Missing, "grid", Some(key), format!("`{key}` is required"));
        }
        *slot = r.count(&grid, "grid", key, 2);
    }
    let l1 = if grid.contains_key("l1") { r.positive(&grid, "grid", "l1") } else { Some(1.0) };
    let l2 = if grid.contains_key("l2") { r.positive(&grid, "grid", "l2") } else { Some(1.0) };

    let problem_t = section("problem");
    let problem = match r.string(&problem_t, "problem", "id") {
        Some(s) => match s.parse::<ManufacturedId>() {
            Ok(id) => Some(id),
            Err(_) => {
                let names: Vec<&str> = ManufacturedId::ALL.iter().map(|m| m.id()).collect();
                r.push(
                    DiagnosticKind::InvalidValue,
                    "problem",
                    Some("id"),
                    format!("unknown problem `{s}` (known: {})", names.join(", ")),
                );
                None
            }
        },
        None => Some(ManufacturedId::M1),
    };
    let defaults = ManufacturedParams::<f64>::default();
    let omega = r.float(&problem_t, "problem", "omega").unwrap_or(defaults.omega);

    let coeff_t = section("coefficients");
    let nu = if coeff_t.contains_key("nu") { r.positive(&coeff_t, "coefficients", "nu") } else { Some(defaults.nu) };
    let capacity = if coeff_t.contains_key("capacity") {
        r.positive(&coeff_t, "coefficients", "capacity")
    } else {
        Some(defaults.capacity)
    };
    let conductivity = if coeff_t.contains_key("conductivity") {
        r.positive(&coeff_t, "coefficients", "conductivity")
    } else {
        Some(defaults.conductivity)
    };
    let mut warnings = Vec::new();
    if problem == Some(ManufacturedId::M2) && coeff_t.contains_key("conductivity") {
        warnings.push(Diagnostic {
            kind: DiagnosticKind::InvalidValue,
            section: "coefficients".into(),
            key: Some("conductivity".into()),
            line: loc.key_line("coefficients", "conductivity"),
            message: "ignored: problem m2 prescribes k = 1 + x1/2".into(),
        });
    }

    let scheme_t = section("scheme");
    if !root.contains_key("scheme") {
        r.push(DiagnosticKind::Missing, "scheme", None, "a [scheme] section with a kind is required".into());
    } else if !scheme_t.contains_key("kind") {
        r.push(DiagnosticKind::Missing, "scheme", Some("kind"), "`kind` is required".into());
    }
    let p = r.count(&scheme_t, "scheme", "p", 2);
    if let Some(p) = p {
        if p > 3 {
            r.push(DiagnosticKind::Range, "scheme", Some("p"), format!("{p} out of range (must be 2 or 3)"));
        }
    }
    let kind = match r.string(&scheme_t, "scheme", "kind") {
        Some(s) if s == "split-componentwise" => match p {
            Some(2) => Some(SchemeKind::SplitComponentwiseP2),
            Some(3) => Some(SchemeKind::SplitComponentwiseP3),
            _ => {
                r.push(
                    DiagnosticKind::Missing,
                    "scheme",
                    Some("p"),
                    "`split-componentwise` needs p = 2 or p = 3".into(),
                );
                None
            }
        },
        Some(s) => {
            let k = r.kind(&s, "scheme", "kind");
            if let (Some(k), Some(p)) = (k, p) {
                if k.decomposition() != Some(p) {
                    r.push(
                        DiagnosticKind::InvalidValue,
                        "scheme",
                        Some("p"),
                        format!("p = {p} does not match scheme `{k}`"),
                    );
                }
            }
            k
        }
        None => None,
    };
    let sigma = match r.float(&scheme_t, "scheme", "sigma") {
        Some(v) if !(v >= 0.0) || !v.is_finite() => {
            r.push(DiagnosticKind::Range, "scheme", Some("sigma"), format!("{v} out of range (must be >= 0)"));
            None
        }
        Some(v) => Some(v),
        None => Some(DEFAULT_SIGMA),
    };
    let tau = if scheme_t.contains_key("tau") {
        r.positive(&scheme_t, "scheme", "tau")
    } else {
        final_time.map(|t| t / DEFAULT_STEPS as f64)
    };
    let tol = match r.float(&scheme_t, "scheme", "tol") {
        Some(v) if !(v > 0.0 && v < 1.0) => {
            r.push(DiagnosticKind::Range, "scheme", Some("tol"), format!("{v} out of range (must be in (0, 1))"));
            None
        }
        Some(v) => Some(v),
        None => Some(DEFAULT_TOL),
    };
    let start = r
        .choice(&scheme_t, "scheme", "start", &[("second", StartOrder::Second), ("first", StartOrder::First)])
        .unwrap_or_default();
    let source_split = r
        .choice(&scheme_t, "scheme", "source_split", &[("even", SourceSplit::Even), ("first", SourceSplit::First)])
        .unwrap_or_default();
    let reduced_operator = r
        .choice(
            &scheme_t,
            "scheme",
            "reduced_operator",
            &[("conductivity", ReducedOperator::Conductivity), ("unit", ReducedOperator::Unit)],
        )
        .unwrap_or_default();
    let regularizer = r
        .choice(
            &scheme_t,
            "scheme",
            "regularizer",
            &[("unit", Regularizer::Unit), ("conductivity", Regularizer::Conductivity)],
        )
        .unwrap_or_default();
    let override_stability = r.boolean(&scheme_t, "scheme", "override_stability").unwrap_or(false);

    let output_t = section("output");
    let output_dir = r.string(&output_t, "output", "dir").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out"));
    let snapshot = r.boolean(&output_t, "output", "snapshot").unwrap_or(true);

    let converge_t = section("converge");
    let levels = r.count(&converge_t, "converge", "levels", 2).unwrap_or(4);
    let refine = r
        .choice(&converge_t, "converge", "refine", &[("space-time", Refinement::SpaceTime), ("time", Refinement::Time)])
        .unwrap_or(Refinement::SpaceTime);

    let scan_t = section("scan");
    let ratios = r.floats(&scan_t, "scan", "ratios").unwrap_or_else(|| vec![0.9, 0.98, 1.02, 1.1]);
    if let Some(bad) = ratios.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        r.push(DiagnosticKind::Range, "scan", Some("ratios"), format!("{bad} out of range (ratios must be > 0)"));
    }
    if ratios.is_empty() {
        r.push(DiagnosticKind::Range, "scan", Some("ratios"), "needs at least one ratio".into());
    }
    let scan_steps = r.count(&scan_t, "scan", "steps", 2).unwrap_or(50);

    let bench_t = section("bench");
    let bench_kinds =
        r.kinds(&bench_t, "bench", "kinds").unwrap_or_else(|| vec![SchemeKind::LodQ, SchemeKind::StaggeredRegularized]);
    let bench_steps = r.count(&bench_t, "bench", "steps", 1).unwrap_or(20);

    let equiv_t = section("equivalence");
    let equiv_kinds = r
        .kinds(&equiv_t, "equivalence", "kinds")
        .unwrap_or_else(|| SchemeKind::ALL.into_iter().filter(|k| k.family() == SchemeFamily::Staggered).collect());
    if equiv_t.contains_key("kinds") {
        for k in &equiv_kinds {
            if k.family() != SchemeFamily::Staggered {
                r.push(
                    DiagnosticKind::InvalidValue,
                    "equivalence",
                    Some("kinds"),
                    format!("`{k}` is not a staggered kind"),
                );
            }
        }
    }

    let (
        Some(final_time),
        [Some(n1), Some(n2)],
        Some(l1),
        Some(l2),
        Some(problem),
        Some(nu),
        Some(capacity),
        Some(conductivity),
        Some(kind),
        Some(sigma),
        Some(tau),
        Some(tol),
    ) = (final_time, n, l1, l2, problem, nu, capacity, conductivity, kind, sigma, tau, tol)
    else {
        return Err(ConfigError { diagnostics: r.diags });
    };
    if !r.diags.is_empty() {
        return Err(ConfigError { diagnostics: r.diags });
    }

    let config = ExperimentConfig {
        command: command.unwrap_or(Command::Run),
        command_declared: command.is_some(),
        grid: GridSpec::new(l1, l2, n1, n2),
        problem,
        params: ManufacturedParams { nu, omega, capacity, conductivity, final_time },
        scheme: SchemeSettings { kind, sigma, tau, tol, start, source_split, reduced_operator, regularizer },
        override_stability,
        output_dir,
        snapshot,
        converge: ConvergeSettings { levels, refine },
        scan: ScanSettings { ratios, steps: scan_steps },
        bench: BenchSettings { kinds: bench_kinds, steps: bench_steps },
        equivalence: EquivalenceSettings { kinds: equiv_kinds },
    };
    match config.stability_warnings() {
        Ok(ws) => warnings.extend(ws.into_iter().map(|message| Diagnostic {
            kind: DiagnosticKind::Stability,
            section: "scheme".into(),
            key: None,
            line: loc.section_line("scheme"),
            message,
        })),
        Err(e) => {
            return Err(ConfigError {
                diagnostics: vec![Diagnostic {
                    kind: DiagnosticKind::InvalidValue,
                    section: String::new(),
                    key: None,
                    line: None,
                    message: e.to_string(),
                }],
            })
        }
    }
    Ok(Parsed { config, warnings })
}
