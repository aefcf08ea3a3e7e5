//! Line-oriented scenario configuration.
//!
//! ```text
//! # comment
//! scenario = jarzynski
//! seed = 42
//! output = out/jarzynski
//!
//! [jarzynski]
//! dim = 4
//! beta = 1.0
//! ```
//!
//! Top-level keys, `scenario` included, come before the first section. Each
//! section is named after a scenario and holds that scenario's parameters.
//! Lists are comma separated and complex numbers are written `re:im`.
//! Comments occupy whole lines.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use num_complex::Complex64;

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_OUTPUT: &str = "measuretherm-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ScenarioKind {
    Scheme,
    Decohere,
    Poisson,
    Jarzynski,
    JarzynskiReadings,
    Regression,
    Landauer,
    FullPipeline,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 8] = [
        ScenarioKind::Scheme,
        ScenarioKind::Decohere,
        ScenarioKind::Poisson,
        ScenarioKind::Jarzynski,
        ScenarioKind::JarzynskiReadings,
        ScenarioKind::Regression,
        ScenarioKind::Landauer,
        ScenarioKind::FullPipeline,
    ];

    /// Scenarios run by `full_pipeline`, in output order.
    pub const COMPONENTS: [ScenarioKind; 7] = [
        ScenarioKind::Scheme,
        ScenarioKind::Decohere,
        ScenarioKind::Poisson,
        ScenarioKind::Jarzynski,
        ScenarioKind::JarzynskiReadings,
        ScenarioKind::Regression,
        ScenarioKind::Landauer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Scheme => "scheme",
            ScenarioKind::Decohere => "decohere",
            ScenarioKind::Poisson => "poisson",
            ScenarioKind::Jarzynski => "jarzynski",
            ScenarioKind::JarzynskiReadings => "jarzynski_readings",
            ScenarioKind::Regression => "regression",
            ScenarioKind::Landauer => "landauer",
            ScenarioKind::FullPipeline => "full_pipeline",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|k| k.name() == name)
    }

    pub fn description(self) -> &'static str {
        match self {
            ScenarioKind::Scheme => "four-step measurement scheme with Born-rule outcome statistics",
            ScenarioKind::Decohere => "superselection-sector averaging and Gaussian decay of coherences",
            ScenarioKind::Poisson => "enlarged Poisson ensemble for a single measurement occurrence",
            ScenarioKind::Jarzynski => "two-energy-measurement work statistics and the Jarzynski equality",
            ScenarioKind::JarzynskiReadings => "Jarzynski equality with scheduled event readings",
            ScenarioKind::Regression => "infinite-regression least-squares feasibility check",
            ScenarioKind::Landauer => "Landauer identity and Klein bound on a block memory",
            ScenarioKind::FullPipeline => "every scenario above plus the entropy-transfer ledgers",
        }
    }

    /// Sections a config for this scenario may contain.
    pub fn sections(self) -> Vec<ScenarioKind> {
        match self {
            ScenarioKind::FullPipeline => Self::COMPONENTS.to_vec(),
            other => vec![other],
        }
    }

    pub fn schema(self) -> &'static [ParamSpec] {
        match self {
            ScenarioKind::Scheme => SCHEME,
            ScenarioKind::Decohere => DECOHERE,
            ScenarioKind::Poisson => POISSON,
            ScenarioKind::Jarzynski => JARZYNSKI,
            ScenarioKind::JarzynskiReadings => JARZYNSKI_READINGS,
            ScenarioKind::Regression => REGRESSION,
            ScenarioKind::Landauer => LANDAUER,
            ScenarioKind::FullPipeline => &[],
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamKind {
    Int { min: i64, max: i64 },
    /// Real in `[min, max]`, or `(min, max]` when `open_min`.
    Real { min: f64, max: f64, open_min: bool },
    Reals { min_len: usize },
    Ints { min_len: usize, min: i64 },
    Complexes { min_len: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamSpec {
    pub key: &'static str,
    pub kind: ParamKind,
    pub default: &'static str,
}

const fn int(key: &'static str, min: i64, max: i64, default: &'static str) -> ParamSpec {
    ParamSpec { key, kind: ParamKind::Int { min, max }, default }
}

const fn positive(key: &'static str, max: f64, default: &'static str) -> ParamSpec {
    ParamSpec { key, kind: ParamKind::Real { min: 0.0, max, open_min: true }, default }
}

const fn real(key: &'static str, min: f64, max: f64, default: &'static str) -> ParamSpec {
    ParamSpec { key, kind: ParamKind::Real { min, max, open_min: false }, default }
}

const fn reals(key: &'static str, default: &'static str) -> ParamSpec {
    ParamSpec { key, kind: ParamKind::Reals { min_len: 1 }, default }
}

const fn ints(key: &'static str, min: i64, default: &'static str) -> ParamSpec {
    ParamSpec { key, kind: ParamKind::Ints { min_len: 1, min }, default }
}

const fn complexes(key: &'static str, default: &'static str) -> ParamSpec {
    ParamSpec { key, kind: ParamKind::Complexes { min_len: 1 }, default }
}

const SCHEME: &[ParamSpec] = &[
    complexes("coefficients", "0.6:0,0.8:0"),
    reals("eigenvalues", "0,1"),
    int("apparatus_dim", 1, 16, "1"),
    int("runs", 1, 10_000_000, "10000"),
];

const DECOHERE: &[ParamSpec] = &[
    complexes("coefficients", "0.6:0,0:0.8"),
    reals("eigenvalues", "0.5,-0.5"),
    positive("sigma_p", 1e6, "1"),
    positive("half_width", 50.0, "10"),
    int("grid_points", 3, 1_000_001, "4001"),
    positive("t_max", 1e6, "5"),
    int("time_points", 2, 100_000, "50"),
    positive("asymptotic_scale", 1e6, "20"),
];

const POISSON: &[ParamSpec] = &[
    complexes("coefficients", "0.6:0,0.8:0"),
    reals("energies", "0,1"),
    int("members", 1, 100_000_000, "10000"),
    positive("delta_tau", 1e6, "1"),
    positive("tau_max", 1e6, "3"),
    int("grid_points", 2, 100_000, "31"),
    positive("survival_tolerance", 1.0, "0.03"),
];

const JARZYNSKI: &[ParamSpec] = &[
    int("dim", 1, 64, "4"),
    positive("beta", 1e3, "1"),
    int("steps", 1, 100_000, "100"),
    positive("total_time", 1e6, "2"),
    int("trials", 0, 100_000_000, "2000"),
    real("renewal_fraction", 0.0, 1.0, "0.5"),
];

const JARZYNSKI_READINGS: &[ParamSpec] = &[
    ints("blocks", 1, "2,2"),
    positive("beta", 1e3, "1"),
    int("steps", 1, 100_000, "60"),
    positive("step", 1e6, "0.1"),
    ints("readings", 0, "10,30,45"),
];

const REGRESSION: &[ParamSpec] = &[
    complexes("coefficients", "1:0,0:0"),
    reals("chi", "0.5,0.5"),
    int("target", 0, 1_000_000, "0"),
];

const LANDAUER: &[ParamSpec] = &[
    ints("block_dims", 1, "2,1"),
    ints("block_ranks", 1, "1,1"),
    reals("probabilities", "0.5,0.5"),
    real("beta", 0.0, 1e3, "1"),
];

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Real(f64),
    Reals(Vec<f64>),
    Ints(Vec<i64>),
    Complexes(Vec<Complex64>),
}

fn real_text(x: f64) -> String {
    // Debug formatting is the shortest representation that round-trips
    format!("{x:?}")
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let joined = |items: Vec<String>| items.join(",");
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Real(v) => f.write_str(&real_text(*v)),
            Value::Reals(v) => f.write_str(&joined(v.iter().map(|x| real_text(*x)).collect())),
            Value::Ints(v) => f.write_str(&joined(v.iter().map(|x| x.to_string()).collect())),
            Value::Complexes(v) => f.write_str(&joined(
                v.iter().map(|c| format!("{}:{}", real_text(c.re), real_text(c.im))).collect(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub field: Option<String>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        Self { line: Some(line), field: None, message: message.into() }
    }

    fn field(line: Option<usize>, field: &str, message: impl Into<String>) -> Self {
        Self { line, field: Some(field.to_string()), message: message.into() }
    }

    pub fn general(message: impl Into<String>) -> Self {
        Self { line: None, field: None, message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(line) = self.line {
            write!(f, "line {line}: ")?;
        }
        if let Some(field) = &self.field {
            write!(f, "field `{field}`: ")?;
        }
        f.write_str(&self.message)
    }
}

/// Fully defaulted parameters of one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    scenario: ScenarioKind,
    values: BTreeMap<&'static str, Value>,
}

impl Parameters {
    pub fn defaults(scenario: ScenarioKind) -> Self {
        let values = scenario
            .schema()
            .iter()
            .map(|spec| {
                let value = parse_value(spec, spec.default, None).expect("built-in defaults are valid");
                (spec.key, value)
            })
            .collect();
        Self { scenario, values }
    }

    pub fn scenario(&self) -> ScenarioKind {
        self.scenario
    }

    /// Sets `key` from its textual form, checking type and range.
    pub fn set(&mut self, key: &str, text: &str) -> Result<(), ConfigError> {
        self.set_at(key, text, None)
    }

    fn set_at(&mut self, key: &str, text: &str, line: Option<usize>) -> Result<(), ConfigError> {
        let spec = self.scenario.schema().iter().find(|s| s.key == key).ok_or_else(|| {
            ConfigError::field(line, key, format!("unknown key for scenario {}", self.scenario))
        })?;
        let value = parse_value(spec, text, line)?;
        self.values.insert(spec.key, value);
        Ok(())
    }

    fn get(&self, key: &str) -> &Value {
        self.values
            .get(key)
            .unwrap_or_else(|| panic!("parameter {key} is not in the {} schema", self.scenario))
    }

    pub fn int(&self, key: &str) -> i64 {
        match self.get(key) {
            Value::Int(v) => *v,
            other => panic!("parameter {key} is {other:?}, not an integer"),
        }
    }

    pub fn usize(&self, key: &str) -> usize {
        usize::try_from(self.int(key)).expect("schema minimum is nonnegative")
    }

    pub fn real(&self, key: &str) -> f64 {
        match self.get(key) {
            Value::Real(v) => *v,
            other => panic!("parameter {key} is {other:?}, not a real"),
        }
    }

    pub fn reals(&self, key: &str) -> &[f64] {
        match self.get(key) {
            Value::Reals(v) => v,
            other => panic!("parameter {key} is {other:?}, not a real list"),
        }
    }

    pub fn usizes(&self, key: &str) -> Vec<usize> {
        match self.get(key) {
            Value::Ints(v) => v.iter().map(|x| usize::try_from(*x).expect("schema minimum is nonnegative")).collect(),
            other => panic!("parameter {key} is {other:?}, not an integer list"),
        }
    }

    pub fn complexes(&self, key: &str) -> &[Complex64] {
        match self.get(key) {
            Value::Complexes(v) => v,
            other => panic!("parameter {key} is {other:?}, not a complex list"),
        }
    }

    /// `(key, value)` pairs in schema order.
    pub fn entries(&self) -> Vec<(&'static str, &Value)> {
        self.scenario.schema().iter().map(|s| (s.key, self.get(s.key))).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    pub seed: u64,
    pub output_path: PathBuf,
    sections: BTreeMap<ScenarioKind, Parameters>,
}

impl ScenarioConfig {
    pub fn defaults(scenario: ScenarioKind) -> Self {
        Self {
            scenario,
            seed: DEFAULT_SEED,
            output_path: PathBuf::from(DEFAULT_OUTPUT),
            sections: scenario.sections().into_iter().map(|k| (k, Parameters::defaults(k))).collect(),
        }
    }

    pub fn parameters(&self, scenario: ScenarioKind) -> &Parameters {
        self.sections
            .get(&scenario)
            .unwrap_or_else(|| panic!("scenario {} has no [{scenario}] section", self.scenario))
    }

    pub fn parameters_mut(&mut self, scenario: ScenarioKind) -> Option<&mut Parameters> {
        self.sections.get_mut(&scenario)
    }

    /// Config for a single component of this one, sharing seed and output.
    pub fn component(&self, scenario: ScenarioKind) -> ScenarioConfig {
        let mut sections = BTreeMap::new();
        sections.insert(scenario, self.parameters(scenario).clone());
        ScenarioConfig {
            scenario,
            seed: self.seed,
            output_path: self.output_path.join(scenario.name()),
            sections,
        }
    }

    /// Canonical text form; parsing it gives back an equal config.
    pub fn serialize(&self) -> String {
        let mut out = format!(
            "scenario = {}\nseed = {}\noutput = {}\n",
            self.scenario,
            self.seed,
            self.output_path.display()
        );
        for section in self.scenario.sections() {
            out.push_str(&format!("\n[{section}]\n"));
            for (key, value) in self.parameters(section).entries() {
                out.push_str(&format!("{key} = {value}\n"));
            }
        }
        out
    }
}

/// Parses a config document, filling every unspecified parameter with its
/// default.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut scenario: Option<ScenarioKind> = None;
    let mut seed: Option<u64> = None;
    let mut output: Option<PathBuf> = None;
    let mut entries: Vec<(usize, ScenarioKind, String, String)> = Vec::new();
    let mut current: Option<ScenarioKind> = None;
    let mut seen_top = std::collections::BTreeSet::new();
    let mut seen_section = std::collections::BTreeSet::new();

    for (index, raw) in text.lines().enumerate() {
        let line_no = index + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::at(line_no, "section header must end with `]`"))?
                .trim();
            let kind = ScenarioKind::from_name(name)
                .ok_or_else(|| ConfigError::at(line_no, format!("unknown scenario section [{name}]")))?;
            if !seen_section.insert(kind) {
                return Err(ConfigError::at(line_no, format!("duplicate section [{name}]")));
            }
            let selected = scenario.ok_or_else(|| ConfigError::at(line_no, "`scenario` must be set before any section"))?;
            if !selected.sections().contains(&kind) {
                return Err(ConfigError::at(line_no, format!("section [{name}] is not used by scenario {selected}")));
            }
            current = Some(kind);
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| ConfigError::at(line_no, "expected `key = value`"))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(ConfigError::at(line_no, "empty key"));
        }
        match current {
            Some(section) => {
                if entries.iter().any(|(_, s, k, _)| *s == section && k == key) {
                    return Err(ConfigError::field(Some(line_no), key, "duplicate key"));
                }
                entries.push((line_no, section, key.to_string(), value.to_string()));
            }
            None => {
                if !seen_top.insert(key.to_string()) {
                    return Err(ConfigError::field(Some(line_no), key, "duplicate key"));
                }
                match key {
                    "scenario" => {
                        scenario = Some(ScenarioKind::from_name(value).ok_or_else(|| {
                            ConfigError::field(Some(line_no), key, format!("unknown scenario `{value}`"))
                        })?)
                    }
                    "seed" => {
                        seed = Some(value.parse().map_err(|_| {
                            ConfigError::field(Some(line_no), key, format!("`{value}` is not a 64-bit unsigned integer"))
                        })?)
                    }
                    "output" => {
                        if value.is_empty() {
                            return Err(ConfigError::field(Some(line_no), key, "output path is empty"));
                        }
                        output = Some(PathBuf::from(value))
                    }
                    other => {
                        return Err(ConfigError::field(Some(line_no), other, "unknown top-level key"));
                    }
                }
            }
        }
    }

    let scenario = scenario.ok_or_else(|| ConfigError::field(None, "scenario", "missing required key"))?;
    let mut config = ScenarioConfig::defaults(scenario);
    if let Some(seed) = seed {
        config.seed = seed;
    }
    if let Some(output) = output {
        config.output_path = output;
    }
    for (line_no, section, key, value) in entries {
        let params = config.sections.get_mut(&section).expect("section checked against the scenario");
        params.set_at(&key, &value, Some(line_no))?;
    }
    Ok(config)
}

fn parse_real(spec: &ParamSpec, text: &str, line: Option<usize>) -> Result<f64, ConfigError> {
    let x: f64 = text
        .trim()
        .parse()
        .map_err(|_| ConfigError::field(line, spec.key, format!("`{}` is not a real number", text.trim())))?;
    if !x.is_finite() {
        return Err(ConfigError::field(line, spec.key, "value must be finite"));
    }
    Ok(x)
}

fn parse_int(spec: &ParamSpec, text: &str, line: Option<usize>) -> Result<i64, ConfigError> {
    text.trim()
        .parse()
        .map_err(|_| ConfigError::field(line, spec.key, format!("`{}` is not an integer", text.trim())))
}

fn parse_list<T>(
    spec: &ParamSpec,
    text: &str,
    line: Option<usize>,
    min_len: usize,
    item: impl Fn(&str) -> Result<T, ConfigError>,
) -> Result<Vec<T>, ConfigError> {
    let items = text.split(',').map(item).collect::<Result<Vec<_>, _>>()?;
    if items.len() < min_len {
        return Err(ConfigError::field(line, spec.key, format!("needs at least {min_len} entries")));
    }
    Ok(items)
}

fn parse_value(spec: &ParamSpec, text: &str, line: Option<usize>) -> Result<Value, ConfigError> {
    match spec.kind {
        ParamKind::Int { min, max } => {
            let v = parse_int(spec, text, line)?;
            if v < min || v > max {
                return Err(ConfigError::field(line, spec.key, format!("{v} is outside [{min}, {max}]")));
            }
            Ok(Value::Int(v))
        }
        ParamKind::Real { min, max, open_min } => {
            let v = parse_real(spec, text, line)?;
            let below = if open_min { v <= min } else { v < min };
            if below || v > max {
                let open = if open_min { "(" } else { "[" };
                return Err(ConfigError::field(line, spec.key, format!("{v} is outside {open}{min}, {max}]")));
            }
            Ok(Value::Real(v))
        }
        ParamKind::Reals { min_len } => {
            Ok(Value::Reals(parse_list(spec, text, line, min_len, |s| parse_real(spec, s, line))?))
        }
        ParamKind::Ints { min_len, min } => Ok(Value::Ints(parse_list(spec, text, line, min_len, |s| {
            let v = parse_int(spec, s, line)?;
            if v < min {
                return Err(ConfigError::field(line, spec.key, format!("entry {v} is below {min}")));
            }
            Ok(v)
        })?)),
        ParamKind::Complexes { min_len } => Ok(Value::Complexes(parse_list(spec, text, line, min_len, |s| {
            let (re, im) = s
                .split_once(':')
                .ok_or_else(|| ConfigError::field(line, spec.key, format!("`{}` is not of the form re:im", s.trim())))?;
            Ok(Complex64::new(parse_real(spec, re, line)?, parse_real(spec, im, line)?))
        })?)),
    }
}
