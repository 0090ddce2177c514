//! Declarative scenarios: parsing and validation of the TOML document,
//! execution of the three experiment families, and deterministic CSV/JSON
//! emission.
//!
//! Validation walks every key by hand so that all problems are reported at
//! once and unknown keys are rejected rather than ignored.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;
use toml::{Table, Value};

use crate::gaussian::Wavepacket;
use crate::partition::{to_cm_relational, ParticleConfig, PartitionMap, ProductStateSuperposition, SlotLabel};
use crate::povm::{limit_sweep, SweepSetup, SWEEP_COLUMNS};
use crate::relational::{entanglement_entropy, g_twirl, log_negativity, pure_to_density, Bipartition};
use crate::zmodel::{extraction_report, CapacitorZModel};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_OMEGA: f64 = 50.0;
pub const DEFAULT_NEGATIVITY_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_ENERGY_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_PROBABILITY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario is not valid TOML: {0}")]
    Syntax(String),
    #[error("scenario failed validation:\n  - {}", .0.join("\n  - "))]
    Invalid(Vec<String>),
    #[error("scenario '{scenario}': {message}")]
    Numeric { scenario: String, message: String },
    #[error("cannot write {path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl ScenarioError {
    /// 2 for rejected input, 3 for numerical failures, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            ScenarioError::Syntax(_) | ScenarioError::Invalid(_) => 2,
            ScenarioError::Numeric { .. } => 3,
            ScenarioError::Io { .. } => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Twirl,
    ZmodelExtract,
    PovmSweep,
}

impl Experiment {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "twirl" => Some(Experiment::Twirl),
            "zmodel-extract" => Some(Experiment::ZmodelExtract),
            "povm-sweep" => Some(Experiment::PovmSweep),
            _ => None,
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Experiment::Twirl => "twirl",
            Experiment::ZmodelExtract => "zmodel-extract",
            Experiment::PovmSweep => "povm-sweep",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "csv" => Some(Format::Csv),
            "json" => Some(Format::Json),
            _ => None,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particles {
    pub masses: Vec<f64>,
    pub omega: f64,
    /// Zero-based index of the reference particle.
    pub reference: usize,
    pub branches: Vec<Vec<(Complex64, f64)>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZModelParams {
    pub charge: f64,
    pub charge_density: f64,
    pub plate_separation: f64,
    pub left_plate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorParams {
    pub energy_resolution: f64,
    pub charges: Vec<f64>,
    pub cm_widths: Vec<f64>,
    pub measured_branch: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub negativity: f64,
    pub energy: f64,
    pub probability: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            negativity: DEFAULT_NEGATIVITY_TOLERANCE,
            energy: DEFAULT_ENERGY_TOLERANCE,
            probability: DEFAULT_PROBABILITY_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OutputParams {
    pub directory: Option<PathBuf>,
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub experiment: Experiment,
    pub particles: Particles,
    pub zmodel: Option<ZModelParams>,
    pub detector: Option<DetectorParams>,
    pub tolerances: Tolerances,
    pub output: OutputParams,
}

/// Consumes keys from one table, recording every problem it meets.
struct Reader<'e> {
    section: String,
    table: Table,
    errors: &'e mut Vec<String>,
}

impl<'e> Reader<'e> {
    fn new(section: &str, table: Table, errors: &'e mut Vec<String>) -> Self {
        Self { section: section.to_string(), table, errors }
    }

    fn err(&mut self, key: &str, msg: impl fmt::Display) {
        self.errors.push(format!("[{}] {key}: {msg}", self.section));
    }

    fn has(&self, key: &str) -> bool {
        self.table.contains_key(key)
    }

    fn take(&mut self, key: &str) -> Option<Value> {
        self.table.remove(key)
    }

    fn required<T>(&mut self, key: &str, get: impl FnOnce(&mut Self, &str) -> Option<T>) -> Option<T> {
        if !self.has(key) {
            self.err(key, "missing required key");
            return None;
        }
        get(self, key)
    }

    fn string(&mut self, key: &str) -> Option<String> {
        match self.take(key)? {
            Value::String(s) => Some(s),
            other => {
                self.err(key, format!("expected a string, found {}", other.type_str()));
                None
            }
        }
    }

    fn number(&mut self, key: &str) -> Option<f64> {
        let v = self.take(key)?;
        let x = as_number(&v);
        if x.is_none() {
            self.err(key, format!("expected a finite number, found {}", v.type_str()));
        }
        x
    }

    fn positive(&mut self, key: &str) -> Option<f64> {
        let x = self.number(key)?;
        if x <= 0.0 {
            self.err(key, format!("must be positive, got {x}"));
            return None;
        }
        Some(x)
    }

    fn index(&mut self, key: &str) -> Option<usize> {
        match self.take(key)? {
            Value::Integer(i) if i >= 0 => Some(i as usize),
            other => {
                self.err(key, format!("expected a non-negative integer, found {other}"));
                None
            }
        }
    }

    fn numbers(&mut self, key: &str) -> Option<Vec<f64>> {
        let v = self.take(key)?;
        let list = v.as_array().and_then(|a| a.iter().map(as_number).collect::<Option<Vec<_>>>());
        if list.is_none() {
            self.err(key, "expected an array of finite numbers");
        }
        list
    }

    fn finish(self) {
        for key in self.table.keys() {
            self.errors.push(format!("[{}] {key}: unknown key", self.section));
        }
    }
}

fn as_number(v: &Value) -> Option<f64> {
    let x = match v {
        Value::Float(x) => *x,
        Value::Integer(i) => *i as f64,
        _ => return None,
    };
    x.is_finite().then_some(x)
}

fn take_section(root: &mut Table, name: &str, errors: &mut Vec<String>) -> Option<Table> {
    match root.remove(name)? {
        Value::Table(t) => Some(t),
        _ => {
            errors.push(format!("[{name}]: expected a table"));
            None
        }
    }
}

fn parse_branches(centers: Value, amplitudes: Option<Value>, errors: &mut Vec<String>) -> Option<Vec<Vec<(Complex64, f64)>>> {
    let Some(centers) = centers.as_array().and_then(|rows| {
        rows.iter()
            .map(|r| r.as_array().and_then(|r| r.iter().map(as_number).collect::<Option<Vec<_>>>()))
            .collect::<Option<Vec<_>>>()
    }) else {
        errors.push("[particles] centers: expected an array of arrays of finite numbers, one per particle".into());
        return None;
    };
    let mut ok = true;
    for (k, row) in centers.iter().enumerate() {
        if row.is_empty() {
            errors.push(format!("[particles] centers: particle {} has no branches", k + 1));
            ok = false;
        }
    }
    let amps: Vec<Vec<Complex64>> = match amplitudes {
        None => centers.iter().map(|r| vec![Complex64::new(1.0, 0.0); r.len()]).collect(),
        Some(v) => {
            let parsed = v.as_array().and_then(|rows| {
                rows.iter()
                    .map(|r| {
                        r.as_array().and_then(|r| {
                            r.iter()
                                .map(|z| match z.as_array().map(|p| p.iter().map(as_number).collect::<Vec<_>>()) {
                                    Some(p) if p.len() == 2 => Some(Complex64::new(p[0]?, p[1]?)),
                                    _ => as_number(z).map(|re| Complex64::new(re, 0.0)),
                                })
                                .collect::<Option<Vec<_>>>()
                        })
                    })
                    .collect::<Option<Vec<_>>>()
            });
            match parsed {
                Some(a) => a,
                None => {
                    errors.push(
                        "[particles] amplitudes: expected per-particle arrays of numbers or [re, im] pairs".into(),
                    );
                    return None;
                }
            }
        }
    };
    let shapes_match =
        amps.len() == centers.len() && amps.iter().zip(&centers).all(|(a, c)| a.len() == c.len());
    if !shapes_match {
        errors.push("[particles] amplitudes: shape must match centers".into());
        return None;
    }
    ok.then(|| amps.into_iter().zip(centers).map(|(a, c)| a.into_iter().zip(c).collect()).collect())
}

fn parse_particles(table: Table, experiment: Option<Experiment>, errors: &mut Vec<String>) -> Option<Particles> {
    let mut r = Reader::new("particles", table, errors);
    let count = r.index("count");
    let masses = r.numbers("masses");
    let omega_given = r.has("omega");
    let omega = if omega_given { r.positive("omega") } else { Some(DEFAULT_OMEGA) };
    if omega_given && experiment == Some(Experiment::PovmSweep) {
        r.err("omega", "not used by povm-sweep; CM widths come from [detector] cm_widths");
    }
    let reference = if r.has("reference_particle") { r.index("reference_particle") } else { Some(1) };
    let centers = r.take("centers");
    let amplitudes = r.take("amplitudes");
    if centers.is_none() {
        r.err("centers", "missing required key");
    }
    if amplitudes.is_some() && centers.is_none() {
        r.err("amplitudes", "given without centers");
    }
    r.finish();
    let branches = parse_branches(centers?, amplitudes, errors)?;
    let n = branches.len();
    let mut ok = true;
    if n == 0 {
        errors.push("[particles] centers: at least one particle is required".into());
        return None;
    }
    if let Some(c) = count {
        if c != n {
            errors.push(format!("[particles] count: {c} does not match {n} rows of centers"));
            ok = false;
        }
    }
    let masses = masses.unwrap_or_else(|| vec![1.0; n]);
    if masses.len() != n {
        errors.push(format!("[particles] masses: {} entries for {n} particles", masses.len()));
        ok = false;
    }
    if let Some(m) = masses.iter().find(|&&m| m <= 0.0) {
        errors.push(format!("[particles] masses: {m} is not positive"));
        ok = false;
    }
    let reference = match reference {
        Some(r) if (1..=n).contains(&r) => Some(r - 1),
        Some(r) => {
            errors.push(format!("[particles] reference_particle: {r} is not in 1..={n}"));
            None
        }
        None => None,
    };
    if experiment.is_some() && n < 2 {
        errors.push("[particles] centers: experiments need at least two particles".into());
        ok = false;
    }
    (ok).then_some(())?;
    Some(Particles { masses, omega: omega?, reference: reference?, branches })
}

fn parse_zmodel(table: Table, errors: &mut Vec<String>) -> Option<ZModelParams> {
    let mut r = Reader::new("zmodel", table, errors);
    let charge = r.required("charge", Reader::number);
    let charge_density = r.required("charge_density", Reader::number);
    let plate_separation = r.required("plate_separation_natural", Reader::positive);
    let left_plate = r.required("left_plate_natural", Reader::number);
    r.finish();
    Some(ZModelParams {
        charge: charge?,
        charge_density: charge_density?,
        plate_separation: plate_separation?,
        left_plate: left_plate?,
    })
}

fn monotone(x: &[f64]) -> bool {
    x.windows(2).all(|w| w[0] <= w[1]) || x.windows(2).all(|w| w[0] >= w[1])
}

fn parse_detector(table: Table, errors: &mut Vec<String>) -> Option<DetectorParams> {
    let mut r = Reader::new("detector", table, errors);
    let energy_resolution = r.required("energy_resolution", Reader::positive);
    let measured_branch = if r.has("measured_branch") { r.index("measured_branch") } else { Some(0) };
    let charges = match (r.has("charges"), r.has("charges_logspace")) {
        (true, true) => {
            r.err("charges", "give either charges or charges_logspace, not both");
            r.take("charges");
            r.take("charges_logspace");
            None
        }
        (false, false) => {
            r.err("charges", "missing required key (or charges_logspace)");
            None
        }
        (true, false) => r.numbers("charges"),
        (false, true) => r.numbers("charges_logspace").and_then(|v| {
            let count = v.get(2).copied().unwrap_or(0.0);
            if v.len() != 3 || count < 2.0 || count.fract() != 0.0 {
                r.err("charges_logspace", "expected [start_exponent, stop_exponent, count >= 2]");
                return None;
            }
            let n = count as usize;
            Some((0..n).map(|i| 10f64.powf(v[0] + (v[1] - v[0]) * i as f64 / (n - 1) as f64)).collect())
        }),
    };
    let cm_widths = r.required("cm_widths", Reader::numbers);
    for (key, grid) in [("charges", &charges), ("cm_widths", &cm_widths)] {
        if let Some(g) = grid {
            if g.is_empty() {
                r.err(key, "grid is empty");
            } else if !monotone(g) {
                r.err(key, "grid must be monotone");
            }
        }
    }
    if let Some(b) = cm_widths.as_ref().and_then(|g| g.iter().find(|&&b| b <= 0.0)) {
        let b = *b;
        r.err("cm_widths", format!("width {b} is not positive"));
    }
    r.finish();
    Some(DetectorParams {
        energy_resolution: energy_resolution?,
        charges: charges?,
        cm_widths: cm_widths?,
        measured_branch: measured_branch?,
    })
}

fn parse_tolerances(table: Option<Table>, errors: &mut Vec<String>) -> Tolerances {
    let mut t = Tolerances::default();
    let Some(table) = table else { return t };
    let mut r = Reader::new("tolerances", table, errors);
    if let Some(x) = r.positive("negativity") {
        t.negativity = x;
    }
    if let Some(x) = r.positive("energy") {
        t.energy = x;
    }
    if let Some(x) = r.positive("probability") {
        t.probability = x;
    }
    r.finish();
    t
}

fn parse_output(table: Option<Table>, errors: &mut Vec<String>) -> OutputParams {
    let mut out = OutputParams::default();
    let Some(table) = table else { return out };
    let mut r = Reader::new("output", table, errors);
    out.directory = r.string("directory").map(PathBuf::from);
    if let Some(f) = r.string("format") {
        match Format::parse(&f) {
            Some(f) => out.format = f,
            None => r.err("format", format!("'{f}' is not one of csv, json")),
        }
    }
    r.finish();
    out
}

fn valid_name(name: &str) -> bool {
    !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.')) && !name.starts_with('.')
}

/// Parse and validate a scenario document, reporting every error found.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let mut root: Table = text.parse().map_err(|e: toml::de::Error| ScenarioError::Syntax(e.to_string()))?;
    let mut errors = Vec::new();

    let (name, experiment) = match take_section(&mut root, "scenario", &mut errors) {
        None => {
            errors.push("[scenario]: missing required section".into());
            (None, None)
        }
        Some(t) => {
            let mut r = Reader::new("scenario", t, &mut errors);
            let name = r.required("name", Reader::string);
            if let Some(n) = &name {
                if !valid_name(n) {
                    let n = n.clone();
                    r.err("name", format!("'{n}' must be nonempty and use only letters, digits, '-', '_', '.'"));
                }
            }
            let experiment = r.required("experiment", Reader::string).and_then(|e| {
                let parsed = Experiment::parse(&e);
                if parsed.is_none() {
                    r.err("experiment", format!("'{e}' is not one of twirl, zmodel-extract, povm-sweep"));
                }
                parsed
            });
            r.finish();
            (name, experiment)
        }
    };

    let particles = match take_section(&mut root, "particles", &mut errors) {
        Some(t) => parse_particles(t, experiment, &mut errors),
        None => {
            errors.push("[particles]: missing required section".into());
            None
        }
    };

    let zmodel_table = take_section(&mut root, "zmodel", &mut errors);
    let detector_table = take_section(&mut root, "detector", &mut errors);
    let zmodel = match (experiment, zmodel_table) {
        (Some(Experiment::ZmodelExtract), Some(t)) => parse_zmodel(t, &mut errors),
        (Some(Experiment::ZmodelExtract), None) => {
            errors.push("[zmodel]: required for zmodel-extract".into());
            None
        }
        (Some(e), Some(_)) => {
            errors.push(format!("[zmodel]: not used by {e}"));
            None
        }
        (_, _) => None,
    };
    let detector = match (experiment, detector_table) {
        (Some(Experiment::PovmSweep), Some(t)) => parse_detector(t, &mut errors),
        (Some(Experiment::PovmSweep), None) => {
            errors.push("[detector]: required for povm-sweep".into());
            None
        }
        (Some(e), Some(_)) => {
            errors.push(format!("[detector]: not used by {e}"));
            None
        }
        (_, _) => None,
    };
    let tolerances = take_section(&mut root, "tolerances", &mut errors);
    let tolerances = parse_tolerances(tolerances, &mut errors);
    let output = take_section(&mut root, "output", &mut errors);
    let output = parse_output(output, &mut errors);
    for key in root.keys() {
        errors.push(format!("[{key}]: unknown section"));
    }

    if let (Some(p), Some(z)) = (&particles, &zmodel) {
        let hi = z.left_plate + z.plate_separation;
        for (k, branches) in p.branches.iter().enumerate() {
            for (j, &(_, x)) in branches.iter().enumerate() {
                if !(z.left_plate..=hi).contains(&x) {
                    errors.push(format!(
                        "[particles] centers: particle {} branch {} at x = {x} lies outside the capacitor [{}, {hi}]",
                        k + 1,
                        j + 1,
                        z.left_plate
                    ));
                }
            }
        }
    }
    if let (Some(p), Some(d)) = (&particles, &detector) {
        let terms: usize = p.branches.iter().map(Vec::len).product();
        if d.measured_branch >= terms {
            errors.push(format!(
                "[detector] measured_branch: {} but the state has {terms} branch terms",
                d.measured_branch
            ));
        }
    }

    if !errors.is_empty() {
        return Err(ScenarioError::Invalid(errors));
    }
    Ok(Scenario {
        name: name.expect("validated"),
        experiment: experiment.expect("validated"),
        particles: particles.expect("validated"),
        zmodel,
        detector,
        tolerances,
        output,
    })
}

/// A table cell. Non-finite numbers are stored as text so that JSON output
/// round-trips.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Number(f64),
    Text(String),
}

impl Cell {
    pub fn num(x: f64) -> Self {
        if x.is_finite() {
            Cell::Number(x)
        } else if x.is_nan() {
            Cell::Text("nan".into())
        } else if x > 0.0 {
            Cell::Text("inf".into())
        } else {
            Cell::Text("-inf".into())
        }
    }

    pub fn text(s: impl Into<String>) -> Self {
        Cell::Text(s.into())
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Number(x) => Some(*x),
            Cell::Text(t) => match t.as_str() {
                "nan" => Some(f64::NAN),
                "inf" => Some(f64::INFINITY),
                "-inf" => Some(f64::NEG_INFINITY),
                _ => None,
            },
        }
    }

    fn csv_field(&self) -> String {
        match self {
            Cell::Number(x) => format!("{x:.16e}"),
            Cell::Text(t) => t.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub library_version: String,
    pub tolerances: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub schema_version: u32,
    pub scenario: String,
    pub experiment: Experiment,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub provenance: Provenance,
    /// Tolerance checks that failed; a nonempty list maps to exit code 3.
    pub breaches: Vec<String>,
}

impl ResultRecord {
    pub fn column(&self, name: &str) -> Option<Vec<&Cell>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| &r[i]).collect())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("record serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Fixed column order; numbers with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::csv_field)).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }
}

/// Columns, rows and tolerance breaches of one experiment.
type Outputs = (Vec<String>, Vec<Vec<Cell>>, Vec<String>);

fn numeric(scenario: &Scenario, e: impl fmt::Display) -> ScenarioError {
    ScenarioError::Numeric { scenario: scenario.name.clone(), message: format!("{} run failed: {e}", scenario.experiment) }
}

fn cm_state(s: &Scenario, omega: f64) -> Result<ProductStateSuperposition, ScenarioError> {
    let p = &s.particles;
    let cfg = ParticleConfig::new(p.masses.clone(), omega, p.branches.clone()).map_err(|e| numeric(s, e))?;
    let map = PartitionMap::with_reference(&p.masses, p.reference).map_err(|e| numeric(s, e))?;
    let ext = cfg.external_state().map_err(|e| numeric(s, e))?;
    to_cm_relational(&ext, &map).map_err(|e| numeric(s, e))
}

fn cut_name(labels: &[SlotLabel], cut: &Bipartition) -> String {
    let side = |idx: &[usize]| idx.iter().map(|&i| labels[i].to_string()).collect::<Vec<_>>().join(",");
    format!("{} / {}", side(cut.side_a()), side(cut.side_b()))
}

fn run_twirl(s: &Scenario) -> Result<Outputs, ScenarioError> {
    let state = cm_state(s, s.particles.omega)?;
    let labels = state.labels().to_vec();
    let rho = pure_to_density(&state).map_err(|e| numeric(s, e))?;
    let mut rows = Vec::new();
    let mut breaches = Vec::new();
    let cuts = Bipartition::all_cuts(state.n_slots());
    for cut in &cuts {
        let name = cut_name(&labels, cut);
        let entropy = entanglement_entropy(&state, cut).map_err(|e| numeric(s, e))?;
        let neg = log_negativity(&rho, cut).map_err(|e| numeric(s, e))?;
        rows.push(vec![Cell::text("pre"), Cell::text(&name), Cell::text("entropy"), Cell::num(entropy)]);
        rows.push(vec![Cell::text("pre"), Cell::text(name), Cell::text("log_negativity"), Cell::num(neg)]);
    }
    let twirled = g_twirl(&rho).map_err(|e| numeric(s, e))?;
    rows.push(vec![Cell::text("post"), Cell::text("all"), Cell::text("entropy"), Cell::num(twirled.entropy())]);
    // Cuts of the twirled state include the CM slot, re-attached as a fixed
    // product factor.
    let cm = labels.iter().position(|&l| l == SlotLabel::CenterOfMass).expect("cm slot present");
    let w: Wavepacket = state.terms()[0].factors[cm].translated(-state.terms()[0].factors[cm].center());
    let post = twirled.attach_slot(cm, SlotLabel::CenterOfMass, w).map_err(|e| numeric(s, e))?;
    for cut in &cuts {
        let name = cut_name(&labels, cut);
        let neg = log_negativity(&post, cut).map_err(|e| numeric(s, e))?;
        if !(neg <= s.tolerances.negativity) {
            breaches.push(format!("post-twirl log_negativity {neg:e} across '{name}' exceeds {:e}", s.tolerances.negativity));
        }
        rows.push(vec![Cell::text("post"), Cell::text(name), Cell::text("log_negativity"), Cell::num(neg)]);
    }
    let columns = ["stage", "cut", "measure", "value"].map(String::from).to_vec();
    Ok((columns, rows, breaches))
}

fn run_zmodel(s: &Scenario) -> Result<Outputs, ScenarioError> {
    let zp = s.zmodel.expect("validated zmodel section");
    let z = CapacitorZModel::new(zp.charge, zp.charge_density, zp.plate_separation, zp.left_plate)
        .map_err(|e| numeric(s, e))?;
    let state = cm_state(s, s.particles.omega)?;
    let report = extraction_report(&state, &z).map_err(|e| numeric(s, e))?;
    let p = &s.particles;
    let ext = ParticleConfig::new(p.masses.clone(), p.omega, p.branches.clone())
        .and_then(|c| c.external_state())
        .map_err(|e| numeric(s, e))?;
    let external_energy = z.interaction_energy_pure(&ext, &p.masses).map_err(|e| numeric(s, e))?;

    let mut rows = vec![
        vec![Cell::text("initial_energy"), Cell::text("-"), Cell::num(report.initial_energy)],
        vec![Cell::text("initial_energy_external"), Cell::text("-"), Cell::num(external_energy)],
        vec![Cell::text("log_negativity"), Cell::text("-"), Cell::num(report.log_negativity)],
        vec![Cell::text("delta_mixture"), Cell::text("-"), Cell::num(report.delta_mixture)],
    ];
    for (k, (&e, &d)) in report.branch_energies.iter().zip(&report.delta_per_branch).enumerate() {
        rows.push(vec![Cell::text("branch_energy"), Cell::text(k.to_string()), Cell::num(e)]);
        rows.push(vec![Cell::text("delta_branch"), Cell::text(k.to_string()), Cell::num(d)]);
    }
    let mut breaches = Vec::new();
    let tol = s.tolerances.energy;
    if !(report.delta_mixture.abs() <= tol) {
        breaches.push(format!("mixture energy change {:e} exceeds {tol:e}", report.delta_mixture));
    }
    let gap = (external_energy - report.initial_energy).abs();
    if !(gap <= tol) {
        breaches.push(format!("energy differs between partitions by {gap:e}, above {tol:e}"));
    }
    Ok((["quantity", "branch", "value"].map(String::from).to_vec(), rows, breaches))
}

fn run_sweep(s: &Scenario) -> Result<Outputs, ScenarioError> {
    let d = s.detector.as_ref().expect("validated detector section");
    let setup = SweepSetup {
        masses: s.particles.masses.clone(),
        branches: s.particles.branches.clone(),
        reference: s.particles.reference,
        energy_resolution: d.energy_resolution,
        measured_branch: d.measured_branch,
    };
    let table = limit_sweep(&setup, &d.charges, &d.cm_widths).map_err(|e| numeric(s, e))?;
    let tol = s.tolerances.probability;
    let mut breaches = Vec::new();
    let rows = table
        .iter()
        .map(|r| {
            if !(r.p >= -tol && r.p <= 1.0 + tol) {
                breaches.push(format!("probability {} at q_sigma={} b={} is outside [0, 1]", r.p, r.q_sigma, r.b));
            }
            [r.q_sigma, r.b, r.delta_x, r.p, r.log_negativity, r.dist_to_twirl, r.dist_to_zmodel]
                .into_iter()
                .map(Cell::num)
                .collect()
        })
        .collect();
    Ok((SWEEP_COLUMNS.map(String::from).to_vec(), rows, breaches))
}

/// Execute a validated scenario. Wall time is logged, not recorded, so that
/// identical inputs give byte-identical records.
pub fn run(scenario: &Scenario) -> Result<ResultRecord, ScenarioError> {
    let started = std::time::Instant::now();
    let (columns, rows, breaches) = match scenario.experiment {
        Experiment::Twirl => run_twirl(scenario)?,
        Experiment::ZmodelExtract => run_zmodel(scenario)?,
        Experiment::PovmSweep => run_sweep(scenario)?,
    };
    log::info!("scenario '{}' ({}) finished in {:?}", scenario.name, scenario.experiment, started.elapsed());
    let t = scenario.tolerances;
    let tolerances = BTreeMap::from([
        ("energy".to_string(), t.energy),
        ("negativity".to_string(), t.negativity),
        ("probability".to_string(), t.probability),
    ]);
    Ok(ResultRecord {
        schema_version: SCHEMA_VERSION,
        scenario: scenario.name.clone(),
        experiment: scenario.experiment,
        columns,
        rows,
        provenance: Provenance { library_version: env!("CARGO_PKG_VERSION").to_string(), tolerances },
        breaches,
    })
}

/// Write `<dir>/<scenario>.<ext>` and return its path.
pub fn emit(record: &ResultRecord, format: Format, dir: &Path) -> Result<PathBuf, ScenarioError> {
    let io = |path: &Path, e: std::io::Error| ScenarioError::Io { path: path.to_path_buf(), message: e.to_string() };
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let path = dir.join(format!("{}.{}", record.scenario, format.extension()));
    std::fs::write(&path, record.render(format)).map_err(|e| io(&path, e))?;
    Ok(path)
}

/// Machine-readable description of the scenario document and the output
/// tables.
pub fn describe_schema() -> serde_json::Value {
    json!({
        "schema_version": SCHEMA_VERSION,
        "scenario": {
            "scenario": {
                "name": {"type": "string", "required": true},
                "experiment": {"type": "string", "required": true, "values": ["twirl", "zmodel-extract", "povm-sweep"]}
            },
            "particles": {
                "centers": {"type": "array<array<number>>", "required": true, "doc": "branch centers per particle"},
                "amplitudes": {"type": "array<array<number | [re, im]>>", "default": "all 1, normalized per particle"},
                "masses": {"type": "array<number>", "default": "all 1"},
                "count": {"type": "integer", "default": "rows of centers"},
                "omega": {"type": "number", "default": DEFAULT_OMEGA, "doc": "not accepted by povm-sweep"},
                "reference_particle": {"type": "integer", "default": 1, "doc": "one-based"}
            },
            "zmodel": {
                "required_for": "zmodel-extract",
                "charge": {"type": "number", "required": true},
                "charge_density": {"type": "number", "required": true},
                "plate_separation_natural": {"type": "number", "required": true},
                "left_plate_natural": {"type": "number", "required": true}
            },
            "detector": {
                "required_for": "povm-sweep",
                "energy_resolution": {"type": "number", "required": true},
                "charges": {"type": "array<number>", "doc": "monotone q*sigma grid; exclusive with charges_logspace"},
                "charges_logspace": {"type": "[start_exponent, stop_exponent, count]"},
                "cm_widths": {"type": "array<number>", "required": true, "doc": "monotone CM width grid"},
                "measured_branch": {"type": "integer", "default": 0, "doc": "zero-based branch term"}
            },
            "tolerances": {
                "negativity": {"type": "number", "default": DEFAULT_NEGATIVITY_TOLERANCE},
                "energy": {"type": "number", "default": DEFAULT_ENERGY_TOLERANCE},
                "probability": {"type": "number", "default": DEFAULT_PROBABILITY_TOLERANCE}
            },
            "output": {
                "directory": {"type": "string", "default": "RELGAUSS_OUT_DIR or ."},
                "format": {"type": "string", "default": "csv", "values": ["csv", "json"]}
            }
        },
        "outputs": {
            "twirl": ["stage", "cut", "measure", "value"],
            "zmodel-extract": ["quantity", "branch", "value"],
            "povm-sweep": SWEEP_COLUMNS,
        },
        "exit_codes": {"0": "success", "1": "I/O failure", "2": "invalid scenario", "3": "numerical failure or tolerance breach"}
    })
}
