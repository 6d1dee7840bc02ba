//! Run configuration: TOML text plus dotted-key overrides, validated before
//! any computation starts.
//!
//! ```toml
//! experiment = "survival"
//! temperatures = [0.0, 0.05]
//!
//! [quench]
//! kind = "hierarchy"      # or "expansion" with length_initial / length_final
//! length = 4.0
//! from_level = 1
//! to_level = 2
//! particles = 30
//!
//! [time]
//! t_max = 2.0             # in units of t_r
//! points = 2000
//! include_quarters = true
//! ```

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::overlap::{Truncation, DEFAULT_DEFECT_TOLERANCE};
use crate::work::{MomentTruncation, DEFAULT_CANDIDATE_CAP, DEFAULT_MAX_ORDER, DEFAULT_PROBABILITY_THRESHOLD, MAX_ORDER_LIMIT};

/// Highest hierarchy level accepted in a configuration.
pub const MAX_LEVEL: u32 = 8;
/// Largest N for a finite-temperature WPD without `allow_large`.
pub const FINITE_T_WPD_PARTICLES: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Survival,
    Wpd,
    WorkScan,
    Phases,
    BasisDump,
}

impl Experiment {
    pub const ALL: [Experiment; 5] =
        [Experiment::Survival, Experiment::Wpd, Experiment::WorkScan, Experiment::Phases, Experiment::BasisDump];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Survival => "survival",
            Experiment::Wpd => "wpd",
            Experiment::WorkScan => "work-scan",
            Experiment::Phases => "phases",
            Experiment::BasisDump => "basis-dump",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == name)
    }

    fn needs_quench(self) -> bool {
        matches!(self, Experiment::Survival | Experiment::Wpd | Experiment::Phases)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QuenchConfig {
    Hierarchy { length: f64, from_level: u32, to_level: u32, particles: usize, rows: Option<usize> },
    Expansion { length_initial: f64, length_final: f64, particles: usize, rows: Option<usize> },
}

impl QuenchConfig {
    pub fn particles(&self) -> usize {
        match self {
            QuenchConfig::Hierarchy { particles, .. } | QuenchConfig::Expansion { particles, .. } => *particles,
        }
    }

    pub fn rows(&self) -> Option<usize> {
        match self {
            QuenchConfig::Hierarchy { rows, .. } | QuenchConfig::Expansion { rows, .. } => *rows,
        }
    }

    /// Width of the final box.
    pub fn length(&self) -> f64 {
        match self {
            QuenchConfig::Hierarchy { length, .. } => *length,
            QuenchConfig::Expansion { length_final, .. } => *length_final,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeConfig {
    /// In units of t_r.
    pub t_max: f64,
    pub points: usize,
    pub include_quarters: bool,
    /// Explicit instants (units of t_r); used by `phases`, and by `survival`
    /// in place of the uniform grid when given.
    pub times: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WpdConfig {
    pub max_order: usize,
    pub max_order_initial: usize,
    pub threshold: f64,
    pub candidate_cap: u64,
    pub moment: MomentTruncation,
    /// Permit finite-temperature enumeration above [`FINITE_T_WPD_PARTICLES`].
    pub allow_large: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanConfig {
    pub alphas: Vec<u32>,
    pub particles_min: usize,
    pub particles_max: usize,
    pub length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BasisConfig {
    pub length: f64,
    pub alpha_max: u32,
    pub states: usize,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub cache: bool,
}

/// Validated configuration of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub quench: Option<QuenchConfig>,
    /// T / T_F values.
    pub temperatures: Vec<f64>,
    pub time: TimeConfig,
    pub truncation: Truncation,
    pub wpd: WpdConfig,
    pub scan: ScanConfig,
    pub basis: BasisConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: Option<String>,
    quench: Option<RawQuench>,
    temperatures: Option<Vec<f64>>,
    time: Option<RawTime>,
    truncation: Option<RawTruncation>,
    wpd: Option<RawWpd>,
    scan: Option<RawScan>,
    basis: Option<RawBasis>,
    output: Option<RawOutput>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawQuench {
    kind: Option<String>,
    length: Option<f64>,
    from_level: Option<u32>,
    to_level: Option<u32>,
    particles: Option<usize>,
    rows: Option<usize>,
    length_initial: Option<f64>,
    length_final: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTime {
    t_max: Option<f64>,
    points: Option<usize>,
    include_quarters: Option<bool>,
    times: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTruncation {
    mode: Option<String>,
    tolerance: Option<f64>,
    step: Option<usize>,
    cap: Option<usize>,
    columns: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWpd {
    max_order: Option<usize>,
    max_order_initial: Option<usize>,
    threshold: Option<f64>,
    candidate_cap: Option<u64>,
    moment_tolerance: Option<f64>,
    moment_cap: Option<usize>,
    allow_large: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScan {
    alphas: Option<Vec<u32>>,
    particles_min: Option<usize>,
    particles_max: Option<usize>,
    length: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBasis {
    length: Option<f64>,
    alpha_max: Option<u32>,
    states: Option<usize>,
    points: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
    cache: Option<bool>,
}

/// Parses and validates a configuration text.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    load_config(text, None, &[])
}

/// Parses `text`, applies `overrides` (dotted key, TOML value text) and the
/// experiment implied by a subcommand, then validates.
pub fn load_config(text: &str, experiment: Option<Experiment>, overrides: &[(String, String)]) -> Result<RunConfig> {
    // first pass on the text alone, so syntax errors and unknown keys carry positions
    toml::from_str::<RawConfig>(text).map_err(|e| Error::Config(located(text, &e)))?;
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(located(text, &e)))?;
    if let Some(exp) = experiment {
        if let Some(toml::Value::String(found)) = table.get("experiment") {
            if found != exp.name() {
                return Err(Error::Config(format!(
                    "config file sets experiment = \"{found}\" but the subcommand is `{}`",
                    exp.name()
                )));
            }
        }
        table.insert("experiment".into(), toml::Value::String(exp.name().into()));
    }
    for (key, value) in overrides {
        apply_override(&mut table, key, value)?;
    }
    let raw: RawConfig = table.try_into().map_err(|e: toml::de::Error| Error::Config(format!("override: {}", e.message())))?;
    validate(raw)
}

fn located(text: &str, e: &toml::de::Error) -> String {
    match e.span() {
        Some(span) => {
            let before = &text[..span.start.min(text.len())];
            let line = before.matches('\n').count() + 1;
            let column = before.rsplit('\n').next().map_or(0, |s| s.chars().count()) + 1;
            format!("line {line}, column {column}: {}", e.message().trim())
        }
        None => e.message().trim().to_string(),
    }
}

fn apply_override(table: &mut toml::Table, key: &str, value: &str) -> Result<()> {
    let parsed: toml::Value = match format!("v = {value}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(value.to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("malformed override key `{key}`")));
    }
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cur.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = match entry {
            toml::Value::Table(t) => t,
            _ => return Err(Error::Config(format!("override `{key}`: `{part}` is not a table"))),
        };
    }
    cur.insert(parts[parts.len() - 1].to_string(), parsed);
    Ok(())
}

fn validate(raw: RawConfig) -> Result<RunConfig> {
    let mut problems: Vec<String> = Vec::new();

    let experiment = match raw.experiment.as_deref() {
        None => {
            problems.push("`experiment` is required".into());
            None
        }
        Some(name) => {
            let e = Experiment::from_name(name);
            if e.is_none() {
                problems.push(format!(
                    "unknown experiment \"{name}\" (expected one of survival, wpd, work-scan, phases, basis-dump)"
                ));
            }
            e
        }
    };

    let quench_given = raw.quench.is_some();
    let quench = raw.quench.and_then(|q| validate_quench(q, &mut problems));
    if let Some(e) = experiment {
        if e.needs_quench() && !quench_given {
            problems.push(format!("experiment `{}` needs a [quench] table", e.name()));
        }
    }

    let temperatures = raw.temperatures.unwrap_or_else(|| vec![0.0]);
    if temperatures.is_empty() {
        problems.push("temperatures: list is empty".into());
    }
    for t in &temperatures {
        if !(t.is_finite() && *t >= 0.0) {
            problems.push(format!("temperatures: T/T_F must be >= 0, got {t}"));
        }
    }

    let rt = raw.time.unwrap_or_default();
    let time = TimeConfig {
        t_max: rt.t_max.unwrap_or(2.0),
        points: rt.points.unwrap_or(2000),
        include_quarters: rt.include_quarters.unwrap_or(true),
        times: rt.times,
    };
    if !(time.t_max.is_finite() && time.t_max > 0.0) {
        problems.push(format!("time.t_max must be > 0, got {}", time.t_max));
    }
    if time.points < 2 {
        problems.push(format!("time.points must be >= 2, got {}", time.points));
    }
    if let Some(ts) = &time.times {
        if ts.is_empty() {
            problems.push("time.times: list is empty".into());
        }
        if ts.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            problems.push("time.times: instants must be finite and >= 0".into());
        }
        if ts.windows(2).any(|w| w[0] >= w[1]) {
            problems.push("time.times: instants must be strictly increasing".into());
        }
    }

    let truncation = validate_truncation(raw.truncation.unwrap_or_default(), quench.as_ref(), &mut problems);

    let rw = raw.wpd.unwrap_or_default();
    let default_moment = MomentTruncation::default();
    let wpd = WpdConfig {
        max_order: rw.max_order.unwrap_or(DEFAULT_MAX_ORDER),
        max_order_initial: rw.max_order_initial.unwrap_or(DEFAULT_MAX_ORDER),
        threshold: rw.threshold.unwrap_or(DEFAULT_PROBABILITY_THRESHOLD),
        candidate_cap: rw.candidate_cap.unwrap_or(DEFAULT_CANDIDATE_CAP),
        moment: MomentTruncation {
            tolerance: rw.moment_tolerance.unwrap_or(default_moment.tolerance),
            step: default_moment.step,
            cap: rw.moment_cap.unwrap_or(default_moment.cap),
        },
        allow_large: rw.allow_large.unwrap_or(false),
    };
    for (name, v) in [("max_order", wpd.max_order), ("max_order_initial", wpd.max_order_initial)] {
        if v > MAX_ORDER_LIMIT {
            problems.push(format!("wpd.{name} must be <= {MAX_ORDER_LIMIT}, got {v}"));
        }
    }
    if !(wpd.threshold >= 0.0 && wpd.threshold < 1.0) {
        problems.push(format!("wpd.threshold must lie in [0, 1), got {}", wpd.threshold));
    }
    if wpd.candidate_cap == 0 {
        problems.push("wpd.candidate_cap must be positive".into());
    }
    if !(wpd.moment.tolerance > 0.0 && wpd.moment.tolerance < 1.0) {
        problems.push(format!("wpd.moment_tolerance must lie in (0, 1), got {}", wpd.moment.tolerance));
    }
    if experiment == Some(Experiment::Wpd) {
        if let Some(q) = &quench {
            let hot = temperatures.iter().any(|&t| t > 0.0);
            if hot && q.particles() > FINITE_T_WPD_PARTICLES && !wpd.allow_large {
                problems.push(format!(
                    "finite-temperature wpd with N = {} > {FINITE_T_WPD_PARTICLES} needs wpd.allow_large = true",
                    q.particles()
                ));
            }
        }
        if temperatures.iter().any(|&t| t > 0.1) {
            problems.push("wpd: temperatures above 0.1 T_F are outside the supported regime".into());
        }
    }

    let rs = raw.scan.unwrap_or_default();
    let scan = ScanConfig {
        alphas: rs.alphas.unwrap_or_else(|| vec![2, 3, 4]),
        particles_min: rs.particles_min.unwrap_or(1),
        particles_max: rs.particles_max.unwrap_or(50),
        length: rs.length.or(quench.map(|q| q.length())).unwrap_or(4.0),
    };
    if scan.alphas.is_empty() || scan.alphas.iter().any(|&a| !(1..=MAX_LEVEL).contains(&a)) {
        problems.push(format!("scan.alphas must be a non-empty list of levels in 1..={MAX_LEVEL}"));
    }
    if scan.particles_min < 1 || scan.particles_min > scan.particles_max {
        problems.push(format!(
            "scan: need 1 <= particles_min <= particles_max, got {}..{}",
            scan.particles_min, scan.particles_max
        ));
    }
    check_length("scan.length", scan.length, &mut problems);

    let rb = raw.basis.unwrap_or_default();
    let basis = BasisConfig {
        length: rb.length.or(quench.map(|q| q.length())).unwrap_or(4.0),
        alpha_max: rb.alpha_max.unwrap_or(4),
        states: rb.states.unwrap_or(5),
        points: rb.points.unwrap_or(401),
    };
    check_length("basis.length", basis.length, &mut problems);
    if basis.alpha_max < 1 || basis.alpha_max > MAX_LEVEL {
        problems.push(format!("basis.alpha_max must lie in 1..={MAX_LEVEL}, got {}", basis.alpha_max));
    }
    if basis.states < 1 {
        problems.push("basis.states must be >= 1".into());
    }
    if basis.points < 2 {
        problems.push("basis.points must be >= 2".into());
    }

    let ro = raw.output.unwrap_or_default();
    let output = OutputConfig { dir: ro.dir.unwrap_or_else(|| PathBuf::from("out")), cache: ro.cache.unwrap_or(true) };
    if output.dir.as_os_str().is_empty() {
        problems.push("output.dir must not be empty".into());
    }

    if !problems.is_empty() {
        let mut msg = format!("{} problem(s) in configuration:", problems.len());
        for p in &problems {
            msg.push_str("\n  - ");
            msg.push_str(p);
        }
        return Err(Error::Config(msg));
    }
    Ok(RunConfig {
        experiment: experiment.expect("validated"),
        quench,
        temperatures,
        time,
        truncation,
        wpd,
        scan,
        basis,
        output,
    })
}

fn check_length(name: &str, v: f64, problems: &mut Vec<String>) {
    if !(v.is_finite() && v > 0.0) {
        problems.push(format!("{name} must be > 0, got {v}"));
    }
}

fn validate_quench(q: RawQuench, problems: &mut Vec<String>) -> Option<QuenchConfig> {
    let before = problems.len();
    let particles = q.particles.unwrap_or(0);
    if q.particles.is_none() {
        problems.push("quench.particles is required".into());
    } else if particles == 0 {
        problems.push("quench.particles must be >= 1".into());
    }
    if let Some(k) = q.rows {
        if k < particles {
            problems.push(format!("quench.rows (K = {k}) must be >= particles (N = {particles})"));
        }
    }
    let kind = q.kind.as_deref().unwrap_or("hierarchy");
    let out = match kind {
        "hierarchy" => {
            for (name, present) in [("length_initial", q.length_initial.is_some()), ("length_final", q.length_final.is_some())] {
                if present {
                    problems.push(format!("quench.{name} applies only to kind = \"expansion\""));
                }
            }
            let length = q.length.unwrap_or(4.0);
            check_length("quench.length", length, problems);
            let from_level = q.from_level.unwrap_or(1);
            let to_level = match q.to_level {
                Some(t) => t,
                None => {
                    problems.push("quench.to_level is required".into());
                    0
                }
            };
            if !(1..=MAX_LEVEL).contains(&from_level) {
                problems.push(format!("quench.from_level must lie in 1..={MAX_LEVEL}, got {from_level}"));
            }
            if q.to_level.is_some() && !(1..=MAX_LEVEL).contains(&to_level) {
                problems.push(format!("quench.to_level must lie in 1..={MAX_LEVEL}, got {to_level}"));
            }
            if q.to_level.is_some() && from_level == to_level {
                problems.push(format!("trivial quench: from_level = to_level = {to_level}"));
            } else if q.to_level.is_some() && from_level > to_level {
                problems.push(format!("quench.from_level ({from_level}) must be below to_level ({to_level})"));
            }
            QuenchConfig::Hierarchy { length, from_level, to_level, particles, rows: q.rows }
        }
        "expansion" => {
            for (name, present) in
                [("length", q.length.is_some()), ("from_level", q.from_level.is_some()), ("to_level", q.to_level.is_some())]
            {
                if present {
                    problems.push(format!("quench.{name} applies only to kind = \"hierarchy\""));
                }
            }
            let (li, lf) = (q.length_initial.unwrap_or(f64::NAN), q.length_final.unwrap_or(4.0));
            if q.length_initial.is_none() {
                problems.push("quench.length_initial is required for an expansion".into());
            } else if !(li > 0.0 && li.is_finite() && lf.is_finite() && li <= lf) {
                problems.push(format!("expansion needs 0 < length_initial <= length_final, got {li} and {lf}"));
            } else if li == lf {
                problems.push(format!("trivial quench: length_initial = length_final = {lf}"));
            }
            QuenchConfig::Expansion { length_initial: li, length_final: lf, particles, rows: q.rows }
        }
        other => {
            problems.push(format!("quench.kind must be \"hierarchy\" or \"expansion\", got \"{other}\""));
            return None;
        }
    };
    (problems.len() == before).then_some(out)
}

fn validate_truncation(t: RawTruncation, quench: Option<&QuenchConfig>, problems: &mut Vec<String>) -> Truncation {
    let default = match Truncation::default() {
        Truncation::Adaptive { tolerance, step, cap } => (tolerance, step, cap),
        Truncation::Fixed { .. } => (DEFAULT_DEFECT_TOLERANCE, 40, 4000),
    };
    let mode = t.mode.as_deref().unwrap_or(if t.columns.is_some() { "fixed" } else { "adaptive" });
    match mode {
        "fixed" => {
            if t.tolerance.is_some() || t.step.is_some() || t.cap.is_some() {
                problems.push("truncation: tolerance/step/cap apply only to mode = \"adaptive\"".into());
            }
            let Some(columns) = t.columns else {
                problems.push("truncation.columns is required for mode = \"fixed\"".into());
                return Truncation::Fixed { columns: 0 };
            };
            if let Some(q) = quench {
                let rows = q.rows().unwrap_or(q.particles());
                if columns < rows {
                    problems.push(format!("truncation.columns (M = {columns}) must be >= rows (K = {rows})"));
                }
            }
            Truncation::Fixed { columns }
        }
        "adaptive" => {
            if t.columns.is_some() {
                problems.push("truncation.columns applies only to mode = \"fixed\"".into());
            }
            let tolerance = t.tolerance.unwrap_or(default.0);
            let step = t.step.unwrap_or(default.1);
            let cap = t.cap.unwrap_or(default.2);
            if !(tolerance > 0.0 && tolerance < 1.0) {
                problems.push(format!("truncation.tolerance must lie in (0, 1), got {tolerance}"));
            }
            if step == 0 || cap < step {
                problems.push(format!("truncation: need step >= 1 and cap >= step, got step {step}, cap {cap}"));
            }
            Truncation::Adaptive { tolerance, step, cap }
        }
        other => {
            problems.push(format!("truncation.mode must be \"adaptive\" or \"fixed\", got \"{other}\""));
            Truncation::default()
        }
    }
}
