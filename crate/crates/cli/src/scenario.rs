//! Scenario files: TOML with `[model]`, `[schedule]`, `[tolerances]`, `[outputs]` and an
//! optional `[capture]` section. Every key is optional; a `preset` key selects the base
//! scenario that the file then overrides key by key.

use crate::presets;
use lindscat_core::model::{Boundary, FieldPreset};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::Range;

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioError {
    /// 1-based line in the scenario text, when the offending key could be located.
    pub line: Option<usize>,
    /// Dotted field path such as `tolerances.limit`.
    pub field: Option<String>,
    pub message: String,
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, &self.field) {
            (Some(l), Some(k)) => write!(f, "line {l}, field `{k}`: {}", self.message),
            (Some(l), None) => write!(f, "line {l}: {}", self.message),
            (None, Some(k)) => write!(f, "field `{k}`: {}", self.message),
            (None, None) => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ScenarioError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpinAxis {
    X,
    Y,
    Z,
}

/// Coupling families; `amplitude`-like parameters live in the field preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum CouplingSpec {
    None,
    /// `C = g(X)·X`.
    Position {
        field: FieldPreset,
    },
    /// `C = g(X) ⊗ S_axis`, spin `(internal_dim − 1)/2`.
    Spin {
        field: FieldPreset,
        axis: SpinAxis,
    },
    /// `C = g(X)(αX + βP)f(P) + h.c.` with `f(p) = exp(−p²/(2w²))`.
    Mixed {
        field: FieldPreset,
        alpha: f64,
        beta: f64,
        momentum_width: f64,
    },
    /// `C = |b⟩⟨g ⊗ 0|`: level-0 amplitude with site profile `g` jumps into the lowest
    /// eigenvector `b` of `H_V` within `target_level`.
    Capture {
        field: FieldPreset,
        target_level: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZeemanSpec {
    pub field: FieldPreset,
    pub beta: f64,
    pub axis: SpinAxis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub sites: usize,
    pub spacing: f64,
    pub boundary: Boundary,
    pub internal_dim: usize,
    /// `H_int = diag(0, gap, 2·gap, …)`.
    pub internal_gap: f64,
    pub potential: Option<FieldPreset>,
    pub zeeman: Option<ZeemanSpec>,
    pub coupling: CouplingSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Linear,
    Geometric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSpec {
    /// `None` means the transit bound `0.6·n·h`.
    pub t_max: Option<f64>,
    pub checkpoints: usize,
    pub spacing: Spacing,
    /// First checkpoint of a geometric schedule.
    pub t_first: f64,
    pub recurrence_guard: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Cauchy-residual tolerance of the plateau detector.
    pub limit: f64,
    /// Hilbert-space identity residuals (inverse pairs, intertwining).
    pub residual: f64,
    /// Superoperator identity residuals.
    pub lindblad: f64,
    /// `|Im λ| ≤ real` classifies an eigenvalue as real.
    pub real: f64,
    /// Time-integral truncation for smoothness constants; `None` means the schedule's `t_max`.
    pub smoothness_t: Option<f64>,
    pub smoothness_dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outputs {
    pub report: bool,
    pub timeseries: bool,
    pub sweep: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Packet {
    pub x0: f64,
    pub sigma: f64,
    pub k0: f64,
    #[serde(default)]
    pub level: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptureSpec {
    /// Multipliers applied to the configured coupling.
    pub amplitudes: Vec<f64>,
    pub eps: f64,
    /// Empty means the default family: `x₀ = −L/4`, `σ = L/12`, `k₀ ∈ {0.8, 1.6}`, level 0.
    pub packets: Vec<Packet>,
    /// Decay window for the `ℋ_d` cut; `None` means the schedule's `t_max`.
    pub window: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub preset: Option<String>,
    pub seed: u64,
    pub model: ModelSpec,
    pub schedule: ScheduleSpec,
    pub tolerances: Tolerances,
    pub outputs: Outputs,
    pub capture: Option<CaptureSpec>,
}

impl Scenario {
    /// Defaults for a bare file: 8-site scalar lattice, no potential, no coupling.
    pub fn base() -> Self {
        Self {
            name: "scenario".into(),
            preset: None,
            seed: 0,
            model: ModelSpec {
                sites: 8,
                spacing: 1.0,
                boundary: Boundary::Dirichlet,
                internal_dim: 1,
                internal_gap: 0.0,
                potential: None,
                zeeman: None,
                coupling: CouplingSpec::None,
            },
            schedule: ScheduleSpec { t_max: None, checkpoints: 24, spacing: Spacing::Linear, t_first: 0.1, recurrence_guard: true },
            tolerances: Tolerances { limit: 1e-6, residual: 1e-5, lindblad: 1e-4, real: 1e-9, smoothness_t: None, smoothness_dt: 0.01 },
            outputs: Outputs { report: true, timeseries: false, sweep: false },
            capture: None,
        }
    }

    pub fn t_max(&self) -> f64 {
        self.schedule.t_max.unwrap_or(0.6 * self.model.sites as f64 * self.model.spacing)
    }

    pub fn smoothness_t(&self) -> f64 {
        self.tolerances.smoothness_t.unwrap_or_else(|| self.t_max())
    }

    pub fn dim(&self) -> usize {
        self.model.sites * self.model.internal_dim
    }
}

// File layer: every key optional, unknown keys rejected.

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct File {
    name: Option<String>,
    preset: Option<String>,
    seed: Option<u64>,
    model: Option<ModelFile>,
    schedule: Option<ScheduleFile>,
    tolerances: Option<TolerancesFile>,
    outputs: Option<OutputsFile>,
    capture: Option<CaptureFile>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    sites: Option<usize>,
    spacing: Option<f64>,
    boundary: Option<Boundary>,
    internal_dim: Option<usize>,
    internal_gap: Option<f64>,
    potential: Option<PotentialFile>,
    zeeman: Option<ZeemanSpec>,
    coupling: Option<CouplingSpec>,
}

/// `potential = "none"` clears a preset's potential.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum PotentialFile {
    Keyword(String),
    Field(FieldPreset),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleFile {
    t_max: Option<f64>,
    checkpoints: Option<usize>,
    spacing: Option<Spacing>,
    t_first: Option<f64>,
    recurrence_guard: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TolerancesFile {
    limit: Option<f64>,
    residual: Option<f64>,
    lindblad: Option<f64>,
    real: Option<f64>,
    smoothness_t: Option<f64>,
    smoothness_dt: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputsFile {
    report: Option<bool>,
    timeseries: Option<bool>,
    sweep: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaptureFile {
    amplitudes: Option<Vec<f64>>,
    eps: Option<f64>,
    packets: Option<Vec<Packet>>,
    window: Option<f64>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `key = …` inside `[section]` (top level when `section` is empty).
fn locate(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix('[') {
            current = rest.trim_end_matches(']').trim().to_string();
            continue;
        }
        if current == section {
            if let Some((lhs, _)) = line.split_once('=') {
                if lhs.trim() == key {
                    return Some(k + 1);
                }
            }
        }
    }
    None
}

/// Innermost key whose span encloses `range`, as a dotted path.
fn field_at(text: &str, range: &Range<usize>) -> Option<String> {
    let line = line_of(text, range.start);
    let mut section = String::new();
    for (k, raw) in text.lines().enumerate() {
        let t = raw.trim();
        if let Some(rest) = t.strip_prefix('[') {
            section = rest.trim_end_matches(']').trim().to_string();
        }
        if k + 1 == line {
            let key = t.split_once('=').map(|(l, _)| l.trim().to_string());
            return match key {
                Some(key) if section.is_empty() => Some(key),
                Some(key) => Some(format!("{section}.{key}")),
                None if !section.is_empty() => Some(section),
                None => None,
            };
        }
    }
    None
}

fn invalid(text: &str, section: &str, key: &str, message: impl Into<String>) -> ScenarioError {
    let field = if section.is_empty() { key.to_string() } else { format!("{section}.{key}") };
    ScenarioError { line: locate(text, section, key), field: Some(field), message: message.into() }
}

/// Parse and validate a scenario, expanding `preset` and filling defaults.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let file: File = toml::from_str(text).map_err(|e| {
        let span = e.span();
        ScenarioError {
            line: span.as_ref().map(|s| line_of(text, s.start)),
            field: span.as_ref().and_then(|s| field_at(text, s)),
            message: e.message().trim().to_string(),
        }
    })?;
    let mut s = match &file.preset {
        Some(p) => presets::expand(p)
            .ok_or_else(|| invalid(text, "", "preset", format!("unknown preset `{p}`; known presets: {}", presets::NAMES.join(", "))))?,
        None => Scenario::base(),
    };
    if let Some(v) = file.name {
        s.name = v;
    }
    if let Some(v) = file.seed {
        s.seed = v;
    }
    if let Some(m) = file.model {
        let t = &mut s.model;
        set(&mut t.sites, m.sites);
        set(&mut t.spacing, m.spacing);
        set(&mut t.boundary, m.boundary);
        set(&mut t.internal_dim, m.internal_dim);
        set(&mut t.internal_gap, m.internal_gap);
        match m.potential {
            Some(PotentialFile::Keyword(k)) if k == "none" => t.potential = None,
            Some(PotentialFile::Keyword(k)) => {
                return Err(invalid(text, "model", "potential", format!("expected a field table or \"none\", got \"{k}\"")))
            }
            Some(PotentialFile::Field(f)) => t.potential = Some(f),
            None => {}
        }
        if m.zeeman.is_some() {
            t.zeeman = m.zeeman;
        }
        set(&mut t.coupling, m.coupling);
    }
    if let Some(m) = file.schedule {
        let t = &mut s.schedule;
        if m.t_max.is_some() {
            t.t_max = m.t_max;
        }
        set(&mut t.checkpoints, m.checkpoints);
        set(&mut t.spacing, m.spacing);
        set(&mut t.t_first, m.t_first);
        set(&mut t.recurrence_guard, m.recurrence_guard);
    }
    if let Some(m) = file.tolerances {
        let t = &mut s.tolerances;
        set(&mut t.limit, m.limit);
        set(&mut t.residual, m.residual);
        set(&mut t.lindblad, m.lindblad);
        set(&mut t.real, m.real);
        if m.smoothness_t.is_some() {
            t.smoothness_t = m.smoothness_t;
        }
        set(&mut t.smoothness_dt, m.smoothness_dt);
    }
    if let Some(m) = file.outputs {
        set(&mut s.outputs.report, m.report);
        set(&mut s.outputs.timeseries, m.timeseries);
        set(&mut s.outputs.sweep, m.sweep);
    }
    if let Some(m) = file.capture {
        let mut c = s.capture.take().unwrap_or_else(presets::default_capture);
        set(&mut c.amplitudes, m.amplitudes);
        set(&mut c.eps, m.eps);
        set(&mut c.packets, m.packets);
        if m.window.is_some() {
            c.window = m.window;
        }
        s.capture = Some(c);
    }
    validate(&s, text)?;
    Ok(s)
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn positive(text: &str, section: &str, key: &str, v: f64) -> Result<(), ScenarioError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(text, section, key, format!("must be positive and finite, got {v}")))
    }
}

/// Range checks on the merged scenario. Errors point at the key in `text` when it is there.
pub fn validate(s: &Scenario, text: &str) -> Result<(), ScenarioError> {
    let m = &s.model;
    if m.sites < 3 {
        return Err(invalid(text, "model", "sites", format!("need at least 3 sites, got {}", m.sites)));
    }
    positive(text, "model", "spacing", m.spacing)?;
    if m.internal_dim == 0 {
        return Err(invalid(text, "model", "internal_dim", "must be at least 1"));
    }
    if !(m.internal_gap >= 0.0) {
        return Err(invalid(text, "model", "internal_gap", "must be non-negative (H_int is positive)"));
    }
    let needs_spin = matches!(m.coupling, CouplingSpec::Spin { .. }) || m.zeeman.is_some();
    if needs_spin && m.internal_dim < 2 {
        return Err(invalid(text, "model", "internal_dim", "spin couplings need internal_dim >= 2"));
    }
    if let CouplingSpec::Capture { target_level, .. } = m.coupling {
        if m.internal_dim < 2 || target_level == 0 || target_level >= m.internal_dim {
            return Err(invalid(text, "model", "coupling", "capture coupling needs internal_dim >= 2 and 0 < target_level < internal_dim"));
        }
    }
    let sd = &s.schedule;
    if let Some(t) = sd.t_max {
        positive(text, "schedule", "t_max", t)?;
    }
    if sd.checkpoints < 4 {
        return Err(invalid(text, "schedule", "checkpoints", format!("need at least 4 checkpoints, got {}", sd.checkpoints)));
    }
    positive(text, "schedule", "t_first", sd.t_first)?;
    if sd.spacing == Spacing::Geometric && sd.t_first >= s.t_max() {
        return Err(invalid(text, "schedule", "t_first", "must be below t_max"));
    }
    let t = &s.tolerances;
    for (k, v) in
        [("limit", t.limit), ("residual", t.residual), ("lindblad", t.lindblad), ("real", t.real), ("smoothness_dt", t.smoothness_dt)]
    {
        positive(text, "tolerances", k, v)?;
    }
    if let Some(v) = t.smoothness_t {
        positive(text, "tolerances", "smoothness_t", v)?;
    }
    if let Some(c) = &s.capture {
        if c.amplitudes.is_empty() {
            return Err(invalid(text, "capture", "amplitudes", "need at least one amplitude"));
        }
        if c.amplitudes.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(invalid(text, "capture", "amplitudes", "amplitudes must be finite and non-negative"));
        }
        positive(text, "capture", "eps", c.eps)?;
        if let Some(w) = c.window {
            positive(text, "capture", "window", w)?;
        }
        for p in &c.packets {
            if !(p.sigma > 0.0) || p.level >= m.internal_dim {
                return Err(invalid(text, "capture", "packets", "packets need sigma > 0 and level < internal_dim"));
            }
        }
    }
    if s.outputs.sweep && s.capture.is_none() {
        return Err(invalid(text, "outputs", "sweep", "sweep output needs a [capture] section"));
    }
    Ok(())
}

/// Canonical TOML rendering of an expanded scenario (used for golden files).
pub fn render(s: &Scenario) -> String {
    toml::to_string(s).expect("scenario is always representable as TOML")
}
