//! Run configuration: a TOML file with one key per line and bracketed
//! sections. Every error names the offending field and its line.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Deserialize;
use sha2::{Digest, Sha256};
use wienerlab_core::geometry::{Point, Scenario};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: field `{field}`: {message}")]
    Field { field: String, line: usize, message: String },
    #[error("{0}")]
    Syntax(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub output: PathBuf,
    /// Worker threads; the `--jobs` flag takes precedence.
    pub jobs: Option<usize>,
    pub domain: DomainSection,
    pub exponents: ExponentSection,
    #[serde(default)]
    pub phase: PhaseSection,
    #[serde(default)]
    pub solve: SolveSection,
    #[serde(default)]
    pub capacity: CapacitySection,
    #[serde(default)]
    pub checks: ChecksSection,
    #[serde(default)]
    pub invariants: InvariantsSection,
    #[serde(default)]
    pub decay: DecaySection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    /// `name` or `name(parameter)`, e.g. `exterior-cone(1.5708)`.
    pub scenario: String,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "one")]
    pub half_extent: f64,
    pub h: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentSection {
    pub p: f64,
    pub q: f64,
    #[serde(default = "one")]
    pub c1: f64,
    #[serde(default = "one")]
    pub c2: f64,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseShapeName {
    #[default]
    Zero,
    Constant,
    DistancePower,
    CheckerboardInTime,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSection {
    #[serde(default)]
    pub shape: PhaseShapeName,
    /// Constant value, distance-power coefficient or checkerboard value.
    #[serde(default = "one")]
    pub c: f64,
    #[serde(default = "one")]
    pub a0: f64,
    #[serde(default = "one")]
    pub r0: f64,
    #[serde(default = "default_period")]
    pub period: f64,
}

impl Default for PhaseSection {
    fn default() -> Self {
        Self { shape: PhaseShapeName::Zero, c: 1.0, a0: 1.0, r0: 1.0, period: default_period() }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DatumName {
    #[default]
    SuiteWave,
    Holder,
    Constant,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveSection {
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_output_interval")]
    pub output_interval: f64,
    #[serde(default)]
    pub datum: DatumName,
    /// Hölder exponent of the `holder` datum (x1⁺)^α.
    #[serde(default = "default_datum_exponent")]
    pub datum_exponent: f64,
    /// Value of the `constant` datum.
    #[serde(default = "one")]
    pub datum_value: f64,
    /// Export every n-th stored level to snapshots.csv; 0 disables.
    #[serde(default)]
    pub snapshot_stride: usize,
}

impl Default for SolveSection {
    fn default() -> Self {
        Self {
            t_end: default_t_end(),
            cfl: default_cfl(),
            output_interval: default_output_interval(),
            datum: DatumName::SuiteWave,
            datum_exponent: default_datum_exponent(),
            datum_value: 1.0,
            snapshot_stride: 0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacitySection {
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default)]
    pub center: Point,
    #[serde(default = "default_capacity_r0")]
    pub r0: f64,
    #[serde(default = "default_capacity_levels")]
    pub levels: usize,
    /// Capacity exponents; empty means p.
    #[serde(default)]
    pub exponents: Vec<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_divergence_floor")]
    pub divergence_floor: f64,
}

impl Default for CapacitySection {
    fn default() -> Self {
        Self {
            enabled: true,
            center: [0.0, 0.0],
            r0: default_capacity_r0(),
            levels: default_capacity_levels(),
            exponents: Vec::new(),
            tol: default_tol(),
            divergence_floor: default_divergence_floor(),
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, PartialOrd, Ord)]
#[serde(rename_all = "kebab-case")]
pub enum Verifier {
    Energy,
    CriticalMass,
    NegativePower,
    ReverseHolder,
    WeakHarnack,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksSection {
    #[serde(default)]
    pub verifiers: Vec<Verifier>,
    #[serde(default = "default_check_center")]
    pub center: Point,
    #[serde(default = "default_check_radius")]
    pub radius: f64,
    #[serde(default = "default_check_t0")]
    pub t0: f64,
    #[serde(default = "default_check_eta")]
    pub eta: f64,
    #[serde(default = "default_levels")]
    pub levels: Vec<f64>,
    #[serde(default = "default_sigmas")]
    pub sigma: Vec<f64>,
    #[serde(default = "default_ms")]
    pub m: Vec<f64>,
    /// Window length of the reverse Hölder check; at most radius².
    #[serde(default = "default_holder_eta")]
    pub holder_eta: f64,
    #[serde(default = "default_alphas")]
    pub alpha: Vec<f64>,
    #[serde(default = "default_shift")]
    pub shift: f64,
    #[serde(default = "one")]
    pub b: f64,
    /// Critical-mass ball radius and level.
    #[serde(default = "default_mass_radius")]
    pub mass_radius: f64,
    #[serde(default = "default_mass_level")]
    pub mass_level: f64,
    /// Slack of the Ψ-decay comparison.
    #[serde(default = "default_slack")]
    pub slack: f64,
    #[serde(default = "default_harnack_radius")]
    pub harnack_radius: f64,
    /// Ratio caps per check name (e.g. `energy-spacetime = 10`).
    #[serde(default)]
    pub caps: BTreeMap<String, f64>,
}

impl Default for ChecksSection {
    fn default() -> Self {
        Self {
            verifiers: Vec::new(),
            center: default_check_center(),
            radius: default_check_radius(),
            t0: default_check_t0(),
            eta: default_check_eta(),
            levels: default_levels(),
            sigma: default_sigmas(),
            m: default_ms(),
            holder_eta: default_holder_eta(),
            alpha: default_alphas(),
            shift: default_shift(),
            b: 1.0,
            mass_radius: default_mass_radius(),
            mass_level: default_mass_level(),
            slack: default_slack(),
            harnack_radius: default_harnack_radius(),
            caps: BTreeMap::new(),
        }
    }
}

/// Randomized comparison and maximum-principle runs driven by the seed.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvariantsSection {
    #[serde(default)]
    pub instances: usize,
    #[serde(default = "default_invariant_steps")]
    pub steps: usize,
}

impl Default for InvariantsSection {
    fn default() -> Self {
        Self { instances: 0, steps: default_invariant_steps() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecaySection {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default)]
    pub center: Point,
    /// Reference time; defaults to the end of the solve.
    pub t0: Option<f64>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "one")]
    pub gamma_star: f64,
    #[serde(default = "one")]
    pub c_p: f64,
    #[serde(default = "one")]
    pub c_q: f64,
    #[serde(default = "default_decay_levels")]
    pub levels: usize,
    #[serde(default = "one")]
    pub gamma_hat: f64,
    #[serde(default = "default_min_levels")]
    pub min_levels: usize,
}

impl Default for DecaySection {
    fn default() -> Self {
        Self {
            enabled: false,
            center: [0.0, 0.0],
            t0: None,
            epsilon: default_epsilon(),
            gamma_star: 1.0,
            c_p: 1.0,
            c_q: 1.0,
            levels: default_decay_levels(),
            gamma_hat: 1.0,
            min_levels: default_min_levels(),
        }
    }
}

fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn default_dim() -> usize {
    2
}
fn default_period() -> f64 {
    0.05
}
fn default_t_end() -> f64 {
    0.2
}
fn default_cfl() -> f64 {
    0.5
}
fn default_output_interval() -> f64 {
    0.002
}
fn default_datum_exponent() -> f64 {
    0.75
}
fn default_capacity_r0() -> f64 {
    0.2
}
fn default_capacity_levels() -> usize {
    4
}
fn default_tol() -> f64 {
    1e-10
}
fn default_divergence_floor() -> f64 {
    0.1
}
fn default_check_center() -> Point {
    [0.7, 0.0]
}
fn default_check_radius() -> f64 {
    0.15
}
fn default_check_t0() -> f64 {
    0.02
}
fn default_check_eta() -> f64 {
    0.05
}
fn default_levels() -> Vec<f64> {
    vec![0.4, 0.5, 0.6]
}
fn default_sigmas() -> Vec<f64> {
    vec![0.5, 0.25, 0.125]
}
fn default_ms() -> Vec<f64> {
    vec![0.5, 0.9, 0.99]
}
fn default_holder_eta() -> f64 {
    0.005
}
fn default_alphas() -> Vec<f64> {
    vec![0.5]
}
fn default_shift() -> f64 {
    0.05
}
fn default_mass_radius() -> f64 {
    0.1
}
fn default_mass_level() -> f64 {
    0.25
}
fn default_slack() -> f64 {
    0.1
}
fn default_harnack_radius() -> f64 {
    0.01875
}
fn default_invariant_steps() -> usize {
    100
}
fn default_epsilon() -> f64 {
    0.5
}
fn default_decay_levels() -> usize {
    6
}
fn default_min_levels() -> usize {
    4
}

/// 1-based line of `key` inside `[section]` (or the top level for ""),
/// falling back to the section header.
pub fn locate(text: &str, section: &str, key: &str) -> usize {
    let mut current = String::new();
    let mut header = 0;
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_string();
            if current == section {
                header = n + 1;
            }
            continue;
        }
        if current == section && line.split('=').next().is_some_and(|k| k.trim() == key) {
            return n + 1;
        }
    }
    header
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// The key on a `key = value` line, or the section name of a header line.
fn key_on_line(text: &str, line: usize) -> Option<String> {
    let l = text.lines().nth(line.checked_sub(1)?)?.trim();
    if let Some(name) = l.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
        return Some(name.trim().to_string());
    }
    l.split_once('=').map(|(k, _)| k.trim().to_string())
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let message = e.message().trim().to_string();
            match e.span() {
                Some(span) => {
                    let line = line_of_offset(text, span.start);
                    let field = quoted_field(&message).or_else(|| key_on_line(text, line)).unwrap_or_default();
                    ConfigError::Field { field, line, message }
                }
                None => ConfigError::Syntax(message),
            }
        })?;
        cfg.validate(text)?;
        Ok(cfg)
    }

    fn validate(&self, text: &str) -> Result<(), ConfigError> {
        let fail = |section: &str, key: &str, message: String| {
            let field = if section.is_empty() { key.to_string() } else { format!("{section}.{key}") };
            Err(ConfigError::Field { field, line: locate(text, section, key), message })
        };
        if let Err(e) = self.scenario() {
            return fail("domain", "scenario", e.to_string());
        }
        if !(1..=2).contains(&self.domain.dim) {
            return fail("domain", "dim", format!("{} not in {{1, 2}}", self.domain.dim));
        }
        if !(self.domain.h > 0.0) {
            return fail("domain", "h", format!("{} must be positive", self.domain.h));
        }
        let e = &self.exponents;
        if !(e.p > 2.0) {
            return fail("exponents", "p", format!("need 2 < p, got {}", e.p));
        }
        if !(e.q > e.p) {
            return fail("exponents", "q", format!("need p < q, got p = {}, q = {}", e.p, e.q));
        }
        if self.jobs == Some(0) {
            return fail("", "jobs", "must be at least 1".into());
        }
        let positive = [
            ("solve", "t_end", self.solve.t_end),
            ("solve", "output_interval", self.solve.output_interval),
            ("capacity", "r0", self.capacity.r0),
            ("capacity", "tol", self.capacity.tol),
            ("checks", "radius", self.checks.radius),
            ("checks", "eta", self.checks.eta),
            ("checks", "holder_eta", self.checks.holder_eta),
            ("checks", "slack", self.checks.slack),
            ("checks", "b", self.checks.b),
            ("decay", "gamma_hat", self.decay.gamma_hat),
        ];
        for (section, key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return fail(section, key, format!("{v} must be positive"));
            }
        }
        if let Some(s) = self.capacity.exponents.iter().find(|&&s| !(s > 1.0)) {
            return fail("capacity", "exponents", format!("{s} must exceed 1"));
        }
        if let Some((name, _)) = self.checks.caps.iter().find(|(_, &v)| !(v > 0.0)) {
            return fail("checks.caps", name, "caps must be positive".into());
        }
        Ok(())
    }

    pub fn scenario(&self) -> wienerlab_core::Result<Scenario> {
        self.domain.scenario.parse()
    }

    /// Capacity exponents, p when none are listed.
    pub fn capacity_exponents(&self) -> Vec<f64> {
        if self.capacity.exponents.is_empty() {
            vec![self.exponents.p]
        } else {
            self.capacity.exponents.clone()
        }
    }

    /// The solve is needed by any stage that reads the solution.
    pub fn needs_solve(&self) -> bool {
        !self.checks.verifiers.is_empty() || self.decay.enabled || self.solve.snapshot_stride > 0
    }
}

fn quoted_field(message: &str) -> Option<String> {
    let start = message.find('`')? + 1;
    let len = message[start..].find('`')?;
    Some(message[start..start + len].to_string())
}

/// Hex SHA-256 of the raw configuration text.
pub fn config_hash(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}
