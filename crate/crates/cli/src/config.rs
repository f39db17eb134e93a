//! Scenario configuration: a versioned JSON document listing scenarios.

use std::collections::{BTreeMap, HashSet};
use std::f64::consts::PI;
use std::fmt;

use rflab::geometry::{ConformalTorusMetric, HomogeneousMetric, MetricModel, ModelSpaceMetric};
use rflab::ToleranceConfig;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

/// A configuration problem, anchored to a line of the input where possible.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "line {l}, column {c}: {}", self.message),
            (Some(l), None) => write!(f, "line {l}: {}", self.message),
            _ => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckId {
    Entropy,
    Harnack,
    MuNu,
    Reduced,
    Theta,
    Asymptotics,
    Blowdown,
}

impl CheckId {
    pub const ALL: [CheckId; 7] =
        [CheckId::Entropy, CheckId::Harnack, CheckId::MuNu, CheckId::Reduced, CheckId::Theta, CheckId::Asymptotics, CheckId::Blowdown];

    pub fn name(self) -> &'static str {
        match self {
            CheckId::Entropy => "entropy",
            CheckId::Harnack => "harnack",
            CheckId::MuNu => "mu_nu",
            CheckId::Reduced => "reduced",
            CheckId::Theta => "theta",
            CheckId::Asymptotics => "asymptotics",
            CheckId::Blowdown => "blowdown",
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            CheckId::Entropy => "W+, N+, lambda-bar and scaled volume along the flow with monotonicity verdicts",
            CheckId::Harnack => "pointwise Harnack identity for a conjugate heat solution",
            CheckId::MuNu => "mu+ along the flow and nu+ at the ends",
            CheckId::Reduced => "reduced distance on a target set and its differential inequalities",
            CheckId::Theta => "forward reduced volume and its lower bound",
            CheckId::Asymptotics => "tail fits of W+, scaled volume and lambda-bar against their predicted limits",
            CheckId::Blowdown => "invariance of the scaled volume under parabolic blowdown",
        }
    }

    /// Verdict tolerance used when the configuration gives none.
    pub fn default_tolerance(self) -> f64 {
        match self {
            CheckId::Entropy => 1e-8,
            CheckId::Harnack => 1e-6,
            CheckId::MuNu => 1e-6,
            CheckId::Reduced => 1e-4,
            CheckId::Theta => 1e-5,
            CheckId::Asymptotics => 1e-3,
            CheckId::Blowdown => 1e-10,
        }
    }
}

/// One Fourier mode `amplitude·sin(2π(kx·x/Lx + ky·y/Ly) + phase)` of `φ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mode {
    pub amplitude: f64,
    #[serde(default)]
    pub kx: i32,
    #[serde(default)]
    pub ky: i32,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    /// Constant curvature `−1` space of volume `base_volume` scaled by `scale`.
    Hyperbolic {
        #[serde(default = "one")]
        scale: f64,
        #[serde(default = "one")]
        base_volume: f64,
    },
    ModelSpace { dimension: usize, sectional_sign: i8, scale: f64, base_volume: f64 },
    Heisenberg {
        #[serde(default = "unit_diag")]
        diag: [f64; 3],
    },
    RoundSphere,
    Homogeneous {
        structure_constants: [f64; 3],
        diag: [f64; 3],
        #[serde(default = "one")]
        frame_volume: f64,
    },
    Torus {
        grid: [usize; 2],
        #[serde(default = "unit_periods")]
        periods: [f64; 2],
        #[serde(default)]
        modes: Vec<Mode>,
    },
}

fn one() -> f64 {
    1.0
}

fn unit_diag() -> [f64; 3] {
    [1.0; 3]
}

fn unit_periods() -> [f64; 2] {
    [1.0; 2]
}

impl ModelSpec {
    pub fn build(&self) -> rflab::Result<MetricModel> {
        let m = match self {
            ModelSpec::Hyperbolic { scale, base_volume } => MetricModel::ModelSpace(ModelSpaceMetric::new(3, -1, *scale, *base_volume)?),
            ModelSpec::ModelSpace { dimension, sectional_sign, scale, base_volume } => {
                MetricModel::ModelSpace(ModelSpaceMetric::new(*dimension, *sectional_sign, *scale, *base_volume)?)
            }
            ModelSpec::Heisenberg { diag } => MetricModel::Homogeneous(HomogeneousMetric::heisenberg(*diag, 1.0)),
            ModelSpec::RoundSphere => MetricModel::Homogeneous(HomogeneousMetric::round_sphere()),
            ModelSpec::Homogeneous { structure_constants, diag, frame_volume } => {
                MetricModel::Homogeneous(HomogeneousMetric::new(*structure_constants, *diag, *frame_volume)?)
            }
            ModelSpec::Torus { grid, periods, modes } => {
                let [lx, ly] = *periods;
                MetricModel::ConformalTorus(ConformalTorusMetric::from_fn(*grid, *periods, |x, y| {
                    modes
                        .iter()
                        .map(|m| m.amplitude * (2.0 * PI * (m.kx as f64 * x / lx + m.ky as f64 * y / ly) + m.phase).sin())
                        .sum()
                })?)
            }
        };
        m.validate()?;
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default)]
    pub solver: Option<ToleranceConfig>,
    /// Per-check verdict tolerances keyed by check identifier.
    #[serde(default)]
    pub checks: BTreeMap<CheckId, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub model: ModelSpec,
    pub t_span: [f64; 2],
    pub checks: Vec<CheckId>,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Subdirectory of the output root; defaults to the name.
    #[serde(default)]
    pub output_dir: Option<String>,
    /// Vertex of the flow for `σ = t − birth`; defaults to the testbed's own.
    #[serde(default)]
    pub birth_time: Option<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub spacing: Spacing,
    /// Base point of the reduced geometry (torus coordinates).
    #[serde(default)]
    pub base: Option<[f64; 2]>,
    /// Path regularization for flows starting at an expander vertex.
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default = "default_alpha")]
    pub blowdown_alpha: f64,
}

fn default_samples() -> usize {
    21
}

fn default_alpha() -> f64 {
    4.0
}

impl Scenario {
    pub fn output_dir(&self) -> &str {
        self.output_dir.as_deref().unwrap_or(&self.name)
    }

    pub fn solver_tol(&self) -> ToleranceConfig {
        self.tolerances.solver.unwrap_or_default()
    }

    pub fn tolerance(&self, check: CheckId) -> f64 {
        self.tolerances.checks.get(&check).copied().unwrap_or(check.default_tolerance())
    }

    /// Sample times, all strictly inside the lifetime of `σ`.
    pub fn sample_times(&self) -> Vec<f64> {
        let [t0, t1] = self.t_span;
        let n = self.samples;
        match self.spacing {
            Spacing::Linear => (1..=n).map(|k| t0 + (t1 - t0) * k as f64 / n as f64).collect(),
            Spacing::Log => (0..n).map(|k| t0 * (t1 / t0).powf(k as f64 / (n - 1) as f64)).collect(),
        }
    }

    fn validate(&self) -> Result<(), String> {
        let [t0, t1] = self.t_span;
        if self.name.trim().is_empty() {
            return Err("scenario name must be nonempty".into());
        }
        if self.name.contains(['/', '\\']) || self.output_dir().contains("..") {
            return Err(format!("scenario `{}`: name and output_dir must not leave the output root", self.name));
        }
        if !(t0 >= 0.0 && t1 > t0 && t1.is_finite()) {
            return Err(format!("scenario `{}`: t_span must satisfy 0 ≤ t0 < t1", self.name));
        }
        if self.checks.is_empty() {
            return Err(format!("scenario `{}`: checks must be nonempty", self.name));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = self.checks.iter().find(|c| !seen.insert(**c)) {
            return Err(format!("scenario `{}`: check `{}` listed twice", self.name, dup.name()));
        }
        if self.samples < 3 {
            return Err(format!("scenario `{}`: samples must be at least 3", self.name));
        }
        if self.spacing == Spacing::Log && !(t0 > 0.0) {
            return Err(format!("scenario `{}`: log spacing needs t0 > 0", self.name));
        }
        if !(self.blowdown_alpha.is_finite() && self.blowdown_alpha >= 1.0) || !(self.epsilon >= 0.0) {
            return Err(format!("scenario `{}`: blowdown_alpha must be at least 1 and epsilon nonnegative", self.name));
        }
        for (check, tol) in &self.tolerances.checks {
            if !(tol.is_finite() && *tol >= 0.0) {
                return Err(format!("scenario `{}`: tolerance for `{}` must be finite and nonnegative", self.name, check.name()));
            }
        }
        if let Some(tol) = &self.tolerances.solver {
            tol.validate().map_err(|e| format!("scenario `{}`: {e}", self.name))?;
        }
        self.model.build().map_err(|e| format!("scenario `{}`: {e}", self.name))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub schema_version: u32,
    pub scenarios: Vec<Scenario>,
}

/// Line of the first occurrence of `"needle"` at or after byte `from`.
fn locate(text: &str, needle: &str, from: usize) -> Option<(usize, usize)> {
    let quoted = format!("\"{needle}\"");
    let at = from + text.get(from..)?.find(&quoted)?;
    Some((text[..at].matches('\n').count() + 1, at))
}

pub fn parse(text: &str) -> Result<Config, ConfigError> {
    let config: Config = serde_json::from_str(text)
        .map_err(|e| ConfigError { line: Some(e.line()), column: Some(e.column()), message: e.to_string() })?;
    if config.schema_version != SCHEMA_VERSION {
        return Err(ConfigError {
            line: locate(text, "schema_version", 0).map(|(l, _)| l),
            column: None,
            message: format!("unsupported schema_version {} (expected {SCHEMA_VERSION})", config.schema_version),
        });
    }
    if config.scenarios.is_empty() {
        return Err(ConfigError { line: locate(text, "scenarios", 0).map(|(l, _)| l), column: None, message: "no scenarios".into() });
    }
    let mut names = HashSet::new();
    let mut dirs = HashSet::new();
    let mut cursor = 0;
    for s in &config.scenarios {
        let anchor = locate(text, &s.name, cursor);
        if let Some((_, at)) = anchor {
            cursor = at + 1;
        }
        let fail = |message: String| ConfigError { line: anchor.map(|(l, _)| l), column: None, message };
        s.validate().map_err(fail)?;
        if !names.insert(s.name.as_str()) {
            return Err(fail(format!("duplicate scenario name `{}`", s.name)));
        }
        if !dirs.insert(s.output_dir()) {
            return Err(fail(format!("scenario `{}` reuses output directory `{}`", s.name, s.output_dir())));
        }
    }
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"{
  "schema_version": 1,
  "scenarios": [
    { "name": "a", "model": { "kind": "hyperbolic" }, "t_span": [0, 1], "checks": ["entropy"] },
    { "name": "b", "model": { "kind": "torus", "grid": [8, 8], "modes": [{ "amplitude": 0.2, "kx": 1 }] },
      "t_span": [0, 0.1], "checks": ["entropy", "reduced"], "tolerances": { "checks": { "reduced": 0.01 } } }
  ]
}"#;

    #[test]
    fn parses_and_applies_defaults() {
        let c = parse(GOOD).unwrap();
        assert_eq!(c.scenarios.len(), 2);
        assert_eq!(c.scenarios[0].samples, 21);
        assert_eq!(c.scenarios[1].tolerance(CheckId::Reduced), 0.01);
        assert_eq!(c.scenarios[1].tolerance(CheckId::Entropy), 1e-8);
        let times = c.scenarios[0].sample_times();
        assert_eq!(times.len(), 21);
        assert!(times[0] > 0.0 && (times[20] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn syntax_errors_carry_line_and_column() {
        let e = parse("{\n  \"schema_version\": 1,\n  \"scenarios\": [\n}").unwrap_err();
        assert_eq!(e.line, Some(4));
        assert!(e.column.is_some());
    }

    #[test]
    fn semantic_errors_point_at_the_scenario() {
        let bad = GOOD.replace("\"checks\": [\"entropy\"]", "\"checks\": []");
        let e = parse(&bad).unwrap_err();
        assert_eq!(e.line, Some(4));
        assert!(e.message.contains("checks must be nonempty"));

        let dup = GOOD.replace("\"name\": \"b\"", "\"name\": \"a\"");
        let e = parse(&dup).unwrap_err();
        assert_eq!(e.line, Some(5));
    }

    #[test]
    fn rejects_unknown_checks_and_versions() {
        assert!(parse(&GOOD.replace("\"reduced\"]", "\"bogus\"]")).is_err());
        let e = parse(&GOOD.replace("\"schema_version\": 1", "\"schema_version\": 2")).unwrap_err();
        assert_eq!(e.line, Some(2));
    }

    #[test]
    fn invalid_models_are_config_errors() {
        let bad = GOOD.replace("\"grid\": [8, 8]", "\"grid\": [4, 8]");
        assert!(parse(&bad).is_err());
    }
}
