//! Strict run configuration. The text must be a JSON object; every key is
//! checked against the schema in `docs/config-schema.md` and unknown keys are
//! rejected with a nearest-name suggestion.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use noether_core::IntegratorKind;
use serde::Serialize;
use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("parse error: {0}")]
    ParseError(String),
    #[error("unknown key `{key}` in {context}{}", suggestion_text(.suggestion))]
    UnknownKey { key: String, context: String, suggestion: Option<String> },
    #[error("bad value for `{key}`: {reason}")]
    BadValue { key: String, reason: String },
}

fn suggestion_text(s: &Option<String>) -> String {
    s.as_ref().map(|s| format!(" (did you mean `{s}`?)")).unwrap_or_default()
}

pub type ConfigResult<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Consistency,
    Conservation,
    Converse,
    Algebra,
    Trajectory,
    Qfock,
    Qwave,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Consistency,
        Suite::Conservation,
        Suite::Converse,
        Suite::Algebra,
        Suite::Trajectory,
        Suite::Qfock,
        Suite::Qwave,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Consistency => "consistency",
            Suite::Conservation => "conservation",
            Suite::Converse => "converse",
            Suite::Algebra => "algebra",
            Suite::Trajectory => "trajectory",
            Suite::Qfock => "qfock",
            Suite::Qwave => "qwave",
        }
    }

    pub fn is_quantum(&self) -> bool {
        matches!(self, Suite::Qfock | Suite::Qwave)
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = ConfigError;

    fn from_str(s: &str) -> ConfigResult<Self> {
        Suite::ALL.iter().copied().find(|x| x.name() == s).ok_or_else(|| unknown(s, "suites", &suite_names()))
    }
}

fn suite_names() -> Vec<&'static str> {
    Suite::ALL.iter().map(Suite::name).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ModelConfig {
    ConstantForce { m: f64, force: Vec<f64> },
    FreeParticle { m: f64, d: usize },
    Harmonic { omega: Vec<f64>, t0: f64, hbar: f64 },
    LatticeScalar { n: usize, mu: f64, a: f64 },
}

pub const MODEL_NAMES: [&str; 4] = ["constant_force", "free_particle", "harmonic", "lattice_scalar"];

impl ModelConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ModelConfig::ConstantForce { .. } => "constant_force",
            ModelConfig::FreeParticle { .. } => "free_particle",
            ModelConfig::Harmonic { .. } => "harmonic",
            ModelConfig::LatticeScalar { .. } => "lattice_scalar",
        }
    }

    /// Builds a model from its name and a parameter object, filling defaults.
    pub fn from_params(name: &str, params: &Map<String, Value>) -> ConfigResult<Self> {
        let allowed: &[&str] = match name {
            "constant_force" => &["m", "F"],
            "free_particle" => &["m", "d"],
            "harmonic" => &["omega", "t0", "hbar"],
            "lattice_scalar" => &["n", "mu", "a"],
            other => return Err(unknown(other, "model", &MODEL_NAMES)),
        };
        check_keys(params, allowed, "params")?;
        let model = match name {
            "constant_force" => ModelConfig::ConstantForce {
                m: positive(params, "m", 1.0)?,
                force: real_vec(params, "F", vec![1.0])?,
            },
            "free_particle" => ModelConfig::FreeParticle { m: positive(params, "m", 1.0)?, d: count(params, "d", 1)? },
            "harmonic" => {
                let omega = real_vec(params, "omega", vec![1.0])?;
                if let Some(w) = omega.iter().find(|w| !(**w > 0.0)) {
                    return Err(bad("omega", format!("frequencies must be positive, got {w}")));
                }
                ModelConfig::Harmonic { omega, t0: real(params, "t0", 0.0)?, hbar: positive(params, "hbar", 1.0)? }
            }
            _ => {
                let n = count(params, "n", 8)?;
                if n < 2 {
                    return Err(bad("n", "lattice needs at least two sites".into()));
                }
                ModelConfig::LatticeScalar { n, mu: positive(params, "mu", 1.0)?, a: positive(params, "a", 1.0)? }
            }
        };
        Ok(model)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegratorConfig {
    pub kind: IntegratorKind,
    pub h: f64,
    pub n: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig { kind: IntegratorKind::Verlet, h: 0.01, n: 1000 }
    }
}

pub const TOLERANCE_KEYS: [&str; 10] = [
    "consistency",
    "charge",
    "conservation",
    "converse",
    "algebra",
    "closure",
    "jacobi",
    "trajectory",
    "qfock",
    "qwave",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub suites: Vec<Suite>,
    /// Overrides only; suites fall back to their own defaults.
    pub tolerances: BTreeMap<String, f64>,
    pub integrator: IntegratorConfig,
    pub seed: u64,
    pub samples: usize,
    pub extra_transformations: Vec<String>,
    pub output_dir: PathBuf,
}

pub const EXTRA_TRANSFORMATIONS: [&str; 1] = ["scaling"];
const TOP_KEYS: [&str; 9] =
    ["model", "params", "suites", "tolerances", "integrator", "seed", "samples", "extra_transformations", "output_dir"];

impl RunConfig {
    pub fn tolerance(&self, key: &str, default: f64) -> f64 {
        self.tolerances.get(key).copied().unwrap_or(default)
    }
}

pub fn parse_config(text: &str) -> ConfigResult<RunConfig> {
    let root: Value = serde_json::from_str(text).map_err(|e| ConfigError::ParseError(e.to_string()))?;
    let obj = root.as_object().ok_or_else(|| ConfigError::ParseError("top level must be an object".into()))?;
    check_keys(obj, &TOP_KEYS, "config")?;

    let name = obj
        .get("model")
        .ok_or_else(|| bad("model", "missing".into()))?
        .as_str()
        .ok_or_else(|| bad("model", "expected a string".into()))?;
    let empty = Map::new();
    let params = match obj.get("params") {
        None => &empty,
        Some(v) => v.as_object().ok_or_else(|| bad("params", "expected an object".into()))?,
    };
    let model = ModelConfig::from_params(name, params)?;

    let suites = match obj.get("suites") {
        None => Suite::ALL.iter().copied().filter(|s| !s.is_quantum()).collect(),
        Some(v) => {
            let arr = v.as_array().ok_or_else(|| bad("suites", "expected an array".into()))?;
            let mut out = Vec::new();
            for s in arr {
                let s = s.as_str().ok_or_else(|| bad("suites", "entries must be strings".into()))?;
                let suite: Suite = s.parse()?;
                if !out.contains(&suite) {
                    out.push(suite);
                }
            }
            if out.is_empty() {
                return Err(bad("suites", "at least one suite is required".into()));
            }
            out
        }
    };

    let mut tolerances = BTreeMap::new();
    if let Some(v) = obj.get("tolerances") {
        let t = v.as_object().ok_or_else(|| bad("tolerances", "expected an object".into()))?;
        check_keys(t, &TOLERANCE_KEYS, "tolerances")?;
        for k in t.keys() {
            tolerances.insert(k.clone(), positive(t, k, 0.0)?);
        }
    }

    let mut integrator = IntegratorConfig::default();
    if let Some(v) = obj.get("integrator") {
        let t = v.as_object().ok_or_else(|| bad("integrator", "expected an object".into()))?;
        check_keys(t, &["kind", "h", "n"], "integrator")?;
        if let Some(k) = t.get("kind") {
            let k = k.as_str().ok_or_else(|| bad("kind", "expected a string".into()))?;
            integrator.kind = k.parse().map_err(|_| unknown(k, "integrator.kind", &["verlet", "midpoint", "rk4"]))?;
        }
        integrator.h = positive(t, "h", integrator.h)?;
        integrator.n = count(t, "n", integrator.n)?;
        if integrator.n < 2 {
            return Err(bad("n", "need at least two steps".into()));
        }
    }

    let seed = match obj.get("seed") {
        None => 0,
        Some(v) => v.as_u64().ok_or_else(|| bad("seed", "expected a non-negative integer".into()))?,
    };
    let samples = count(obj, "samples", 100)?;
    if samples == 0 {
        return Err(bad("samples", "must be at least 1".into()));
    }

    let mut extra_transformations = Vec::new();
    if let Some(v) = obj.get("extra_transformations") {
        let arr = v.as_array().ok_or_else(|| bad("extra_transformations", "expected an array".into()))?;
        for e in arr {
            let e = e.as_str().ok_or_else(|| bad("extra_transformations", "entries must be strings".into()))?;
            if !EXTRA_TRANSFORMATIONS.contains(&e) {
                return Err(unknown(e, "extra_transformations", &EXTRA_TRANSFORMATIONS));
            }
            extra_transformations.push(e.to_string());
        }
    }

    let output_dir = match obj.get("output_dir") {
        None => PathBuf::from("noether-out"),
        Some(v) => PathBuf::from(v.as_str().ok_or_else(|| bad("output_dir", "expected a string".into()))?),
    };

    Ok(RunConfig { model, suites, tolerances, integrator, seed, samples, extra_transformations, output_dir })
}

fn check_keys(obj: &Map<String, Value>, allowed: &[&str], context: &str) -> ConfigResult<()> {
    match obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(unknown(k, context, allowed)),
        None => Ok(()),
    }
}

/// Closest candidate by Jaro-Winkler similarity, if any is reasonably close.
pub fn suggest(key: &str, candidates: &[&str]) -> Option<String> {
    candidates
        .iter()
        .map(|c| (strsim::jaro_winkler(key, c), *c))
        .filter(|(score, _)| *score > 0.8)
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, c)| c.to_string())
}

fn unknown(key: &str, context: &str, candidates: &[&str]) -> ConfigError {
    ConfigError::UnknownKey { key: key.to_string(), context: context.to_string(), suggestion: suggest(key, candidates) }
}

fn bad(key: &str, reason: String) -> ConfigError {
    ConfigError::BadValue { key: key.to_string(), reason }
}

fn real(obj: &Map<String, Value>, key: &str, default: f64) -> ConfigResult<f64> {
    match obj.get(key) {
        None => Ok(default),
        Some(v) => v
            .as_f64()
            .filter(|x| x.is_finite())
            .ok_or_else(|| bad(key, format!("expected a finite number, got {v}"))),
    }
}

fn positive(obj: &Map<String, Value>, key: &str, default: f64) -> ConfigResult<f64> {
    let x = real(obj, key, default)?;
    if x > 0.0 {
        Ok(x)
    } else {
        Err(bad(key, format!("must be positive, got {x}")))
    }
}

fn count(obj: &Map<String, Value>, key: &str, default: usize) -> ConfigResult<usize> {
    match obj.get(key) {
        None => Ok(default),
        Some(v) => v
            .as_u64()
            .map(|x| x as usize)
            .ok_or_else(|| bad(key, format!("expected a non-negative integer, got {v}"))),
    }
}

/// A number or an array of numbers.
fn real_vec(obj: &Map<String, Value>, key: &str, default: Vec<f64>) -> ConfigResult<Vec<f64>> {
    let v = match obj.get(key) {
        None => return Ok(default),
        Some(v) => v,
    };
    let items: Vec<&Value> = match v {
        Value::Array(a) => a.iter().collect(),
        other => vec![other],
    };
    if items.is_empty() {
        return Err(bad(key, "must not be empty".into()));
    }
    items
        .into_iter()
        .map(|x| x.as_f64().filter(|x| x.is_finite()).ok_or_else(|| bad(key, format!("expected numbers, got {x}"))))
        .collect()
}
