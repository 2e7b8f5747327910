//! Experiment configuration: a TOML file, `--set key=value` overrides on top,
//! then validation of every field before any computation starts.

use gafhole::holes::EstimateMode;
use gafhole::{CoefficientModel, ModelDescriptor, ModelKind};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Environment variable supplying the seed when neither the file nor an override sets one.
pub const SEED_ENV: &str = "GAFHOLE_SEED";
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Read { path: PathBuf, message: String },
    #[error("config key `{key}`: {message}")]
    Invalid { key: String, message: String },
}

impl ConfigError {
    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::Invalid { key, .. } => Some(key),
            ConfigError::Read { .. } => None,
        }
    }
}

fn invalid(key: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key: key.into(), message: message.into() }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Coeffs,
    Spectrum,
    Estimate,
    OracleVerify,
    Envelope,
    Report,
}

/// Tunable constants. Absent optional values mean "use the documented default".
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Constants {
    pub epsilon: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub alpha: f64,
    pub alpha1: Option<f64>,
    #[serde(rename = "M")]
    pub m: Option<f64>,
    pub fail_exp: f64,
    pub tau_rel: f64,
    pub k_init: usize,
    pub k_cap: usize,
    pub compute_cap: f64,
    pub lemma17_c: f64,
    #[serde(rename = "lemma17_C")]
    pub lemma17_c_large: f64,
    #[serde(rename = "lemma15_C")]
    pub lemma15_c: f64,
    #[serde(rename = "lemma6_C")]
    pub lemma6_c: f64,
    pub theorem81_c: f64,
    #[serde(rename = "theorem81_C")]
    pub theorem81_c_large: f64,
    pub chebyshev_a: Option<f64>,
    pub chebyshev_kappa: Option<f64>,
}

impl Default for Constants {
    fn default() -> Self {
        let t = gafhole::holes::ThresholdParams::default();
        let e = gafhole::holes::EstimateOptions::default();
        Constants {
            epsilon: t.epsilon,
            b: t.b,
            alpha: t.alpha,
            alpha1: None,
            m: None,
            fail_exp: e.fail_exp,
            tau_rel: e.tau_rel,
            k_init: e.k_init,
            k_cap: e.k_cap,
            compute_cap: e.compute_cap,
            lemma17_c: gafhole::oracles::LEMMA17_C_SMALL,
            lemma17_c_large: gafhole::oracles::LEMMA17_C_LARGE,
            lemma15_c: gafhole::oracles::LEMMA15_C,
            lemma6_c: gafhole::oracles::LEMMA6_C,
            theorem81_c: gafhole::envelopes::THEOREM81_C_SMALL,
            theorem81_c_large: gafhole::envelopes::THEOREM81_C_LARGE,
            chebyshev_a: None,
            chebyshev_kappa: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub command: Command,
    pub seed: u64,
    pub trials: u64,
    pub confidence: f64,
    pub mode: EstimateMode,
    /// Worker threads; 0 uses every available core. Results do not depend on it.
    pub threads: usize,
    pub out_dir: PathBuf,
    /// Directory holding `estimates.jsonl` for the report command; defaults to `out_dir`.
    pub results_dir: Option<PathBuf>,
    /// Largest coefficient index listed by the coeffs command.
    pub degree: usize,
    /// Number of sample dumps written by the coeffs command.
    pub samples: u64,
    /// Also evaluate the Chebyshev exponent in the envelope command.
    pub chebyshev: bool,
    pub r: Vec<f64>,
    #[serde(rename = "N")]
    pub n: Vec<usize>,
    pub model: ModelDescriptor,
    pub constants: Constants,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            command: Command::Estimate,
            seed: DEFAULT_SEED,
            trials: 1000,
            confidence: 0.99,
            mode: EstimateMode::Direct,
            threads: 0,
            out_dir: PathBuf::from("out"),
            results_dir: None,
            degree: 16,
            samples: 0,
            chebyshev: false,
            r: vec![0.5],
            n: vec![16],
            model: ModelDescriptor { kind: ModelKind::Hyperbolic, intensity: Some(1.0), explicit_seq: None },
            constants: Constants::default(),
        }
    }
}

fn parse_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Apply `key=value` (dotted keys address nested tables; values use TOML syntax,
/// bare words are taken as strings).
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), ConfigError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| invalid(spec, "override must have the form key=value"))?;
    let key = key.trim();
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(invalid(key, "empty key segment"));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| invalid(key, format!("`{p}` is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

/// Fill keys missing from `user` with the defaults. A model table that names its
/// own `kind` replaces the default model instead of being merged into it.
fn with_defaults(user: toml::Table) -> toml::Table {
    fn merge(base: &mut toml::Table, over: toml::Table) {
        for (k, v) in over {
            match (base.get_mut(&k), v) {
                (Some(toml::Value::Table(b)), toml::Value::Table(o)) if !(k == "model" && o.contains_key("kind")) => {
                    merge(b, o)
                }
                (_, v) => {
                    base.insert(k, v);
                }
            }
        }
    }
    let mut base: toml::Table =
        toml::from_str(&ExperimentConfig::default().to_toml()).expect("default config is valid TOML");
    merge(&mut base, user);
    base
}

fn unknown_key(message: &str) -> Option<String> {
    let start = message.find("unknown field `")? + "unknown field `".len();
    let end = message[start..].find('`')?;
    Some(message[start..start + end].to_string())
}

/// Dotted key of the `key = value` line containing byte `pos` of rendered TOML.
fn key_at(text: &str, pos: usize) -> Option<String> {
    let mut table = String::new();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let t = line.trim();
        if t.starts_with('[') && t.ends_with(']') {
            table = t.trim_matches(|c| c == '[' || c == ']').trim().to_string();
        }
        if pos < offset + line.len() {
            let (k, _) = t.split_once('=')?;
            let k = k.trim().trim_matches('"');
            return Some(if table.is_empty() { k.to_string() } else { format!("{table}.{k}") });
        }
        offset += line.len();
    }
    None
}

/// Build a validated configuration from TOML text plus overrides. `env_seed` is
/// used only when neither source sets `seed`.
pub fn config_from_str(text: &str, overrides: &[String], env_seed: Option<&str>) -> Result<ExperimentConfig, ConfigError> {
    let mut table: toml::Table = toml::from_str(text).map_err(|e| invalid("<file>", e.message().to_string()))?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    let seed_given = table.contains_key("seed");
    let mut table = with_defaults(table);
    if !seed_given {
        if let Some(s) = env_seed {
            let seed: u64 = s.trim().parse().map_err(|_| invalid(SEED_ENV, format!("not an unsigned integer: {s}")))?;
            table.insert("seed".into(), toml::Value::Integer(seed as i64));
        }
    }
    // Re-render so deserialization errors carry a span that maps back to a key.
    let rendered = toml::to_string(&table).map_err(|e| invalid("<config>", e.to_string()))?;
    let cfg: ExperimentConfig = toml::from_str(&rendered).map_err(|e: toml::de::Error| {
        let msg = e.message().to_string();
        let key = e.span().and_then(|sp| key_at(&rendered, sp.start)).or_else(|| unknown_key(&msg));
        invalid(key.unwrap_or_else(|| "<config>".into()), msg)
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<ExperimentConfig, ConfigError> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).map_err(|e| ConfigError::Read { path: p.to_path_buf(), message: e.to_string() })?,
        None => String::new(),
    };
    let env = std::env::var(SEED_ENV).ok();
    config_from_str(&text, overrides, env.as_deref())
}

fn positive(key: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(key, format!("must be positive and finite, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn coefficient_model(&self) -> Result<CoefficientModel, ConfigError> {
        CoefficientModel::try_from(self.model.clone()).map_err(|e| invalid("model", e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let model = self.coefficient_model()?;
        if self.r.is_empty() && !matches!(self.command, Command::OracleVerify | Command::Report) {
            return Err(invalid("r", "the radius grid is empty"));
        }
        for (i, &r) in self.r.iter().enumerate() {
            if !(r.is_finite() && r > 0.0 && r < 1.0) {
                return Err(invalid(format!("r[{i}]"), format!("radius must lie in (0, 1), got {r}")));
            }
        }
        for (i, &n) in self.n.iter().enumerate() {
            if n == 0 {
                return Err(invalid(format!("N[{i}]"), "must be at least 1"));
            }
        }
        if self.trials == 0 {
            return Err(invalid("trials", "must be at least 1"));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(invalid("confidence", format!("must lie in (0, 1), got {}", self.confidence)));
        }
        let c = &self.constants;
        positive("constants.epsilon", c.epsilon)?;
        positive("constants.B", c.b)?;
        if !(c.alpha > 0.5 && c.alpha < 1.0) {
            return Err(invalid("constants.alpha", format!("must lie in (1/2, 1), got {}", c.alpha)));
        }
        if let Some(a1) = c.alpha1 {
            positive("constants.alpha1", a1)?;
        }
        if let Some(m) = c.m {
            positive("constants.M", m)?;
        }
        positive("constants.fail_exp", c.fail_exp)?;
        if !(c.tau_rel > 0.0 && c.tau_rel <= 1.0) {
            return Err(invalid("constants.tau_rel", format!("must lie in (0, 1], got {}", c.tau_rel)));
        }
        if c.k_init < 8 {
            return Err(invalid("constants.k_init", "must be at least 8"));
        }
        if c.k_cap < c.k_init {
            return Err(invalid("constants.k_cap", "must be at least k_init"));
        }
        positive("constants.compute_cap", c.compute_cap)?;
        positive("constants.lemma17_c", c.lemma17_c)?;
        positive("constants.lemma17_C", c.lemma17_c_large)?;
        positive("constants.lemma15_C", c.lemma15_c)?;
        positive("constants.lemma6_C", c.lemma6_c)?;
        positive("constants.theorem81_c", c.theorem81_c)?;
        positive("constants.theorem81_C", c.theorem81_c_large)?;
        if c.theorem81_c > c.theorem81_c_large {
            return Err(invalid("constants.theorem81_c", "must not exceed theorem81_C"));
        }
        if let Some(a) = c.chebyshev_a {
            if !(a > 0.0 && a < 2f64.sqrt()) {
                return Err(invalid("constants.chebyshev_a", format!("must lie in (0, √2), got {a}")));
            }
        }
        if let Some(k) = c.chebyshev_kappa {
            positive("constants.chebyshev_kappa", k)?;
        }
        if self.command == Command::Estimate && self.mode == EstimateMode::TiltedLower {
            let ok = model.kind() == ModelKind::Hyperbolic && model.intensity().is_some_and(|l| l > 1.0);
            if !ok {
                return Err(invalid("mode", "tilted_lower needs a hyperbolic model with L > 1"));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("configs always serialize")
    }
}
