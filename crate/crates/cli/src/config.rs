//! Settings shared by all subcommands.
//!
//! Sources, lowest to highest priority: built-in defaults, a config file,
//! `DBX_*` environment variables, command-line flags.
//!
//! File grammar, one setting per line:
//!
//! ```text
//! # comment
//! precision_bits = 192
//! root_tol = 1e-20
//! depth_default = 64
//! seed = 7
//! output_format = "csv"
//! ```
//!
//! Blank lines and `#` comments are ignored, string values may be quoted.

use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            _ => Err(format!("unknown output format \"{s}\" (expected json or csv)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub precision_bits: usize,
    pub root_tol: f64,
    pub depth_default: usize,
    pub seed: u64,
    /// Unset means each subcommand's own default: CSV for the tabular exports,
    /// JSON for everything else.
    pub output_format: Option<Format>,
}

impl Default for Config {
    fn default() -> Self {
        Config { precision_bits: 128, root_tol: 1e-12, depth_default: 64, seed: 0, output_format: None }
    }
}

/// Partial settings from one source.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Layer {
    pub precision_bits: Option<usize>,
    pub root_tol: Option<f64>,
    pub depth_default: Option<usize>,
    pub seed: Option<u64>,
    pub output_format: Option<Format>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    /// Where the bad value came from, e.g. `config.toml:3` or `DBX_SEED`.
    pub source: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.source, self.message)
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    v.parse::<T>().map_err(|e| format!("bad value for {key}: \"{v}\" ({e})"))
}

impl Layer {
    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "precision_bits" => self.precision_bits = Some(parse(key, value)?),
            "root_tol" => self.root_tol = Some(parse(key, value)?),
            "depth_default" => self.depth_default = Some(parse(key, value)?),
            "seed" => self.seed = Some(parse(key, value)?),
            "output_format" => self.output_format = Some(parse(key, value)?),
            _ => return Err(format!("unknown key \"{key}\"")),
        }
        Ok(())
    }

    pub fn from_file_text(name: &str, text: &str) -> Result<Layer, ConfigError> {
        let mut layer = Layer::default();
        for (i, raw) in text.lines().enumerate() {
            let err = |message: String| ConfigError { source: format!("{name}:{}", i + 1), message };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| err(format!("expected key = value, got \"{line}\"")))?;
            let v = v.trim();
            let v = v.strip_prefix('"').and_then(|s| s.strip_suffix('"')).unwrap_or(v);
            layer.set(k.trim(), v).map_err(err)?;
        }
        Ok(layer)
    }

    /// `DBX_PRECISION_BITS`, `DBX_ROOT_TOL`, `DBX_SEED` via `get`.
    pub fn from_env(get: impl Fn(&str) -> Option<String>) -> Result<Layer, ConfigError> {
        let mut layer = Layer::default();
        for (var, key) in [("DBX_PRECISION_BITS", "precision_bits"), ("DBX_ROOT_TOL", "root_tol"), ("DBX_SEED", "seed")] {
            if let Some(v) = get(var) {
                layer
                    .set(key, v.trim())
                    .map_err(|message| ConfigError { source: var.to_string(), message })?;
            }
        }
        Ok(layer)
    }

    fn apply(&self, c: &mut Config) {
        if let Some(v) = self.precision_bits {
            c.precision_bits = v;
        }
        if let Some(v) = self.root_tol {
            c.root_tol = v;
        }
        if let Some(v) = self.depth_default {
            c.depth_default = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if self.output_format.is_some() {
            c.output_format = self.output_format;
        }
    }
}

/// Applies the layers in order of increasing priority and validates the result.
pub fn merge(layers: &[&Layer]) -> Result<Config, ConfigError> {
    let mut c = Config::default();
    for l in layers {
        l.apply(&mut c);
    }
    let err = |message: String| ConfigError { source: "config".into(), message };
    if c.precision_bits < 53 {
        return Err(err(format!("precision_bits must be at least 53, got {}", c.precision_bits)));
    }
    if !(c.root_tol > 0.0 && c.root_tol.is_finite()) {
        return Err(err(format!("root_tol must be positive, got {}", c.root_tol)));
    }
    Ok(c)
}
