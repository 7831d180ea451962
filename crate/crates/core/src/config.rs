//! Pipeline parameters and the flat `key = value` config format.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::BinaryGrid;
use crate::mask_io::{read_binary_image, MaskIoError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("invalid {key}: {message}")]
    Invalid { key: &'static str, message: String },
    #[error("foreground mask: {0}")]
    ForegroundMask(#[from] MaskIoError),
}

/// All tunable parameters of the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Sigmoid temperature applied to template error differences.
    pub beta: f64,
    pub t_low: f64,
    pub t_high: f64,
    /// Fusion threshold scale; larger values give finer segmentations.
    pub kappa: f64,
    /// Minimum segment area in squared pixels.
    pub a_min: f64,
    /// A direction is accepted for a light when its cosine with the
    /// expected shadow direction is at least this value.
    pub omega_cos_min: f64,
    /// Windows whose shadowed fraction reaches this value are ignored.
    pub shadow_reject_frac: f64,
    /// Triangles with a larger circumradius are removed when set.
    pub prune_alpha: Option<f64>,
    /// Triangles whose centroid falls on a `false` pixel are removed.
    #[serde(skip)]
    pub foreground_mask: Option<BinaryGrid>,
    #[serde(rename = "foreground_mask")]
    pub foreground_mask_path: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            beta: 4.0,
            t_low: 0.3,
            t_high: 0.6,
            kappa: 1.0,
            a_min: 64.0,
            omega_cos_min: 0.0,
            shadow_reject_frac: 0.9,
            prune_alpha: None,
            foreground_mask: None,
            foreground_mask_path: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        fn invalid(key: &'static str, message: impl Into<String>) -> Result<(), ConfigError> {
            Err(ConfigError::Invalid {
                key,
                message: message.into(),
            })
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return invalid("beta", "must be positive");
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return invalid("kappa", "must be positive");
        }
        if !(self.a_min >= 0.0 && self.a_min.is_finite()) {
            return invalid("a_min", "must be non-negative");
        }
        for (key, v) in [("t_low", self.t_low), ("t_high", self.t_high)] {
            if !(0.0..=1.0).contains(&v) {
                return invalid(key, "must lie in [0, 1]");
            }
        }
        if self.t_low > self.t_high {
            return invalid("t_low", format!("{} exceeds t_high {}", self.t_low, self.t_high));
        }
        if !(-1.0..=1.0).contains(&self.omega_cos_min) {
            return invalid("omega_cos_min", "must lie in [-1, 1]");
        }
        if !(0.0..=1.0).contains(&self.shadow_reject_frac) {
            return invalid("shadow_reject_frac", "must lie in [0, 1]");
        }
        if let Some(alpha) = self.prune_alpha {
            if !(alpha > 0.0 && alpha.is_finite()) {
                return invalid("prune_alpha", "must be positive");
            }
        }
        Ok(())
    }

    /// Applies one `key = value` pair. Relative paths resolve against `base`.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<(), ConfigError> {
        let num = |v: &str| -> Result<f64, ConfigError> {
            v.parse::<f64>().map_err(|e| ConfigError::Syntax {
                line: 0,
                message: format!("{key}: {e}"),
            })
        };
        match key {
            "beta" => self.beta = num(value)?,
            "t_low" => self.t_low = num(value)?,
            "t_high" => self.t_high = num(value)?,
            "kappa" => self.kappa = num(value)?,
            "a_min" => self.a_min = num(value)?,
            "omega_cos_min" => self.omega_cos_min = num(value)?,
            "shadow_reject_frac" => self.shadow_reject_frac = num(value)?,
            "prune_alpha" => {
                self.prune_alpha = match value {
                    "" | "none" => None,
                    v => Some(num(v)?),
                }
            }
            "foreground_mask" => {
                if value.is_empty() || value == "none" {
                    self.foreground_mask = None;
                    self.foreground_mask_path = None;
                } else {
                    let path = base.join(value);
                    self.foreground_mask = Some(read_binary_image(&path)?);
                    self.foreground_mask_path = Some(path);
                }
            }
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }
}

/// Parses config text; absent keys keep their defaults.
pub fn parse_config(text: &str, base: &Path) -> Result<PipelineConfig, ConfigError> {
    let mut cfg = PipelineConfig::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: idx + 1,
            message: "expected key = value".into(),
        })?;
        cfg.set(key.trim(), value.trim(), base).map_err(|e| match e {
            ConfigError::Syntax { message, .. } => ConfigError::Syntax { line: idx + 1, message },
            other => other,
        })?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<PipelineConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text, path.parent().unwrap_or(Path::new(".")))
}
