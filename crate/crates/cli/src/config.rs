//! Problem configuration: the JSON document describing a dilation, digit set,
//! and optional candidate dual digits, plus validation and preset expansion.

use std::path::Path;

use affine_spectra_core::lattice::{IntMatrix, IntVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A problem instance as read from disk or expanded from a preset.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemConfig {
    /// Named preset this config was expanded from, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// Ambient dimension.
    pub d: usize,
    /// Dilation matrix, row-major.
    pub r: Vec<Vec<i64>>,
    /// Digit set, one vector per row.
    pub b: Vec<Vec<i64>>,
    /// Optional candidate dual digit set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<Vec<Vec<i64>>>,
}

/// Errors from reading or validating a configuration.
#[derive(Debug, Error)]
pub enum ConfigError {
    /// The file could not be read or was not well-formed JSON.
    #[error("cannot parse configuration: {0}")]
    Parse(String),
    /// Shapes are inconsistent with the declared dimension.
    #[error("bad shape in field `{field}`: {detail}")]
    Shape { field: &'static str, detail: String },
}

impl ProblemConfig {
    /// Checks every matrix row and vector against the declared dimension.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.d == 0 {
            return Err(ConfigError::Shape {
                field: "d",
                detail: "dimension must be at least 1".into(),
            });
        }
        if self.r.len() != self.d {
            return Err(ConfigError::Shape {
                field: "r",
                detail: format!("expected {} rows, got {}", self.d, self.r.len()),
            });
        }
        for (i, row) in self.r.iter().enumerate() {
            if row.len() != self.d {
                return Err(ConfigError::Shape {
                    field: "r",
                    detail: format!("row {i} has length {}, expected {}", row.len(), self.d),
                });
            }
        }
        if self.b.is_empty() {
            return Err(ConfigError::Shape {
                field: "b",
                detail: "digit set must be non-empty".into(),
            });
        }
        for (i, v) in self.b.iter().enumerate() {
            if v.len() != self.d {
                return Err(ConfigError::Shape {
                    field: "b",
                    detail: format!("vector {i} has length {}, expected {}", v.len(), self.d),
                });
            }
        }
        if let Some(l) = &self.l {
            if l.is_empty() {
                return Err(ConfigError::Shape {
                    field: "l",
                    detail: "dual digit set, when present, must be non-empty".into(),
                });
            }
            for (i, v) in l.iter().enumerate() {
                if v.len() != self.d {
                    return Err(ConfigError::Shape {
                        field: "l",
                        detail: format!("vector {i} has length {}, expected {}", v.len(), self.d),
                    });
                }
            }
        }
        Ok(())
    }

    /// Dilation as an exact integer matrix.
    pub fn dilation(&self) -> IntMatrix {
        IntMatrix::from_rows(&self.r)
    }

    /// Digit set as exact integer vectors.
    pub fn digits(&self) -> Vec<IntVector> {
        self.b.iter().map(|v| IntVector::from_i64(v)).collect()
    }

    /// Dual digit set as exact integer vectors, when present.
    pub fn dual_digits(&self) -> Option<Vec<IntVector>> {
        self.l
            .as_ref()
            .map(|l| l.iter().map(|v| IntVector::from_i64(v)).collect())
    }
}

/// Partially-specified document as it appears on disk: everything optional so
/// a bare preset reference is a complete file.
#[derive(Deserialize)]
struct RawConfig {
    #[serde(default)]
    preset: Option<String>,
    #[serde(default)]
    d: Option<usize>,
    #[serde(default)]
    r: Option<Vec<Vec<i64>>>,
    #[serde(default)]
    b: Option<Vec<Vec<i64>>>,
    #[serde(default)]
    l: Option<Vec<Vec<i64>>>,
}

/// Reads and validates a configuration file; a `preset` field inside the file
/// expands exactly as the `--preset` flag does, with any explicit fields
/// required to agree.
pub fn parse_config(path: &Path) -> Result<ProblemConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Parse(format!("{}: {e}", path.display())))?;
    let raw: RawConfig =
        serde_json::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?;

    let cfg = if let Some(name) = &raw.preset {
        let expanded = crate::presets::preset(name)
            .ok_or_else(|| ConfigError::Parse(format!("unknown preset `{name}`")))?;
        let agrees = raw.d.is_none_or(|d| d == expanded.d)
            && raw.r.as_ref().is_none_or(|r| *r == expanded.r)
            && raw.b.as_ref().is_none_or(|b| *b == expanded.b)
            && raw.l.as_ref().is_none_or(|l| Some(l) == expanded.l.as_ref());
        if !agrees {
            return Err(ConfigError::Shape {
                field: "preset",
                detail: format!("explicit fields disagree with preset `{name}`"),
            });
        }
        expanded
    } else {
        let missing = |field: &'static str| ConfigError::Shape {
            field,
            detail: "required when no preset is named".into(),
        };
        ProblemConfig {
            preset: None,
            d: raw.d.ok_or_else(|| missing("d"))?,
            r: raw.r.ok_or_else(|| missing("r"))?,
            b: raw.b.ok_or_else(|| missing("b"))?,
            l: raw.l,
        }
    };
    cfg.validate()?;
    Ok(cfg)
}
