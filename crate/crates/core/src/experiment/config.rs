//! Experiment configuration: one JSON file, optionally patched by
//! command-line overrides addressed by JSON path (`z0.re`, `trials`, ...).

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{build_mean_matrix, DeformationSpec, ValidatedSpec, Window};
use crate::stats::{DEFAULT_PAIR_BINS, DEFAULT_PAIR_R_MAX, DEFAULT_WINDOW_RHO};

pub const OUTPUT_DIR_ENV: &str = "GINLAB_OUTPUT_DIR";
/// Pair statistics need `R0 >= 2`.
pub const MIN_ZERO_PADDING: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryRequest {
    pub window: Window,
    pub resolution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub spec: DeformationSpec,
    #[serde(with = "crate::serde_complex")]
    pub z0: Complex64,
    #[serde(rename = "N_list")]
    pub n_list: Vec<usize>,
    pub trials: usize,
    pub master_seed: u64,
    #[serde(default = "default_rho")]
    pub window_rho: f64,
    #[serde(default = "default_r_max")]
    pub pair_r_max: f64,
    #[serde(default = "default_bins")]
    pub pair_bins: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub dump_spectra: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<BoundaryRequest>,
}

fn default_rho() -> f64 {
    DEFAULT_WINDOW_RHO
}

fn default_r_max() -> f64 {
    DEFAULT_PAIR_R_MAX
}

fn default_bins() -> usize {
    DEFAULT_PAIR_BINS
}

impl ExperimentConfig {
    pub fn from_value(value: Value) -> Result<Self> {
        serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_value(load_value(path)?)
    }

    /// Checks every invariant that does not depend on where `z0` lies.
    pub fn validate(&self) -> Result<ValidatedSpec> {
        let spec = self.spec.clone().validate()?;
        if self.trials < 1 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.n_list.is_empty() {
            return Err(Error::Config("N_list is empty".into()));
        }
        if spec.zero_padding < MIN_ZERO_PADDING {
            return Err(Error::Config(format!("R0 = {} but pair statistics need R0 >= {MIN_ZERO_PADDING}", spec.zero_padding)));
        }
        for &n in &self.n_list {
            build_mean_matrix(&spec, n, self.z0)?;
        }
        if !self.z0.re.is_finite() || !self.z0.im.is_finite() {
            return Err(Error::Config("z0 must be finite".into()));
        }
        if !(self.window_rho > 0.0) || !self.window_rho.is_finite() {
            return Err(Error::NonpositiveParam { name: "window_rho", value: self.window_rho });
        }
        if !(self.pair_r_max > 0.0) || self.pair_r_max > 0.5 * self.window_rho {
            return Err(Error::Config(format!("pair_r_max = {} must lie in (0, window_rho/2]", self.pair_r_max)));
        }
        if self.pair_bins < 4 {
            return Err(Error::Config(format!("pair_bins = {} but at least 4 are needed", self.pair_bins)));
        }
        if let Some(b) = &self.boundary {
            if !(b.resolution > 0.0) {
                return Err(Error::NonpositiveParam { name: "boundary.resolution", value: b.resolution });
            }
        }
        Ok(spec)
    }

    /// `output_dir` from the config, else `$GINLAB_OUTPUT_DIR`.
    pub fn output_dir(&self) -> Result<PathBuf> {
        match self.output_dir.as_deref().filter(|s| !s.is_empty()) {
            Some(dir) => Ok(PathBuf::from(dir)),
            None => std::env::var_os(OUTPUT_DIR_ENV)
                .filter(|v| !v.is_empty())
                .map(PathBuf::from)
                .ok_or_else(|| Error::Config(format!("no output_dir in the config and {OUTPUT_DIR_ENV} is unset"))),
        }
    }

    /// SHA-256 of the canonical JSON of the config with `output_dir` removed,
    /// so relocating outputs does not change the hash.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Value::Object(map) = &mut value {
            map.remove("output_dir");
        }
        hex::encode(Sha256::digest(canonical_json(&value).as_bytes()))
    }
}

pub fn load_value(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// JSON with object keys sorted at every level.
pub fn canonical_json(value: &Value) -> String {
    fn sort(v: &Value) -> Value {
        match v {
            Value::Object(map) => {
                let mut keys: Vec<&String> = map.keys().collect();
                keys.sort();
                Value::Object(keys.into_iter().map(|k| (k.clone(), sort(&map[k]))).collect())
            }
            Value::Array(items) => Value::Array(items.iter().map(sort).collect()),
            other => other.clone(),
        }
    }
    serde_json::to_string(&sort(value)).expect("value serializes")
}

/// Sets `path` (dot-separated) inside `root`, creating objects on the way.
pub fn set_path(root: &mut Value, path: &str, new: Value) -> Result<()> {
    let mut cursor = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(Error::Config(format!("bad override path `{path}`")));
        }
        if !cursor.is_object() {
            if cursor.is_null() {
                *cursor = Value::Object(Default::default());
            } else {
                return Err(Error::Config(format!("override `{path}` descends into a non-object")));
            }
        }
        let map = cursor.as_object_mut().expect("object");
        if i + 1 == parts.len() {
            map.insert(part.to_string(), new);
            return Ok(());
        }
        cursor = map.entry(part.to_string()).or_insert(Value::Null);
    }
    Ok(())
}
