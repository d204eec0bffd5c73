//! Resolution of the run configuration: built-in defaults, then the JSON config
//! file, then command-line flags.

use std::path::Path;

use kramers_core::{Error, ModelSpec};
use serde::{Deserialize, Serialize};

/// Optional JSON config. Model keys follow the model document schema
/// `{"model": <name>, "params": {...}}`; the remaining keys mirror the flags.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub model: Option<String>,
    pub params: Option<serde_json::Value>,
    #[serde(rename = "T")]
    pub horizon: Option<f64>,
    pub dt: Option<f64>,
    pub masses: Option<Vec<f64>>,
    pub epsilons: Option<Vec<f64>>,
    pub n_paths: Option<u64>,
    pub seed: Option<u64>,
    pub x0: Option<Vec<f64>>,
    pub v0: Option<Vec<f64>>,
    pub mass: Option<f64>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Model named on the command line wins over the file; parameters from the file
    /// apply only when the file names the same model (or none).
    pub fn model_spec(&self, flag: Option<&str>) -> Result<ModelSpec, Error> {
        let name = flag.or(self.model.as_deref()).unwrap_or("wall-gravity");
        let same_model = self.model.as_deref().is_none_or(|m| m == name);
        match (&self.params, same_model) {
            (Some(params), true) => {
                let doc = serde_json::json!({ "model": name, "params": params });
                // surface the list of built-ins for unknown names
                ModelSpec::default_for(name)?;
                ModelSpec::from_json(&doc.to_string())
            }
            _ => ModelSpec::default_for(name),
        }
    }
}

/// Applies `key=value` overrides to the model parameters.
pub fn apply_params(mut spec: ModelSpec, overrides: &[String]) -> Result<ModelSpec, Error> {
    for item in overrides {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--param expects key=value, got `{item}`")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("--param {key}: `{value}` is not a number")))?;
        spec = spec.with_param(key.trim(), value)?;
    }
    Ok(spec)
}

/// Everything that determines a run's output, recorded in every output header.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedConfig {
    pub command: &'static str,
    pub model: serde_json::Value,
    pub x0: Vec<f64>,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub dt: f64,
    pub master_seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub masses: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilons: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_paths: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v0: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path_index: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
    pub version: &'static str,
}

impl ResolvedConfig {
    pub fn new(command: &'static str, model: &ModelSpec, x0: Vec<f64>) -> Self {
        Self {
            command,
            model: model.to_json(),
            x0,
            horizon: 0.0,
            dt: 0.0,
            master_seed: 0,
            masses: None,
            epsilons: None,
            n_paths: None,
            mass: None,
            v0: None,
            path_index: None,
            grid_points: None,
            version: env!("CARGO_PKG_VERSION"),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
