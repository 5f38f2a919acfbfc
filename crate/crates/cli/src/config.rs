//! Run configuration: defaults, then the JSON config file (top level, then
//! the command's section), then command-line flags.

use std::path::{Path, PathBuf};

use anyhow::Context;
use nqs_core::experiments::{AnsatzFamily, Model, ModelConfig, Width};
use nqs_core::optimize::TrainConfig;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub threads: Option<usize>,
    pub out: PathBuf,
    pub model: Option<Model>,
    #[serde(rename = "L")]
    pub sites: Option<usize>,
    #[serde(rename = "N")]
    pub particles: Option<usize>,
    pub h: f64,
    pub sigma: Option<f64>,
    pub interactions_off: bool,
    pub couplings_off: bool,
    /// Explicit couplings (a disorder record) replacing the sampled ones.
    pub disorder: Option<PathBuf>,
    pub ansatz: AnsatzFamily,
    pub alpha: Option<f64>,
    pub width: Option<usize>,
    pub realizations: usize,
    pub sizes: Vec<usize>,
    pub target_error: f64,
    pub min_width: usize,
    pub max_width: usize,
    pub extrapolate: Vec<usize>,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            threads: None,
            out: PathBuf::from("out"),
            model: None,
            sites: None,
            particles: None,
            h: 1.0,
            sigma: None,
            interactions_off: false,
            couplings_off: false,
            disorder: None,
            ansatz: AnsatzFamily::Mlp,
            alpha: None,
            width: None,
            realizations: 10,
            sizes: Vec::new(),
            target_error: 1e-2,
            min_width: 1,
            max_width: 64,
            extrapolate: Vec::new(),
            train: TrainConfig::default(),
        }
    }
}

/// A configuration problem the user has to fix; exits with the usage status.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage<T>(msg: impl Into<String>) -> anyhow::Result<T> {
    Err(UsageError(msg.into()).into())
}

const COMMANDS: [&str; 5] = ["ed", "learn", "entropy", "scaling", "report"];

fn overlay(base: &mut Map<String, Value>, top: &Map<String, Value>) {
    for (k, v) in top {
        match (base.get_mut(k), v) {
            (Some(Value::Object(b)), Value::Object(t)) => overlay(b, t),
            _ => {
                base.insert(k.clone(), v.clone());
            }
        }
    }
}

/// Reads a config file. A run manifest is accepted too: its embedded
/// resolved config is used.
fn read_file(path: &Path, command: &str) -> anyhow::Result<Map<String, Value>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let Value::Object(mut root) = serde_json::from_str(&text).map_err(|e| UsageError(format!("config {}: {e}", path.display())))? else {
        return usage(format!("config {} must be a JSON object", path.display()));
    };
    if let (Some(Value::String(_)), Some(Value::Object(resolved))) = (root.get("command"), root.get("config")) {
        return Ok(resolved.clone());
    }
    let mut merged = Map::new();
    let section = root.remove(command);
    for name in COMMANDS {
        root.remove(name);
    }
    overlay(&mut merged, &root);
    match section {
        Some(Value::Object(s)) => overlay(&mut merged, &s),
        Some(_) => return usage(format!("config section `{command}` must be an object")),
        None => {}
    }
    Ok(merged)
}

/// Resolves defaults, file and flag overrides (given as a JSON object of the
/// flags that were actually passed).
pub fn resolve(command: &str, file: Option<&Path>, flags: Map<String, Value>) -> anyhow::Result<RunConfig> {
    let Value::Object(mut merged) = serde_json::to_value(RunConfig::default())? else {
        unreachable!("config serializes to an object")
    };
    if let Some(path) = file {
        overlay(&mut merged, &read_file(path, command)?);
    }
    overlay(&mut merged, &flags);
    let config: RunConfig =
        serde_json::from_value(Value::Object(merged)).map_err(|e| UsageError(format!("invalid configuration: {e}")))?;
    config.train.validate().map_err(|e| UsageError(e.to_string()))?;
    Ok(config)
}

impl RunConfig {
    pub fn require_model(&self) -> anyhow::Result<Model> {
        match self.model {
            Some(m) => Ok(m),
            None => usage("missing required setting `model` (flag --model or config key)"),
        }
    }

    pub fn require_sites(&self) -> anyhow::Result<usize> {
        match self.sites {
            Some(l) => Ok(l),
            None => usage("missing required setting `L` (flag --L or config key)"),
        }
    }

    pub fn require_sizes(&self) -> anyhow::Result<&[usize]> {
        if self.sizes.is_empty() {
            return usage("the size grid is empty (flag --sizes or config key `sizes`)");
        }
        Ok(&self.sizes)
    }

    pub fn width(&self) -> anyhow::Result<Width> {
        match (self.alpha, self.width) {
            (Some(_), Some(_)) => usage("give either `alpha` or `width`, not both"),
            (Some(a), None) => Ok(Width::Density(a)),
            (None, Some(m)) => Ok(Width::Hidden(m)),
            (None, None) => Ok(Width::Density(1.0)),
        }
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            field: self.h,
            sigma: self.sigma,
            particles: self.particles,
            interactions_off: self.interactions_off,
            couplings_off: self.couplings_off,
        }
    }

    /// The parts of the configuration that determine results.
    pub fn hashed(&self) -> RunConfig {
        RunConfig { threads: None, out: PathBuf::new(), ..self.clone() }
    }
}
