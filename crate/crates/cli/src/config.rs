//! Run configuration. Values come from built-in defaults, then the TOML file
//! given by `--config`, then `FPCA_*` environment variables and flags.
//!
//! ```toml
//! seed = 7
//! out = "report.json"
//! threads = 4
//! replicas = 1
//!
//! [data]
//! input = "samples.csv"   # or: model = "model.json" with samples = 100000
//! header = false
//! truth = "model.json"
//!
//! [params]                # estimator parameters, every field optional
//! resolvability = 2.0
//! sigma = { mode = "scaled", target = 0.7 }
//!
//! [gmm]                   # mixture learner parameters
//! sigma_u = 1.0
//! ```

use std::path::{Path, PathBuf};

use fpca_core::gmm::GmmParams;
use fpca_core::ica::ParamSet;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::failure::Failure;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Samples as CSV, one row per sample.
    pub input: Option<PathBuf>,
    pub header: bool,
    /// Generative model (JSON) to draw samples from.
    pub model: Option<PathBuf>,
    pub samples: Option<usize>,
    /// Ground-truth model (JSON) to compare against.
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub replicas: Option<usize>,
    pub data: DataConfig,
    pub params: ParamSet,
    pub gmm: GmmParams,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, Failure> {
        toml::from_str(text).map_err(|e| Failure::config(format!("config: {e}")))
    }

    pub fn validate(&self) -> Result<(), Failure> {
        self.params.validate().map_err(Failure::from)?;
        self.gmm.validate().map_err(Failure::from)?;
        if self.threads == Some(0) {
            return Err(Failure::config("threads must be positive"));
        }
        if self.replicas == Some(0) {
            return Err(Failure::config("replicas must be positive"));
        }
        Ok(())
    }
}

/// Applies `key=value` overrides to a parameter struct. Keys may be dotted
/// (`guard.warn=0.5`); values use TOML syntax.
pub fn apply_overrides<T: Serialize + DeserializeOwned>(base: &T, overrides: &[String]) -> Result<T, Failure> {
    let mut root = toml::Value::try_from(base).map_err(|e| Failure::config(e.to_string()))?;
    for item in overrides {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| Failure::config(format!("override '{item}' is not KEY=VALUE")))?;
        let parsed: toml::Table = toml::from_str(&format!("v = {raw}"))
            .or_else(|_| toml::from_str(&format!("v = {}", toml::Value::String(raw.to_string()))))
            .map_err(|e| Failure::config(format!("override '{item}': {e}")))?;
        let value = parsed["v"].clone();
        let mut slot = &mut root;
        let parts: Vec<&str> = key.trim().split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let table = slot
                .as_table_mut()
                .ok_or_else(|| Failure::config(format!("override '{item}': '{part}' is not a table")))?;
            if i + 1 == parts.len() {
                table.insert(part.to_string(), value.clone());
                break;
            }
            slot = table
                .entry(part.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        }
    }
    root.try_into().map_err(|e| Failure::config(format!("override: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use fpca_core::ica::SigmaChoice;

    #[test]
    fn parses_documented_example() {
        let text = r#"
seed = 7
replicas = 3
[data]
model = "m.json"
samples = 1000
[params]
resolvability = 2.5
sigma = { mode = "fixed", sigma = 0.4 }
[gmm]
sigma_u = 0.5
"#;
        let c = RunConfig::parse(text).unwrap();
        assert_eq!(c.seed, Some(7));
        assert_eq!(c.params.resolvability, 2.5);
        assert_eq!(c.params.sigma, SigmaChoice::Fixed { sigma: 0.4 });
        assert_eq!(c.params.d, ParamSet::default().d);
        assert_eq!(c.gmm.sigma_u, 0.5);
        c.validate().unwrap();
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(RunConfig::parse("sede = 1").is_err());
        assert!(RunConfig::parse("[params]\nresolvabilty = 1.0").is_err());
    }

    #[test]
    fn overrides() {
        let p = apply_overrides(&ParamSet::default(), &["max_retries=3".into(), "guard.warn=0.5".into()]).unwrap();
        assert_eq!(p.max_retries, 3);
        assert_eq!(p.guard.warn, 0.5);
        let p = apply_overrides(&ParamSet::default(), &["basis=complex".into()]).unwrap();
        assert_eq!(p.basis, fpca_core::tensor_decomp::SubspaceBasis::Complex);
        assert!(apply_overrides(&ParamSet::default(), &["nope=1".into()]).is_err());
        assert!(apply_overrides(&ParamSet::default(), &["max_retries".into()]).is_err());
    }
}
