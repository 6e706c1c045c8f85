//! Run configuration: TOML file, then `PROSAIL_TVAE_SET` overrides, then
//! `--set` flags, then dedicated flags. Later layers win.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use prosail_tvae::sampler::{ResolvedSampler, SamplerConfig};
use prosail_tvae::tvae::TrainConfig;

use crate::error::{CliError, CliResult};

/// Environment variable holding `key=value` overrides separated by `;` or
/// newlines.
pub const SET_ENV: &str = "PROSAIL_TVAE_SET";
/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "PROSAIL_TVAE_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    pub rows: usize,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self { rows: 20_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluateSection {
    /// Joint LAI/Cab draws per chlorophyll estimate.
    pub ccc_samples: usize,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        Self { ccc_samples: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GradCheckSection {
    pub samples: usize,
    pub tolerance: f64,
    pub beta: f64,
}

impl Default for GradCheckSection {
    fn default() -> Self {
        Self { samples: 20, tolerance: 1e-4, beta: 0.5 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub simulate: SimulateSection,
    pub sampler: SamplerConfig,
    pub train: TrainConfig,
    pub evaluate: EvaluateSection,
    pub grad_check: GradCheckSection,
}

impl RunConfig {
    /// Merges the layers and validates the result.
    pub fn load(file_text: Option<&str>, env_overrides: Option<&str>, flag_overrides: &[String]) -> CliResult<Self> {
        let mut table = match file_text {
            Some(t) => t.parse::<Table>().map_err(|e| CliError::Usage(format!("config file: {}", e.to_string().trim_end())))?,
            None => Table::new(),
        };
        if let Some(env) = env_overrides {
            for item in env.split([';', '\n']).map(str::trim).filter(|s| !s.is_empty()) {
                apply_override(&mut table, item).map_err(|e| CliError::Usage(format!("{SET_ENV}: {e}")))?;
            }
        }
        for item in flag_overrides {
            apply_override(&mut table, item).map_err(|e| CliError::Usage(format!("--set: {e}")))?;
        }
        let cfg: RunConfig = Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Usage(format!("config: {}", e.to_string().trim_end())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        self.sampler.resolve()?;
        self.train.validate()?;
        if self.evaluate.ccc_samples < prosail_tvae::metrics::MIN_CCC_SAMPLES {
            return Err(CliError::Usage(format!(
                "evaluate.ccc_samples must be at least {}",
                prosail_tvae::metrics::MIN_CCC_SAMPLES
            )));
        }
        if !(self.grad_check.tolerance > 0.0) || self.grad_check.samples == 0 {
            return Err(CliError::Usage("grad_check needs samples >= 1 and a positive tolerance".into()));
        }
        Ok(())
    }

    pub fn sampler(&self) -> CliResult<ResolvedSampler> {
        Ok(self.sampler.resolve()?)
    }

    /// Fully expanded TOML, defaults included.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }
}

/// Applies `a.b.c=value`. The value is read as a TOML literal, or as a bare
/// string when it does not parse as one.
pub fn apply_override(table: &mut Table, item: &str) -> Result<(), String> {
    let (key, raw) = item.split_once('=').ok_or_else(|| format!("`{item}` is not key=value"))?;
    let path: Vec<&str> = key.trim().split('.').map(str::trim).collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(format!("bad key `{}`", key.trim()));
    }
    let raw = raw.trim();
    let value = match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => Value::String(raw.to_string()),
    };
    let (last, parents) = path.split_last().expect("nonempty path");
    let mut cur = table;
    for p in parents {
        let entry = cur.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| format!("`{p}` in `{}` is not a table", key.trim()))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layers_apply_in_order() {
        let file = "[train]\nepochs = 4\nbatch_size = 8\n";
        let cfg = RunConfig::load(Some(file), Some("train.epochs=6; simulate.rows = 10"), &["train.epochs=7".into()]).unwrap();
        assert_eq!(cfg.train.epochs, 7);
        assert_eq!(cfg.train.batch_size, 8);
        assert_eq!(cfg.simulate.rows, 10);
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = RunConfig::load(Some("[train]\nepocs = 3\n"), None, &[]).unwrap_err();
        assert!(err.to_string().contains("epocs"), "{err}");
        let err = RunConfig::load(None, None, &["sampler.nosie_level=0.1".into()]).unwrap_err();
        assert!(err.to_string().contains("nosie_level"), "{err}");
    }

    #[test]
    fn expanded_config_round_trips() {
        let cfg = RunConfig::load(None, None, &["train.encoder.d_model=16".into(), "sampler.noise_mode=relative".into()])
            .unwrap();
        let again = RunConfig::load(Some(&cfg.to_toml()), None, &[]).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.sha256(), cfg.sha256());
    }

    #[test]
    fn override_syntax() {
        let mut t = Table::new();
        assert!(apply_override(&mut t, "novalue").is_err());
        assert!(apply_override(&mut t, "a..b=1").is_err());
        apply_override(&mut t, "a=1").unwrap();
        assert!(apply_override(&mut t, "a.b=1").is_err());
        apply_override(&mut t, "s=hello world").unwrap();
        assert_eq!(t["s"].as_str(), Some("hello world"));
    }
}
