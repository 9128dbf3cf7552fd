//! Configuration files and command-line overrides.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use aiar_core::event::Millis;
use aiar_core::PipelineConfig;
use aiar_sim::script::BUILTIN_SCRIPTS;
use aiar_sim::{AnalystScript, CostModel};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Io { .. } => 2,
        }
    }

    pub fn io(context: impl Into<String>, source: io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }
}

impl From<aiar_core::ConfigError> for CliError {
    fn from(e: aiar_core::ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<aiar_sim::SimError> for CliError {
    fn from(e: aiar_sim::SimError) -> Self {
        CliError::Config(e.to_string())
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(format!("cannot read {}", path.display()), e))
}

fn scalar(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Array(items) => items.iter().map(scalar).collect::<Vec<_>>().join(","),
        other => other.to_string(),
    }
}

fn flatten_into(prefix: &str, table: &toml::Table, out: &mut Vec<(String, String)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            toml::Value::Table(t) => flatten_into(&key, t, out),
            other => out.push((key, scalar(other))),
        }
    }
}

/// Dotted `key = value` pairs from a TOML document. Tables and dotted keys
/// are equivalent: `[policy] budget = 40` and `policy.budget = 40` agree.
pub fn flatten_toml(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let table: toml::Table = text.parse().map_err(|e| CliError::Config(format!("{e}")))?;
    let mut out = Vec::new();
    flatten_into("", &table, &mut out);
    Ok(out)
}

/// Defaults, then the config file, then the model file (scorer keys only),
/// then each `--set`, then validation.
pub fn load_pipeline_config(
    config: Option<&Path>,
    model: Option<&Path>,
    sets: &[String],
) -> Result<PipelineConfig, CliError> {
    let mut cfg = PipelineConfig::default();
    if let Some(path) = config {
        for (k, v) in flatten_toml(&read(path)?)? {
            cfg.set(&k, &v)?;
        }
    }
    if let Some(path) = model {
        for (k, v) in flatten_toml(&read(path)?)? {
            if !k.starts_with("scorer.") {
                return Err(CliError::Config(format!(
                    "{}: model files hold scorer.* keys only, found `{k}`",
                    path.display()
                )));
            }
            cfg.set(&k, &v)?;
        }
    }
    for pair in sets {
        cfg.set_pair(pair)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_cost(path: Option<&Path>) -> Result<CostModel, CliError> {
    let cost = match path {
        None => CostModel::default(),
        Some(p) => toml::from_str(&read(p)?).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
    };
    cost.validate()?;
    Ok(cost)
}

/// A built-in script name, or a path to a JSON script.
pub fn load_script(arg: &str, duration_ms: Millis) -> Result<AnalystScript, CliError> {
    if let Some(s) = AnalystScript::builtin(arg, duration_ms) {
        return Ok(s);
    }
    let path = PathBuf::from(arg);
    if !path.exists() {
        return Err(CliError::Config(format!(
            "unknown script `{arg}`: not one of {BUILTIN_SCRIPTS:?} and no such file"
        )));
    }
    Ok(AnalystScript::from_json(&read(&path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tables_and_dotted_keys_flatten_alike() {
        let a = flatten_toml("[policy]\nbudget = 40\n[scorer]\nweights = [1, 2.5, 3, 4]\n").unwrap();
        let b = flatten_toml("policy.budget = 40\nscorer.weights = [1, 2.5, 3, 4]\n").unwrap();
        assert_eq!(a, b);
        assert!(a.contains(&("scorer.weights".into(), "1,2.5,3,4".into())));
        assert!(flatten_toml("= nope").is_err());
    }

    #[test]
    fn errors_map_to_exit_codes() {
        let missing = load_pipeline_config(Some(Path::new("/no/such/file.toml")), None, &[]).unwrap_err();
        assert_eq!(missing.exit_code(), 2);
        let bad = load_pipeline_config(None, None, &["policy.nope=1".into()]).unwrap_err();
        assert_eq!(bad.exit_code(), 1);
        let band = load_pipeline_config(None, None, &["sink.informational_opacity=0.9".into()]).unwrap_err();
        assert_eq!(band.exit_code(), 1);
        assert_eq!(load_script("nonesuch", 10).unwrap_err().exit_code(), 1);
    }
}
