//! Run configuration: one TOML file, dotted-key overrides, environment output root.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use ncnn::data::{CorpusSpec, NoiseBankSpec, SplitPlan};
use ncnn::harness::ExperimentConfig;
use serde::{Deserialize, Serialize};

/// Overrides `paths.output` when set.
pub const OUTPUT_ENV: &str = "NCNN_OUTPUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Root for generated data, checkpoints and reports.
    pub output: String,
    /// Corpus directory; empty means `<output>/corpus`, generated on demand.
    pub corpus: String,
    /// Noise-bank directory; empty means `<output>/noise`, generated on demand.
    pub noise_bank: String,
    /// Manifest file; empty means `<output>/manifest.tsv`.
    pub manifest: String,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            output: "runs".into(),
            corpus: String::new(),
            noise_bank: String::new(),
            manifest: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub corpus: CorpusSpec,
    pub noise: NoiseBankSpec,
    pub split: SplitPlan,
    pub experiment: ExperimentConfig,
}

/// Raised for anything the user can fix in the configuration (exit code 2).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    anyhow!(ConfigError(msg.into()))
}

fn parse_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Replaces the value at `key` (dotted path); the key must already exist.
fn apply_override(root: &mut toml::Value, key: &str, raw: &str) -> anyhow::Result<()> {
    let mut node = root;
    for part in key.split('.') {
        node = node
            .as_table_mut()
            .and_then(|t| t.get_mut(part))
            .ok_or_else(|| config_err(format!("unknown configuration key {key:?}")))?;
    }
    let value = parse_value(raw);
    if node.is_table() {
        bail!(ConfigError(format!("{key:?} is a section; override one of its keys")));
    }
    *node = value;
    Ok(())
}

impl RunConfig {
    /// Loads `file` (or defaults) and applies `key=value` overrides in order.
    pub fn load(file: Option<&Path>, overrides: &[String]) -> anyhow::Result<Self> {
        let base = match file {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| config_err(format!("cannot read config {}: {e}", p.display())))?;
                toml::from_str::<RunConfig>(&text).map_err(|e| config_err(format!("{}: {e}", p.display())))?
            }
            None => RunConfig::default(),
        };
        let mut tree = toml::Value::try_from(&base).context("serialising configuration")?;
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| config_err(format!("override {o:?} is not key=value")))?;
            apply_override(&mut tree, k.trim(), v.trim())?;
        }
        let mut cfg: RunConfig = tree.try_into().map_err(|e| config_err(format!("invalid override: {e}")))?;
        if let Ok(root) = std::env::var(OUTPUT_ENV) {
            if !root.is_empty() {
                cfg.paths.output = root;
            }
        }
        Ok(cfg)
    }

    pub fn output_dir(&self) -> PathBuf {
        PathBuf::from(&self.paths.output)
    }

    fn or_output(&self, value: &str, default: &str) -> PathBuf {
        if value.is_empty() {
            self.output_dir().join(default)
        } else {
            PathBuf::from(value)
        }
    }

    pub fn corpus_dir(&self) -> PathBuf {
        self.or_output(&self.paths.corpus, "corpus")
    }

    pub fn noise_dir(&self) -> PathBuf {
        self.or_output(&self.paths.noise_bank, "noise")
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.or_output(&self.paths.manifest, "manifest.tsv")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }
}

/// `key = default` for every configuration key, one per line.
pub fn key_listing() -> String {
    fn walk(prefix: &str, v: &toml::Value, out: &mut Vec<String>) {
        match v {
            toml::Value::Table(t) => {
                for (k, child) in t {
                    let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&key, child, out);
                }
            }
            other => out.push(format!("  {prefix} = {other}")),
        }
    }
    let tree = toml::Value::try_from(RunConfig::default()).expect("defaults serialise");
    let mut lines = Vec::new();
    walk("", &tree, &mut lines);
    lines.join("\n")
}
