//! Experiment configuration: a TOML file plus CLI-style overrides.
//!
//! Relative paths in the file resolve against the file's directory. Every
//! hyperparameter has a key; the documented schema lives in the README.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::langdist::DistanceKind;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default = "default_seed")]
    seed: u64,
    #[serde(default)]
    lid_enabled: bool,
    data: RawData,
    #[serde(default)]
    model: RawModel,
    #[serde(default)]
    train: RawTrain,
    eval: RawEval,
    output: RawOutput,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawData {
    train_manifest: String,
    anchor_lang: String,
    /// Explicit language order (anchor first); overrides wordlist ordering.
    langs: Option<Vec<String>>,
    /// Directory of wordlist files for distance-based ordering.
    wordlists_dir: Option<String>,
    #[serde(default = "default_order_kind")]
    order_kind: String,
    per_lang_cap: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    #[serde(default = "default_context")]
    context: usize,
    #[serde(default = "default_hidden")]
    hidden_dims: Vec<usize>,
}

impl Default for RawModel {
    fn default() -> Self {
        RawModel {
            context: default_context(),
            hidden_dims: default_hidden(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrain {
    #[serde(default = "default_batch_size")]
    batch_size: usize,
    #[serde(default = "default_grad_accum")]
    grad_accum_steps: usize,
    #[serde(default = "default_max_epochs")]
    max_epochs: usize,
    #[serde(default = "default_learning_rate")]
    learning_rate: f64,
    #[serde(default = "default_true")]
    bucket_by_length: bool,
    #[serde(default = "default_threads")]
    threads: usize,
}

impl Default for RawTrain {
    fn default() -> Self {
        RawTrain {
            batch_size: default_batch_size(),
            grad_accum_steps: default_grad_accum(),
            max_epochs: default_max_epochs(),
            learning_rate: default_learning_rate(),
            bucket_by_length: true,
            threads: default_threads(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEval {
    dev_manifest: String,
    #[serde(default, rename = "test")]
    tests: Vec<RawTestSet>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTestSet {
    name: String,
    manifest: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    checkpoint_dir: String,
}

fn default_seed() -> u64 {
    0
}
fn default_order_kind() -> String {
    "ldnd".into()
}
fn default_context() -> usize {
    2
}
fn default_hidden() -> Vec<usize> {
    vec![32]
}
fn default_batch_size() -> usize {
    8
}
fn default_grad_accum() -> usize {
    16
}
fn default_max_epochs() -> usize {
    50
}
fn default_learning_rate() -> f64 {
    8e-5
}
fn default_true() -> bool {
    true
}
fn default_threads() -> usize {
    1
}

/// A named evaluation manifest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestSet {
    pub name: String,
    pub manifest: PathBuf,
}

/// Fully resolved experiment configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub lid_enabled: bool,
    pub train_manifest: PathBuf,
    pub anchor_lang: String,
    pub langs: Option<Vec<String>>,
    pub wordlists_dir: Option<PathBuf>,
    pub order_kind: DistanceKind,
    pub per_lang_cap: usize,
    pub context: usize,
    pub hidden_dims: Vec<usize>,
    pub batch_size: usize,
    pub grad_accum_steps: usize,
    pub max_epochs: usize,
    pub learning_rate: f64,
    pub bucket_by_length: bool,
    pub threads: usize,
    pub dev_manifest: PathBuf,
    pub tests: Vec<TestSet>,
    pub checkpoint_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let raw_text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let raw: RawConfig = toml::from_str(&raw_text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let resolve = |p: &str| -> PathBuf {
            let p = Path::new(p);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };
        let config = ExperimentConfig {
            seed: raw.seed,
            lid_enabled: raw.lid_enabled,
            train_manifest: resolve(&raw.data.train_manifest),
            anchor_lang: raw.data.anchor_lang,
            langs: raw.data.langs,
            wordlists_dir: raw.data.wordlists_dir.as_deref().map(resolve),
            order_kind: raw.data.order_kind.parse()?,
            per_lang_cap: raw.data.per_lang_cap,
            context: raw.model.context,
            hidden_dims: raw.model.hidden_dims,
            batch_size: raw.train.batch_size,
            grad_accum_steps: raw.train.grad_accum_steps,
            max_epochs: raw.train.max_epochs,
            learning_rate: raw.train.learning_rate,
            bucket_by_length: raw.train.bucket_by_length,
            threads: raw.train.threads,
            dev_manifest: resolve(&raw.eval.dev_manifest),
            tests: raw
                .eval
                .tests
                .iter()
                .map(|t| TestSet {
                    name: t.name.clone(),
                    manifest: resolve(&t.manifest),
                })
                .collect(),
            checkpoint_dir: resolve(&raw.output.checkpoint_dir),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.grad_accum_steps == 0 || self.max_epochs == 0 {
            return Err(Error::Config(
                "batch_size, grad_accum_steps and max_epochs must be >= 1".into(),
            ));
        }
        if self.per_lang_cap == 0 {
            return Err(Error::Config("per_lang_cap must be >= 1".into()));
        }
        if self.threads == 0 {
            return Err(Error::Config("threads must be >= 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if let Some(langs) = &self.langs {
            if langs.first() != Some(&self.anchor_lang) {
                return Err(Error::Config(format!(
                    "explicit language order {langs:?} must start with the anchor `{}`",
                    self.anchor_lang
                )));
            }
        }
        if self.langs.is_none() && self.wordlists_dir.is_none() {
            return Err(Error::Config(
                "need a language order source: either data.langs or data.wordlists_dir".into(),
            ));
        }
        Ok(())
    }
}
