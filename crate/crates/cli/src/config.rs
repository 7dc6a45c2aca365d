//! TOML run configuration. Relative paths resolve against the directory of
//! the configuration file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use oppo_core::Lang;
use serde::Deserialize;

const PATH_KEYS: &[&str] = &[
    "messages",
    "channels",
    "entities",
    "decisions",
    "gold",
    "anger_lexicon",
    "violence_lexicon",
    "lemma_map",
];

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub language: Option<Lang>,
    #[serde(default)]
    pub paths: BTreeMap<String, PathBuf>,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub annotator_ids: Vec<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    pub min_tokens: Option<usize>,
    pub max_link_ratio: Option<f64>,
    pub top_k: Option<usize>,
    pub annotators: Option<usize>,
    pub conflict_overlap: Option<usize>,
    pub resamples: Option<usize>,
    pub batch_size: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg: RunConfig =
            toml::from_str(&raw).with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for (key, p) in cfg.paths.iter_mut() {
            if !PATH_KEYS.contains(&key.as_str()) {
                bail!("config {}: unknown path key {key:?}", path.display());
            }
            if p.is_relative() {
                *p = base.join(&*p);
            }
            if !p.exists() {
                bail!("config {}: {key} path {} does not exist", path.display(), p.display());
            }
        }
        Ok(cfg)
    }

    /// The flag value if given, else the configured path for `key`.
    pub fn path(&self, flag: &Option<PathBuf>, key: &str) -> Option<PathBuf> {
        flag.clone().or_else(|| self.paths.get(key).cloned())
    }

    pub fn require_path(&self, flag: &Option<PathBuf>, key: &str) -> Result<PathBuf> {
        self.path(flag, key).with_context(|| {
            format!("missing --{}", key.replace('_', "-"))
        })
    }
}
