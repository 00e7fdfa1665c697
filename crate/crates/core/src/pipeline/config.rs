use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::sparse::HardNegativeSource;
use crate::training::TrainingConfig;

/// Pipeline stages in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Pools,
    Warmup,
    Retrieve,
    TrainRanker,
    Rerank,
    Distill,
    RetrieveDistilled,
    Export,
    Eval,
}

impl Stage {
    pub const ALL: [Stage; 9] = [
        Stage::Pools,
        Stage::Warmup,
        Stage::Retrieve,
        Stage::TrainRanker,
        Stage::Rerank,
        Stage::Distill,
        Stage::RetrieveDistilled,
        Stage::Export,
        Stage::Eval,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Pools => "pools",
            Stage::Warmup => "warmup",
            Stage::Retrieve => "retrieve",
            Stage::TrainRanker => "train-ranker",
            Stage::Rerank => "rerank",
            Stage::Distill => "distill",
            Stage::RetrieveDistilled => "retrieve-distilled",
            Stage::Export => "export",
            Stage::Eval => "eval",
        }
    }

    fn all() -> Vec<Stage> {
        Stage::ALL.to_vec()
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown stage {s:?}")))
    }
}

/// Flat pipeline configuration. Training hyper-parameters sit at the top
/// level next to the paths. Relative paths resolve against the config
/// file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// One raw sentence per line.
    pub corpus: PathBuf,
    pub train: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dev: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<PathBuf>,
    pub out_dir: PathBuf,
    #[serde(default = "Stage::all")]
    pub stages: Vec<Stage>,
    #[serde(default)]
    pub hard_negative_source: HardNegativeSource,
    #[serde(flatten)]
    pub training: TrainingConfig,
}

impl PipelineConfig {
    pub fn new(corpus: impl Into<PathBuf>, train: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            corpus: corpus.into(),
            train: train.into(),
            dev: None,
            test: None,
            out_dir: out_dir.into(),
            stages: Stage::all(),
            hard_negative_source: HardNegativeSource::default(),
            training: TrainingConfig::default(),
        }
    }

    /// Parse TOML; relative paths are joined onto `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: impl AsRef<Path>) -> Result<Self> {
        let bad = |e: &dyn fmt::Display| Error::invalid(format!("config: {e}"));
        let table: toml::Table = toml::from_str(text).map_err(|e| bad(&e))?;
        // flattening swallows unknown keys, so check them here
        let training_keys = toml::Table::try_from(TrainingConfig::default()).map_err(|e| bad(&e))?;
        const OWN_KEYS: [&str; 7] = ["corpus", "train", "dev", "test", "out_dir", "stages", "hard_negative_source"];
        if let Some(k) = table
            .keys()
            .find(|k| !OWN_KEYS.contains(&k.as_str()) && !training_keys.contains_key(*k))
        {
            return Err(Error::invalid(format!("config: unknown key {k:?}")));
        }
        let mut cfg: Self = table.try_into().map_err(|e| bad(&e))?;
        let base = base_dir.as_ref();
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.corpus);
        resolve(&mut cfg.train);
        resolve(&mut cfg.out_dir);
        cfg.dev.iter_mut().for_each(resolve);
        cfg.test.iter_mut().for_each(resolve);
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::invalid(format!("config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        self.training.validate()?;
        if self.stages.is_empty() {
            return Err(Error::invalid("no stages selected"));
        }
        for path in [Some(&self.corpus), Some(&self.train), self.dev.as_ref(), self.test.as_ref()]
            .into_iter()
            .flatten()
        {
            if !path.is_file() {
                return Err(Error::invalid(format!("input file {} does not exist", path.display())));
            }
        }
        Ok(())
    }

    /// Hex SHA-256 over the training settings and the bytes of every input
    /// file. Paths, `out_dir` and the stage selection do not contribute, so
    /// the same data and settings hash identically wherever they live.
    pub fn config_hash(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Canonical<'a> {
            training: &'a TrainingConfig,
            hard_negative_source: HardNegativeSource,
            corpus: String,
            train: String,
            dev: Option<String>,
            test: Option<String>,
        }
        let digest = |p: &Path| -> Result<String> {
            let bytes = fs::read(p).map_err(|e| Error::io(p, e))?;
            Ok(hex::encode(Sha256::digest(&bytes)))
        };
        let canonical = Canonical {
            training: &self.training,
            hard_negative_source: self.hard_negative_source,
            corpus: digest(&self.corpus)?,
            train: digest(&self.train)?,
            dev: self.dev.as_deref().map(digest).transpose()?,
            test: self.test.as_deref().map(digest).transpose()?,
        };
        Ok(hex::encode(Sha256::digest(serde_json::to_vec(&canonical)?)))
    }
}
