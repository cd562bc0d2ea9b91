use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ingest::DatasetKind;
use super::{io_err, HarnessError};
use crate::consultation::DEFAULT_MAX_ROUNDS;
use crate::knowledge::{KbKind, RetrievalMode, DEFAULT_TOP_K};
use crate::llm::{ChatSettings, DEFAULT_MOCK_DIM};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    /// Consult with the knowledge bases and grow them from every case.
    Train,
    /// Consult with read-only knowledge bases.
    #[default]
    Test,
    /// No knowledge bases at all.
    Vanilla,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum BackendConfig {
    Mock {
        /// Script file; without one every call gets the script fallback.
        #[serde(default)]
        script: Option<PathBuf>,
        #[serde(default = "default_dim")]
        embedding_dim: usize,
    },
    /// OpenAI-compatible HTTP endpoint. The key always comes from the
    /// environment.
    #[serde(rename = "openai")]
    OpenAi {
        #[serde(default)]
        base_url: Option<String>,
        #[serde(default)]
        embedding_model: Option<String>,
        #[serde(default)]
        timeout_secs: Option<u64>,
    },
}

fn default_dim() -> usize {
    DEFAULT_MOCK_DIM
}

fn default_seed() -> u64 {
    42
}

fn default_one() -> usize {
    1
}

fn default_in_flight() -> usize {
    8
}

fn default_rounds() -> u32 {
    DEFAULT_MAX_ROUNDS
}

fn default_checkpoint() -> usize {
    100
}

fn default_top_k() -> usize {
    DEFAULT_TOP_K
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset_path: PathBuf,
    pub dataset_kind: DatasetKind,
    #[serde(default)]
    pub mode: RunMode,
    /// Directory holding `correct.jsonl` and `chain.jsonl`.
    #[serde(default)]
    pub kb_dir: Option<PathBuf>,
    /// Where `run_log.jsonl`, `metrics.json` and `curve.csv` go.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Cases evaluated at once. Train mode always runs one at a time.
    #[serde(default = "default_one")]
    pub concurrency: usize,
    /// Cap on backend calls in flight across all cases.
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "default_rounds")]
    pub max_rounds: u32,
    /// Also ask specialists one after another inside a round.
    #[serde(default)]
    pub sequential: bool,
    #[serde(default = "default_checkpoint")]
    pub checkpoint_every: usize,
    #[serde(default)]
    pub limit: Option<usize>,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    #[serde(default)]
    pub retrieval_mode: RetrievalMode,
    #[serde(default)]
    pub templates_dir: Option<PathBuf>,
    /// Tag stored with new KB entries; defaults to the dataset kind.
    #[serde(default)]
    pub source_dataset: Option<String>,
    #[serde(default)]
    pub chat: ChatSettings,
    #[serde(default = "default_backend")]
    pub backend: BackendConfig,
}

fn default_backend() -> BackendConfig {
    BackendConfig::Mock {
        script: None,
        embedding_dim: DEFAULT_MOCK_DIM,
    }
}

impl RunConfig {
    pub fn new(dataset_path: impl Into<PathBuf>, dataset_kind: DatasetKind, mode: RunMode) -> Self {
        RunConfig {
            dataset_path: dataset_path.into(),
            dataset_kind,
            mode,
            kb_dir: None,
            output_dir: None,
            seed: default_seed(),
            concurrency: 1,
            max_in_flight: default_in_flight(),
            max_rounds: DEFAULT_MAX_ROUNDS,
            sequential: false,
            checkpoint_every: default_checkpoint(),
            limit: None,
            top_k: DEFAULT_TOP_K,
            retrieval_mode: RetrievalMode::default(),
            templates_dir: None,
            source_dataset: None,
            chat: ChatSettings::default(),
            backend: default_backend(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        Ok(toml::from_str(text)?)
    }

    /// Read a TOML config; relative paths are taken from the file's directory.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let mut config = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut config.dataset_path);
        config.kb_dir.as_mut().map(fix);
        config.output_dir.as_mut().map(fix);
        config.templates_dir.as_mut().map(fix);
        if let BackendConfig::Mock { script: Some(s), .. } = &mut config.backend {
            fix(s);
        }
        Ok(config)
    }

    pub fn source_name(&self) -> String {
        self.source_dataset
            .clone()
            .unwrap_or_else(|| self.dataset_kind.name().to_string())
    }

    pub fn kb_path(&self, kind: KbKind) -> Option<PathBuf> {
        self.kb_dir.as_ref().map(|d| d.join(kind.file_name()))
    }

    /// Check the settings and that the knowledge bases the mode needs are there.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        if self.concurrency == 0 || self.max_in_flight == 0 {
            return bad("concurrency and max_in_flight must be >= 1");
        }
        if self.max_rounds == 0 {
            return bad("max_rounds must be >= 1");
        }
        if self.top_k == 0 {
            return bad("top_k must be >= 1");
        }
        if self.checkpoint_every == 0 {
            return bad("checkpoint_every must be >= 1");
        }
        if let BackendConfig::Mock { embedding_dim: 0, .. } = self.backend {
            return bad("embedding_dim must be >= 1");
        }
        match self.mode {
            RunMode::Vanilla => {}
            RunMode::Train => {
                let dir = self
                    .kb_dir
                    .as_ref()
                    .ok_or_else(|| HarnessError::Config("train mode needs kb_dir".into()))?;
                std::fs::create_dir_all(dir).map_err(io_err(dir))?;
                for kind in [KbKind::Correct, KbKind::Chain] {
                    let p = dir.join(kind.file_name());
                    std::fs::OpenOptions::new()
                        .create(true)
                        .append(true)
                        .open(&p)
                        .map_err(|e| HarnessError::Config(format!("{} is not writable: {e}", p.display())))?;
                }
            }
            RunMode::Test => {
                let dir = self
                    .kb_dir
                    .as_ref()
                    .ok_or_else(|| HarnessError::Config("test mode needs kb_dir".into()))?;
                for kind in [KbKind::Correct, KbKind::Chain] {
                    let p = dir.join(kind.file_name());
                    std::fs::File::open(&p)
                        .map_err(|e| HarnessError::Config(format!("{} is not readable: {e}", p.display())))?;
                }
            }
        }
        Ok(())
    }
}
