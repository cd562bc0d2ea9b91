//! Benchmark harness: dataset ingestion, batch evaluation, metrics,
//! cross-dataset transfer and knowledge-base bundles.

mod config;
mod cross;
mod eval;
mod ingest;
mod kbio;
mod metrics;

use thiserror::Error;

pub use config::{BackendConfig, RunConfig, RunMode};
pub use cross::{cross_dataset, CrossCell, CrossMatrix, KbSource};
pub use eval::{build_backend, case_seed, evaluate, run, CaseLog, CurvePoint, RunOutput};
pub use ingest::{ingest, parse_record, DatasetKind, PUBMEDQA_OPTIONS};
pub use kbio::{export_bundle, import_bundle, BundleCounts};
pub use metrics::{macro_f1, Metrics};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("line {line}: malformed record: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("unknown dataset kind {0:?}")]
    UnknownKind(String),
    #[error("prediction/gold length mismatch ({predictions} vs {golds})")]
    LengthMismatch { predictions: usize, golds: usize },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Core(#[from] crate::Error),
    #[error(transparent)]
    Kb(#[from] crate::knowledge::KbError),
    #[error(transparent)]
    Llm(#[from] crate::llm::LlmError),
}

pub(crate) fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}
