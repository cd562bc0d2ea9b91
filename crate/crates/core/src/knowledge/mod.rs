//! Experience stores: verified-correct consultations (CorrectKB) and
//! reflections on failed ones (ChainKB), with cosine top-K retrieval.

mod records;
mod retrieval;
mod routing;
pub(crate) mod store;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use records::{ChainRecord, CorrectRecord, KbRecord};
pub use retrieval::{cosine, rank, render_experience, retrieve, RetrievalHit, RetrievalMode, EXPERIENCE_HEADER};
pub use routing::{build_chain_record, build_correct_record, route_and_store, RouteOutcome};
pub use store::{KbEntry, KbKind, KbStore, SCHEMA_VERSION};

pub const DEFAULT_TOP_K: usize = 5;

#[derive(Debug, Error)]
pub enum KbError {
    #[error("embedding dimension {got} does not match store dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("cosine of a zero vector is undefined")]
    ZeroVector,
    #[error("line {line}: {reason}")]
    SchemaVersionMismatch { line: usize, reason: String },
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// What the engine may do with retrieved experience at a given point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KbGate {
    NoKb,
    InjectIntoPrompt,
    PostHocReflect,
}

/// Gate for the round about to start (`round`), given whether round 1 ended
/// in consensus and whether the latest summary records a conflict.
///
/// Round 1 never sees stored experience. After a first-round consensus the
/// stores are only consulted as a reflection once the discussion is over.
/// From round 2 on, a live conflict opens the stores to the prompts.
pub fn kb_gate(round: u32, round1_had_consensus: bool, current_conflict: bool) -> KbGate {
    match (round, round1_had_consensus, current_conflict) {
        (0 | 1, _, _) => KbGate::NoKb,
        (_, true, _) => KbGate::PostHocReflect,
        (_, false, true) => KbGate::InjectIntoPrompt,
        (_, false, false) => KbGate::NoKb,
    }
}
