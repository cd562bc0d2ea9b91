use thiserror::Error;

use crate::llm::LlmError;
use crate::role::RoleId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("option id is empty after normalization: {0:?}")]
    EmptyAfterNormalization(String),

    #[error("invalid case {case_id}: {reason}")]
    InvalidCase { case_id: String, reason: String },

    #[error("invalid statement: {0}")]
    InvalidStatement(String),

    #[error("summary for round {got} cannot follow round {last}")]
    NonContiguousRound { last: u32, got: u32 },

    #[error("historical shared pool has no summary for round {0}")]
    MissingSummary(u32),

    #[error("malformed pool json: {0}")]
    PoolFormat(String),

    #[error("could not parse {what} reply: {reason}")]
    ParseFailure { what: &'static str, reason: String },

    #[error("no specialist produced a parseable choice in any round")]
    StatementParseFailure,

    #[error("role {0} is not a specialist")]
    NotASpecialist(RoleId),

    #[error("prompt template: {0}")]
    Template(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Backend(#[from] LlmError),

    #[error(transparent)]
    Kb(#[from] crate::knowledge::KbError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
