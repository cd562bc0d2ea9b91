//! Multi-disciplinary team (MDT) consultation engine.
//!
//! A panel of specialist agents deliberates a multiple-choice medical case
//! over several rounds. A lead physician condenses every round into a
//! four-category summary, later rounds only see the two most recent
//! summaries, and the discussion ends on consensus or falls back to a
//! majority vote. Verified outcomes feed two embedding-indexed experience
//! stores that are retrieved into later consultations.

pub mod agent;
pub mod aggregation;
pub mod case;
pub mod consultation;
pub mod error;
pub mod harness;
pub mod knowledge;
pub mod llm;
pub mod pool;
pub mod prompts;
pub mod result;
pub mod review;
pub mod role;
pub mod statement;
pub mod triage;

pub use case::{normalize_option_id, PatientCase};
pub use error::{Error, Result};
pub use pool::{HistoricalSharedPool, RoundSummary};
pub use result::{ConsultationResult, Termination};
pub use role::RoleId;
pub use statement::Statement;
