use serde::{Deserialize, Serialize};

use crate::knowledge::KbKind;
use crate::pool::HistoricalSharedPool;
use crate::role::RoleId;
use crate::statement::Statement;

/// How the consultation reached its answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Termination {
    Consensus,
    MajorityRule,
    TieRandom,
}

/// A specialist whose reply never yielded a valid choice in a round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Abstention {
    pub round: u32,
    pub role: RoleId,
}

/// A knowledge-base entry that was retrieved for this consultation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedRef {
    pub kind: KbKind,
    pub id: u64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsultationResult {
    pub case_id: String,
    pub final_choice_id: String,
    pub termination: Termination,
    pub rounds_used: u32,
    pub pool: HistoricalSharedPool,
    pub per_round_statements: Vec<Vec<Statement>>,
    pub kb_consulted: bool,
    /// Rounds whose specialist prompts carried retrieved experience.
    #[serde(default)]
    pub kb_injected_rounds: Vec<u32>,
    /// Retrieved experience held back for reflection after a first-round consensus.
    #[serde(default)]
    pub kb_post_hoc: bool,
    #[serde(default)]
    pub retrieved: Vec<RetrievedRef>,
    #[serde(default)]
    pub abstentions: Vec<Abstention>,
    /// Rounds whose summary came from the mechanical fallback digest.
    #[serde(default)]
    pub fallback_summary_rounds: Vec<u32>,
    pub rng_seed: u64,
}

impl ConsultationResult {
    pub fn final_statements(&self) -> &[Statement] {
        self.per_round_statements
            .last()
            .map(Vec::as_slice)
            .unwrap_or_default()
    }
}
