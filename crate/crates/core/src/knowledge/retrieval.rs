use std::cmp::Ordering;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::store::{KbEntry, KbKind, KbStore};
use super::KbError;
use crate::error::Result;
use crate::llm::Backend;

/// First line of every block of retrieved experience shown to an agent.
pub const EXPERIENCE_HEADER: &str = "=== Retrieved consultation experience ===";

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalHit {
    pub entry: Arc<KbEntry>,
    pub score: f64,
}

/// Whether top-K is taken from each store separately or from both together.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrievalMode {
    #[default]
    PerKb,
    Pooled,
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, KbError> {
    if a.len() != b.len() {
        return Err(KbError::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(KbError::ZeroVector);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

fn hit_order(a: &RetrievalHit, b: &RetrievalHit) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.entry.created_at.cmp(&b.entry.created_at))
        .then_with(|| a.entry.id.cmp(&b.entry.id))
}

/// Exhaustive scan: score every entry and keep the best `k`, ordered by
/// score descending, then creation time, then id.
pub fn rank(query: &[f64], entries: &[Arc<KbEntry>], k: usize) -> Result<Vec<RetrievalHit>, KbError> {
    let mut hits = entries
        .iter()
        .map(|e| {
            Ok(RetrievalHit {
                score: cosine(query, &e.embedding.values)?,
                entry: e.clone(),
            })
        })
        .collect::<Result<Vec<_>, KbError>>()?;
    hits.sort_by(hit_order);
    hits.truncate(k);
    Ok(hits)
}

/// Embed `query_text` once and return the best hits from each store.
pub fn retrieve(
    query_text: &str,
    backend: &dyn Backend,
    correct_kb: &KbStore,
    chain_kb: &KbStore,
    k: usize,
    mode: RetrievalMode,
) -> Result<(Vec<RetrievalHit>, Vec<RetrievalHit>)> {
    let correct = correct_kb.snapshot();
    let chain = chain_kb.snapshot();
    if k == 0 || (correct.is_empty() && chain.is_empty()) {
        return Ok((vec![], vec![]));
    }
    let query = backend.embed(query_text)?;
    match mode {
        RetrievalMode::PerKb => Ok((
            rank(&query.values, &correct, k)?,
            rank(&query.values, &chain, k)?,
        )),
        RetrievalMode::Pooled => {
            let all: Vec<_> = correct.into_iter().chain(chain).collect();
            let (c, ch): (Vec<_>, Vec<_>) = rank(&query.values, &all, k)?
                .into_iter()
                .partition(|h| h.entry.kind() == KbKind::Correct);
            Ok((c, ch))
        }
    }
}

/// Prompt block for retrieved experience; empty when there are no hits.
pub fn render_experience(correct: &[RetrievalHit], chain: &[RetrievalHit]) -> String {
    if correct.is_empty() && chain.is_empty() {
        return String::new();
    }
    let mut out = format!("\n{EXPERIENCE_HEADER}\n");
    if !correct.is_empty() {
        out.push_str("Similar past cases the team answered correctly (CorrectKB):\n");
        for h in correct {
            out.push_str(&format!("- {}\n", h.entry.record.to_json()));
        }
    }
    if !chain.is_empty() {
        out.push_str("Reflections on similar past cases the team got wrong (ChainKB):\n");
        for h in chain {
            out.push_str(&format!("- {}\n", h.entry.record.to_json()));
        }
    }
    out
}
