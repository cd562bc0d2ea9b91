//! Chain-of-Thought Reviewer: turn a scored consultation into exactly one
//! knowledge-base record.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::records::{ChainRecord, CorrectRecord, KbRecord};
use super::store::{KbKind, KbStore};
use crate::agent::{background_block, tag, AgentContext};
use crate::aggregation::{extract_json_object, text_items, window_json};
use crate::case::PatientCase;
use crate::error::{Error, Result};
use crate::prompts::render;
use crate::result::ConsultationResult;
use crate::role::RoleId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RouteOutcome {
    Stored { kind: KbKind, id: u64 },
    Skipped { kind: KbKind, reason: String },
}

fn field(obj: &Map<String, Value>, matches: impl Fn(&str) -> bool) -> String {
    obj.iter()
        .find(|(k, _)| matches(&k.trim().to_lowercase()))
        .map(|(_, v)| text_items(v).join("\n"))
        .unwrap_or_default()
}

fn reply_object(reply: &str) -> std::result::Result<Map<String, Value>, String> {
    match extract_json_object(reply) {
        Some(Value::Object(m)) => Ok(m),
        _ => Err("no JSON object in reply".into()),
    }
}

pub fn build_correct_record(reply: &str) -> std::result::Result<CorrectRecord, String> {
    let obj = reply_object(reply)?;
    let record = CorrectRecord {
        question: field(&obj, |k| k == "question"),
        answer: field(&obj, |k| k == "answer"),
        summary_final: field(&obj, |k| k.starts_with("summary")),
    };
    record.validate().map_err(|e| e.to_string())?;
    Ok(record)
}

pub fn build_chain_record(reply: &str) -> std::result::Result<ChainRecord, String> {
    let obj = reply_object(reply)?;
    let record = ChainRecord {
        question: field(&obj, |k| k == "question"),
        correct_answer: field(&obj, |k| k == "correct answer"),
        initial_hypothesis: field(&obj, |k| k == "initial hypothesis"),
        analysis_process: field(&obj, |k| k == "analysis process"),
        final_conclusion: field(&obj, |k| k == "final conclusion"),
        error_reflection: field(&obj, |k| k == "error reflection"),
    };
    record.validate().map_err(|e| e.to_string())?;
    Ok(record)
}

fn label(case: &PatientCase, id: &str) -> String {
    format!("{}: {}", id, case.option_text(id).unwrap_or_default())
}

/// Validate the delivered answer against the gold label and archive the
/// consultation: a correct answer becomes a [`CorrectRecord`] built from the
/// final round, a wrong one a [`ChainRecord`] built from every round.
#[allow(clippy::too_many_arguments)]
pub fn route_and_store(
    case: &PatientCase,
    result: &ConsultationResult,
    delivered_choice: &str,
    ctx: &AgentContext<'_>,
    correct_kb: &KbStore,
    chain_kb: &KbStore,
    source_dataset: &str,
    created_at: DateTime<Utc>,
) -> Result<RouteOutcome> {
    let gold = case.gold_answer.as_deref().ok_or_else(|| Error::InvalidCase {
        case_id: case.case_id.clone(),
        reason: "routing needs a gold answer".into(),
    })?;
    let valid = delivered_choice == gold;
    let kind = if valid { KbKind::Correct } else { KbKind::Chain };
    let summaries: Vec<_> = if valid {
        result.pool.latest().into_iter().collect()
    } else {
        result.pool.iter().collect()
    };
    let system = if valid {
        &ctx.templates.cot_reviewer_correct
    } else {
        &ctx.templates.cot_reviewer_chain
    };
    let user = render(
        &ctx.templates.cot_reviewer_user,
        &[
            ("background", &background_block(case)),
            ("question", &case.question),
            ("options", &case.options_json()),
            ("final_choice", &label(case, delivered_choice)),
            ("gold_choice", &label(case, gold)),
            ("pool", &window_json(&summaries)),
        ],
    )?;
    let request = ctx.request(tag(RoleId::ChainOfThoughtReviewer, 0, case), system.clone(), user);

    let record = if valid {
        ctx.ask_parsed(&request, |r| build_correct_record(r).map(KbRecord::Correct))?
    } else {
        ctx.ask_parsed(&request, |r| build_chain_record(r).map(KbRecord::Chain))?
    };
    let record = match record {
        Ok((record, _)) => record,
        Err(reason) => {
            tracing::warn!(case = %case.case_id, %reason, "reviewer reply unparseable; no record stored");
            return Ok(RouteOutcome::Skipped { kind, reason });
        }
    };
    let embed_text = format!("{}\n{}", case.background, record.question());
    let embedding = ctx.backend.embed(&embed_text)?;
    let store = if valid { correct_kb } else { chain_kb };
    let entry = store.append(record, embedding, source_dataset, created_at)?;
    Ok(RouteOutcome::Stored { kind, id: entry.id })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builds_correct_record_leniently() {
        let reply = r#"Sure. {"Question": ["Best treatment?"], "Answer": "E: Nitrofurantoin", "Summary of {S_final4}": ["all agreed", "safe"]}"#;
        let r = build_correct_record(reply).unwrap();
        assert_eq!(r.question, "Best treatment?");
        assert_eq!(r.summary_final, "all agreed\nsafe");
    }

    #[test]
    fn chain_record_requires_every_field() {
        let reply = r#"{"Question": "q", "Correct Answer": "E", "Initial Hypothesis": "C", "Analysis Process": "p", "Final Conclusion": "C"}"#;
        let err = build_chain_record(reply).unwrap_err();
        assert!(err.contains("Error Reflection"));
        let full = r#"{"Question": "q", "Correct Answer": "E", "Initial Hypothesis": "C", "Analysis Process": "p", "Final Conclusion": "C", "Error Reflection": "missed pregnancy"}"#;
        assert_eq!(build_chain_record(full).unwrap().error_reflection, "missed pregnancy");
    }
}
