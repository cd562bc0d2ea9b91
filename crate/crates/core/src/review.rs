//! Safety and Ethics Reviewer: last pass over the team's answer before delivery.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::agent::{background_block, tag, AgentContext};
use crate::case::PatientCase;
use crate::error::{Error, Result};
use crate::pool::RoundSummary;
use crate::prompts::render;
use crate::role::RoleId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewOutcome {
    pub final_choice_id: String,
    pub review_notes: String,
    /// The reviewer delivered a different option than the team proposed.
    pub overridden: bool,
    /// The reviewer's answer could not be used; the proposed choice was kept.
    pub override_failed: bool,
}

fn answer_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)answer\s*id[\s:*]*\{?\s*([A-Za-z0-9]+)\s*\}?").unwrap()
    })
}

/// Read the last `Answer ID: {X}: {...}` line. Returns the raw id and the
/// notes written before it.
pub fn parse_answer_id(reply: &str) -> Option<(String, String)> {
    let caps = answer_re().captures_iter(reply).last()?;
    let start = caps.get(0).unwrap().start();
    Some((caps[1].to_string(), reply[..start].trim().to_string()))
}

pub fn safety_review(
    case: &PatientCase,
    final_summary: &RoundSummary,
    proposed_choice: &str,
    ctx: &AgentContext<'_>,
    experience: &str,
) -> Result<ReviewOutcome> {
    let proposed = case
        .resolve_option(proposed_choice)
        .ok_or_else(|| Error::InvalidStatement(format!("proposed choice {proposed_choice:?} is not an option")))?
        .to_string();
    let user = render(
        &ctx.templates.safety_reviewer_user,
        &[
            ("background", &background_block(case)),
            ("question", &case.question),
            ("options", &case.options_json()),
            (
                "proposed",
                &format!("{}: {}", proposed, case.option_text(&proposed).unwrap_or_default()),
            ),
            ("summary", &final_summary.render_text()),
            ("experience", experience),
        ],
    )?;
    let request = ctx.request(
        tag(RoleId::SafetyEthicsReviewer, 0, case),
        ctx.templates.safety_reviewer_system.clone(),
        user,
    );
    let parsed = ctx.ask_parsed(&request, |reply| {
        let (raw, notes) = parse_answer_id(reply).ok_or("no `Answer ID:` line")?;
        let id = case
            .resolve_option(&raw)
            .ok_or_else(|| format!("answer id {raw:?} is not an option"))?;
        Ok((id.to_string(), notes))
    })?;
    Ok(match parsed {
        Ok(((id, notes), _)) => {
            let overridden = id != proposed;
            if overridden {
                tracing::info!(case = %case.case_id, from = %proposed, to = %id, "safety reviewer changed the answer");
            }
            ReviewOutcome {
                final_choice_id: id,
                review_notes: notes,
                overridden,
                override_failed: false,
            }
        }
        Err(reason) => {
            tracing::warn!(case = %case.case_id, %reason, "safety review unusable; keeping proposed answer");
            ReviewOutcome {
                final_choice_id: proposed,
                review_notes: reason,
                overridden: false,
                override_failed: true,
            }
        }
    })
}
