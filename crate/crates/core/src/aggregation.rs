//! Lead Physician: condense a round's statements into a four-category summary.
//!
//! Votes always come from the parsed statements. Whatever the model writes,
//! a stored summary has an empty conflict list exactly when the votes are
//! unanimous.

use std::collections::BTreeMap;

use indexmap::IndexMap;
use serde_json::{json, Map, Value};

use crate::agent::{background_block, tag, AgentContext};
use crate::case::PatientCase;
use crate::error::Result;
use crate::pool::{distinct_votes, HistoricalSharedPool, RoundSummary};
use crate::prompts::render;
use crate::role::RoleId;
use crate::statement::Statement;

/// Summary plus whether it came from the mechanical fallback.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Aggregated {
    pub summary: RoundSummary,
    pub fallback: bool,
}

pub fn votes_of(statements: &[Statement]) -> BTreeMap<RoleId, String> {
    statements
        .iter()
        .map(|s| (s.role, s.choice_id.clone()))
        .collect()
}

/// The statements in the `{"<Role>": {"Reasoning": ..., "Choice": "ID: text"}}`
/// shape the lead physician is shown.
pub fn statements_json(statements: &[Statement]) -> String {
    let mut map = IndexMap::new();
    for s in statements {
        map.insert(
            s.role.name(),
            json!({"Reasoning": s.reasoning, "Choice": s.choice_label()}),
        );
    }
    serde_json::to_string_pretty(&map).expect("statements serialize")
}

/// The four category arrays as parsed from a reply, before enforcement.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Categories {
    pub consistency: Vec<String>,
    pub conflict: Vec<String>,
    pub independence: Vec<String>,
    pub integration: Vec<String>,
}

/// Locate the JSON object in a reply and read the four categories from it,
/// either nested under a `"round N"` key or at top level.
pub fn parse_categories(reply: &str) -> std::result::Result<Categories, String> {
    let value = extract_json_object(reply).ok_or("no JSON object in reply")?;
    let obj = value.as_object().ok_or("reply JSON is not an object")?;
    let body = obj
        .iter()
        .find(|(k, v)| k.trim().to_lowercase().starts_with("round") && v.is_object())
        .and_then(|(_, v)| v.as_object())
        .unwrap_or(obj);
    let field = |name: &str| -> Vec<String> {
        body.iter()
            .find(|(k, _)| k.trim().eq_ignore_ascii_case(name))
            .map(|(_, v)| text_items(v))
            .unwrap_or_default()
    };
    let cats = Categories {
        consistency: field("consistency"),
        conflict: field("conflict"),
        independence: field("independence"),
        integration: field("integration"),
    };
    if cats.integration.is_empty() {
        return Err("integration is missing or empty".into());
    }
    Ok(cats)
}

pub(crate) fn extract_json_object(reply: &str) -> Option<Value> {
    let start = reply.find('{')?;
    let end = reply.rfind('}')?;
    if end < start {
        return None;
    }
    serde_json::from_str(&reply[start..=end]).ok()
}

/// Flatten a JSON value into non-empty text items.
pub(crate) fn text_items(v: &Value) -> Vec<String> {
    match v {
        Value::Null => vec![],
        Value::String(s) => {
            let s = s.trim();
            if s.is_empty() {
                vec![]
            } else {
                vec![s.to_string()]
            }
        }
        Value::Array(items) => items.iter().flat_map(text_items).collect(),
        Value::Object(m) if m.is_empty() => vec![],
        other => vec![other.to_string()],
    }
}

fn divergence_lines(statements: &[Statement]) -> Vec<String> {
    let mut by_choice: IndexMap<&str, Vec<&Statement>> = IndexMap::new();
    for s in statements {
        by_choice.entry(s.choice_id.as_str()).or_default().push(s);
    }
    by_choice.sort_keys();
    by_choice
        .values()
        .map(|group| {
            let roles: Vec<&str> = group.iter().map(|s| s.role.name()).collect();
            format!("{} chose {}", roles.join(", "), group[0].choice_label())
        })
        .collect()
}

/// Mechanical digest used when the lead physician's reply cannot be parsed.
pub fn fallback_summary(round: u32, statements: &[Statement]) -> RoundSummary {
    let votes = votes_of(statements);
    let unanimous = distinct_votes(&votes) == 1;
    let consistency = if unanimous {
        vec![format!(
            "All specialists chose {}",
            statements[0].choice_label()
        )]
    } else {
        vec![]
    };
    let conflict = if unanimous {
        vec![]
    } else if statements.is_empty() {
        vec!["No specialist gave a valid choice this round.".to_string()]
    } else {
        divergence_lines(statements)
    };
    let mut integration: Vec<String> = statements
        .iter()
        .map(|s| {
            let first = s.reasoning.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
            format!("{} chose {}: {}", s.role, s.choice_label(), first.trim())
        })
        .collect();
    if integration.is_empty() {
        integration.push("No specialist gave a valid choice this round.".to_string());
    }
    RoundSummary {
        round,
        consistency,
        conflict,
        independence: vec![],
        integration,
        votes,
    }
}

/// Build the stored summary from parsed categories, forcing the conflict
/// list to agree with the votes.
pub fn enforce(round: u32, cats: Categories, statements: &[Statement]) -> RoundSummary {
    let votes = votes_of(statements);
    let unanimous = distinct_votes(&votes) == 1;
    let conflict = if unanimous {
        vec![]
    } else if cats.conflict.is_empty() {
        tracing::warn!(round, "summary reported no conflict for split votes; adding vote split");
        if statements.is_empty() {
            vec!["No specialist gave a valid choice this round.".to_string()]
        } else {
            divergence_lines(statements)
        }
    } else {
        cats.conflict
    };
    RoundSummary {
        round,
        consistency: cats.consistency,
        conflict,
        independence: cats.independence,
        integration: cats.integration,
        votes,
    }
}

pub fn summarize_round(
    round: u32,
    statements: &[Statement],
    case: &PatientCase,
    ctx: &AgentContext<'_>,
) -> Result<Aggregated> {
    if statements.is_empty() {
        return Ok(Aggregated {
            summary: fallback_summary(round, statements),
            fallback: true,
        });
    }
    let user = render(
        &ctx.templates.lead_physician_user,
        &[
            ("round", &round.to_string()),
            ("background", &background_block(case)),
            ("question", &case.question),
            ("options", &case.options_json()),
            ("statements", &statements_json(statements)),
        ],
    )?;
    let request = ctx.request(
        tag(RoleId::LeadPhysician, round, case),
        ctx.templates.lead_physician_system.clone(),
        user,
    );
    match ctx.ask_parsed(&request, parse_categories)? {
        Ok((cats, _)) => Ok(Aggregated {
            summary: enforce(round, cats, statements),
            fallback: false,
        }),
        Err(reason) => {
            tracing::warn!(case = %case.case_id, round, %reason, "lead physician reply unparseable; using fallback summary");
            Ok(Aggregated {
                summary: fallback_summary(round, statements),
                fallback: true,
            })
        }
    }
}

pub fn append_summary(pool: &mut HistoricalSharedPool, summary: RoundSummary) -> Result<()> {
    pool.append(summary)
}

/// A `{"round N": {...}}` object for the given summaries, as agents see them.
pub fn window_json(summaries: &[&RoundSummary]) -> String {
    let mut map = Map::new();
    for s in summaries {
        map.insert(
            format!("round {}", s.round),
            json!({
                "consistency": s.consistency,
                "conflict": s.conflict,
                "independence": s.independence,
                "integration": s.integration,
            }),
        );
    }
    serde_json::to_string_pretty(&Value::Object(map)).expect("window serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn case() -> PatientCase {
        PatientCase::new(
            "a",
            "",
            "Which pathophysiology?",
            [("A", "a"), ("B", "b"), ("C", "c"), ("D", "d"), ("E", "e")],
            None,
        )
        .unwrap()
    }

    fn st(role: RoleId, id: &str) -> Statement {
        Statement::new(&case(), 1, role, format!("{role} reasoning"), id, id.to_lowercase()).unwrap()
    }

    #[test]
    fn parses_nested_and_flat_shapes() {
        let nested = r#"Here you go:
{"round 2": {"consistency": ["x"], "conflict": [], "independence": "solo", "integration": ["y", "z"]}}"#;
        let c = parse_categories(nested).unwrap();
        assert_eq!(c.consistency, ["x"]);
        assert_eq!(c.independence, ["solo"]);
        assert_eq!(c.integration, ["y", "z"]);

        let flat = r#"{"Consistency": ["x"], "Integration": "y"}"#;
        let c = parse_categories(flat).unwrap();
        assert_eq!(c.integration, ["y"]);
        assert!(c.conflict.is_empty());
    }

    #[test]
    fn missing_integration_is_parse_error() {
        assert!(parse_categories(r#"{"consistency": ["x"]}"#).is_err());
        assert!(parse_categories("no json here").is_err());
        assert!(parse_categories(r#"{"integration": []}"#).is_err());
    }

    #[test]
    fn conflict_cleared_when_unanimous() {
        let statements = [st(RoleId::Radiologist, "B"), st(RoleId::Pathologist, "B")];
        let cats = Categories {
            conflict: vec!["No conflict exists.".into()],
            integration: vec!["B".into()],
            ..Default::default()
        };
        let s = enforce(1, cats, &statements);
        assert!(s.conflict.is_empty());
        s.validate().unwrap();
    }

    #[test]
    fn conflict_filled_when_votes_split() {
        let statements = [st(RoleId::Neurologist, "B"), st(RoleId::Pathologist, "D")];
        let cats = Categories {
            integration: vec!["D".into()],
            ..Default::default()
        };
        let s = enforce(1, cats, &statements);
        assert_eq!(
            s.conflict,
            ["Neurologist chose B: b", "Pathologist chose D: d"]
        );
        s.validate().unwrap();
    }

    #[test]
    fn fallback_digest_shapes() {
        let split = [
            st(RoleId::Pediatrician, "D"),
            st(RoleId::Neurologist, "B"),
            st(RoleId::Pharmacist, "D"),
        ];
        let s = fallback_summary(3, &split);
        assert!(s.consistency.is_empty());
        assert_eq!(
            s.conflict,
            ["Neurologist chose B: b", "Pediatrician, Pharmacist chose D: d"]
        );
        assert!(s.independence.is_empty());
        assert_eq!(s.integration.len(), 3);
        s.validate().unwrap();

        let single = [st(RoleId::Pharmacist, "C")];
        let s = fallback_summary(1, &single);
        assert!(s.conflict.is_empty());
        assert_eq!(s.consistency, ["All specialists chose C: c"]);
        s.validate().unwrap();

        let s = fallback_summary(2, &[]);
        assert!(!s.conflict.is_empty());
        s.validate().unwrap();
    }

    #[test]
    fn statements_json_uses_role_keys() {
        let json = statements_json(&[st(RoleId::Pharmacist, "E")]);
        let v: Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["Pharmacist"]["Choice"], "E: e");
    }
}
