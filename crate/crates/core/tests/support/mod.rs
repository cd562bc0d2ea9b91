//! Scripted mock scenarios shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use indexmap::IndexMap;
use mdt_core::llm::{MockScript, ScriptRule, ScriptedReply};
use mdt_core::{PatientCase, RoleId};

pub const LETTERS: [&str; 5] = ["A", "B", "C", "D", "E"];

/// Marker the scripted lead physician writes into round `r`'s summary.
pub fn sentinel(round: u32) -> String {
    format!("SENTINEL<{round}>")
}

pub fn make_case(id: &str, n_options: usize, gold: &str) -> PatientCase {
    let options: IndexMap<String, String> = LETTERS[..n_options]
        .iter()
        .map(|l| (l.to_string(), format!("treatment {l}")))
        .collect();
    PatientCase {
        case_id: id.to_string(),
        background: format!("Patient record for {id}."),
        question: format!("Which option is best for case {id}?"),
        options,
        gold_answer: Some(gold.to_string()),
    }
}

pub fn specialist_reply(choice: &str) -> String {
    format!("Assessed the findings from my specialty.\nChoice: {{{choice}}}: {{treatment {choice}}}")
}

pub fn triage_reply(roles: &[RoleId]) -> String {
    let list: Vec<String> = roles.iter().map(|r| format!("{{{}}}", r.name())).collect();
    format!("The presentation needs these doctors.\n[{}]", list.join(", "))
}

/// Lead physician reply that leaves conflict for the engine to fill and
/// tags the integration with the round sentinel.
pub fn lead_reply() -> String {
    r#"{"round {{round}}": {"consistency": ["shared view"], "conflict": [], "independence": [], "integration": ["SENTINEL<{{round}}>"]}}"#
        .to_string()
}

/// Safety reviewer that delivers whatever the team proposed.
pub fn echo_reviewer(letters: &[&str]) -> ScriptedReply {
    ScriptedReply::Conditional {
        default: "No safety concerns.\nAnswer ID: {A}: {treatment A}".into(),
        when_contains: letters
            .iter()
            .map(|l| ScriptRule {
                needle: format!("Team's proposed answer: {l}:"),
                reply: format!("No safety concerns.\nAnswer ID: {{{l}}}: {{treatment {l}}}"),
            })
            .collect(),
    }
}

pub fn correct_record_reply() -> String {
    r#"{"Question": "scripted question", "Answer": "scripted answer", "Summary of S_final^4": "the team agreed"}"#.into()
}

pub fn chain_record_reply() -> String {
    r#"{"Question": "scripted question", "Correct Answer": "gold", "Initial Hypothesis": "h", "Analysis Process": "a", "Final Conclusion": "c", "Error Reflection": "r"}"#.into()
}

/// Chain-of-thought reviewer that answers with the record the prompt asks for.
pub fn cot_reviewer() -> ScriptedReply {
    ScriptedReply::Conditional {
        default: chain_record_reply(),
        when_contains: vec![ScriptRule {
            needle: "reached the correct answer".into(),
            reply: correct_record_reply(),
        }],
    }
}

/// Auxiliary roles every scenario needs.
pub fn base_script() -> MockScript {
    let mut s = MockScript::new();
    s.set("Lead Physician/*", lead_reply());
    s.set("Safety and Ethics Reviewer/*", echo_reviewer(&LETTERS));
    s.set("Chain-of-Thought Reviewer/*", cot_reviewer());
    s
}

/// One case with a fixed panel and per-round votes (`votes[r][i]` is the
/// choice of `roles[i]` in round `r + 1`).
#[derive(Debug, Clone)]
pub struct Plan {
    pub case: PatientCase,
    pub roles: Vec<RoleId>,
    pub votes: Vec<Vec<String>>,
}

impl Plan {
    pub fn add_to(&self, script: &mut MockScript) {
        let id = &self.case.case_id;
        script.set(format!("{id}::Primary Care Doctor/0"), triage_reply(&self.roles));
        for (r, round) in self.votes.iter().enumerate() {
            for (role, choice) in self.roles.iter().zip(round) {
                script.set(
                    format!("{id}::{}/{}", role.name(), r + 1),
                    specialist_reply(choice),
                );
            }
        }
    }

    /// Rounds the engine should run: up to the first unanimous round.
    pub fn expected_rounds(&self, max_rounds: u32) -> u32 {
        for (r, v) in self.votes.iter().enumerate() {
            if r as u32 >= max_rounds {
                break;
            }
            if v.iter().all(|c| c == &v[0]) {
                return r as u32 + 1;
            }
        }
        max_rounds
    }

    /// Ids with the top vote count in the deciding round.
    pub fn expected_leaders(&self, max_rounds: u32) -> Vec<String> {
        let round = &self.votes[self.expected_rounds(max_rounds) as usize - 1];
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for v in round {
            *counts.entry(v).or_default() += 1;
        }
        let top = *counts.values().max().unwrap();
        counts
            .into_iter()
            .filter(|(_, c)| *c == top)
            .map(|(k, _)| k.to_string())
            .collect()
    }
}

pub fn mandatory_plus(extra: &[RoleId]) -> Vec<RoleId> {
    let mut roles: Vec<RoleId> = extra.to_vec();
    for m in RoleId::MANDATORY {
        if !roles.contains(&m) {
            roles.push(m);
        }
    }
    roles
}

/// The case as one MedQA-style JSONL line.
pub fn medqa_line(case: &PatientCase) -> String {
    serde_json::json!({
        "id": case.case_id,
        "question": case.question,
        "options": case.options,
        "answer_idx": case.gold_answer,
    })
    .to_string()
}

pub fn write_dataset(path: &std::path::Path, cases: &[PatientCase]) {
    let body: String = cases.iter().map(|c| medqa_line(c) + "\n").collect();
    std::fs::write(path, body).unwrap();
}
