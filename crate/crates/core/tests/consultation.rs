mod support;

use indexmap::IndexMap;
use mdt_core::agent::{AgentContext, FORMAT_REMINDER};
use mdt_core::aggregation::summarize_round;
use mdt_core::consultation::{run_consultation, ConsultationConfig};
use mdt_core::llm::{ChatSettings, MockBackend, MockScript, ScriptRule, ScriptedReply};
use mdt_core::prompts::Templates;
use mdt_core::review::safety_review;
use mdt_core::{PatientCase, RoleId, Statement, Termination};
use support::*;

fn uti_case() -> PatientCase {
    let options: IndexMap<String, String> = [
        ("A", "Ampicillin"),
        ("B", "Ceftriaxone"),
        ("C", "Ciprofloxacin"),
        ("D", "Doxycycline"),
        ("E", "Nitrofurantoin"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect();
    PatientCase::new(
        "uti",
        "Pregnant at 22 weeks, one day of worsening dysuria, afebrile, no flank tenderness.",
        "Which of the following is the best treatment for this patient?",
        options,
        Some("E"),
    )
    .unwrap()
}

fn with_ctx<T>(script: MockScript, f: impl FnOnce(&AgentContext<'_>, &MockBackend) -> T) -> T {
    let backend = MockBackend::new(script).recording();
    let templates = Templates::default();
    let settings = ChatSettings::default();
    let ctx = AgentContext::new(&backend, &templates, &settings);
    f(&ctx, &backend)
}

fn st(case: &PatientCase, role: RoleId, id: &str) -> Statement {
    let text = case.option_text(id).unwrap().to_string();
    Statement::new(case, 1, role, format!("{role} reasoning"), id, text).unwrap()
}

#[test]
fn safety_reviewer_filters_contraindicated_drug() {
    let case = uti_case();
    let statements = vec![
        st(&case, RoleId::Radiologist, "C"),
        st(&case, RoleId::Pathologist, "C"),
        st(&case, RoleId::Pharmacist, "C"),
    ];
    let mut script = MockScript::new();
    script.set("Lead Physician/*", lead_reply());
    script.set(
        "Safety and Ethics Reviewer/0",
        "Fluoroquinolones such as ciprofloxacin are avoided in pregnancy because of fetal cartilage risk. \
         Nitrofurantoin is safe in the second trimester.\nAnswer ID: {E}: {Nitrofurantoin}",
    );
    with_ctx(script, |ctx, backend| {
        let summary = summarize_round(1, &statements, &case, ctx).unwrap().summary;
        let out = safety_review(&case, &summary, "C", ctx, "").unwrap();
        assert_eq!(out.final_choice_id, "E");
        assert!(out.overridden && !out.override_failed);
        assert!(out.review_notes.contains("avoided in pregnancy"));
        let sent = backend.recorded().last().unwrap().user_prompt.clone();
        assert!(sent.contains("C: Ciprofloxacin"));
    });
}

#[test]
fn unusable_review_keeps_the_proposed_answer() {
    let case = uti_case();
    let statements = vec![st(&case, RoleId::Radiologist, "E"), st(&case, RoleId::Pharmacist, "E")];
    let mut script = MockScript::new();
    script.set("Lead Physician/*", lead_reply());
    script.set("Safety and Ethics Reviewer/0", "Looks fine to me.");
    with_ctx(script, |ctx, backend| {
        let summary = summarize_round(1, &statements, &case, ctx).unwrap().summary;
        let out = safety_review(&case, &summary, "E", ctx, "").unwrap();
        assert_eq!(out.final_choice_id, "E");
        assert!(out.override_failed && !out.overridden);
        let reviews = backend
            .recorded()
            .into_iter()
            .filter(|r| r.tag.role == RoleId::SafetyEthicsReviewer)
            .count();
        assert_eq!(reviews, 3, "one ask plus two re-asks");
    });
}

#[test]
fn split_round_keeps_llm_conflict_and_fills_missing_one() {
    let case = uti_case();
    let statements = vec![
        st(&case, RoleId::ObstetricianGynecologist, "E"),
        st(&case, RoleId::Pathologist, "B"),
        st(&case, RoleId::Pharmacist, "E"),
    ];
    let mut script = MockScript::new();
    script.set(
        "Lead Physician/1",
        r#"{"round 1": {"consistency": ["Most choose nitrofurantoin."], "conflict": ["The Pathologist prefers cephalexin-class coverage."], "independence": [], "integration": ["Pick a pregnancy-safe agent."]}}"#,
    );
    with_ctx(script.clone(), |ctx, _| {
        let agg = summarize_round(1, &statements, &case, ctx).unwrap();
        assert!(!agg.fallback);
        assert_eq!(agg.summary.conflict, ["The Pathologist prefers cephalexin-class coverage."]);
        assert_eq!(agg.summary.votes[&RoleId::Pathologist], "B");
    });

    script.set("Lead Physician/1", lead_reply());
    with_ctx(script, |ctx, _| {
        let agg = summarize_round(1, &statements, &case, ctx).unwrap();
        assert!(!agg.summary.conflict.is_empty(), "split votes must record a conflict");
        assert!(agg.summary.conflict.iter().any(|c| c.contains('B')));
    });
}

#[test]
fn unanimous_round_clears_conflict_and_bad_summary_falls_back() {
    let case = uti_case();
    let statements = vec![st(&case, RoleId::Radiologist, "E"), st(&case, RoleId::Pharmacist, "E")];
    let mut script = MockScript::new();
    script.set(
        "Lead Physician/1",
        r#"{"round 1": {"consistency": ["All choose E."], "conflict": ["none really"], "independence": [], "integration": ["E."]}}"#,
    );
    with_ctx(script.clone(), |ctx, _| {
        let agg = summarize_round(1, &statements, &case, ctx).unwrap();
        assert!(agg.summary.conflict.is_empty());
        assert!(agg.summary.is_unanimous());
    });

    script.set("Lead Physician/1", "I summarised it in prose only.");
    with_ctx(script, |ctx, _| {
        let agg = summarize_round(1, &statements, &case, ctx).unwrap();
        assert!(agg.fallback);
        assert!(agg.summary.conflict.is_empty());
        assert!(!agg.summary.integration.is_empty());
    });
}

#[test]
fn reask_recovers_and_silent_specialist_abstains() {
    let case = uti_case();
    let roles = mandatory_plus(&[]);
    let mut script = base_script();
    // The pathologist only answers properly after the format reminder.
    script.set(
        "uti::Pathologist/*",
        ScriptedReply::Conditional {
            default: "Nitrofurantoin seems right.".into(),
            when_contains: vec![ScriptRule {
                needle: FORMAT_REMINDER.trim().into(),
                reply: specialist_reply_for("E", "Nitrofurantoin"),
            }],
        },
    );
    script.set("uti::Radiologist/*", specialist_reply_for("E", "Nitrofurantoin"));
    script.set("uti::Pharmacist/*", "No comment.");
    with_ctx(script, |ctx, _| {
        let out = run_consultation(&case, &roles, ctx, &ConsultationConfig::default(), None).unwrap();
        let r = out.result;
        assert_eq!(r.termination, Termination::Consensus);
        assert_eq!(r.rounds_used, 1);
        assert_eq!(r.final_choice_id, "E");
        assert_eq!(r.abstentions.len(), 1);
        assert_eq!(r.abstentions[0].role, RoleId::Pharmacist);
        assert_eq!(r.final_statements().len(), 2);
    });
}

#[test]
fn all_silent_is_an_error() {
    let case = uti_case();
    let mut script = base_script();
    script.set("Radiologist/*", "nothing");
    script.set("Pathologist/*", "nothing");
    script.set("Pharmacist/*", "nothing");
    with_ctx(script, |ctx, _| {
        let config = ConsultationConfig {
            max_rounds: 2,
            ..ConsultationConfig::default()
        };
        let err = run_consultation(&case, &mandatory_plus(&[]), ctx, &config, None).unwrap_err();
        assert!(matches!(err, mdt_core::Error::StatementParseFailure), "{err:?}");
    });
}

fn specialist_reply_for(id: &str, text: &str) -> String {
    format!("Safe in pregnancy.\nChoice: {{{id}}}: {{{text}}}")
}
