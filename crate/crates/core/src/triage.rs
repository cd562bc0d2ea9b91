//! Primary Care Doctor: pick the specialist panel for a case.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::agent::{background_block, tag, AgentContext};
use crate::case::PatientCase;
use crate::error::{Error, Result};
use crate::prompts::render;
use crate::role::RoleId;

pub const MIN_PANEL: usize = 2;
pub const MAX_PANEL: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriageDecision {
    pub reasons: String,
    pub roles: Vec<RoleId>,
    /// Mandatory roles the model left out and the engine added.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub injected: Vec<RoleId>,
}

impl TriageDecision {
    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| Error::ParseFailure {
            what: "triage",
            reason,
        };
        if let Some(r) = self.roles.iter().find(|r| !r.is_specialist()) {
            return Err(fail(format!("{r} is not a specialist")));
        }
        if let Some(r) = RoleId::MANDATORY.iter().find(|r| !self.roles.contains(r)) {
            return Err(fail(format!("mandatory role {r} missing")));
        }
        if !(MIN_PANEL..=MAX_PANEL).contains(&self.roles.len()) {
            return Err(fail(format!("panel size {} outside 2..=8", self.roles.len())));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedRoles {
    pub reasons: String,
    pub roles: Vec<RoleId>,
}

fn bracket_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\[([^\[\]]*)\]").unwrap())
}

fn braced_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{([^{}]*)\}").unwrap())
}

/// Extract the `[{Role}, {Role}, ...]` list from a triage reply.
///
/// The last bracketed group holding brace-delimited names is used; text
/// before it is returned as the reasons. Names must match a specialist
/// exactly up to case and whitespace.
pub fn parse_role_list(reply: &str) -> Result<ParsedRoles> {
    let fail = |reason: String| Error::ParseFailure {
        what: "triage",
        reason,
    };
    let groups: Vec<_> = bracket_re().captures_iter(reply).collect();
    let caps = groups
        .iter()
        .rev()
        .find(|c| braced_re().is_match(&c[1]))
        .ok_or_else(|| fail("no bracketed {role} list found".into()))?;
    let mut roles = Vec::new();
    for item in braced_re().captures_iter(&caps[1]) {
        let name = item[1].trim();
        let role = RoleId::from_name(name)
            .filter(|r| r.is_specialist())
            .ok_or_else(|| fail(format!("{name:?} is not a specialist role")))?;
        if !roles.contains(&role) {
            roles.push(role);
        }
    }
    let start = caps.get(0).unwrap().start();
    Ok(ParsedRoles {
        reasons: reply[..start].trim().to_string(),
        roles,
    })
}

pub fn render_role_list(roles: &[RoleId]) -> String {
    let items: Vec<String> = roles.iter().map(|r| format!("{{{}}}", r.name())).collect();
    format!("[{}]", items.join(", "))
}

/// Complete a parsed role list into a valid decision, adding any missing
/// mandatory roles.
pub fn decide(parsed: ParsedRoles) -> Result<TriageDecision> {
    let mut roles = parsed.roles;
    let mut injected = Vec::new();
    for m in RoleId::MANDATORY {
        if !roles.contains(&m) {
            roles.push(m);
            injected.push(m);
        }
    }
    if !injected.is_empty() {
        tracing::warn!(?injected, "triage omitted mandatory roles; injected");
    }
    let decision = TriageDecision {
        reasons: parsed.reasons,
        roles,
        injected,
    };
    decision.validate()?;
    Ok(decision)
}

pub fn triage(case: &PatientCase, ctx: &AgentContext<'_>) -> Result<TriageDecision> {
    let user = render(
        &ctx.templates.triage_user,
        &[
            ("background", &background_block(case)),
            ("question", &case.question),
            ("options", &case.options_json()),
        ],
    )?;
    let request = ctx.request(
        tag(RoleId::PrimaryCareDoctor, 0, case),
        ctx.templates.triage_system.clone(),
        user,
    );
    let parsed = ctx.ask_parsed(&request, |reply| {
        let p = parse_role_list(reply).map_err(|e| e.to_string())?;
        if p.roles.is_empty() {
            return Err("role list is empty".into());
        }
        Ok(p)
    })?;
    match parsed {
        Ok((p, _)) => decide(p),
        Err(reason) => Err(Error::ParseFailure {
            what: "triage",
            reason,
        }),
    }
}
