use crate::case::PatientCase;
use crate::error::{Error, Result};
use crate::llm::{Backend, CallTag, ChatRequest, ChatSettings};
use crate::prompts::Templates;
use crate::role::RoleId;

pub const DEFAULT_PARSE_RETRIES: u32 = 2;

/// Everything an agent call needs besides its prompt.
#[derive(Clone, Copy)]
pub struct AgentContext<'a> {
    pub backend: &'a dyn Backend,
    pub templates: &'a Templates,
    pub settings: &'a ChatSettings,
    /// Extra attempts with a format reminder after an unparseable reply.
    pub parse_retries: u32,
}

impl<'a> AgentContext<'a> {
    pub fn new(backend: &'a dyn Backend, templates: &'a Templates, settings: &'a ChatSettings) -> Self {
        AgentContext {
            backend,
            templates,
            settings,
            parse_retries: DEFAULT_PARSE_RETRIES,
        }
    }

    pub fn request(&self, tag: CallTag, system: String, user: String) -> ChatRequest {
        ChatRequest::new(tag, system, user).with_settings(self.settings)
    }

    /// Send `request`, parsing the reply with `parse`. On a parse error the
    /// question is re-asked with a reminder, up to `parse_retries` times.
    /// Returns the last parse error if every attempt fails.
    pub fn ask_parsed<T>(
        &self,
        request: &ChatRequest,
        mut parse: impl FnMut(&str) -> std::result::Result<T, String>,
    ) -> Result<std::result::Result<(T, String), String>> {
        let mut req = request.clone();
        let mut last_err = String::new();
        for attempt in 0..=self.parse_retries {
            if attempt > 0 {
                req.user_prompt = format!(
                    "{}\n\n{}{}",
                    request.user_prompt, FORMAT_REMINDER, last_err
                );
            }
            let reply = self.backend.chat(&req).map_err(Error::Backend)?;
            match parse(&reply) {
                Ok(v) => return Ok(Ok((v, reply))),
                Err(e) => {
                    tracing::debug!(role = %req.tag.role, round = req.tag.round, attempt, error = %e, "unparseable reply");
                    last_err = e;
                }
            }
        }
        Ok(Err(last_err))
    }
}

/// Marker prepended to re-asks after an unparseable reply.
pub const FORMAT_REMINDER: &str =
    "Your previous reply did not follow the required output format. Answer again and follow the format exactly. Problem: ";

pub fn tag(role: RoleId, round: u32, case: &PatientCase) -> CallTag {
    CallTag {
        role,
        round,
        case_id: case.case_id.clone(),
    }
}

/// `"Background: ...\n\n"` or nothing when the case has no separate background.
pub fn background_block(case: &PatientCase) -> String {
    if case.background.trim().is_empty() {
        String::new()
    } else {
        format!("Background: {}\n\n", case.background.trim())
    }
}
