use std::collections::HashSet;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strip whitespace and any surrounding braces, brackets, quotes or
/// punctuation from a raw option id as an agent wrote it.
///
/// Case is preserved; comparisons go through [`fold_option_id`].
pub fn normalize_option_id(raw: &str) -> Result<String> {
    let stripped = raw
        .trim()
        .trim_matches(|c: char| !c.is_alphanumeric())
        .trim();
    if stripped.is_empty() {
        return Err(Error::EmptyAfterNormalization(raw.to_string()));
    }
    Ok(stripped.to_string())
}

/// Comparison key for option ids.
pub fn fold_option_id(id: &str) -> String {
    id.to_lowercase()
}

/// One multiple-choice question with its patient context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientCase {
    pub case_id: String,
    /// Patient history or supporting abstract text. May be empty when the
    /// question itself carries the vignette.
    #[serde(default)]
    pub background: String,
    pub question: String,
    pub options: IndexMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_answer: Option<String>,
}

impl PatientCase {
    pub fn new(
        case_id: impl Into<String>,
        background: impl Into<String>,
        question: impl Into<String>,
        options: impl IntoIterator<Item = (impl Into<String>, impl Into<String>)>,
        gold_answer: Option<&str>,
    ) -> Result<Self> {
        let case = PatientCase {
            case_id: case_id.into(),
            background: background.into(),
            question: question.into(),
            options: options
                .into_iter()
                .map(|(k, v)| (k.into(), v.into()))
                .collect(),
            gold_answer: gold_answer.map(str::to_string),
        };
        case.validate()?;
        Ok(case)
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |reason: String| Error::InvalidCase {
            case_id: self.case_id.clone(),
            reason,
        };
        if self.options.is_empty() {
            return Err(invalid("no answer options".into()));
        }
        let mut seen = HashSet::new();
        for key in self.options.keys() {
            let norm = normalize_option_id(key).map_err(|e| invalid(e.to_string()))?;
            if norm != *key {
                return Err(invalid(format!("option id {key:?} is not in normalized form")));
            }
            if !seen.insert(fold_option_id(&norm)) {
                return Err(invalid(format!("duplicate option id {key:?}")));
            }
        }
        if let Some(gold) = &self.gold_answer {
            if !self.options.contains_key(gold) {
                return Err(invalid(format!("gold answer {gold:?} is not an option")));
            }
        }
        Ok(())
    }

    /// Map a raw id written by an agent onto the matching option key.
    pub fn resolve_option(&self, raw: &str) -> Option<&str> {
        let norm = normalize_option_id(raw).ok()?;
        let folded = fold_option_id(&norm);
        self.options
            .keys()
            .find(|k| fold_option_id(k) == folded)
            .map(String::as_str)
    }

    pub fn option_text(&self, id: &str) -> Option<&str> {
        self.options.get(id).map(String::as_str)
    }

    /// Options rendered as a compact JSON object, `{"A": "...", ...}`.
    pub fn options_json(&self) -> String {
        serde_json::to_string(&self.options).expect("string map serializes")
    }

    /// Text used to embed the case for experience retrieval.
    pub fn retrieval_text(&self) -> String {
        format!("{}\n{}", self.background, self.question)
    }
}
