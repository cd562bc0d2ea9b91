use serde::{Deserialize, Serialize};

use super::KbError;

/// A consultation that reached the right answer, distilled from its final round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrectRecord {
    #[serde(rename = "Question")]
    pub question: String,
    #[serde(rename = "Answer")]
    pub answer: String,
    #[serde(rename = "Summary of S_final^4")]
    pub summary_final: String,
}

/// A consultation that went wrong, reconstructed from every round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainRecord {
    #[serde(rename = "Question")]
    pub question: String,
    #[serde(rename = "Correct Answer")]
    pub correct_answer: String,
    #[serde(rename = "Initial Hypothesis")]
    pub initial_hypothesis: String,
    #[serde(rename = "Analysis Process")]
    pub analysis_process: String,
    #[serde(rename = "Final Conclusion")]
    pub final_conclusion: String,
    #[serde(rename = "Error Reflection")]
    pub error_reflection: String,
}

fn require(fields: &[(&str, &str)]) -> Result<(), KbError> {
    match fields.iter().find(|(_, v)| v.trim().is_empty()) {
        Some((name, _)) => Err(KbError::InvalidRecord(format!("{name} is empty"))),
        None => Ok(()),
    }
}

impl CorrectRecord {
    pub fn validate(&self) -> Result<(), KbError> {
        require(&[
            ("Question", &self.question),
            ("Answer", &self.answer),
            ("Summary of S_final^4", &self.summary_final),
        ])
    }
}

impl ChainRecord {
    pub fn validate(&self) -> Result<(), KbError> {
        require(&[
            ("Question", &self.question),
            ("Correct Answer", &self.correct_answer),
            ("Initial Hypothesis", &self.initial_hypothesis),
            ("Analysis Process", &self.analysis_process),
            ("Final Conclusion", &self.final_conclusion),
            ("Error Reflection", &self.error_reflection),
        ])
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KbRecord {
    Correct(CorrectRecord),
    Chain(ChainRecord),
}

impl KbRecord {
    pub fn question(&self) -> &str {
        match self {
            KbRecord::Correct(r) => &r.question,
            KbRecord::Chain(r) => &r.question,
        }
    }

    pub fn validate(&self) -> Result<(), KbError> {
        match self {
            KbRecord::Correct(r) => r.validate(),
            KbRecord::Chain(r) => r.validate(),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            KbRecord::Correct(r) => serde_json::to_value(r),
            KbRecord::Chain(r) => serde_json::to_value(r),
        }
        .expect("record serializes")
    }
}
