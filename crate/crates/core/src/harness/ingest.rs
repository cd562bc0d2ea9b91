//! JSONL dataset readers for MedQA and PubMedQA.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::HarnessError;
use crate::case::PatientCase;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    #[serde(alias = "MedQA")]
    MedQa,
    #[serde(alias = "PubMedQA")]
    PubMedQa,
}

impl DatasetKind {
    pub fn name(self) -> &'static str {
        match self {
            DatasetKind::MedQa => "medqa",
            DatasetKind::PubMedQa => "pubmedqa",
        }
    }
}

impl FromStr for DatasetKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_lowercase().as_str() {
            "medqa" => Ok(DatasetKind::MedQa),
            "pubmedqa" => Ok(DatasetKind::PubMedQa),
            _ => Err(HarnessError::UnknownKind(s.to_string())),
        }
    }
}

pub const PUBMEDQA_OPTIONS: [&str; 3] = ["yes", "no", "maybe"];

fn get<'a>(obj: &'a Map<String, Value>, names: &[&str]) -> Option<&'a Value> {
    names.iter().find_map(|n| obj.get(*n)).filter(|v| !v.is_null())
}

fn as_text(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn medqa_case(obj: &Map<String, Value>, line: usize) -> Result<PatientCase, String> {
    let question = get(obj, &["question"])
        .and_then(as_text)
        .ok_or("missing question")?;
    let options: IndexMap<String, String> = match get(obj, &["options"]).ok_or("missing options")? {
        Value::Object(m) => m
            .iter()
            .map(|(k, v)| Ok((k.trim().to_string(), as_text(v).ok_or("non-text option")?)))
            .collect::<Result<_, String>>()?,
        Value::Array(items) => items
            .iter()
            .map(|it| {
                let key = it.get("key").and_then(as_text).ok_or("option without key")?;
                let val = it.get("value").and_then(as_text).ok_or("option without value")?;
                Ok((key.trim().to_string(), val))
            })
            .collect::<Result<_, String>>()?,
        _ => return Err("options must be an object or a list".into()),
    };
    let gold = get(obj, &["answer_idx"])
        .and_then(as_text)
        .ok_or("missing answer_idx")?;
    let id = get(obj, &["id", "case_id"])
        .and_then(as_text)
        .unwrap_or_else(|| format!("medqa-{line}"));
    let case = PatientCase {
        case_id: id,
        background: String::new(),
        question,
        options,
        gold_answer: None,
    };
    let gold = case
        .resolve_option(&gold)
        .ok_or_else(|| format!("answer_idx {gold:?} is not an option"))?
        .to_string();
    let case = PatientCase {
        gold_answer: Some(gold),
        ..case
    };
    case.validate().map_err(|e| e.to_string())?;
    Ok(case)
}

fn pubmedqa_case(obj: &Map<String, Value>, line: usize) -> Result<PatientCase, String> {
    let question = get(obj, &["question", "QUESTION"])
        .and_then(as_text)
        .ok_or("missing question")?;
    let contexts: Vec<String> = match get(obj, &["contexts", "CONTEXTS", "context"]) {
        Some(Value::Array(items)) => items.iter().filter_map(as_text).collect(),
        Some(Value::String(s)) => vec![s.clone()],
        Some(Value::Object(m)) => match m.get("contexts") {
            Some(Value::Array(items)) => items.iter().filter_map(as_text).collect(),
            _ => return Err("context object without contexts list".into()),
        },
        _ => vec![],
    };
    let gold = get(obj, &["final_decision", "FINAL_DECISION"])
        .and_then(as_text)
        .ok_or("missing final_decision")?
        .trim()
        .to_lowercase();
    if !PUBMEDQA_OPTIONS.contains(&gold.as_str()) {
        return Err(format!("final_decision {gold:?} is not yes/no/maybe"));
    }
    let id = get(obj, &["pubid", "PMID", "id"])
        .and_then(as_text)
        .unwrap_or_else(|| format!("pubmedqa-{line}"));
    let case = PatientCase {
        case_id: id,
        background: contexts.join("\n"),
        question,
        options: PUBMEDQA_OPTIONS
            .iter()
            .map(|o| (o.to_string(), o.to_string()))
            .collect(),
        gold_answer: Some(gold),
    };
    case.validate().map_err(|e| e.to_string())?;
    Ok(case)
}

/// Parse one dataset line (1-based `line` for messages).
pub fn parse_record(text: &str, kind: DatasetKind, line: usize) -> Result<PatientCase, HarnessError> {
    let malformed = |reason: String| HarnessError::MalformedRecord { line, reason };
    let value: Value = serde_json::from_str(text).map_err(|e| malformed(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| malformed("record is not a JSON object".into()))?;
    match kind {
        DatasetKind::MedQa => medqa_case(obj, line),
        DatasetKind::PubMedQa => pubmedqa_case(obj, line),
    }
    .map_err(malformed)
}

/// Read every non-blank line of a JSONL dataset.
pub fn ingest(path: &Path, kind: DatasetKind) -> Result<Vec<PatientCase>, HarnessError> {
    let file = File::open(path).map_err(|e| HarnessError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut cases = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| HarnessError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        cases.push(parse_record(&line, kind, i + 1)?);
    }
    Ok(cases)
}
