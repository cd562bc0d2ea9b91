use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::eval::CaseLog;
use super::HarnessError;
use crate::result::Termination;
use crate::role::RoleId;

/// Unweighted mean of per-label F1. Labels that occur in neither the
/// predictions nor the golds are left out of the mean.
pub fn macro_f1(predictions: &[String], golds: &[String], labels: &[String]) -> Result<f64, HarnessError> {
    if predictions.len() != golds.len() || predictions.is_empty() {
        return Err(HarnessError::LengthMismatch {
            predictions: predictions.len(),
            golds: golds.len(),
        });
    }
    let mut scores = Vec::new();
    for label in labels {
        let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
        for (p, g) in predictions.iter().zip(golds) {
            match (p == label, g == label) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
        }
        if tp + fp + fn_ == 0 {
            continue;
        }
        scores.push(2.0 * tp as f64 / (2 * tp + fp + fn_) as f64);
    }
    if scores.is_empty() {
        return Ok(0.0);
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    /// Macro-averaged over answer labels.
    pub f1: f64,
    pub f1_average: String,
    pub n_cases: usize,
    pub n_scored: usize,
    pub n_correct: usize,
    pub n_errored: usize,
    pub termination: BTreeMap<Termination, usize>,
    pub mean_rounds: f64,
    pub specialist_selection: BTreeMap<RoleId, usize>,
    /// Number of cases by panel size.
    pub panel_size: BTreeMap<usize, usize>,
    pub review_overrides: usize,
    pub review_failures: usize,
    pub fallback_summaries: usize,
    pub kb_consulted: usize,
}

impl Metrics {
    pub fn from_logs(logs: &[CaseLog]) -> Metrics {
        let scored: Vec<&CaseLog> = logs.iter().filter(|l| l.error.is_none()).collect();
        let n_correct = scored.iter().filter(|l| l.correct).count();
        let mut termination = BTreeMap::new();
        let mut specialist_selection = BTreeMap::new();
        let mut panel_size = BTreeMap::new();
        let mut rounds = 0u64;
        let (mut overrides, mut failures, mut fallbacks, mut consulted) = (0, 0, 0, 0);
        for l in &scored {
            let result = l.result.as_ref().expect("scored case has a result");
            *termination.entry(result.termination).or_default() += 1;
            rounds += u64::from(result.rounds_used);
            fallbacks += result.fallback_summary_rounds.len();
            consulted += usize::from(result.kb_consulted);
            if let Some(r) = &l.review {
                overrides += usize::from(r.overridden);
                failures += usize::from(r.override_failed);
            }
        }
        for l in logs {
            if let Some(t) = &l.triage {
                for r in &t.roles {
                    *specialist_selection.entry(*r).or_default() += 1;
                }
                *panel_size.entry(t.roles.len()).or_default() += 1;
            }
        }
        let preds: Vec<String> = scored
            .iter()
            .map(|l| l.delivered.clone().unwrap_or_default())
            .collect();
        let golds: Vec<String> = scored.iter().map(|l| l.gold.clone()).collect();
        let labels: Vec<String> = scored
            .iter()
            .flat_map(|l| l.labels.iter().cloned())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let f1 = macro_f1(&preds, &golds, &labels).unwrap_or(0.0);
        let n_scored = scored.len();
        Metrics {
            accuracy: if n_scored == 0 {
                0.0
            } else {
                n_correct as f64 / n_scored as f64
            },
            f1,
            f1_average: "macro".into(),
            n_cases: logs.len(),
            n_scored,
            n_correct,
            n_errored: logs.len() - n_scored,
            termination,
            mean_rounds: if n_scored == 0 {
                0.0
            } else {
                rounds as f64 / n_scored as f64
            },
            specialist_selection,
            panel_size,
            review_overrides: overrides,
            review_failures: failures,
            fallback_summaries: fallbacks,
            kb_consulted: consulted,
        }
    }
}
