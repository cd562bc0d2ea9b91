//! Four-category round summaries and the per-consultation pool that holds them.
//!
//! The pool's JSON form is an object keyed `"round N"`, each value holding the
//! `consistency`, `conflict`, `independence` and `integration` arrays in that
//! order, plus a reserved `_votes` object with the engine-recorded choices.

use std::collections::{BTreeMap, BTreeSet};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::role::RoleId;

/// Key under which engine-derived votes are stored next to the four categories.
pub const VOTES_KEY: &str = "_votes";

/// The lead physician's digest of one round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundSummary {
    pub round: u32,
    pub consistency: Vec<String>,
    pub conflict: Vec<String>,
    pub independence: Vec<String>,
    pub integration: Vec<String>,
    pub votes: BTreeMap<RoleId, String>,
}

impl RoundSummary {
    pub fn is_unanimous(&self) -> bool {
        distinct_votes(&self.votes) == 1
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Error::PoolFormat(format!("round {}: {msg}", self.round));
        if self.round == 0 {
            return Err(bad("round must be >= 1".into()));
        }
        if self.integration.is_empty() {
            return Err(bad("integration must not be empty".into()));
        }
        if self.conflict.is_empty() != self.is_unanimous() {
            return Err(bad(format!(
                "conflict has {} entries but votes have {} distinct choices",
                self.conflict.len(),
                distinct_votes(&self.votes)
            )));
        }
        Ok(())
    }

    /// All category text, in category order. Used when a summary is shown
    /// to agents or reviewers as plain text.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for (name, items) in [
            ("Consistency", &self.consistency),
            ("Conflict", &self.conflict),
            ("Independence", &self.independence),
            ("Integration", &self.integration),
        ] {
            out.push_str(name);
            out.push_str(":\n");
            if items.is_empty() {
                out.push_str("- (none)\n");
            }
            for item in items {
                out.push_str("- ");
                out.push_str(item);
                out.push('\n');
            }
        }
        out
    }
}

pub(crate) fn distinct_votes(votes: &BTreeMap<RoleId, String>) -> usize {
    votes
        .values()
        .map(|v| crate::case::fold_option_id(v))
        .collect::<BTreeSet<_>>()
        .len()
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SummaryBody {
    consistency: Vec<String>,
    conflict: Vec<String>,
    independence: Vec<String>,
    integration: Vec<String>,
    #[serde(rename = "_votes")]
    votes: BTreeMap<RoleId, String>,
}

/// Append-only map from round number to that round's summary.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HistoricalSharedPool {
    entries: BTreeMap<u32, RoundSummary>,
}

impl HistoricalSharedPool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn last_round(&self) -> u32 {
        self.entries.keys().next_back().copied().unwrap_or(0)
    }

    pub fn get(&self, round: u32) -> Option<&RoundSummary> {
        self.entries.get(&round)
    }

    pub fn latest(&self) -> Option<&RoundSummary> {
        self.entries.values().next_back()
    }

    pub fn iter(&self) -> impl Iterator<Item = &RoundSummary> {
        self.entries.values()
    }

    /// Add the next round's summary. Rounds must arrive as 1, 2, 3, ...
    pub fn append(&mut self, summary: RoundSummary) -> Result<()> {
        let last = self.last_round();
        if summary.round != last + 1 {
            return Err(Error::NonContiguousRound {
                last,
                got: summary.round,
            });
        }
        summary.validate()?;
        self.entries.insert(summary.round, summary);
        Ok(())
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let mut map = IndexMap::new();
        for (round, s) in &self.entries {
            let body = SummaryBody {
                consistency: s.consistency.clone(),
                conflict: s.conflict.clone(),
                independence: s.independence.clone(),
                integration: s.integration.clone(),
                votes: s.votes.clone(),
            };
            map.insert(
                format!("round {round}"),
                serde_json::to_value(body).expect("summary serializes"),
            );
        }
        serde_json::to_value(map).expect("pool serializes")
    }

    /// Canonical pretty-printed JSON.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_json_value()).expect("pool serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        Self::from_json_value(value)
    }

    pub fn from_json_value(value: serde_json::Value) -> Result<Self> {
        let raw: IndexMap<String, SummaryBody> =
            serde_json::from_value(value).map_err(|e| Error::PoolFormat(e.to_string()))?;
        let mut bodies = Vec::with_capacity(raw.len());
        for (key, body) in raw {
            let round = key
                .strip_prefix("round ")
                .and_then(|n| n.parse::<u32>().ok())
                .ok_or_else(|| Error::PoolFormat(format!("bad round key {key:?}")))?;
            bodies.push((round, body));
        }
        bodies.sort_by_key(|(r, _)| *r);
        let mut pool = HistoricalSharedPool::new();
        for (round, b) in bodies {
            pool.append(RoundSummary {
                round,
                consistency: b.consistency,
                conflict: b.conflict,
                independence: b.independence,
                integration: b.integration,
                votes: b.votes,
            })?;
        }
        Ok(pool)
    }
}

impl Serialize for HistoricalSharedPool {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json_value().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for HistoricalSharedPool {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let value = serde_json::Value::deserialize(deserializer)?;
        Self::from_json_value(value).map_err(serde::de::Error::custom)
    }
}
