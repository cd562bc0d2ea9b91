//! The multi-round consultation loop.
//!
//! Round 1: every specialist answers in isolation. Round r >= 2: each
//! specialist sees the lead physician's summaries of the previous two
//! rounds (only round 1 at round 2) and never raw peer statements or older
//! history. After every round the summary is appended to the pool; the loop
//! stops on the first unanimous round or at `max_rounds`, where a plurality
//! vote decides and ties are broken by a seeded uniform draw.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{background_block, tag, AgentContext};
use crate::aggregation::{summarize_round, window_json};
use crate::case::{fold_option_id, PatientCase};
use crate::error::{Error, Result};
use crate::knowledge::{kb_gate, render_experience, retrieve, KbGate, KbStore, RetrievalMode, DEFAULT_TOP_K};
use crate::llm::ChatRequest;
use crate::pool::HistoricalSharedPool;
use crate::prompts::{render, specialty};
use crate::result::{Abstention, ConsultationResult, RetrievedRef, Termination};
use crate::role::RoleId;
use crate::statement::{parse_choice, Statement};

/// How many earlier round summaries a specialist sees.
pub const RESIDUAL_WINDOW: u32 = 2;
pub const DEFAULT_MAX_ROUNDS: u32 = 10;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum KbPolicy {
    #[default]
    Disabled,
    Enabled,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsultationConfig {
    pub max_rounds: u32,
    pub rng_seed: u64,
    pub kb_policy: KbPolicy,
    pub top_k: usize,
    pub retrieval_mode: RetrievalMode,
    /// Query specialists of one round on separate threads.
    pub parallel: bool,
}

impl Default for ConsultationConfig {
    fn default() -> Self {
        ConsultationConfig {
            max_rounds: DEFAULT_MAX_ROUNDS,
            rng_seed: 0,
            kb_policy: KbPolicy::Disabled,
            top_k: DEFAULT_TOP_K,
            retrieval_mode: RetrievalMode::PerKb,
            parallel: true,
        }
    }
}

/// Read access to both experience stores.
#[derive(Clone, Copy)]
pub struct KbHandle<'a> {
    pub correct: &'a KbStore,
    pub chain: &'a KbStore,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsultationOutput {
    pub result: ConsultationResult,
    /// Retrieved experience to show the safety reviewer after a first-round
    /// consensus; empty otherwise.
    pub reflection: String,
}

/// True when every statement names the same option.
pub fn check_consensus(statements: &[Statement]) -> bool {
    let mut ids = statements.iter().map(|s| fold_option_id(&s.choice_id));
    match ids.next() {
        Some(first) => ids.all(|id| id == first),
        None => false,
    }
}

/// Plurality winner of the final round; a tie among the leaders is broken
/// by a uniform draw from `rng` over the tied ids in sorted order.
pub fn decide_final(statements: &[Statement], rng: &mut impl Rng) -> (String, Termination) {
    assert!(!statements.is_empty(), "decide_final needs at least one statement");
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for s in statements {
        *counts.entry(s.choice_id.as_str()).or_default() += 1;
    }
    let top = *counts.values().max().unwrap();
    let leaders: Vec<&str> = counts
        .iter()
        .filter(|(_, c)| **c == top)
        .map(|(id, _)| *id)
        .collect();
    if leaders.len() == 1 {
        (leaders[0].to_string(), Termination::MajorityRule)
    } else {
        let pick = leaders[rng.gen_range(0..leaders.len())];
        (pick.to_string(), Termination::TieRandom)
    }
}

/// Rounds whose summaries a specialist sees at `round`, oldest first.
pub fn window_rounds(round: u32) -> Vec<u32> {
    let first = round.saturating_sub(RESIDUAL_WINDOW).max(1);
    (first..round).collect()
}

/// Gate for `round` as implied by what the pool has recorded so far.
pub fn gate_for_round(round: u32, pool: &HistoricalSharedPool) -> KbGate {
    let round1_consensus = pool.get(1).is_some_and(|s| s.is_unanimous());
    let conflict = round > 1
        && pool
            .get(round - 1)
            .is_some_and(|s| !s.conflict.is_empty());
    kb_gate(round, round1_consensus, conflict)
}

pub fn build_specialist_prompt(
    case: &PatientCase,
    role: RoleId,
    round: u32,
    pool: &HistoricalSharedPool,
    kb_snippets: Option<&str>,
    ctx: &AgentContext<'_>,
) -> Result<ChatRequest> {
    if !role.is_specialist() {
        return Err(Error::NotASpecialist(role));
    }
    let window = window_rounds(round);
    let summaries = window
        .iter()
        .map(|r| pool.get(*r).ok_or(Error::MissingSummary(*r)))
        .collect::<Result<Vec<_>>>()?;
    let pool_block = if summaries.is_empty() {
        String::new()
    } else {
        let names: Vec<String> = window.iter().map(u32::to_string).collect();
        format!(
            "\nHistorical Shared Pool (round {}):\n{}\n",
            names.join(" and "),
            window_json(&summaries)
        )
    };
    let experience = match (gate_for_round(round, pool), kb_snippets) {
        (KbGate::InjectIntoPrompt, Some(s)) => s,
        _ => "",
    };
    let system = render(
        &ctx.templates.specialist_system,
        &[("role", role.name()), ("specialty", specialty(role))],
    )?;
    let user = render(
        &ctx.templates.specialist_user,
        &[
            ("round", &round.to_string()),
            ("background", &background_block(case)),
            ("question", &case.question),
            ("options", &case.options_json()),
            ("pool", &pool_block),
            ("experience", experience),
        ],
    )?;
    Ok(ctx.request(tag(role, round, case), system, user))
}

fn ask_specialist(
    case: &PatientCase,
    role: RoleId,
    round: u32,
    pool: &HistoricalSharedPool,
    kb_snippets: Option<&str>,
    ctx: &AgentContext<'_>,
) -> Result<Option<Statement>> {
    let request = build_specialist_prompt(case, role, round, pool, kb_snippets, ctx)?;
    let parsed = ctx.ask_parsed(&request, |reply| {
        parse_choice(reply, case).ok_or_else(|| "no valid `Choice: {ID}: {Content}` line".to_string())
    })?;
    match parsed {
        Ok((p, _)) => Ok(Some(Statement::new(
            case,
            round,
            role,
            p.reasoning,
            &p.choice_id,
            p.choice_text,
        )?)),
        Err(reason) => {
            tracing::warn!(case = %case.case_id, %role, round, %reason, "specialist abstains this round");
            Ok(None)
        }
    }
}

struct Retrieval {
    block: String,
    refs: Vec<RetrievedRef>,
}

fn do_retrieve(
    case: &PatientCase,
    kb: KbHandle<'_>,
    config: &ConsultationConfig,
    ctx: &AgentContext<'_>,
) -> Result<Retrieval> {
    let (correct, chain) = retrieve(
        &case.retrieval_text(),
        ctx.backend,
        kb.correct,
        kb.chain,
        config.top_k,
        config.retrieval_mode,
    )?;
    let refs = correct
        .iter()
        .chain(&chain)
        .map(|h| RetrievedRef {
            kind: h.entry.kind(),
            id: h.entry.id,
            score: h.score,
        })
        .collect();
    Ok(Retrieval {
        block: render_experience(&correct, &chain),
        refs,
    })
}

pub fn run_consultation(
    case: &PatientCase,
    roles: &[RoleId],
    ctx: &AgentContext<'_>,
    config: &ConsultationConfig,
    kb: Option<KbHandle<'_>>,
) -> Result<ConsultationOutput> {
    if config.max_rounds == 0 {
        return Err(Error::Config("max_rounds must be >= 1".into()));
    }
    if roles.is_empty() {
        return Err(Error::Config("no specialists assigned".into()));
    }
    if let Some(r) = roles.iter().find(|r| !r.is_specialist()) {
        return Err(Error::NotASpecialist(*r));
    }
    let kb = match config.kb_policy {
        KbPolicy::Enabled => Some(kb.ok_or_else(|| Error::Config("kb_policy is Enabled but no knowledge bases were given".into()))?),
        KbPolicy::Disabled => None,
    };

    let mut pool = HistoricalSharedPool::new();
    let mut per_round: Vec<Vec<Statement>> = Vec::new();
    let mut abstentions = Vec::new();
    let mut fallback_rounds = Vec::new();
    let mut injected_rounds = Vec::new();
    let mut retrieval: Option<Retrieval> = None;
    let mut consensus = false;

    for round in 1..=config.max_rounds {
        let snippets = match (gate_for_round(round, &pool), kb) {
            (KbGate::InjectIntoPrompt, Some(kb)) => {
                if retrieval.is_none() {
                    retrieval = Some(do_retrieve(case, kb, config, ctx)?);
                }
                let block = retrieval.as_ref().map(|r| r.block.as_str()).unwrap_or("");
                if !block.is_empty() {
                    injected_rounds.push(round);
                    Some(block)
                } else {
                    None
                }
            }
            _ => None,
        };

        let replies: Vec<Result<Option<Statement>>> = if config.parallel && roles.len() > 1 {
            std::thread::scope(|s| {
                let handles: Vec<_> = roles
                    .iter()
                    .map(|role| {
                        let pool = &pool;
                        s.spawn(move || ask_specialist(case, *role, round, pool, snippets, ctx))
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("specialist thread panicked"))
                    .collect()
            })
        } else {
            roles
                .iter()
                .map(|role| ask_specialist(case, *role, round, &pool, snippets, ctx))
                .collect()
        };

        let mut statements = Vec::with_capacity(roles.len());
        for (role, reply) in roles.iter().zip(replies) {
            match reply? {
                Some(st) => statements.push(st),
                None => abstentions.push(Abstention { round, role: *role }),
            }
        }

        let aggregated = summarize_round(round, &statements, case, ctx)?;
        if aggregated.fallback {
            fallback_rounds.push(round);
        }
        pool.append(aggregated.summary)?;
        consensus = check_consensus(&statements);
        per_round.push(statements);
        if consensus {
            break;
        }
    }

    let rounds_used = per_round.len() as u32;
    let mut reflection = String::new();
    let mut post_hoc = false;
    if consensus && rounds_used == 1 {
        if let Some(kb) = kb {
            if gate_for_round(2, &pool) == KbGate::PostHocReflect {
                let r = do_retrieve(case, kb, config, ctx)?;
                reflection = r.block.clone();
                post_hoc = true;
                retrieval = Some(r);
            }
        }
    }

    let (final_choice_id, termination) = if consensus {
        (per_round.last().unwrap()[0].choice_id.clone(), Termination::Consensus)
    } else {
        let last_voted = per_round
            .iter()
            .rev()
            .find(|s| !s.is_empty())
            .ok_or(Error::StatementParseFailure)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        decide_final(last_voted, &mut rng)
    };

    let kb_consulted = retrieval.is_some();
    Ok(ConsultationOutput {
        result: ConsultationResult {
            case_id: case.case_id.clone(),
            final_choice_id,
            termination,
            rounds_used,
            pool,
            per_round_statements: per_round,
            kb_consulted,
            kb_injected_rounds: injected_rounds,
            kb_post_hoc: post_hoc,
            retrieved: retrieval.map(|r| r.refs).unwrap_or_default(),
            abstentions,
            fallback_summary_rounds: fallback_rounds,
            rng_seed: config.rng_seed,
        },
        reflection,
    })
}
