use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use chrono::Utc;
use serde::{Deserialize, Serialize};

use super::config::{BackendConfig, RunConfig, RunMode};
use super::ingest::ingest;
use super::metrics::Metrics;
use super::{io_err, HarnessError};
use crate::agent::AgentContext;
use crate::case::PatientCase;
use crate::consultation::{run_consultation, ConsultationConfig, KbHandle, KbPolicy};
use crate::knowledge::{route_and_store, KbKind, KbStore, RouteOutcome};
use crate::llm::{fnv1a64, Backend, MockBackend, MockScript, OpenAiClient, OpenAiConfig, Throttled};
use crate::prompts::Templates;
use crate::result::ConsultationResult;
use crate::review::{safety_review, ReviewOutcome};
use crate::triage::{triage, TriageDecision};

/// Everything that happened to one case. Holds no timestamps, so two runs
/// with the same seed and script produce identical logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseLog {
    pub index: usize,
    pub case_id: String,
    pub mode: RunMode,
    pub config: ConsultationConfig,
    pub gold: String,
    /// Option ids of the case, used as F1 labels.
    pub labels: Vec<String>,
    pub triage: Option<TriageDecision>,
    pub result: Option<ConsultationResult>,
    pub review: Option<ReviewOutcome>,
    pub delivered: Option<String>,
    pub correct: bool,
    pub route: Option<RouteOutcome>,
    pub error: Option<String>,
}

/// Cumulative accuracy and knowledge-base size after `cases` cases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub cases: usize,
    pub accuracy: f64,
    pub correct_kb: usize,
    pub chain_kb: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub metrics: Metrics,
    pub logs: Vec<CaseLog>,
    pub curve: Vec<CurvePoint>,
}

impl RunOutput {
    pub fn run_log_jsonl(&self) -> Result<String, HarnessError> {
        let mut out = String::new();
        for l in &self.logs {
            out.push_str(&serde_json::to_string(l)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn curve_csv(&self) -> String {
        let mut out = String::from("cases,accuracy,correct_kb,chain_kb\n");
        for p in &self.curve {
            out.push_str(&format!("{},{:.6},{},{}\n", p.cases, p.accuracy, p.correct_kb, p.chain_kb));
        }
        out
    }

    /// Write `run_log.jsonl`, `metrics.json` and `curve.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), HarnessError> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let put = |name: &str, body: String| {
            let p = dir.join(name);
            let mut f = std::fs::File::create(&p).map_err(io_err(&p))?;
            f.write_all(body.as_bytes()).map_err(io_err(&p))
        };
        put("run_log.jsonl", self.run_log_jsonl()?)?;
        put("metrics.json", serde_json::to_string_pretty(&self.metrics)? + "\n")?;
        put("curve.csv", self.curve_csv())
    }
}

/// Per-case seed: depends only on the run seed and the case, never on
/// scheduling order.
pub fn case_seed(seed: u64, index: usize, case_id: &str) -> u64 {
    fnv1a64(format!("{seed}:{index}:{case_id}").as_bytes())
}

pub fn build_backend(config: &RunConfig) -> Result<Box<dyn Backend>, HarnessError> {
    Ok(match &config.backend {
        BackendConfig::Mock { script, embedding_dim } => {
            let script = match script {
                Some(p) => MockScript::load(p)?,
                None => MockScript::new(),
            };
            Box::new(MockBackend::new(script).with_embedding_dim(*embedding_dim))
        }
        BackendConfig::OpenAi {
            base_url,
            embedding_model,
            timeout_secs,
        } => {
            let mut c = OpenAiConfig::default().with_env();
            if let Some(u) = base_url {
                c.base_url = u.clone();
            }
            if let Some(m) = embedding_model {
                c.embedding_model = m.clone();
            }
            if let Some(t) = timeout_secs {
                c.timeout_secs = *t;
            }
            Box::new(OpenAiClient::new(c)?)
        }
    })
}

struct Env<'a> {
    ctx: AgentContext<'a>,
    config: &'a RunConfig,
    kb: Option<KbHandle<'a>>,
    source: String,
}

fn run_case(case: &PatientCase, index: usize, env: &Env<'_>) -> CaseLog {
    let cfg = env.config;
    let consult = ConsultationConfig {
        max_rounds: cfg.max_rounds,
        rng_seed: case_seed(cfg.seed, index, &case.case_id),
        kb_policy: if env.kb.is_some() {
            KbPolicy::Enabled
        } else {
            KbPolicy::Disabled
        },
        top_k: cfg.top_k,
        retrieval_mode: cfg.retrieval_mode,
        parallel: !cfg.sequential,
    };
    let mut log = CaseLog {
        index,
        case_id: case.case_id.clone(),
        mode: cfg.mode,
        config: consult.clone(),
        gold: case.gold_answer.clone().unwrap_or_default(),
        labels: case.options.keys().cloned().collect(),
        triage: None,
        result: None,
        review: None,
        delivered: None,
        correct: false,
        route: None,
        error: None,
    };
    if let Err(e) = pipeline(case, env, &consult, &mut log) {
        tracing::warn!(case = %case.case_id, error = %e, "case failed");
        log.error = Some(e.to_string());
    }
    log
}

fn pipeline(
    case: &PatientCase,
    env: &Env<'_>,
    consult: &ConsultationConfig,
    log: &mut CaseLog,
) -> crate::Result<()> {
    let decision = triage(case, &env.ctx)?;
    log.triage = Some(decision.clone());
    let output = run_consultation(case, &decision.roles, &env.ctx, consult, env.kb)?;
    let result = output.result;
    let summary = result
        .pool
        .latest()
        .ok_or(crate::Error::MissingSummary(result.rounds_used))?;
    let review = safety_review(case, summary, &result.final_choice_id, &env.ctx, &output.reflection)?;
    let delivered = review.final_choice_id.clone();
    log.correct = case.gold_answer.as_deref() == Some(delivered.as_str());
    if env.config.mode == RunMode::Train {
        if let Some(kb) = env.kb {
            log.route = Some(route_and_store(
                case,
                &result,
                &delivered,
                &env.ctx,
                kb.correct,
                kb.chain,
                &env.source,
                Utc::now(),
            )?);
        }
    }
    log.delivered = Some(delivered);
    log.review = Some(review);
    log.result = Some(result);
    Ok(())
}

/// Evaluate every case of the configured dataset against `backend`.
/// Failed cases are logged and counted, never fatal.
pub fn evaluate(config: &RunConfig, backend: &dyn Backend) -> Result<RunOutput, HarnessError> {
    config.validate()?;
    let mut cases = ingest(&config.dataset_path, config.dataset_kind)?;
    if let Some(n) = config.limit {
        cases.truncate(n);
    }
    let templates = match &config.templates_dir {
        Some(d) => Templates::load_dir(d)?,
        None => Templates::default(),
    };
    let stores = match config.mode {
        RunMode::Vanilla => None,
        RunMode::Train => Some((
            KbStore::open(&config.kb_path(KbKind::Correct).unwrap(), KbKind::Correct)?,
            KbStore::open(&config.kb_path(KbKind::Chain).unwrap(), KbKind::Chain)?,
        )),
        RunMode::Test => Some((
            KbStore::load(&config.kb_path(KbKind::Correct).unwrap(), KbKind::Correct)?,
            KbStore::load(&config.kb_path(KbKind::Chain).unwrap(), KbKind::Chain)?,
        )),
    };
    let initial = stores
        .as_ref()
        .map(|(c, h)| (c.len(), h.len()))
        .unwrap_or((0, 0));
    let throttled = Throttled::new(backend, config.max_in_flight);
    let env = Env {
        ctx: AgentContext::new(&throttled, &templates, &config.chat),
        config,
        kb: stores.as_ref().map(|(c, h)| KbHandle { correct: c, chain: h }),
        source: config.source_name(),
    };

    // Training grows the stores case by case, so it must stay in order.
    let workers = if config.mode == RunMode::Train || config.sequential {
        1
    } else {
        config.concurrency.min(cases.len().max(1))
    };
    let logs: Vec<CaseLog> = if workers == 1 {
        cases.iter().enumerate().map(|(i, c)| run_case(c, i, &env)).collect()
    } else {
        let next = AtomicUsize::new(0);
        let slots: Mutex<Vec<Option<CaseLog>>> = Mutex::new(vec![None; cases.len()]);
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(case) = cases.get(i) else { break };
                    let log = run_case(case, i, &env);
                    slots.lock().unwrap()[i] = Some(log);
                });
            }
        });
        slots
            .into_inner()
            .unwrap()
            .into_iter()
            .map(|l| l.expect("every case is evaluated"))
            .collect()
    };

    let curve = curve(&logs, config.checkpoint_every, initial);
    Ok(RunOutput {
        metrics: Metrics::from_logs(&logs),
        logs,
        curve,
    })
}

fn curve(logs: &[CaseLog], every: usize, initial: (usize, usize)) -> Vec<CurvePoint> {
    let mut points = Vec::new();
    let (mut correct_kb, mut chain_kb) = initial;
    let (mut right, mut scored) = (0usize, 0usize);
    for (i, l) in logs.iter().enumerate() {
        if l.error.is_none() {
            scored += 1;
            right += usize::from(l.correct);
        }
        match l.route {
            Some(RouteOutcome::Stored { kind: KbKind::Correct, .. }) => correct_kb += 1,
            Some(RouteOutcome::Stored { kind: KbKind::Chain, .. }) => chain_kb += 1,
            _ => {}
        }
        let n = i + 1;
        if n % every == 0 || n == logs.len() {
            points.push(CurvePoint {
                cases: n,
                accuracy: if scored == 0 { 0.0 } else { right as f64 / scored as f64 },
                correct_kb,
                chain_kb,
            });
        }
    }
    points
}

/// Build the configured backend, evaluate, and write outputs if an
/// output directory is set.
pub fn run(config: &RunConfig) -> Result<RunOutput, HarnessError> {
    config.validate()?;
    let backend = build_backend(config)?;
    let output = evaluate(config, backend.as_ref())?;
    if let Some(dir) = &config.output_dir {
        output.write(dir)?;
    }
    Ok(output)
}
