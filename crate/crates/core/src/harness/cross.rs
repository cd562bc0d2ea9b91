use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{RunConfig, RunMode};
use super::eval::evaluate;
use super::metrics::Metrics;
use super::HarnessError;
use crate::knowledge::KbKind;
use crate::llm::Backend;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KbSource {
    Vanilla,
    #[serde(rename = "KB_A")]
    KbA,
    #[serde(rename = "KB_B")]
    KbB,
}

impl KbSource {
    pub fn label(self) -> &'static str {
        match self {
            KbSource::Vanilla => "Vanilla",
            KbSource::KbA => "KB_A",
            KbSource::KbB => "KB_B",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossCell {
    pub dataset: String,
    pub source: KbSource,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossMatrix {
    pub cells: Vec<CrossCell>,
}

impl CrossMatrix {
    pub fn get(&self, dataset: &str, source: KbSource) -> Option<&CrossCell> {
        self.cells
            .iter()
            .find(|c| c.dataset == dataset && c.source == source)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("dataset,source,accuracy,f1,n_scored,n_errored\n");
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{:.6},{:.6},{},{}\n",
                c.dataset,
                c.source.label(),
                c.metrics.accuracy,
                c.metrics.f1,
                c.metrics.n_scored,
                c.metrics.n_errored
            ));
        }
        out
    }
}

fn require_kb(dir: &Path) -> Result<(), HarnessError> {
    for kind in [KbKind::Correct, KbKind::Chain] {
        let p = dir.join(kind.file_name());
        if !p.is_file() {
            return Err(HarnessError::Config(format!("missing knowledge base {}", p.display())));
        }
    }
    Ok(())
}

/// Evaluate both datasets with no KB, with KB_A and with KB_B: six cells,
/// all in test mode. Missing KB files fail before any case runs.
pub fn cross_dataset(
    dataset_a: &RunConfig,
    dataset_b: &RunConfig,
    kb_a: &Path,
    kb_b: &Path,
    backend: &dyn Backend,
) -> Result<CrossMatrix, HarnessError> {
    require_kb(kb_a)?;
    require_kb(kb_b)?;
    let mut cells = Vec::with_capacity(6);
    for base in [dataset_a, dataset_b] {
        for source in [KbSource::Vanilla, KbSource::KbA, KbSource::KbB] {
            let mut cfg = base.clone();
            cfg.output_dir = None;
            (cfg.mode, cfg.kb_dir) = match source {
                KbSource::Vanilla => (RunMode::Vanilla, None),
                KbSource::KbA => (RunMode::Test, Some(kb_a.to_path_buf())),
                KbSource::KbB => (RunMode::Test, Some(kb_b.to_path_buf())),
            };
            let out = evaluate(&cfg, backend)?;
            cells.push(CrossCell {
                dataset: base.source_name(),
                source,
                metrics: out.metrics,
            });
        }
    }
    Ok(CrossMatrix { cells })
}
