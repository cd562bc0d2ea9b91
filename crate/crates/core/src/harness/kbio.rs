//! Portable single-file bundles of a knowledge-base directory.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{io_err, HarnessError};
use crate::knowledge::store::{entry_line, parse_line};
use crate::knowledge::{KbKind, KbStore};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleCounts {
    pub correct: usize,
    pub chain: usize,
}

/// Write both stores of `kb_dir` into one JSONL file, correct entries first.
pub fn export_bundle(kb_dir: &Path, out: &Path) -> Result<BundleCounts, HarnessError> {
    let correct = KbStore::load(&kb_dir.join(KbKind::Correct.file_name()), KbKind::Correct)?;
    let chain = KbStore::load(&kb_dir.join(KbKind::Chain.file_name()), KbKind::Chain)?;
    let mut w = BufWriter::new(File::create(out).map_err(io_err(out))?);
    for store in [&correct, &chain] {
        for e in store.snapshot() {
            writeln!(w, "{}", entry_line(&e)).map_err(io_err(out))?;
        }
    }
    w.flush().map_err(io_err(out))?;
    Ok(BundleCounts {
        correct: correct.len(),
        chain: chain.len(),
    })
}

/// Append every entry of a bundle to the stores in `kb_dir`, keeping the
/// original embeddings, sources and timestamps.
pub fn import_bundle(bundle: &Path, kb_dir: &Path) -> Result<BundleCounts, HarnessError> {
    let reader = BufReader::new(File::open(bundle).map_err(io_err(bundle))?);
    let mut entries = Vec::new();
    // Parse everything first so a bad line leaves the stores untouched.
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err(bundle))?;
        if line.trim().is_empty() {
            continue;
        }
        entries.push(parse_line(&line, i + 1, 0)?);
    }
    std::fs::create_dir_all(kb_dir).map_err(io_err(kb_dir))?;
    let correct = KbStore::open(&kb_dir.join(KbKind::Correct.file_name()), KbKind::Correct)?;
    let chain = KbStore::open(&kb_dir.join(KbKind::Chain.file_name()), KbKind::Chain)?;
    let mut counts = BundleCounts::default();
    for e in entries {
        let (store, n) = match e.kind() {
            KbKind::Correct => (&correct, &mut counts.correct),
            KbKind::Chain => (&chain, &mut counts.chain),
        };
        store.append(e.record, e.embedding, e.source_dataset, e.created_at)?;
        *n += 1;
    }
    Ok(counts)
}
