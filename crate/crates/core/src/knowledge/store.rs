//! In-memory experience store backed by an append-only JSONL file.
//!
//! Each line is
//! `{"schema_version":1,"kind":"correct"|"chain","record":{...},"embedding":{...},"source_dataset":"...","created_at":"..."}`.
//! Entry ids are line positions, starting at 0.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::records::{ChainRecord, CorrectRecord, KbRecord};
use super::KbError;
use crate::llm::EmbeddingVector;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KbKind {
    Correct,
    Chain,
}

impl KbKind {
    pub fn file_name(self) -> &'static str {
        match self {
            KbKind::Correct => "correct.jsonl",
            KbKind::Chain => "chain.jsonl",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            KbKind::Correct => "CorrectKB",
            KbKind::Chain => "ChainKB",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KbEntry {
    pub id: u64,
    pub record: KbRecord,
    pub embedding: EmbeddingVector,
    pub source_dataset: String,
    pub created_at: DateTime<Utc>,
}

impl KbEntry {
    pub fn kind(&self) -> KbKind {
        match self.record {
            KbRecord::Correct(_) => KbKind::Correct,
            KbRecord::Chain(_) => KbKind::Chain,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Line {
    schema_version: u32,
    kind: KbKind,
    record: serde_json::Value,
    embedding: EmbeddingVector,
    source_dataset: String,
    created_at: DateTime<Utc>,
}

impl Line {
    fn from_entry(e: &KbEntry) -> Self {
        Line {
            schema_version: SCHEMA_VERSION,
            kind: e.kind(),
            record: e.record.to_json(),
            embedding: e.embedding.clone(),
            source_dataset: e.source_dataset.clone(),
            created_at: e.created_at,
        }
    }
}

/// Serialize one entry as a single JSONL line (no trailing newline).
pub(crate) fn entry_line(e: &KbEntry) -> String {
    serde_json::to_string(&Line::from_entry(e)).expect("entry serializes")
}

/// Parse one JSONL line into an entry with the given id.
pub(crate) fn parse_line(text: &str, line_no: usize, id: u64) -> Result<KbEntry, KbError> {
    let bad = |reason: String| KbError::SchemaVersionMismatch {
        line: line_no,
        reason,
    };
    let line: Line = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    if line.schema_version != SCHEMA_VERSION {
        return Err(bad(format!(
            "schema_version {} (expected {SCHEMA_VERSION})",
            line.schema_version
        )));
    }
    let record = match line.kind {
        KbKind::Correct => KbRecord::Correct(
            serde_json::from_value::<CorrectRecord>(line.record).map_err(|e| bad(e.to_string()))?,
        ),
        KbKind::Chain => KbRecord::Chain(
            serde_json::from_value::<ChainRecord>(line.record).map_err(|e| bad(e.to_string()))?,
        ),
    };
    record.validate().map_err(|e| bad(e.to_string()))?;
    let embedding = EmbeddingVector::new(line.embedding.values, line.embedding.model_name)
        .map_err(|e| bad(e.to_string()))?;
    Ok(KbEntry {
        id,
        record,
        embedding,
        source_dataset: line.source_dataset,
        created_at: line.created_at,
    })
}

struct Inner {
    entries: Vec<Arc<KbEntry>>,
    dim: Option<usize>,
}

/// One knowledge base. Readers take consistent snapshots; appends are
/// serialized and, when the store is attached to a file, written through.
pub struct KbStore {
    kind: KbKind,
    inner: RwLock<Inner>,
    file: Option<Mutex<BufWriter<File>>>,
    path: Option<PathBuf>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> KbError + '_ {
    move |source| KbError::Io {
        path: path.display().to_string(),
        source,
    }
}

impl KbStore {
    pub fn new(kind: KbKind) -> Self {
        KbStore {
            kind,
            inner: RwLock::new(Inner {
                entries: Vec::new(),
                dim: None,
            }),
            file: None,
            path: None,
        }
    }

    pub fn kind(&self) -> KbKind {
        self.kind
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.inner.read().unwrap().entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> Option<usize> {
        self.inner.read().unwrap().dim
    }

    /// Consistent view of every entry at this instant.
    pub fn snapshot(&self) -> Vec<Arc<KbEntry>> {
        self.inner.read().unwrap().entries.clone()
    }

    /// Read a store from `path` without attaching it for writes.
    /// A missing file is an empty store.
    pub fn load(path: &Path, kind: KbKind) -> Result<Self, KbError> {
        let store = KbStore::new(kind);
        if !path.exists() {
            return Ok(store);
        }
        let reader = BufReader::new(File::open(path).map_err(io_err(path))?);
        {
            let mut inner = store.inner.write().unwrap();
            for (i, line) in reader.lines().enumerate() {
                let line = line.map_err(io_err(path))?;
                let line_no = i + 1;
                if line.trim().is_empty() {
                    return Err(KbError::SchemaVersionMismatch {
                        line: line_no,
                        reason: "blank line".into(),
                    });
                }
                let entry = parse_line(&line, line_no, inner.entries.len() as u64)?;
                if entry.kind() != kind {
                    return Err(KbError::SchemaVersionMismatch {
                        line: line_no,
                        reason: format!("{:?} record in a {:?} store", entry.kind(), kind),
                    });
                }
                let dim = entry.embedding.dim();
                match inner.dim {
                    Some(d) if d != dim => {
                        return Err(KbError::SchemaVersionMismatch {
                            line: line_no,
                            reason: format!("embedding dimension {dim}, store has {d}"),
                        })
                    }
                    _ => inner.dim = Some(dim),
                }
                inner.entries.push(Arc::new(entry));
            }
        }
        Ok(store)
    }

    /// Load `path` (if present) and keep it open so later appends are
    /// written through as new lines.
    pub fn open(path: &Path, kind: KbKind) -> Result<Self, KbError> {
        let mut store = Self::load(path, kind)?;
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent).map_err(io_err(path))?;
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(io_err(path))?;
        store.file = Some(Mutex::new(BufWriter::new(file)));
        store.path = Some(path.to_path_buf());
        Ok(store)
    }

    /// Write every entry to `path`, replacing its contents.
    pub fn save(&self, path: &Path) -> Result<(), KbError> {
        let snapshot = self.snapshot();
        let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
        for e in &snapshot {
            writeln!(w, "{}", entry_line(e)).map_err(io_err(path))?;
        }
        w.flush().map_err(io_err(path))
    }

    pub fn append(
        &self,
        record: KbRecord,
        embedding: EmbeddingVector,
        source_dataset: impl Into<String>,
        created_at: DateTime<Utc>,
    ) -> Result<Arc<KbEntry>, KbError> {
        record.validate()?;
        let kind = match record {
            KbRecord::Correct(_) => KbKind::Correct,
            KbRecord::Chain(_) => KbKind::Chain,
        };
        if kind != self.kind {
            return Err(KbError::InvalidRecord(format!(
                "{kind:?} record appended to {:?} store",
                self.kind
            )));
        }
        let mut inner = self.inner.write().unwrap();
        if let Some(d) = inner.dim {
            if d != embedding.dim() {
                return Err(KbError::DimensionMismatch {
                    expected: d,
                    got: embedding.dim(),
                });
            }
        }
        let entry = Arc::new(KbEntry {
            id: inner.entries.len() as u64,
            record,
            embedding,
            source_dataset: source_dataset.into(),
            created_at,
        });
        if let (Some(file), Some(path)) = (&self.file, &self.path) {
            let mut w = file.lock().unwrap();
            writeln!(w, "{}", entry_line(&entry)).map_err(io_err(path))?;
            w.flush().map_err(io_err(path))?;
        }
        inner.dim = Some(entry.embedding.dim());
        inner.entries.push(entry.clone());
        Ok(entry)
    }
}
