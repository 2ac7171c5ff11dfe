//! Append-only JSONL run store, one shard per model.
//!
//! A trial is durable once its line (including the trailing newline) is on
//! disk. A process killed mid-write can leave a torn final line; loading
//! ignores it and reopening a shard for append cuts it off.

use std::collections::BTreeSet;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use structcot_core::digest::sha256_fields;
use structcot_core::{ComposedPrompt, Label, ParsedAnalysis, Verdict};

use crate::error::{Error, Result};
use crate::gateway::ModelResponse;
use crate::manifest::Condition;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub manifest_digest: String,
    pub model: String,
    pub condition_id: String,
    pub condition: Condition,
    pub row_id: u64,
    pub prompt: ComposedPrompt,
    pub response: ModelResponse,
    pub parsed: ParsedAnalysis,
    pub verdict: Verdict,
    pub label: Label,
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
}

pub type TrialKey = (String, String, u64);

impl RunRecord {
    pub fn key(&self) -> TrialKey {
        (self.model.clone(), self.condition_id.clone(), self.row_id)
    }
}

/// Stable id of one (manifest, model, condition, row) trial.
pub fn run_id(manifest_digest: &str, model: &str, condition_id: &str, row_id: u64) -> String {
    let row = row_id.to_le_bytes();
    let full = sha256_fields([
        manifest_digest.as_bytes(),
        model.as_bytes(),
        condition_id.as_bytes(),
        row.as_slice(),
    ]);
    full[..32].to_string()
}

#[derive(Debug, Clone)]
pub struct RunStore {
    dir: PathBuf,
}

/// Complete lines of one shard and the byte length they cover.
struct ShardContents {
    records: Vec<RunRecord>,
    valid_len: u64,
    torn: bool,
}

impl RunStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn shard_path(&self, model: &str) -> PathBuf {
        self.dir.join(format!("{model}.jsonl"))
    }

    pub fn shard_paths(&self) -> Result<Vec<PathBuf>> {
        if !self.dir.exists() {
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.dir).map_err(Error::io(&self.dir))? {
            let path = entry.map_err(Error::io(&self.dir))?.path();
            if path.extension().is_some_and(|e| e == "jsonl") {
                out.push(path);
            }
        }
        out.sort();
        Ok(out)
    }

    fn read_shard(path: &Path) -> Result<ShardContents> {
        let bytes = fs::read(path).map_err(Error::io(path))?;
        let mut records = Vec::new();
        let mut offset = 0usize;
        let mut line_no = 0usize;
        while offset < bytes.len() {
            line_no += 1;
            let Some(nl) = bytes[offset..].iter().position(|b| *b == b'\n') else {
                // No newline: the write of this line never finished.
                return Ok(ShardContents {
                    records,
                    valid_len: offset as u64,
                    torn: true,
                });
            };
            let line = &bytes[offset..offset + nl];
            if !line.iter().all(u8::is_ascii_whitespace) {
                let record = serde_json::from_slice(line).map_err(|e| {
                    Error::Store(format!("{} line {line_no}: {e}", path.display()))
                })?;
                records.push(record);
            }
            offset += nl + 1;
        }
        Ok(ShardContents {
            records,
            valid_len: offset as u64,
            torn: false,
        })
    }

    /// Every complete record, shards in file-name order, lines in file
    /// order. Duplicate trials are an error.
    pub fn load(&self) -> Result<Vec<RunRecord>> {
        let mut all = Vec::new();
        let mut seen = BTreeSet::new();
        for path in self.shard_paths()? {
            for record in Self::read_shard(&path)?.records {
                if !seen.insert(record.key()) {
                    return Err(Error::Store(format!(
                        "duplicate trial ({}, {}, row {}) in {}",
                        record.model,
                        record.condition_id,
                        record.row_id,
                        path.display()
                    )));
                }
                all.push(record);
            }
        }
        Ok(all)
    }

    pub fn is_empty(&self) -> Result<bool> {
        Ok(self.load()?.is_empty())
    }

    /// Open a model's shard for appending, dropping a torn final line.
    pub fn writer(&self, model: &str) -> Result<ShardWriter> {
        fs::create_dir_all(&self.dir).map_err(Error::io(&self.dir))?;
        let path = self.shard_path(model);
        if path.exists() {
            let contents = Self::read_shard(&path)?;
            if contents.torn {
                let f = OpenOptions::new()
                    .write(true)
                    .open(&path)
                    .map_err(Error::io(&path))?;
                f.set_len(contents.valid_len).map_err(Error::io(&path))?;
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(Error::io(&path))?;
        Ok(ShardWriter {
            out: BufWriter::new(file),
            path,
        })
    }
}

/// The single writer of one shard.
pub struct ShardWriter {
    out: BufWriter<File>,
    path: PathBuf,
}

impl ShardWriter {
    /// Append one record as one line and flush it to the OS.
    pub fn append(&mut self, record: &RunRecord) -> Result<()> {
        let mut line = serde_json::to_vec(record).expect("run records serialize");
        line.push(b'\n');
        self.out
            .write_all(&line)
            .and_then(|()| self.out.flush())
            .map_err(Error::io(&self.path))
    }
}
