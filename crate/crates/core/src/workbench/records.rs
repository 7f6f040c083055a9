use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::config::Phase;
use crate::error::WorkbenchError;

pub const SCHEMA_VERSION: u32 = 1;
pub const TRANSCRIPTS: &str = "transcripts.jsonl";

pub const FLAG_MALFORMED_ANSWER: &str = "malformed_answer";
pub const FLAG_MALFORMED_ACTION: &str = "malformed_action";
pub const FLAG_TRANSPORT_ERROR: &str = "transport_error";
pub const FLAG_GATEWAY_ERROR: &str = "gateway_error";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordPhase {
    Survey,
    Bfi,
    SimStep,
    SimFinal,
}

impl RecordPhase {
    /// The pipeline phase this record closes, if it is a terminal record.
    pub fn completes(self) -> Option<Phase> {
        match self {
            RecordPhase::Survey => Some(Phase::Survey),
            RecordPhase::Bfi => Some(Phase::Bfi),
            RecordPhase::SimFinal => Some(Phase::Simulate),
            RecordPhase::SimStep => None,
        }
    }
}

/// One line of `transcripts.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub run_id: String,
    pub persona_id: String,
    pub replicate: u32,
    pub phase: RecordPhase,
    pub step: usize,
    pub prompt: String,
    pub raw_response: String,
    pub parsed: Value,
    pub flags: Vec<String>,
    pub attempts: u32,
    pub timestamp: String,
}

impl RunRecord {
    pub fn has_flag(&self, flag: &str) -> bool {
        self.flags.iter().any(|f| f == flag)
    }

    /// Transport failures are worth another try on resume; everything else
    /// terminal is final.
    pub fn retryable(&self) -> bool {
        self.has_flag(FLAG_TRANSPORT_ERROR)
    }
}

pub type UnitKey = (String, u32, Phase);

/// Truncates an unterminated trailing line left by an interrupted write.
fn repair_tail(path: &Path) -> Result<(), WorkbenchError> {
    let mut file = match OpenOptions::new().read(true).write(true).open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(()),
        Err(e) => return Err(WorkbenchError::io(path, e)),
    };
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes)
        .map_err(|e| WorkbenchError::io(path, e))?;
    if bytes.is_empty() || bytes.ends_with(b"\n") {
        return Ok(());
    }
    let keep = bytes.iter().rposition(|b| *b == b'\n').map_or(0, |i| i + 1);
    log::warn!(
        "dropping {} byte partial record from {}",
        bytes.len() - keep,
        path.display()
    );
    file.set_len(keep as u64)
        .map_err(|e| WorkbenchError::io(path, e))?;
    file.seek(SeekFrom::End(0))
        .map_err(|e| WorkbenchError::io(path, e))?;
    Ok(())
}

/// Append-only JSONL sink. Each batch goes out in one write and is flushed.
pub struct RecordWriter {
    path: PathBuf,
    file: File,
}

impl RecordWriter {
    pub fn open(path: &Path) -> Result<Self, WorkbenchError> {
        repair_tail(path)?;
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| WorkbenchError::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            file,
        })
    }

    pub fn write_batch(&mut self, records: &[RunRecord]) -> Result<(), WorkbenchError> {
        let mut buf = Vec::new();
        for r in records {
            serde_json::to_writer(&mut buf, r).expect("records serialize");
            buf.push(b'\n');
        }
        self.file
            .write_all(&buf)
            .and_then(|_| self.file.flush())
            .map_err(|e| WorkbenchError::io(&self.path, e))
    }
}

/// Reads every complete record. An unterminated final line is ignored.
pub fn read_records(path: &Path) -> Result<Vec<RunRecord>, WorkbenchError> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(WorkbenchError::io(path, e)),
    };
    let complete = match text.rfind('\n') {
        Some(i) => &text[..=i],
        None => "",
    };
    complete
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str::<RunRecord>(line)
                .map_err(|e| WorkbenchError::artifact(path, format!("line {}: {e}", i + 1)))
        })
        .collect()
}

/// Units whose terminal record is final and need no more backend calls.
pub fn completed_units(records: &[RunRecord]) -> HashSet<UnitKey> {
    let mut done = HashSet::new();
    for r in records {
        if let Some(phase) = r.phase.completes() {
            let key = (r.persona_id.clone(), r.replicate, phase);
            if r.retryable() {
                done.remove(&key);
            } else {
                done.insert(key);
            }
        }
    }
    done
}
