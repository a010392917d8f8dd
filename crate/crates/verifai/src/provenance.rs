//! Append-only lineage log for verification reports.
//!
//! One JSON record per line after a schema-version header. Each entry carries
//! a checksum of its serialized report, so a partially written trailing line
//! is detected and skipped on load, and a silently corrupted entry surfaces
//! as an explicit error.

use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::os::unix::io::AsRawFd;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::verify::{Verdict, VerificationReport};

pub const LOG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ProvenanceError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: not a provenance log: {msg}")]
    BadHeader { path: String, msg: String },
    #[error("lineage id {0} not found")]
    NotFound(u64),
    #[error("entry {lineage_id} failed its checksum")]
    Corruption { lineage_id: u64 },
}

#[derive(Debug, Serialize, Deserialize)]
struct LogHeader {
    schema_version: u32,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawEntry {
    lineage_id: u64,
    checksum: String,
    report: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineageSummary {
    pub lineage_id: u64,
    pub object_id: String,
    pub aggregate: Verdict,
    pub conflict: bool,
    pub timestamp: u64,
}

#[derive(Debug, Clone, Default)]
pub struct LineageFilter {
    pub object_id: Option<String>,
    pub verdict: Option<Verdict>,
    pub time_range: Option<(u64, u64)>,
}

impl LineageFilter {
    fn matches(&self, s: &LineageSummary) -> bool {
        self.object_id.as_ref().map(|o| *o == s.object_id).unwrap_or(true)
            && self.verdict.map(|v| v == s.aggregate).unwrap_or(true)
            && self
                .time_range
                .map(|(lo, hi)| (lo..=hi).contains(&s.timestamp))
                .unwrap_or(true)
    }
}

/// Handle on a log file. Single writer (advisory flock), unlimited readers.
#[derive(Debug, Clone)]
pub struct ProvenanceLog {
    path: PathBuf,
}

fn checksum(report_json: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(report_json.as_bytes());
    hex::encode(&hasher.finalize()[..16])
}

impl ProvenanceLog {
    pub fn open(path: impl Into<PathBuf>) -> Self {
        ProvenanceLog { path: path.into() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn io_err(&self, e: std::io::Error) -> ProvenanceError {
        ProvenanceError::Io {
            path: self.path.display().to_string(),
            source: e,
        }
    }

    /// Complete entries in file order. Invalid trailing or mid-file lines are
    /// skipped (a torn write never poisons the log); checksum mismatches on
    /// otherwise well-formed entries are reported per id by `load`.
    fn read_entries(&self) -> Result<Vec<RawEntry>, ProvenanceError> {
        let file = match std::fs::File::open(&self.path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(self.io_err(e)),
        };
        let mut lines = BufReader::new(file).lines();
        let Some(header_line) = lines.next().transpose().map_err(|e| self.io_err(e))? else {
            return Ok(Vec::new());
        };
        let header: LogHeader =
            serde_json::from_str(&header_line).map_err(|e| ProvenanceError::BadHeader {
                path: self.path.display().to_string(),
                msg: e.to_string(),
            })?;
        if header.schema_version != LOG_SCHEMA_VERSION {
            return Err(ProvenanceError::BadHeader {
                path: self.path.display().to_string(),
                msg: format!("schema version {}", header.schema_version),
            });
        }
        let mut entries = Vec::new();
        for line in lines {
            let line = line.map_err(|e| self.io_err(e))?;
            match serde_json::from_str::<RawEntry>(&line) {
                Ok(entry) => entries.push(entry),
                Err(_) => continue, // torn or truncated line
            }
        }
        Ok(entries)
    }

    /// Appends a report and returns its lineage id. The verification result
    /// still stands even if this fails; callers surface the error separately.
    pub fn record(&self, report: &VerificationReport) -> Result<u64, ProvenanceError> {
        let next_id = self.read_entries()?.last().map(|e| e.lineage_id + 1).unwrap_or(1);
        let report_value = serde_json::to_value(report).expect("report serializes");
        let report_json = serde_json::to_string(&report_value).expect("value serializes");
        let entry = RawEntry {
            lineage_id: next_id,
            checksum: checksum(&report_json),
            report: report_value,
        };

        let fresh = !self.path.exists();
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| self.io_err(e))?;
        // advisory single-writer lock, released on close
        unsafe {
            libc::flock(file.as_raw_fd(), libc::LOCK_EX);
        }
        let mut out = String::new();
        if fresh {
            out.push_str(
                &serde_json::to_string(&LogHeader {
                    schema_version: LOG_SCHEMA_VERSION,
                })
                .expect("header serializes"),
            );
            out.push('\n');
        }
        out.push_str(&serde_json::to_string(&entry).expect("entry serializes"));
        out.push('\n');
        let mut file = file;
        file.write_all(out.as_bytes()).map_err(|e| self.io_err(e))?;
        file.sync_data().map_err(|e| self.io_err(e))?;
        Ok(next_id)
    }

    /// Exact stored report for an id.
    pub fn load(&self, lineage_id: u64) -> Result<VerificationReport, ProvenanceError> {
        let entries = self.read_entries()?;
        let entry = entries
            .into_iter()
            .find(|e| e.lineage_id == lineage_id)
            .ok_or(ProvenanceError::NotFound(lineage_id))?;
        let report_json = serde_json::to_string(&entry.report).expect("value serializes");
        if checksum(&report_json) != entry.checksum {
            return Err(ProvenanceError::Corruption { lineage_id });
        }
        serde_json::from_value(entry.report).map_err(|_| ProvenanceError::Corruption { lineage_id })
    }

    /// Summaries in id order matching all supplied filter fields.
    pub fn list(&self, filter: &LineageFilter) -> Result<Vec<LineageSummary>, ProvenanceError> {
        let mut out = Vec::new();
        for entry in self.read_entries()? {
            let summary = LineageSummary {
                lineage_id: entry.lineage_id,
                object_id: entry
                    .report
                    .pointer("/object/object_id")
                    .and_then(|v| v.as_str())
                    .unwrap_or_default()
                    .to_string(),
                aggregate: entry
                    .report
                    .get("aggregate")
                    .and_then(|v| serde_json::from_value(v.clone()).ok())
                    .unwrap_or(Verdict::NotRelated),
                conflict: entry
                    .report
                    .get("conflict")
                    .and_then(|v| v.as_bool())
                    .unwrap_or(false),
                timestamp: entry
                    .report
                    .get("timestamp")
                    .and_then(|v| v.as_u64())
                    .unwrap_or(0),
            };
            if filter.matches(&summary) {
                out.push(summary);
            }
        }
        Ok(out)
    }
}
