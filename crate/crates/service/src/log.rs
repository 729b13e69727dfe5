//! Append-only JSON Lines event log.
//!
//! One record per line, each with a strictly increasing `seq`. A final line
//! without a trailing newline is a torn write from a crash and is dropped on
//! open; anything unreadable before that is corruption.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use privflow_core::inference::DisclosureEvent;
use privflow_core::nudge::{DeletionRequest, Template};
use privflow_core::preference::{BehaviorEvent, PreferenceProfile};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub seq: u64,
    /// UTC seconds, taken once when the record was appended.
    pub timestamp: i64,
    #[serde(flatten)]
    pub entry: Entry,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileChangeReason {
    Initial,
    Questionnaire,
    Manual,
    Adapted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Entry {
    Disclosure {
        event: DisclosureEvent,
    },
    Behavior {
        event: BehaviorEvent,
    },
    NudgeShown {
        nudge: String,
        template: Template,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        parent: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        issue: Option<String>,
    },
    ProfileChange {
        profile: PreferenceProfile,
        reason: ProfileChangeReason,
    },
    DeletionRequest {
        request: DeletionRequest,
    },
}

pub struct EventLog {
    path: PathBuf,
    file: File,
    last_seq: u64,
}

impl EventLog {
    /// Open (creating if needed) and read back every intact record.
    pub fn open(path: impl AsRef<Path>) -> Result<(Self, Vec<LogRecord>)> {
        let path = path.as_ref().to_path_buf();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&path)?;
        let (records, intact_len) = read_records(&mut file)?;
        let total = file.metadata()?.len();
        if intact_len < total {
            // Drop the torn tail so the next append starts on a clean line.
            file.set_len(intact_len)?;
            file.sync_all()?;
        }
        file.seek(SeekFrom::End(0))?;
        let last_seq = records.last().map_or(0, |r| r.seq);
        Ok((
            EventLog {
                path,
                file,
                last_seq,
            },
            records,
        ))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn last_seq(&self) -> u64 {
        self.last_seq
    }

    /// Write a batch of records and fsync before returning.
    pub fn append(&mut self, records: &[LogRecord]) -> Result<()> {
        let mut buf = Vec::new();
        let mut seq = self.last_seq;
        for record in records {
            assert!(record.seq > seq, "log sequence must increase");
            seq = record.seq;
            serde_json::to_writer(&mut buf, record)?;
            buf.push(b'\n');
        }
        self.file.write_all(&buf)?;
        self.file.sync_data()?;
        self.last_seq = seq;
        Ok(())
    }
}

fn read_records(file: &mut File) -> Result<(Vec<LogRecord>, u64)> {
    file.seek(SeekFrom::Start(0))?;
    let mut reader = BufReader::new(file);
    let mut records: Vec<LogRecord> = Vec::new();
    let mut offset = 0u64;
    let mut line_no = 0;
    let mut line = String::new();
    loop {
        line.clear();
        let n = reader.read_line(&mut line)?;
        if n == 0 {
            break;
        }
        line_no += 1;
        if !line.ends_with('\n') {
            // Torn final write.
            break;
        }
        let text = line.trim_end();
        if text.is_empty() {
            offset += n as u64;
            continue;
        }
        let record: LogRecord =
            serde_json::from_str(text).map_err(|e| ServiceError::CorruptLog {
                line: line_no,
                message: e.to_string(),
            })?;
        if let Some(prev) = records.last() {
            if record.seq <= prev.seq {
                return Err(ServiceError::CorruptLog {
                    line: line_no,
                    message: format!("seq {} after {}", record.seq, prev.seq),
                });
            }
        }
        records.push(record);
        offset += n as u64;
    }
    Ok((records, offset))
}
