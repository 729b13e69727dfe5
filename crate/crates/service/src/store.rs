//! The single writer: turns commands into log records, persists them, then
//! folds them into the engine.
//!
//! Every command is first applied to a clone of the engine. Only when that
//! succeeds are the records written (and fsynced) and the clone kept, so a
//! rejected command leaves neither the file nor the state touched.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use privflow_core::config::EngineConfig;
use privflow_core::inference::EventId;
use privflow_core::kb::{KbDocument, KnowledgeBase};
use privflow_core::nudge::{build_level2, level2_id, record_action, Nudge};
use privflow_core::preference::{Action, BehaviorEvent, PreferenceProfile};
use serde::{Deserialize, Serialize};

use crate::engine::{state_hash, Engine, Report};
use crate::error::{Result, ServiceError};
use crate::ingest::IngestDoc;
use crate::log::{Entry, EventLog, LogRecord, ProfileChangeReason};

/// Records between automatic snapshots.
pub const SNAPSHOT_EVERY: u64 = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub seq: u64,
    pub state_hash: String,
    pub kb: KbDocument,
}

pub struct Store {
    log: EventLog,
    engine: Engine,
    snapshot_path: PathBuf,
    last_snapshot: u64,
}

pub fn snapshot_path(log_path: &Path) -> PathBuf {
    let mut name = log_path.as_os_str().to_os_string();
    name.push(".snapshot.json");
    PathBuf::from(name)
}

impl Store {
    /// Open the log and replay it on top of a fresh engine.
    pub fn open(
        kb: KnowledgeBase,
        config: EngineConfig,
        profile: PreferenceProfile,
        log_path: impl AsRef<Path>,
    ) -> Result<Self> {
        let kb = Arc::new(kb);
        let mut engine = Engine::new(kb.clone(), config, profile)?;
        let (log, records) = EventLog::open(log_path.as_ref())?;
        let snapshot_path = snapshot_path(log_path.as_ref());
        let snapshot = read_snapshot(&snapshot_path)?
            .filter(|s| s.kb == KbDocument::from_kb(&kb));

        for (i, record) in records.iter().enumerate() {
            engine.apply(record).map_err(|e| ServiceError::CorruptLog {
                line: i + 1,
                message: format!("record {} does not replay: {e}", record.seq),
            })?;
            if let Some(s) = &snapshot {
                if s.seq == record.seq && state_hash(&engine.report()) != s.state_hash {
                    return Err(ServiceError::SnapshotMismatch { seq: s.seq });
                }
            }
        }
        if let Some(s) = &snapshot {
            if s.seq > engine.last_seq() {
                return Err(ServiceError::CorruptLog {
                    line: records.len(),
                    message: format!("log ends at seq {} before snapshot seq {}", engine.last_seq(), s.seq),
                });
            }
        }
        let last_snapshot = snapshot.map_or(0, |s| s.seq);
        Ok(Store {
            log,
            engine,
            snapshot_path,
            last_snapshot,
        })
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn report(&self) -> Report {
        self.engine.report()
    }

    pub fn log_path(&self) -> &Path {
        self.log.path()
    }

    /// Apply `entries` (plus any adaptation they trigger) to a scratch engine,
    /// then persist and adopt it. Returns the assigned sequence numbers.
    fn commit(&mut self, entries: Vec<Entry>, now: i64, adapt_after: bool) -> Result<Vec<u64>> {
        let mut scratch = self.engine.clone();
        let mut records = Vec::new();
        let mut seq = self.log.last_seq();
        for entry in entries {
            seq += 1;
            let record = LogRecord {
                seq,
                timestamp: now,
                entry,
            };
            scratch.apply(&record)?;
            records.push(record);
        }
        if adapt_after {
            if let Some(entry) = scratch.pending_adaptation(now) {
                seq += 1;
                let record = LogRecord {
                    seq,
                    timestamp: now,
                    entry,
                };
                scratch.apply(&record)?;
                records.push(record);
            }
        }
        if records.is_empty() {
            return Ok(Vec::new());
        }
        self.log.append(&records)?;
        self.engine = scratch;
        if self.engine.last_seq() >= self.last_snapshot + SNAPSHOT_EVERY {
            self.write_snapshot()?;
        }
        Ok(records.iter().map(|r| r.seq).collect())
    }

    pub fn ingest(&mut self, text: &str, now: i64) -> Result<u64> {
        self.ingest_doc(IngestDoc::parse(text)?, now)
    }

    pub fn ingest_doc(&mut self, doc: IngestDoc, now: i64) -> Result<u64> {
        let seq = self.log.last_seq() + 1;
        let kb = self.engine.kb().clone();
        let (entry, adapt_after) = match doc {
            IngestDoc::Disclosure(d) => (
                Entry::Disclosure {
                    event: d.resolve(&kb, EventId(seq), now)?,
                },
                false,
            ),
            IngestDoc::Behavior(b) => {
                let id = self.engine.behavior().next_event_id();
                (
                    Entry::Behavior {
                        event: b.resolve(&kb, id, now)?,
                    },
                    true,
                )
            }
        };
        Ok(self.commit(vec![entry], now, adapt_after)?[0])
    }

    /// Current level 1 cards; newly displayed ones are recorded as shown.
    pub fn show_level1(&mut self, now: i64) -> Result<Vec<Nudge>> {
        let entries: Vec<Entry> = self
            .engine
            .level1()
            .iter()
            .filter(|n| !self.engine.behavior().was_shown(&n.id))
            .map(|n| Entry::NudgeShown {
                nudge: n.id.clone(),
                template: n.template,
                parent: None,
                issue: None,
            })
            .collect();
        self.commit(entries, now, false)?;
        Ok(self.engine.level1().to_vec())
    }

    /// Drill into a shown level 1 card. Without an explicit issue the card's
    /// most severe issue is used; a card with no issues yields the action menu.
    pub fn level2(&mut self, parent: &str, issue: Option<&str>, now: i64) -> Result<Nudge> {
        let card = self
            .engine
            .level1()
            .iter()
            .find(|n| n.id == parent)
            .ok_or_else(|| ServiceError::NotFound {
                what: "nudge",
                id: parent.to_string(),
            })?
            .clone();
        let issue_id: Option<String> = match issue {
            Some(id) => {
                self.engine.issue(id).ok_or_else(|| ServiceError::NotFound {
                    what: "issue",
                    id: id.to_string(),
                })?;
                Some(id.to_string())
            }
            None => card.service.and_then(|s| {
                self.engine
                    .reports()
                    .iter()
                    .find(|r| r.service == s)
                    .and_then(|r| {
                        self.engine
                            .issues()
                            .iter()
                            .find(|i| r.issues.contains(&i.id))
                            .map(|i| i.id.clone())
                    })
            }),
        };
        let id = level2_id(&card.id, issue_id.as_deref());
        if let Some(existing) = self.engine.nudge(&id) {
            return Ok(existing.clone());
        }
        // Build once up front so UnshownParent surfaces as itself.
        let engine = &self.engine;
        let built = build_level2(
            engine.behavior(),
            &card,
            issue_id.as_deref().and_then(|i| engine.issue(i)),
            engine.kb(),
            engine.flows(),
            now,
        )?;
        self.commit(
            vec![Entry::NudgeShown {
                nudge: built.id.clone(),
                template: built.template,
                parent: Some(card.id.clone()),
                issue: issue_id,
            }],
            now,
            false,
        )?;
        Ok(self.engine.nudge(&id).cloned().unwrap_or(built))
    }

    /// Record the user's response to a nudge.
    pub fn act(&mut self, nudge: &str, action: Action, now: i64) -> Result<BehaviorEvent> {
        let target = self
            .engine
            .nudge(nudge)
            .ok_or_else(|| ServiceError::NotFound {
                what: "nudge",
                id: nudge.to_string(),
            })?
            .clone();
        let mut scratch = self.engine.behavior().clone();
        let event = record_action(&mut scratch, &target, action, now)?;
        let mut entries = vec![Entry::Behavior {
            event: event.clone(),
        }];
        if let Some(request) = scratch.deletion_requests().find(|d| d.event == event.id) {
            entries.push(Entry::DeletionRequest {
                request: request.clone(),
            });
        }
        self.commit(entries, now, true)?;
        Ok(event)
    }

    pub fn set_profile(&mut self, profile: PreferenceProfile, reason: ProfileChangeReason, now: i64) -> Result<u64> {
        profile.check()?;
        Ok(self.commit(vec![Entry::ProfileChange { profile, reason }], now, false)?[0])
    }

    pub fn write_snapshot(&mut self) -> Result<()> {
        let snapshot = Snapshot {
            seq: self.engine.last_seq(),
            state_hash: state_hash(&self.engine.report()),
            kb: KbDocument::from_kb(self.engine.kb()),
        };
        let dir = self
            .snapshot_path
            .parent()
            .filter(|d| !d.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        serde_json::to_writer_pretty(&mut tmp, &snapshot)?;
        tmp.as_file().sync_all()?;
        tmp.persist(&self.snapshot_path).map_err(|e| e.error)?;
        self.last_snapshot = snapshot.seq;
        Ok(())
    }
}

fn read_snapshot(path: &Path) -> Result<Option<Snapshot>> {
    match std::fs::read_to_string(path) {
        Ok(text) => serde_json::from_str(&text).map(Some).map_err(|e| ServiceError::CorruptLog {
            line: 0,
            message: format!("snapshot {}: {e}", path.display()),
        }),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(e.into()),
    }
}
