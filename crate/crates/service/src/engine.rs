//! In-memory engine state as a fold over log records.
//!
//! `apply` is the only way state changes. It never reads the clock: every
//! timestamp comes from the record being applied, so replaying the same log
//! gives the same state.

use std::collections::BTreeMap;
use std::sync::Arc;

use privflow_core::assessment::{joint_assessment, ServiceReport};
use privflow_core::config::EngineConfig;
use privflow_core::inference::{detect_issues, infer_flows, FlowSet, InferredFlow, PrivacyIssue};
use privflow_core::kb::{validate, KnowledgeBase};
use privflow_core::nudge::{
    build_level2, nudge_stats, BehaviorLog, BehaviorRecord, DeletionRequest, Nudge, NudgeStats,
};
use privflow_core::preference::{adapt, split_history, BehaviorEvent, NudgeRef, PreferenceProfile};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};
use crate::log::{Entry, LogRecord, ProfileChangeReason};

/// Everything the `report` command prints. Field order is part of the output
/// format; the state hash is taken over these bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub seq: u64,
    pub kb_version: u64,
    pub profile: PreferenceProfile,
    pub services: Vec<ServiceReport>,
    pub issues: Vec<PrivacyIssue>,
    pub flows: Vec<InferredFlow>,
    pub nudges: Vec<Nudge>,
    pub stats: Vec<NudgeStats>,
    pub deletion_requests: Vec<DeletionRequest>,
}

#[derive(Debug, Clone)]
pub struct Engine {
    kb: Arc<KnowledgeBase>,
    config: EngineConfig,
    profile: PreferenceProfile,
    behavior: BehaviorLog,
    /// Level 2 nudges that have been shown, by id.
    issued: BTreeMap<String, Nudge>,
    /// Behavior events before this index were already considered for adaptation.
    adapted_through: usize,
    last_seq: u64,
    derived_at: i64,
    flows: FlowSet,
    issues: Vec<PrivacyIssue>,
    reports: Vec<ServiceReport>,
    level1: Vec<Nudge>,
}

impl Engine {
    pub fn new(kb: Arc<KnowledgeBase>, config: EngineConfig, profile: PreferenceProfile) -> Result<Self> {
        let report = validate(&kb);
        if !report.is_clean() {
            return Err(ServiceError::InvalidKb(report));
        }
        profile.check()?;
        let mut engine = Engine {
            kb,
            config,
            profile,
            behavior: BehaviorLog::new(),
            issued: BTreeMap::new(),
            adapted_through: 0,
            last_seq: 0,
            derived_at: 0,
            flows: FlowSet::default(),
            issues: Vec::new(),
            reports: Vec::new(),
            level1: Vec::new(),
        };
        engine.recompute()?;
        Ok(engine)
    }

    pub fn kb(&self) -> &Arc<KnowledgeBase> {
        &self.kb
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn profile(&self) -> &PreferenceProfile {
        &self.profile
    }

    pub fn behavior(&self) -> &BehaviorLog {
        &self.behavior
    }

    pub fn last_seq(&self) -> u64 {
        self.last_seq
    }

    pub fn flows(&self) -> &FlowSet {
        &self.flows
    }

    pub fn issues(&self) -> &[PrivacyIssue] {
        &self.issues
    }

    pub fn issue(&self, id: &str) -> Option<&PrivacyIssue> {
        self.issues.iter().find(|i| i.id == id)
    }

    pub fn reports(&self) -> &[ServiceReport] {
        &self.reports
    }

    pub fn level1(&self) -> &[Nudge] {
        &self.level1
    }

    /// A current level 1 card or an already shown level 2 nudge.
    pub fn nudge(&self, id: &str) -> Option<&Nudge> {
        self.level1
            .iter()
            .find(|n| n.id == id)
            .or_else(|| self.issued.get(id))
    }

    fn recompute(&mut self) -> Result<()> {
        let flows = infer_flows(&self.kb, &self.flows.events, &self.config.inference)?;
        self.issues = detect_issues(&self.kb, &flows, &self.profile, &self.config.issues);
        self.reports = joint_assessment(&self.kb, &flows, &self.issues, &self.profile);
        self.level1 = privflow_core::nudge::build_level1(
            &self.reports,
            &self.issues,
            &self.profile,
            self.derived_at,
        );
        self.flows = flows;
        Ok(())
    }

    /// Fold one record into the state. On error the engine may be left
    /// half-updated; callers apply to a clone and keep it only on success.
    pub fn apply(&mut self, record: &LogRecord) -> Result<()> {
        if record.seq <= self.last_seq {
            return Err(ServiceError::CorruptLog {
                line: 0,
                message: format!("seq {} after {}", record.seq, self.last_seq),
            });
        }
        match &record.entry {
            Entry::Disclosure { event } => {
                if self.flows.events.iter().any(|e| e.id == event.id) {
                    return Err(privflow_core::inference::InferenceError::DuplicateEvent(event.id).into());
                }
                self.flows.events.push(event.clone());
                self.derived_at = record.timestamp;
                self.recompute()?;
            }
            Entry::Behavior { event } => {
                self.behavior.restore(BehaviorRecord::Behavior(event.clone()));
            }
            Entry::NudgeShown {
                nudge,
                template,
                parent,
                issue,
            } => {
                if let Some(parent_id) = parent {
                    let parent = self
                        .level1
                        .iter()
                        .find(|n| &n.id == parent_id)
                        .ok_or_else(|| ServiceError::NotFound {
                            what: "nudge",
                            id: parent_id.clone(),
                        })?;
                    let issue = match issue {
                        Some(id) => Some(self.issue(id).ok_or_else(|| ServiceError::NotFound {
                            what: "issue",
                            id: id.clone(),
                        })?),
                        None => None,
                    };
                    let built = build_level2(&self.behavior, parent, issue, &self.kb, &self.flows, record.timestamp)?;
                    if &built.id != nudge {
                        return Err(ServiceError::NotFound {
                            what: "nudge",
                            id: nudge.clone(),
                        });
                    }
                    self.issued.insert(built.id.clone(), built);
                }
                self.behavior.restore(BehaviorRecord::Shown {
                    nudge: NudgeRef {
                        id: nudge.clone(),
                        template: *template,
                    },
                    timestamp: record.timestamp,
                });
            }
            Entry::ProfileChange { profile, .. } => {
                profile.check()?;
                self.profile = profile.clone();
                self.adapted_through = self.behavior.behavior_events().count();
                self.derived_at = record.timestamp;
                self.recompute()?;
            }
            Entry::DeletionRequest { request } => {
                self.behavior.restore(BehaviorRecord::Deletion(request.clone()));
            }
        }
        self.last_seq = record.seq;
        Ok(())
    }

    /// Profile change warranted by recent behavior as of `now`, if any.
    pub fn pending_adaptation(&self, now: i64) -> Option<Entry> {
        let window: Vec<BehaviorEvent> = self
            .behavior
            .behavior_events()
            .skip(self.adapted_through)
            .cloned()
            .collect();
        let (_, recent) = split_history(&window, &self.profile, now);
        let next = adapt(&self.profile, &recent, &self.config.adapt);
        (next != self.profile).then_some(Entry::ProfileChange {
            profile: next,
            reason: ProfileChangeReason::Adapted,
        })
    }

    pub fn report(&self) -> Report {
        Report {
            seq: self.last_seq,
            kb_version: self.kb.version(),
            profile: self.profile.clone(),
            services: self.reports.clone(),
            issues: self.issues.clone(),
            flows: self.flows.flows.clone(),
            nudges: self.level1.clone(),
            stats: nudge_stats(&self.behavior),
            deletion_requests: self.behavior.deletion_requests().cloned().collect(),
        }
    }
}

pub fn report_bytes(report: &Report) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(report).expect("report serializes");
    bytes.push(b'\n');
    bytes
}

/// Hex SHA-256 of the report bytes.
pub fn state_hash(report: &Report) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(report_bytes(report)))
}
