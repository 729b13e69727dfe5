//! External event documents and their resolution against the knowledge base.

use privflow_core::inference::{DisclosureEvent, EventId, EventSource};
use privflow_core::kb::{DataCategory, EntityId, EntityKind, KnowledgeBase};
use privflow_core::preference::{Action, BehaviorEvent, BehaviorKind};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};

/// An entity given either by numeric id or by name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EntityRef {
    Id(u32),
    Name(String),
}

impl From<&str> for EntityRef {
    fn from(name: &str) -> Self {
        EntityRef::Name(name.to_string())
    }
}

impl From<EntityId> for EntityRef {
    fn from(id: EntityId) -> Self {
        EntityRef::Id(id.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisclosureDoc {
    pub package: EntityRef,
    pub service: EntityRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<i64>,
    #[serde(default)]
    pub ad_hoc: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<EventSource>,
}

/// Behavior observed outside the nudge UI, e.g. location sharing turned off.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BehaviorDoc {
    pub action: Action,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<DataCategory>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub service: Option<EntityRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum IngestDoc {
    Disclosure(DisclosureDoc),
    Behavior(BehaviorDoc),
}

impl IngestDoc {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

pub fn resolve(kb: &KnowledgeBase, reference: &EntityRef, field: &str, kind: EntityKind) -> Result<EntityId> {
    let found = match reference {
        EntityRef::Id(n) => kb.entity(EntityId(*n)).map(|e| e.id),
        EntityRef::Name(name) => kb.lookup(kind, name).or_else(|| kb.lookup_name(name)),
    };
    found.ok_or_else(|| ServiceError::UnknownEntityRef {
        field: field.to_string(),
        reference: match reference {
            EntityRef::Id(n) => format!("id {n}"),
            EntityRef::Name(name) => format!("{name:?}"),
        },
    })
}

impl DisclosureDoc {
    pub fn resolve(&self, kb: &KnowledgeBase, id: EventId, now: i64) -> Result<DisclosureEvent> {
        Ok(DisclosureEvent {
            id,
            package: resolve(kb, &self.package, "package", EntityKind::DataPackage)?,
            service: resolve(kb, &self.service, "service", EntityKind::Service)?,
            timestamp: self.timestamp.unwrap_or(now),
            source: self.source.unwrap_or(EventSource::UserEntry),
            ad_hoc: self.ad_hoc,
        })
    }
}

impl BehaviorDoc {
    pub fn resolve(&self, kb: &KnowledgeBase, id: u64, now: i64) -> Result<BehaviorEvent> {
        let service = match &self.service {
            Some(r) => Some(resolve(kb, r, "service", EntityKind::Service)?),
            None => None,
        };
        if service.is_none() && self.control.is_none() {
            return Err(ServiceError::Parse("behavior needs a service or a control".into()));
        }
        Ok(BehaviorEvent {
            id,
            timestamp: self.timestamp.unwrap_or(now),
            kind: BehaviorKind::External,
            action: self.action,
            nudge: None,
            category: self.category,
            service,
            control: self.control.clone(),
        })
    }
}
