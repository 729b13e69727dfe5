//! JSON document form of a knowledge base.
//!
//! Four top-level arrays (`entities`, `relations`, `data_items`, `value_decls`)
//! plus the `version` counter and the `outsourcing_return` switch. Unknown
//! fields are rejected everywhere.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{DataItem, Entity, EntityId, KnowledgeBase, RelationId, SemanticRelation, ValueFlowDecl};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DocumentError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("parse error at {field}: unknown entity id {id}")]
    UnknownReference { field: String, id: u32 },
    #[error("parse error at {field}: {message}")]
    Invalid { field: String, message: String },
}

impl From<serde_json::Error> for DocumentError {
    fn from(err: serde_json::Error) -> Self {
        DocumentError::Syntax {
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KbDocument {
    #[serde(default)]
    pub version: u64,
    #[serde(default = "default_true")]
    pub outsourcing_return: bool,
    pub entities: Vec<Entity>,
    pub relations: Vec<SemanticRelation>,
    pub data_items: Vec<DataItem>,
    pub value_decls: Vec<ValueFlowDecl>,
}

fn default_true() -> bool {
    true
}

impl KbDocument {
    pub fn from_kb(kb: &KnowledgeBase) -> Self {
        KbDocument {
            version: kb.version,
            outsourcing_return: kb.outsourcing_return,
            entities: kb.entities.values().cloned().collect(),
            relations: kb.relations.values().cloned().collect(),
            data_items: kb.data_items.values().cloned().collect(),
            value_decls: kb.value_decls.clone(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, DocumentError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("knowledge base documents always serialize")
    }

    /// Resolve references and build the knowledge base. Structural problems
    /// that a well-formed document may still carry (schema violations, cycles,
    /// a missing "me") are left for [`super::validate`].
    pub fn into_kb(self) -> Result<KnowledgeBase, DocumentError> {
        let mut ids = BTreeSet::new();
        for (i, entity) in self.entities.iter().enumerate() {
            if !ids.insert(entity.id) {
                return Err(DocumentError::Invalid {
                    field: format!("entities[{i}].id"),
                    message: format!("duplicate entity id {}", entity.id.0),
                });
            }
            if entity.name.trim().is_empty() {
                return Err(DocumentError::Invalid {
                    field: format!("entities[{i}].name"),
                    message: "empty name".into(),
                });
            }
        }
        let check = |field: String, id: EntityId| -> Result<(), DocumentError> {
            if ids.contains(&id) {
                Ok(())
            } else {
                Err(DocumentError::UnknownReference { field, id: id.0 })
            }
        };

        let mut rel_ids: BTreeSet<RelationId> = BTreeSet::new();
        for (i, rel) in self.relations.iter().enumerate() {
            if !rel_ids.insert(rel.id) {
                return Err(DocumentError::Invalid {
                    field: format!("relations[{i}].id"),
                    message: format!("duplicate relation id {}", rel.id.0),
                });
            }
            check(format!("relations[{i}].src"), rel.src)?;
            check(format!("relations[{i}].dst"), rel.dst)?;
        }
        for (i, item) in self.data_items.iter().enumerate() {
            check(format!("data_items[{i}].entity"), item.entity)?;
        }
        for (i, decl) in self.value_decls.iter().enumerate() {
            check(format!("value_decls[{i}].src"), decl.src)?;
            check(format!("value_decls[{i}].dst"), decl.dst)?;
            for package in &decl.condition {
                check(format!("value_decls[{i}].condition"), *package)?;
            }
        }

        Ok(KnowledgeBase::from_parts(
            self.entities,
            self.relations,
            self.data_items,
            self.value_decls,
            self.version,
            self.outsourcing_return,
        ))
    }
}

impl KnowledgeBase {
    pub fn to_document(&self) -> KbDocument {
        KbDocument::from_kb(self)
    }

    pub fn from_document(doc: KbDocument) -> Result<Self, DocumentError> {
        doc.into_kb()
    }

    pub fn to_json(&self) -> String {
        self.to_document().to_json()
    }

    pub fn from_json(text: &str) -> Result<Self, DocumentError> {
        KbDocument::parse(text)?.into_kb()
    }
}
