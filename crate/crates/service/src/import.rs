//! Read-only import adapters turning external records into ingest documents.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};
use crate::ingest::{DisclosureDoc, EntityRef, IngestDoc};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    PdmpStub,
    FileImport,
}

pub trait ImportAdapter {
    fn id(&self) -> &str;
    fn source_kind(&self) -> SourceKind;
    /// Read the source without modifying it.
    fn read(&self) -> Result<Vec<IngestDoc>>;
}

/// JSON Lines of ingest documents. Blank lines and `#` comments are skipped.
pub struct FileImport {
    pub path: PathBuf,
}

impl ImportAdapter for FileImport {
    fn id(&self) -> &str {
        "file"
    }

    fn source_kind(&self) -> SourceKind {
        SourceKind::FileImport
    }

    fn read(&self) -> Result<Vec<IngestDoc>> {
        let text = std::fs::read_to_string(&self.path)?;
        let mut docs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let doc = IngestDoc::parse(line)
                .map_err(|e| ServiceError::Parse(format!("{}:{}: {e}", self.path.display(), i + 1)))?;
            docs.push(doc);
        }
        Ok(docs)
    }
}

/// Which fields of an exported record carry what.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdmpMapping {
    pub package_field: String,
    pub service_field: String,
    pub time_field: String,
}

impl Default for PdmpMapping {
    fn default() -> Self {
        PdmpMapping {
            package_field: "dataset".into(),
            service_field: "shared_with".into(),
            time_field: "shared_at".into(),
        }
    }
}

/// Stand-in for a personal data store export: a JSON array of flat records.
/// Only the sharing log is read; nothing is written back.
pub struct PdmpStub {
    pub path: PathBuf,
    pub mapping: PdmpMapping,
}

impl ImportAdapter for PdmpStub {
    fn id(&self) -> &str {
        "pdmp"
    }

    fn source_kind(&self) -> SourceKind {
        SourceKind::PdmpStub
    }

    fn read(&self) -> Result<Vec<IngestDoc>> {
        let text = std::fs::read_to_string(&self.path)?;
        let rows: Vec<serde_json::Map<String, serde_json::Value>> = serde_json::from_str(&text)?;
        let field = |row: &serde_json::Map<String, serde_json::Value>, name: &str, index: usize| {
            row.get(name)
                .cloned()
                .ok_or_else(|| ServiceError::Parse(format!("record {index}: missing field {name:?}")))
        };
        rows.iter()
            .enumerate()
            .map(|(i, row)| {
                let as_ref = |v: serde_json::Value| -> Result<EntityRef> { Ok(serde_json::from_value(v)?) };
                let timestamp = match row.get(&self.mapping.time_field) {
                    Some(v) => Some(
                        v.as_i64()
                            .ok_or_else(|| ServiceError::Parse(format!("record {i}: time is not an integer")))?,
                    ),
                    None => None,
                };
                Ok(IngestDoc::Disclosure(DisclosureDoc {
                    package: as_ref(field(row, &self.mapping.package_field, i)?)?,
                    service: as_ref(field(row, &self.mapping.service_field, i)?)?,
                    timestamp,
                    ad_hoc: false,
                    source: Some(privflow_core::inference::EventSource::Import),
                }))
            })
            .collect()
    }
}
