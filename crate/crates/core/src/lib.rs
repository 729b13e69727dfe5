//! Personal data-flow engine: a typed knowledge base of entities and
//! relations, flow inference from disclosure events, privacy issue detection,
//! joint risk/value assessment, preference profiles and two-level nudges.
//!
//! Everything here is pure computation over in-memory values; persistence and
//! the HTTP surface live in the `privflow` crate.

pub mod assessment;
pub mod config;
pub mod inference;
pub mod kb;
pub mod nudge;
pub mod preference;
pub mod scenario;

pub use assessment::{joint_assessment, ServiceReport, Verdict};
pub use config::EngineConfig;
pub use inference::{infer_flows, DisclosureEvent, FlowSet, PrivacyIssue};
pub use kb::{EntityId, EntityKind, KnowledgeBase, RelationKind};
pub use preference::{PreferenceProfile, Segment};
